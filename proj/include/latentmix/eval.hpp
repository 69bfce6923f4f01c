#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latentmix/bipartite.hpp"
#include "latentmix/latentdist.hpp"
#include "latentmix/model.hpp"
#include "latentmix/structlearn.hpp"

namespace latentmix {

struct TrialResult {
  uint64_t seed = 0;
  int m = 0;
  int n = 0;
  int64_t N = 0;
  int shd = -1;
  int uce = -1;
  bool gamma_exact = false;
  bool dims_exact = false;
  double joint_tv = std::numeric_limits<double>::quiet_NaN();
  std::string method;  // jennrich | als | brute_force | (empty on early failure)
  double t_oracle = 0.0;
  double t_bipartite = 0.0;
  double t_latent = 0.0;
  double t_struct = 0.0;
  std::string failure_stage;  // empty on success

  bool ok() const { return failure_stage.empty(); }
};

namespace detail {

enum class PairStatus { None, Forward, Backward, Undirected };

inline PairStatus pair_status(const Cpdag& g, int a, int b) {
  if (g.directed.count({a, b})) return PairStatus::Forward;
  if (g.directed.count({b, a})) return PairStatus::Backward;
  if (g.undirected.count({std::min(a, b), std::max(a, b)})) return PairStatus::Undirected;
  return PairStatus::None;
}

}  // namespace detail

// Count of vertex pairs whose edge status differs; each differing pair costs 1
// regardless of how the statuses differ.
inline int shd(const Cpdag& a, const Cpdag& b) {
  if (a.m != b.m) throw std::invalid_argument("shd: graphs have different vertex counts");
  int count = 0;
  for (int i = 0; i < a.m; ++i)
    for (int j = i + 1; j < a.m; ++j)
      if (detail::pair_status(a, i, j) != detail::pair_status(b, i, j)) ++count;
  return count;
}

// Pairs undirected in the estimate whose skeleton edge exists in the truth.
inline int uce(const Cpdag& estimated, const Cpdag& truth) {
  if (estimated.m != truth.m) throw std::invalid_argument("uce: graphs have different vertex counts");
  int count = 0;
  for (const auto& [i, j] : estimated.undirected)
    if (detail::pair_status(truth, i, j) != detail::PairStatus::None) ++count;
  return count;
}

// Column permutation sigma with est column sigma[j] equal to truth column j
// and matching domain size, when one exists. Columns are distinct bit
// vectors, so the matching is unique.
inline std::optional<std::vector<int>> align_gamma(const RecoveredBipartite& est,
                                                   const LatentCausalModel& truth) {
  if (est.gamma.n != truth.n() || est.gamma.m != truth.m()) return std::nullopt;
  const int m = truth.m();
  std::vector<int> sigma(m, -1);
  std::vector<bool> used(m, false);
  for (int j = 0; j < m; ++j) {
    const uint64_t want = truth.gamma.children_mask(j);
    for (int c = 0; c < m; ++c) {
      if (used[c]) continue;
      if (est.gamma.children_mask(c) == want && est.dims.dims[c] == truth.dims.dims[j]) {
        sigma[j] = c;
        used[c] = true;
        break;
      }
    }
    if (sigma[j] < 0) return std::nullopt;
  }
  return sigma;
}

// Total variation between the estimated and true joint tables after choosing
// per-variable value bijections. Estimated components are matched to true
// hidden states through nearest stacked means, the per-variable maps are read
// off by majority vote, and ambiguous variables fall back to exhaustive
// permutation search (dims <= 4) or a greedy best-found map.
inline double align_joint(const JointProbTable& est_j, const JointProbTable& truth_j,
                          const std::vector<int>& sigma, const Correspondence& est_corr,
                          const Eigen::MatrixXd& est_component_means,
                          const LatentCausalModel& truth_model) {
  const int m = truth_model.m();
  const int64_t K = truth_model.K();
  for (int j = 0; j < m; ++j)
    if (est_j.dims.dims[sigma[j]] != truth_j.dims.dims[j])
      throw std::invalid_argument("align_joint: domain sizes do not match under sigma");

  const Eigen::MatrixXd truth_means = truth_model.stacked_means();

  // value_map[j][v] = truth value of H_j matched to est value v of H_{sigma[j]}
  std::vector<std::vector<std::map<int, int>>> votes(m);
  for (int j = 0; j < m; ++j) votes[j].resize(truth_j.dims.dims[j]);
  for (int64_t s = 0; s < K; ++s) {
    const int comp = est_corr.component_of_state[s];
    int64_t best_t = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int64_t t = 0; t < K; ++t) {
      const double d = (est_component_means.row(comp) - truth_means.row(t)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best_t = t;
      }
    }
    const std::vector<int> est_state = unflatten_index(s, est_j.dims.dims);
    const std::vector<int> truth_state = unflatten_index(best_t, truth_j.dims.dims);
    for (int j = 0; j < m; ++j) votes[j][est_state[sigma[j]]][truth_state[j]] += 1;
  }

  std::vector<std::vector<int>> value_map(m);
  std::vector<int> ambiguous;
  for (int j = 0; j < m; ++j) {
    const int r = truth_j.dims.dims[j];
    value_map[j].assign(r, -1);
    std::vector<bool> taken(r, false);
    bool ok = true;
    for (int v = 0; v < r && ok; ++v) {
      int best_w = -1, best_c = 0;
      for (const auto& [w, c] : votes[j][v])
        if (c > best_c) {
          best_c = c;
          best_w = w;
        }
      if (best_w < 0 || taken[best_w])
        ok = false;
      else {
        value_map[j][v] = best_w;
        taken[best_w] = true;
      }
    }
    if (!ok) ambiguous.push_back(j);
  }

  auto tv_for = [&](const std::vector<std::vector<int>>& vmap) {
    // est state matching truth state h: est value at sigma[j] maps to h_j
    std::vector<std::vector<int>> inverse(m);
    for (int j = 0; j < m; ++j) {
      inverse[j].assign(truth_j.dims.dims[j], -1);
      for (int v = 0; v < truth_j.dims.dims[j]; ++v) inverse[j][vmap[j][v]] = v;
    }
    double tv = 0.0;
    for (int64_t t = 0; t < K; ++t) {
      const std::vector<int> h = unflatten_index(t, truth_j.dims.dims);
      std::vector<int> est_state(m, 0);
      for (int j = 0; j < m; ++j) est_state[sigma[j]] = inverse[j][h[j]];
      tv += std::abs(truth_j.entries[t] - est_j.entries[flatten_index(est_state, est_j.dims.dims)]);
    }
    return 0.5 * tv;
  };

  if (ambiguous.empty()) return tv_for(value_map);

  // Mean-based matching was ambiguous: search permutations for the ambiguous
  // variables when small, otherwise fill greedily and report the best found.
  double budget = 1.0;
  for (int j : ambiguous) {
    double f = 1.0;
    for (int v = 2; v <= truth_j.dims.dims[j]; ++v) f *= v;
    budget *= f;
  }
  bool exhaustive = budget <= 50000.0;
  for (int j : ambiguous)
    if (truth_j.dims.dims[j] > 4) exhaustive = false;

  std::vector<std::vector<int>> base = value_map;
  for (int j : ambiguous) {
    base[j].resize(truth_j.dims.dims[j]);
    for (int v = 0; v < truth_j.dims.dims[j]; ++v) base[j][v] = v;
  }
  if (!exhaustive) return tv_for(base);

  double best_tv = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> work = base;
  std::vector<size_t> cursor(ambiguous.size(), 0);
  // Odometer over permutations of each ambiguous variable.
  std::vector<std::vector<std::vector<int>>> perms(ambiguous.size());
  for (size_t a = 0; a < ambiguous.size(); ++a) {
    std::vector<int> p(truth_j.dims.dims[ambiguous[a]]);
    for (size_t v = 0; v < p.size(); ++v) p[v] = static_cast<int>(v);
    do {
      perms[a].push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
  }
  std::vector<size_t> idx(ambiguous.size(), 0);
  for (;;) {
    for (size_t a = 0; a < ambiguous.size(); ++a) work[ambiguous[a]] = perms[a][idx[a]];
    best_tv = std::min(best_tv, tv_for(work));
    size_t a = 0;
    while (a < idx.size() && ++idx[a] == perms[a].size()) idx[a++] = 0;
    if (a == idx.size()) break;
  }
  return best_tv;
}

// ---------------------------------------------------------------------------
// Full-graph comparison (hidden vertices [0, m), observed [m, m+n))
// ---------------------------------------------------------------------------

inline Cpdag full_graph(const BipartiteGraph& gamma, const Cpdag& lambda_part,
                        const std::vector<int>& hidden_perm) {
  Cpdag g;
  g.m = gamma.m + gamma.n;
  for (const auto& [a, b] : lambda_part.directed) g.directed.insert({hidden_perm[a], hidden_perm[b]});
  for (const auto& [a, b] : lambda_part.undirected) {
    const int pa = hidden_perm[a], pb = hidden_perm[b];
    g.undirected.insert({std::min(pa, pb), std::max(pa, pb)});
  }
  for (int i = 0; i < gamma.n; ++i)
    for (int j = 0; j < gamma.m; ++j)
      if (gamma.edge(i, j)) g.directed.insert({hidden_perm[j], gamma.m + i});
  return g;
}

inline Cpdag dag_as_directed_cpdag(const LatentDag& dag) {
  Cpdag g;
  g.m = dag.m;
  for (const auto& e : dag.edges) g.directed.insert(e);
  return g;
}

// SHD and UCE over the full graph, minimized over hidden-vertex matchings.
// The truth side keeps all edges directed, matching a comparison of a partly
// undirected estimate against the true DAG.
inline std::pair<int, int> full_graph_metrics(const RecoveredBipartite& est_bip,
                                              const Cpdag& est_lambda,
                                              const LatentCausalModel& truth) {
  const int m = truth.m();
  if (est_bip.gamma.m != m || est_bip.gamma.n != truth.n())
    throw std::invalid_argument("full_graph_metrics: shape mismatch");
  std::vector<int> identity(m);
  for (int j = 0; j < m; ++j) identity[j] = j;
  const Cpdag truth_full = full_graph(truth.gamma, dag_as_directed_cpdag(truth.lambda), identity);

  // est column c plays the role of truth hidden perm[c]
  std::vector<int> perm(m);
  for (int j = 0; j < m; ++j) perm[j] = j;
  int best_shd = std::numeric_limits<int>::max();
  int best_uce = 0;
  do {
    const Cpdag est_full = full_graph(est_bip.gamma, est_lambda, perm);
    const int s = shd(est_full, truth_full);
    if (s < best_shd) {
      best_shd = s;
      best_uce = uce(est_full, truth_full);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best_shd, best_uce};
}

}  // namespace latentmix
