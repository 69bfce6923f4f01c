#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "latentmix/subsets.hpp"

namespace latentmix {

class ModelConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bipartite graph from hidden to observed variables; adjacency
// stored row-major, entry (i, j) = 1 iff there is an edge H_j -> X_i.
struct BipartiteGraph {
  int n = 0;
  int m = 0;
  std::vector<uint8_t> adj;

  BipartiteGraph() = default;
  BipartiteGraph(int n_, int m_) : n(n_), m(m_), adj(static_cast<size_t>(n_) * m_, 0) {}

  uint8_t& at(int i, int j) { return adj[static_cast<size_t>(i) * m + j]; }
  uint8_t at(int i, int j) const { return adj[static_cast<size_t>(i) * m + j]; }
  bool edge(int i, int j) const { return at(i, j) != 0; }

  // Observed children of H_j as a bitmask over [n].
  uint64_t children_mask(int j) const {
    uint64_t mask = 0;
    for (int i = 0; i < n; ++i)
      if (edge(i, j)) mask |= (uint64_t{1} << i);
    return mask;
  }

  std::vector<int> parents_of(int i) const {
    std::vector<int> out;
    for (int j = 0; j < m; ++j)
      if (edge(i, j)) out.push_back(j);
    return out;
  }

  // Hidden parents of the observed subset S, as a bitmask over [m].
  uint64_t parent_mask(uint64_t observed_mask) const {
    uint64_t pa = 0;
    for (int i = 0; i < n; ++i) {
      if (!(observed_mask >> i & 1)) continue;
      for (int j = 0; j < m; ++j)
        if (edge(i, j)) pa |= (uint64_t{1} << j);
    }
    return pa;
  }

  std::vector<uint8_t> column(int j) const {
    std::vector<uint8_t> col(n);
    for (int i = 0; i < n; ++i) col[i] = at(i, j);
    return col;
  }

  Eigen::MatrixXd as_matrix() const {
    Eigen::MatrixXd a(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) a(i, j) = at(i, j);
    return a;
  }

  bool columns_nonzero() const {
    for (int j = 0; j < m; ++j)
      if (children_mask(j) == 0) return false;
    return true;
  }
};

struct LatentDag {
  int m = 0;
  std::set<std::pair<int, int>> edges;

  std::vector<int> parents_of(int j) const {
    std::vector<int> out;
    for (const auto& [a, b] : edges)
      if (b == j) out.push_back(a);
    return out;
  }

  // Topological order if acyclic, empty otherwise.
  std::vector<int> topological_order() const {
    std::vector<int> indeg(m, 0);
    for (const auto& e : edges) indeg[e.second]++;
    std::vector<int> order;
    std::vector<int> queue;
    for (int i = 0; i < m; ++i)
      if (indeg[i] == 0) queue.push_back(i);
    while (!queue.empty()) {
      const int v = queue.front();
      queue.erase(queue.begin());
      order.push_back(v);
      for (const auto& e : edges) {
        if (e.first != v) continue;
        if (--indeg[e.second] == 0) queue.push_back(e.second);
      }
    }
    if (static_cast<int>(order.size()) != m) return {};
    return order;
  }

  bool is_acyclic() const { return m == 0 || !topological_order().empty(); }
};

struct DomainSpec {
  std::vector<int> dims;

  int size() const { return static_cast<int>(dims.size()); }

  int64_t total() const {
    int64_t k = 1;
    for (int d : dims) k *= d;
    return k;
  }

  bool valid() const {
    for (int d : dims)
      if (d < 2) return false;
    return true;
  }
};

struct JointProbTable {
  DomainSpec dims;
  std::vector<double> entries;

  double at(const std::vector<int>& h) const { return entries[flatten_index(h, dims.dims)]; }

  double sum() const {
    double s = 0.0;
    for (double e : entries) s += e;
    return s;
  }

  bool strictly_positive() const {
    for (double e : entries)
      if (e <= 0.0) return false;
    return true;
  }

  void validate() const {
    if (static_cast<int64_t>(entries.size()) != dims.total())
      throw ModelConsistencyError("JointProbTable: entry count does not match domain");
    if (std::abs(sum() - 1.0) > 1e-12)
      throw ModelConsistencyError("JointProbTable: entries do not sum to 1");
  }
};

struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  bool cov_valid(double sym_tol = 1e-12) const {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size()) return false;
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > sym_tol) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    return es.eigenvalues().minCoeff() > 0.0;
  }
};

// Ground-truth generative object: bipartite graph, latent DAG, domain sizes,
// joint latent table and one Gaussian component per parent configuration of
// each observed variable.
struct LatentCausalModel {
  BipartiteGraph gamma;
  LatentDag lambda;
  DomainSpec dims;
  JointProbTable joint;
  // obs_law[i][c]: component of X_i for parent configuration c, where c is the
  // mixed-radix index over pa(X_i) sorted ascending, lowest hidden index most
  // significant. This fixes the canonical component indexing everywhere.
  std::vector<std::vector<GaussianComponent>> obs_law;
  int obs_dim = 5;

  int n() const { return gamma.n; }
  int m() const { return gamma.m; }
  int64_t K() const { return dims.total(); }

  std::vector<int> parent_dims(int i) const {
    std::vector<int> out;
    for (int j : gamma.parents_of(i)) out.push_back(dims.dims[j]);
    return out;
  }

  // Index of the obs_law[i] component selected by the full hidden state h.
  int64_t parent_config_index(int i, const std::vector<int>& h) const {
    int64_t cfg = 0;
    for (int j : gamma.parents_of(i)) cfg = cfg * dims.dims[j] + h[j];
    return cfg;
  }

  // Stacked full-component means, row j = concatenated per-variable means for
  // the hidden state with flat index j.
  Eigen::MatrixXd stacked_means() const {
    const int64_t k = K();
    Eigen::MatrixXd means(k, static_cast<int64_t>(n()) * obs_dim);
    for (int64_t s = 0; s < k; ++s) {
      const std::vector<int> h = unflatten_index(s, dims.dims);
      for (int i = 0; i < n(); ++i)
        means.row(s).segment(static_cast<int64_t>(i) * obs_dim, obs_dim) =
            obs_law[i][parent_config_index(i, h)].mean;
    }
    return means;
  }
};

struct AssumptionReport {
  bool no_twins = false;
  bool ssc = false;
  bool positivity = false;
  bool distinct_components = false;
  bool linearly_independent_columns = false;

  bool all() const {
    return no_twins && ssc && positivity && distinct_components && linearly_independent_columns;
  }
};

// Oracle answer for a subset S: component count, weights and product-Gaussian
// component parameters restricted to the coordinates of S.
struct MixtureView {
  std::vector<int> subset;
  int64_t k = 0;
  std::vector<double> weights;
  // components[c][s]: parameters of component c over subset variable subset[s]
  std::vector<std::vector<GaussianComponent>> components;

  Eigen::MatrixXd stacked_means(int d) const {
    Eigen::MatrixXd means(k, static_cast<int64_t>(subset.size()) * d);
    for (int64_t c = 0; c < k; ++c)
      for (size_t s = 0; s < subset.size(); ++s)
        means.row(c).segment(static_cast<int64_t>(s) * d, d) = components[c][s].mean;
    return means;
  }
};

// Map L from full-mixture components to per-variable marginal components.
struct ComponentMap {
  int64_t K = 0;
  std::vector<std::vector<int>> rows;
  std::vector<int> marginal_ks;

  bool is_injective() const {
    std::set<std::vector<int>> seen;
    for (const auto& r : rows)
      if (!seen.insert(r).second) return false;
    return true;
  }
};

// Subset -> component count table, keyed by observed-variable bitmask.
struct KTable {
  int n = 0;
  std::unordered_map<uint64_t, int64_t> counts;

  bool has(uint64_t mask) const { return counts.count(mask) != 0; }

  int64_t at(uint64_t mask) const {
    auto it = counts.find(mask);
    if (it == counts.end()) throw std::out_of_range("KTable: missing subset entry");
    return it->second;
  }
};

inline void check_subset_mask(const LatentCausalModel& model, uint64_t mask) {
  if (mask == 0) throw std::invalid_argument("subset must be nonempty");
  if (mask >> model.n()) throw std::invalid_argument("subset contains invalid indices");
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline AssumptionReport validate_assumptions(const LatentCausalModel& model,
                                             double separation_floor = 1e-9) {
  AssumptionReport rep;
  const int m = model.m();

  std::vector<uint64_t> cols(m);
  for (int j = 0; j < m; ++j) cols[j] = model.gamma.children_mask(j);

  rep.no_twins = true;
  for (int a = 0; a < m && rep.no_twins; ++a)
    for (int b = a + 1; b < m; ++b)
      if (cols[a] == cols[b]) {
        rep.no_twins = false;
        break;
      }

  rep.ssc = true;
  for (int a = 0; a < m && rep.ssc; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      if ((cols[a] & ~cols[b]) == 0) {  // nbhd(H_a) subset of nbhd(H_b)
        rep.ssc = false;
        break;
      }
    }

  rep.positivity = model.joint.strictly_positive();

  rep.distinct_components = true;
  for (int i = 0; i < model.n() && rep.distinct_components; ++i) {
    const auto& comps = model.obs_law[i];
    for (size_t a = 0; a < comps.size() && rep.distinct_components; ++a)
      for (size_t b = a + 1; b < comps.size(); ++b)
        if ((comps[a].mean - comps[b].mean).norm() <= separation_floor) {
          rep.distinct_components = false;
          break;
        }
  }

  if (m == 0) {
    rep.linearly_independent_columns = true;
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(model.gamma.as_matrix());
    qr.setThreshold(1e-9);
    rep.linearly_independent_columns = (qr.rank() == m);
  }
  return rep;
}

inline int64_t marginal_k(const LatentCausalModel& model, uint64_t subset_mask) {
  check_subset_mask(model, subset_mask);
  const uint64_t pa = model.gamma.parent_mask(subset_mask);
  int64_t k = 1;
  for (int j = 0; j < model.m(); ++j)
    if (pa >> j & 1) k *= model.dims.dims[j];
  return k;
}

inline int64_t marginal_k(const LatentCausalModel& model, const std::vector<int>& subset) {
  return marginal_k(model, indices_to_mask(subset));
}

// Exact counts for all subsets with |S| <= max_size.
inline KTable exact_k_table(const LatentCausalModel& model, int max_size) {
  KTable table;
  table.n = model.n();
  for (uint64_t mask : subsets_up_to(model.n(), max_size))
    table.counts[mask] = marginal_k(model, mask);
  return table;
}

inline MixtureView exact_oracle(const LatentCausalModel& model, uint64_t subset_mask) {
  check_subset_mask(model, subset_mask);
  MixtureView view;
  view.subset = mask_to_indices(subset_mask);

  const std::vector<int> pa = mask_to_indices(model.gamma.parent_mask(subset_mask));
  std::vector<int> pa_dims;
  for (int j : pa) pa_dims.push_back(model.dims.dims[j]);
  int64_t k = 1;
  for (int d : pa_dims) k *= d;
  view.k = k;

  // Marginalize J over the hidden variables outside pa(S), grouping states
  // with equal pa(S)-configuration.
  view.weights.assign(k, 0.0);
  const int64_t K = model.K();
  for (int64_t s = 0; s < K; ++s) {
    const std::vector<int> h = unflatten_index(s, model.dims.dims);
    int64_t cfg = 0;
    for (size_t t = 0; t < pa.size(); ++t) cfg = cfg * pa_dims[t] + h[pa[t]];
    view.weights[cfg] += model.joint.entries[s];
  }

  view.components.resize(k);
  for (int64_t cfg = 0; cfg < k; ++cfg) {
    const std::vector<int> vals = pa_dims.empty() ? std::vector<int>{} : unflatten_index(cfg, pa_dims);
    std::vector<int> h(model.m(), 0);
    for (size_t t = 0; t < pa.size(); ++t) h[pa[t]] = vals[t];
    for (int i : view.subset)
      view.components[cfg].push_back(model.obs_law[i][model.parent_config_index(i, h)]);
  }
  return view;
}

inline MixtureView exact_oracle(const LatentCausalModel& model, const std::vector<int>& subset) {
  return exact_oracle(model, indices_to_mask(subset));
}

// L(j)_i = index of the marginal component over X_i whose parameters equal the
// projection of full component j, matched by mean distance at tolerance `tol`.
inline ComponentMap exact_component_map(const LatentCausalModel& model, double tol = 1e-9) {
  ComponentMap lmap;
  lmap.K = model.K();

  std::vector<MixtureView> marginals;
  for (int i = 0; i < model.n(); ++i) {
    marginals.push_back(exact_oracle(model, uint64_t{1} << i));
    lmap.marginal_ks.push_back(static_cast<int>(marginals.back().k));
  }

  lmap.rows.resize(lmap.K);
  for (int64_t j = 0; j < lmap.K; ++j) {
    const std::vector<int> h = unflatten_index(j, model.dims.dims);
    std::vector<int>& row = lmap.rows[j];
    row.resize(model.n());
    for (int i = 0; i < model.n(); ++i) {
      const Eigen::VectorXd& proj = model.obs_law[i][model.parent_config_index(i, h)].mean;
      int match = -1;
      for (int64_t c = 0; c < marginals[i].k; ++c) {
        if ((marginals[i].components[c][0].mean - proj).norm() <= tol) {
          if (match >= 0)
            throw ModelConsistencyError("exact_component_map: projection matches several marginal components");
          match = static_cast<int>(c);
        }
      }
      if (match < 0)
        throw ModelConsistencyError("exact_component_map: projection matches no marginal component");
      row[i] = match;
    }
  }
  return lmap;
}

}  // namespace latentmix
