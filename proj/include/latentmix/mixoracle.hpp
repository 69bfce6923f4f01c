#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "latentmix/kmeans.hpp"
#include "latentmix/model.hpp"
#include "latentmix/rng.hpp"
#include "latentmix/subsets.hpp"

namespace latentmix {

struct OracleOptions {
  int k_max_cap = 72;           // 2 * max(dim_choices)^2, additionally capped at sqrt(N)
  int silhouette_points = 2000;
  double means_tol = 0.3;       // 3 * sqrt(cov_max_eig)
  int top_candidates = 5;
  int max_pair_candidates = 15;
  ClusterOptions sweep_cluster{100, 2, 10};
  ClusterOptions full_cluster{100, 4, 10};
};

struct KEstimate {
  std::vector<int> subset;
  std::vector<std::pair<int, double>> candidates;  // (k, silhouette)
  int chosen_k = 0;
  std::map<int, double> votes;
  bool low_confidence = false;
};

// Candidate counts with the centroids learned at each candidate, kept so that
// later stages can check means alignment and warm-start triples.
struct SubsetSweep {
  KEstimate est;
  std::map<int, Eigen::MatrixXd> centroids;
};

namespace detail {

inline Eigen::MatrixXd subset_block(const Eigen::MatrixXd& data, const std::vector<int>& vars,
                                    int d) {
  Eigen::MatrixXd out(data.rows(), static_cast<int64_t>(vars.size()) * d);
  for (size_t t = 0; t < vars.size(); ++t)
    out.middleCols(static_cast<int64_t>(t) * d, d) =
        data.middleCols(static_cast<int64_t>(vars[t]) * d, d);
  return out;
}

inline int effective_k_max(int requested, int64_t rows) {
  const int by_rows = static_cast<int>(std::min<int64_t>(
      rows, static_cast<int64_t>(std::sqrt(static_cast<double>(rows))) + 1));
  return std::max(2, std::min(requested, by_rows));
}

// The projected centroids collapse onto the reference centroids: after
// deduplication at the tolerance, the distinct projections must match the
// reference set in count and in both coverage directions. This is what holds
// when both clusterings use the correct component counts.
inline bool means_aligned(const Eigen::MatrixXd& centroids, int block, int d,
                          const Eigen::MatrixXd& reference, double tol) {
  std::vector<Eigen::RowVectorXd> reps;
  for (int64_t r = 0; r < centroids.rows(); ++r) {
    const Eigen::RowVectorXd proj = centroids.row(r).segment(static_cast<int64_t>(block) * d, d);
    bool merged = false;
    for (const auto& rep : reps)
      if ((proj - rep).norm() <= tol) {
        merged = true;
        break;
      }
    if (!merged) reps.push_back(proj);
  }
  if (static_cast<int64_t>(reps.size()) != reference.rows()) return false;
  for (const auto& rep : reps) {
    double best = std::numeric_limits<double>::infinity();
    for (int64_t c = 0; c < reference.rows(); ++c)
      best = std::min(best, (rep - reference.row(c)).norm());
    if (best > tol) return false;
  }
  for (int64_t c = 0; c < reference.rows(); ++c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& rep : reps) best = std::min(best, (rep - reference.row(c)).norm());
    if (best > tol) return false;
  }
  return true;
}

inline void keep_top_candidates(std::vector<std::pair<int, double>>& cands, int keep) {
  std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(cands.size()) > keep) cands.resize(keep);
}

// Greedy max-min selection of k rows for a well-spread warm start.
inline Eigen::MatrixXd spread_rows(const Eigen::MatrixXd& points, int k) {
  Eigen::MatrixXd out(k, points.cols());
  std::vector<bool> used(points.rows(), false);
  out.row(0) = points.row(0);
  used[0] = true;
  Eigen::VectorXd d2 = (points.rowwise() - out.row(0)).rowwise().squaredNorm();
  for (int t = 1; t < k; ++t) {
    int best = -1;
    double best_d = -1.0;
    for (int64_t r = 0; r < points.rows(); ++r) {
      if (used[r]) continue;
      if (d2[r] > best_d) {
        best_d = d2[r];
        best = static_cast<int>(r);
      }
    }
    out.row(t) = points.row(best);
    used[best] = true;
    d2 = d2.cwiseMin((points.rowwise() - out.row(t)).rowwise().squaredNorm());
  }
  return out;
}

}  // namespace detail

// K-means at k_max followed by agglomerative merging down to t = 2 with a
// silhouette recorded at every t; candidates are the best-scoring counts.
// Near-structureless data additionally nominates k = 1.
inline SubsetSweep estimate_k_single(const Eigen::MatrixXd& data_i, int k_max, uint64_t seed,
                                     const OracleOptions& opt = {}) {
  if (k_max < 2) throw std::invalid_argument("estimate_k_single: k_max must be >= 2");
  const int k_eff = detail::effective_k_max(k_max, data_i.rows());
  const Rng rng(seed);

  const ClusterResult start = cluster(data_i, k_eff, rng.derive(1).seed(), opt.sweep_cluster);
  const SilhouetteScorer scorer(data_i, rng.derive(2).seed(), opt.silhouette_points);
  std::vector<int> record;
  for (int t = 2; t <= k_eff; ++t) record.push_back(t);
  const std::vector<SweepPoint> sweep = agglomerative_sweep(data_i, start, scorer, record);

  SubsetSweep out;
  double best_sil = -1.0;
  for (const SweepPoint& p : sweep) {
    out.est.candidates.push_back({p.k, p.silhouette});
    out.centroids[p.k] = p.centroids;
    best_sil = std::max(best_sil, p.silhouette);
  }
  detail::keep_top_candidates(out.est.candidates, opt.top_candidates);

  // A clearly structureless sweep nominates a single component; its score
  // grows as the best split silhouette falls below 0.5.
  const double s1 = std::clamp(0.5 - best_sil, 0.0, 1.0);
  if (s1 > 0.0) {
    out.est.candidates.push_back({1, s1});
    out.centroids[1] = data_i.colwise().mean();
  }
  out.est.chosen_k = out.est.candidates.front().first;
  return out;
}

// Same sweep over a caller-supplied candidate set (used for pairs).
inline SubsetSweep estimate_k_over(const Eigen::MatrixXd& data, const std::vector<int>& cand_ks,
                                   uint64_t seed, const OracleOptions& opt = {}) {
  if (cand_ks.empty()) throw std::invalid_argument("estimate_k_over: no candidates");
  const Rng rng(seed);
  std::vector<int> cands = cand_ks;
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  const int k_start = detail::effective_k_max(cands.back(), data.rows());
  while (!cands.empty() && cands.back() > k_start) cands.pop_back();
  if (cands.empty()) cands.push_back(k_start);

  const ClusterResult start = cluster(data, k_start, rng.derive(1).seed(), opt.sweep_cluster);
  const SilhouetteScorer scorer(data, rng.derive(2).seed(), opt.silhouette_points);
  const std::vector<SweepPoint> sweep = agglomerative_sweep(data, start, scorer, cands);

  SubsetSweep out;
  for (const SweepPoint& p : sweep) {
    out.est.candidates.push_back({p.k, p.silhouette});
    out.centroids[p.k] = p.centroids;
  }
  detail::keep_top_candidates(out.est.candidates, opt.max_pair_candidates);
  out.est.chosen_k = out.est.candidates.front().first;
  return out;
}

// Weighted voting between singleton and pair candidates: a pair candidate k
// and a singleton candidate k' are compatible when k' | k or when the pair
// means project onto the singleton means within tolerance. Each related set
// casts one vote per candidate, weighted by the silhouette of its best
// compatible own candidate (clipped at zero); a candidate's tally also
// includes its own silhouette. Divisibility of the finalized table is
// enforced afterwards.
inline void vote_k(std::vector<SubsetSweep>& singles,
                   std::map<std::pair<int, int>, SubsetSweep>& pairs, int d,
                   const OracleOptions& opt = {}) {
  for (auto& s : singles) {
    s.est.votes.clear();
    for (const auto& [k, sil] : s.est.candidates) s.est.votes[k] = std::max(sil, 0.0);
  }
  for (auto& [key, p] : pairs) {
    p.est.votes.clear();
    for (const auto& [k, sil] : p.est.candidates) p.est.votes[k] = std::max(sil, 0.0);
  }

  for (auto& [key, pair] : pairs) {
    const std::array<int, 2> vars = {key.first, key.second};
    for (int side = 0; side < 2; ++side) {
      SubsetSweep& single = singles[vars[side]];
      // best_from_single[k]: strongest compatible singleton candidate per
      // pair candidate; best_from_pair[k']: strongest compatible pair
      // candidate per singleton candidate.
      std::map<int, double> best_from_single, best_from_pair;
      for (const auto& [k, sil] : pair.est.candidates) {
        const auto pc = pair.centroids.find(k);
        for (const auto& [k1, sil1] : single.est.candidates) {
          bool compatible;
          if (k1 == 1) {
            // Divisibility by 1 is vacuous; require the means condition.
            compatible = pc != pair.centroids.end() &&
                         detail::means_aligned(pc->second, side, d, single.centroids.at(1),
                                               opt.means_tol);
          } else {
            compatible = (k % k1 == 0);
            if (!compatible && pc != pair.centroids.end() && single.centroids.count(k1) != 0) {
              compatible = detail::means_aligned(pc->second, side, d, single.centroids.at(k1),
                                                 opt.means_tol);
            }
          }
          if (!compatible) continue;
          auto& a = best_from_single[k];
          a = std::max(a, std::max(sil1, 0.0));
          auto& b = best_from_pair[k1];
          b = std::max(b, std::max(sil, 0.0));
        }
      }
      for (const auto& [k, w] : best_from_single) pair.est.votes[k] += w;
      for (const auto& [k1, w] : best_from_pair) single.est.votes[k1] += w;
    }
  }

  auto winner = [](const KEstimate& est) {
    int best_k = est.candidates.front().first;
    double best_v = -1.0;
    for (const auto& [k, v] : est.votes) {
      if (v > best_v || (v == best_v && k < best_k)) {
        best_v = v;
        best_k = k;
      }
    }
    return best_k;
  };

  for (auto& s : singles)
    s.est.chosen_k = s.est.votes.empty() ? s.est.candidates.front().first : winner(s.est);

  // Pairs must be divisible by both finalized singleton counts.
  for (auto& [key, pair] : pairs) {
    const int ki = singles[key.first].est.chosen_k;
    const int kj = singles[key.second].est.chosen_k;
    const int l = std::lcm(ki, kj);
    int best_k = -1;
    double best_v = -1.0;
    for (const auto& [k, v] : pair.est.votes) {
      if (k % l != 0) continue;
      if (v > best_v || (v == best_v && (best_k < 0 || k < best_k))) {
        best_v = v;
        best_k = k;
      }
    }
    if (best_k < 0) {
      best_k = l;  // no divisible candidate was scored; repair toward the lcm
      pair.est.low_confidence = true;
    }
    pair.est.chosen_k = best_k;
  }
}

// Triple counts: candidates are multiples of the lcm of the three finalized
// pair counts; Lloyd is warm-started from consistent pair means and the
// silhouette picks the winner.
inline SubsetSweep estimate_k_triple(const Eigen::MatrixXd& data_triple,
                                     const SubsetSweep& pair_ij, const SubsetSweep& pair_il,
                                     int d, uint64_t seed, const OracleOptions& opt = {}) {
  const Rng rng(seed);
  const int kij = pair_ij.est.chosen_k;
  const int kil = pair_il.est.chosen_k;

  SubsetSweep out;
  const int cap = detail::effective_k_max(opt.k_max_cap, data_triple.rows());
  const int64_t l64 = std::lcm(static_cast<int64_t>(kij), static_cast<int64_t>(kil));

  std::vector<int> cands;
  if (l64 <= cap) {
    for (int64_t k = l64; k <= cap; k += l64) cands.push_back(static_cast<int>(k));
  } else if (l64 <= data_triple.rows()) {
    cands.push_back(static_cast<int>(l64));
    out.est.low_confidence = true;
  }
  if (cands.empty()) {
    // No divisibility-consistent candidate fits; fall back to a raw sweep.
    out = estimate_k_single(data_triple, cap, rng.derive(9).seed(), opt);
    out.est.low_confidence = true;
    return out;
  }

  // Assemble warm-start points from pair centroids that agree on the shared
  // variable block.
  Eigen::MatrixXd assembled;
  {
    const auto ci = pair_ij.centroids.find(kij);
    const auto cj = pair_il.centroids.find(kil);
    if (ci != pair_ij.centroids.end() && cj != pair_il.centroids.end()) {
      std::vector<Eigen::RowVectorXd> points;
      for (int64_t a = 0; a < ci->second.rows(); ++a) {
        for (int64_t b = 0; b < cj->second.rows(); ++b) {
          const Eigen::RowVectorXd pa = ci->second.row(a);
          const Eigen::RowVectorXd pb = cj->second.row(b);
          if ((pa.segment(0, d) - pb.segment(0, d)).norm() > opt.means_tol) continue;
          Eigen::RowVectorXd pt(3 * d);
          pt.segment(0, d) = 0.5 * (pa.segment(0, d) + pb.segment(0, d));
          pt.segment(d, d) = pa.segment(d, d);
          pt.segment(2 * d, d) = pb.segment(d, d);
          points.push_back(pt);
        }
      }
      if (!points.empty()) {
        assembled.resize(points.size(), 3 * d);
        for (size_t r = 0; r < points.size(); ++r) assembled.row(r) = points[r];
      }
    }
  }

  const SilhouetteScorer scorer(data_triple, rng.derive(2).seed(), opt.silhouette_points);
  for (int k : cands) {
    Eigen::MatrixXd init(k, data_triple.cols());
    if (assembled.rows() >= k) {
      init = detail::spread_rows(assembled, k);
    } else {
      // Seed with everything assembled, complete with D^2 sampling.
      Rng pad = rng.derive(100 + k);
      int filled = static_cast<int>(assembled.rows());
      init.topRows(filled) = assembled;
      Eigen::VectorXd d2 = Eigen::VectorXd::Constant(data_triple.rows(),
                                                     std::numeric_limits<double>::infinity());
      for (int t = 0; t < filled; ++t)
        d2 = d2.cwiseMin((data_triple.rowwise() - init.row(t)).rowwise().squaredNorm());
      if (filled == 0) {
        init.row(0) = data_triple.row(pad.uniform_int(0, static_cast<int>(data_triple.rows() - 1)));
        d2 = (data_triple.rowwise() - init.row(0)).rowwise().squaredNorm();
        filled = 1;
      }
      for (; filled < k; ++filled) {
        const double total = d2.sum();
        int64_t pick = data_triple.rows() - 1;
        if (total > 0) {
          double u = pad.uniform() * total;
          for (int64_t r = 0; r < data_triple.rows(); ++r) {
            u -= d2[r];
            if (u < 0) {
              pick = r;
              break;
            }
          }
        } else {
          pick = pad.uniform_int(0, static_cast<int>(data_triple.rows() - 1));
        }
        init.row(filled) = data_triple.row(pick);
        d2 = d2.cwiseMin((data_triple.rowwise() - init.row(filled)).rowwise().squaredNorm());
      }
    }
    const ClusterResult res = cluster_with_init(data_triple, init, opt.sweep_cluster);
    out.est.candidates.push_back({k, scorer.score(res.assignments, k)});
    out.centroids[k] = res.centroids;
  }
  std::sort(out.est.candidates.begin(), out.est.candidates.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  out.est.chosen_k = out.est.candidates.front().first;
  return out;
}

// ---------------------------------------------------------------------------
// Full-mixture fit and the map L
// ---------------------------------------------------------------------------

inline ComponentMap component_map_from_centroids(const Eigen::MatrixXd& full_centroids,
                                                 const std::vector<Eigen::MatrixXd>& marginals,
                                                 int d) {
  ComponentMap lmap;
  lmap.K = full_centroids.rows();
  const int n = static_cast<int>(marginals.size());
  for (const auto& m : marginals) lmap.marginal_ks.push_back(static_cast<int>(m.rows()));
  lmap.rows.resize(lmap.K, std::vector<int>(n, 0));
  for (int64_t j = 0; j < lmap.K; ++j) {
    for (int i = 0; i < n; ++i) {
      const Eigen::RowVectorXd proj = full_centroids.row(j).segment(static_cast<int64_t>(i) * d, d);
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int64_t c = 0; c < marginals[i].rows(); ++c) {
        const double dist = (proj - marginals[i].row(c)).norm();
        if (dist < best_d) {  // ties keep the lowest index
          best_d = dist;
          best = static_cast<int>(c);
        }
      }
      lmap.rows[j][i] = best;
    }
  }
  return lmap;
}

struct FullMixtureFit {
  ClusterResult full;
  std::vector<ClusterResult> marginals;
  ComponentMap lmap;
  std::vector<double> weights;
  bool has_empty_cluster = false;
};

inline FullMixtureFit fit_full_mixture(const Eigen::MatrixXd& data, int64_t K,
                                       const std::vector<int>& marginal_ks, int d, uint64_t seed,
                                       const OracleOptions& opt = {}) {
  const Rng rng(seed);
  FullMixtureFit fit;
  fit.full = cluster(data, static_cast<int>(K), rng.derive(0).seed(), opt.full_cluster);
  std::vector<Eigen::MatrixXd> marginal_centroids;
  for (size_t i = 0; i < marginal_ks.size(); ++i) {
    const Eigen::MatrixXd block =
        data.middleCols(static_cast<int64_t>(i) * d, d);
    fit.marginals.push_back(cluster(block, marginal_ks[i], rng.derive(1 + i).seed(), opt.full_cluster));
    marginal_centroids.push_back(fit.marginals.back().centroids);
  }
  fit.lmap = component_map_from_centroids(fit.full.centroids, marginal_centroids, d);

  fit.weights.assign(K, 0.0);
  for (int a : fit.full.assignments) fit.weights[a] += 1.0;
  for (double& w : fit.weights) {
    w /= static_cast<double>(data.rows());
    if (w == 0.0) fit.has_empty_cluster = true;
  }
  return fit;
}

// Spec-shaped conveniences over fit_full_mixture; identical seeds see
// identical clusterings.
inline ComponentMap build_component_map(const Eigen::MatrixXd& data, int64_t K,
                                        const std::vector<int>& marginal_ks, int d, uint64_t seed,
                                        const OracleOptions& opt = {}) {
  return fit_full_mixture(data, K, marginal_ks, d, seed, opt).lmap;
}

inline std::vector<double> full_weights(const Eigen::MatrixXd& data, int64_t K, uint64_t seed,
                                        const OracleOptions& opt = {}) {
  const Rng rng(seed);
  const ClusterResult full = cluster(data, static_cast<int>(K), rng.derive(0).seed(), opt.full_cluster);
  std::vector<double> weights(K, 0.0);
  for (int a : full.assignments) weights[a] += 1.0;
  for (double& w : weights) w /= static_cast<double>(data.rows());
  return weights;
}

// ---------------------------------------------------------------------------
// Oracle interface shared by the exact and empirical backends
// ---------------------------------------------------------------------------

struct FullMixture {
  std::vector<double> weights;
  ComponentMap lmap;
  Eigen::MatrixXd component_means;  // K x (n*d)
  std::vector<int> assignments;     // per-sample component (empirical only)
  bool lmap_injective = true;
  bool has_empty_cluster = false;
};

class MixtureOracle {
 public:
  virtual ~MixtureOracle() = default;
  virtual int n_observed() const = 0;
  virtual KTable k_table(int max_subset_size) = 0;
  virtual FullMixture full_mixture(int64_t K, const std::vector<int>& marginal_ks) = 0;
};

class ExactMixtureOracle : public MixtureOracle {
 public:
  explicit ExactMixtureOracle(const LatentCausalModel& model) : model_(&model) {}

  int n_observed() const override { return model_->n(); }

  KTable k_table(int max_subset_size) override { return exact_k_table(*model_, max_subset_size); }

  FullMixture full_mixture(int64_t K, const std::vector<int>& marginal_ks) override {
    if (K != model_->K())
      throw ModelConsistencyError("exact oracle: requested K does not match the model");
    for (int i = 0; i < model_->n(); ++i)
      if (marginal_ks[i] != marginal_k(*model_, uint64_t{1} << i))
        throw ModelConsistencyError("exact oracle: requested marginal counts do not match");
    FullMixture fm;
    fm.weights = model_->joint.entries;
    fm.lmap = exact_component_map(*model_);
    fm.component_means = model_->stacked_means();
    fm.lmap_injective = fm.lmap.is_injective();
    return fm;
  }

 private:
  const LatentCausalModel* model_;
};

// Empirical oracle over a sample matrix: silhouette-guided count estimation
// for all subsets up to size 3 with divisibility voting, then K-means fits for
// the map L and the full-mixture weights.
class EmpiricalMixtureOracle : public MixtureOracle {
 public:
  EmpiricalMixtureOracle(const Eigen::MatrixXd& data, int n, int d, uint64_t seed,
                         OracleOptions opt = {})
      : data_(&data), n_(n), d_(d), seed_(seed), opt_(opt) {}

  int n_observed() const override { return n_; }

  KTable k_table(int max_subset_size) override {
    if (max_subset_size > 3)
      throw std::invalid_argument("empirical oracle: only subsets up to size 3 are estimated");
    if (!table_) estimate_counts();
    KTable out;
    out.n = n_;
    for (const auto& [mask, k] : table_->counts)
      if (popcount64(mask) <= max_subset_size) out.counts[mask] = k;
    return out;
  }

  void preload_k_table(const KTable& table) { table_ = table; }

  FullMixture full_mixture(int64_t K, const std::vector<int>& marginal_ks) override {
    const FullMixtureFit fit =
        fit_full_mixture(*data_, K, marginal_ks, d_, mix_seed(seed_, 0xf00dULL), opt_);
    FullMixture fm;
    fm.weights = fit.weights;
    fm.lmap = fit.lmap;
    fm.component_means = fit.full.centroids;
    fm.assignments = fit.full.assignments;
    fm.lmap_injective = fit.lmap.is_injective();
    fm.has_empty_cluster = fit.has_empty_cluster;
    return fm;
  }

  const std::vector<SubsetSweep>& singles() const { return singles_; }
  const std::map<std::pair<int, int>, SubsetSweep>& pairs() const { return pairs_; }
  const std::map<std::vector<int>, SubsetSweep>& triples() const { return triples_; }

 private:
  void estimate_counts() {
    const Rng base(seed_);
    const int cap = detail::effective_k_max(opt_.k_max_cap, data_->rows());

    singles_.clear();
    for (int i = 0; i < n_; ++i) {
      const Eigen::MatrixXd block = detail::subset_block(*data_, {i}, d_);
      singles_.push_back(estimate_k_single(block, cap, base.derive(uint64_t{1} << i).seed(), opt_));
      singles_.back().est.subset = {i};
    }

    pairs_.clear();
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        // Divisibility prefilter from the singleton candidates (k = 1 is
        // excluded here: it divides everything).
        std::vector<int> cands;
        for (int k = 2; k <= cap; ++k) {
          auto divides_some = [&](const SubsetSweep& s) {
            for (const auto& [k1, sil] : s.est.candidates)
              if (k1 > 1 && k % k1 == 0) return true;
            return false;
          };
          if (divides_some(singles_[i]) && divides_some(singles_[j])) cands.push_back(k);
        }
        if (cands.empty())
          for (int k = 2; k <= cap; ++k) cands.push_back(k);
        const Eigen::MatrixXd block = detail::subset_block(*data_, {i, j}, d_);
        const uint64_t mask = (uint64_t{1} << i) | (uint64_t{1} << j);
        SubsetSweep sweep = estimate_k_over(block, cands, base.derive(mask).seed(), opt_);
        sweep.est.subset = {i, j};
        pairs_.emplace(std::make_pair(i, j), std::move(sweep));
      }
    }

    vote_k(singles_, pairs_, d_, opt_);

    triples_.clear();
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        for (int l = j + 1; l < n_; ++l) {
          const Eigen::MatrixXd block = detail::subset_block(*data_, {i, j, l}, d_);
          const uint64_t mask = (uint64_t{1} << i) | (uint64_t{1} << j) | (uint64_t{1} << l);
          SubsetSweep sweep = estimate_k_triple(block, pairs_.at({i, j}), pairs_.at({i, l}), d_,
                                                base.derive(mask).seed(), opt_);
          // The winner must also be divisible by the third pair's count.
          const int kjl = pairs_.at({j, l}).est.chosen_k;
          int chosen = -1;
          for (const auto& [k, sil] : sweep.est.candidates)
            if (k % kjl == 0 && (chosen < 0)) chosen = k;
          if (chosen < 0) {
            sweep.est.low_confidence = true;
            chosen = std::lcm(sweep.est.chosen_k, kjl);
          }
          sweep.est.chosen_k = chosen;
          sweep.est.subset = {i, j, l};
          triples_.emplace(std::vector<int>{i, j, l}, std::move(sweep));
        }
      }
    }

    KTable table;
    table.n = n_;
    for (int i = 0; i < n_; ++i)
      table.counts[uint64_t{1} << i] = singles_[i].est.chosen_k;
    for (const auto& [key, sweep] : pairs_)
      table.counts[(uint64_t{1} << key.first) | (uint64_t{1} << key.second)] = sweep.est.chosen_k;
    for (const auto& [key, sweep] : triples_)
      table.counts[indices_to_mask(key)] = sweep.est.chosen_k;
    table_ = table;
  }

  const Eigen::MatrixXd* data_;
  int n_;
  int d_;
  uint64_t seed_;
  OracleOptions opt_;
  std::optional<KTable> table_;
  std::vector<SubsetSweep> singles_;
  std::map<std::pair<int, int>, SubsetSweep> pairs_;
  std::map<std::vector<int>, SubsetSweep> triples_;
};

}  // namespace latentmix
