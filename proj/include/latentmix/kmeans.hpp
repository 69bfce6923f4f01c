#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "latentmix/rng.hpp"

namespace latentmix {

struct ClusterOptions {
  int max_iter = 100;
  int n_init = 1;        // independent seedings, best inertia kept
  int empty_reseed = 10; // retries when a cluster is empty after convergence
};

struct ClusterResult {
  Eigen::MatrixXd centroids;     // k x dim
  std::vector<int> assignments;  // length N
  double inertia = 0.0;
  bool degenerate = false;       // empty cluster survived all reseeds
  int k = 0;
};

namespace detail {

inline void lloyd_assign(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids,
                         std::vector<int>& assign, double* inertia = nullptr) {
  const int64_t n = data.rows();
  const int k = static_cast<int>(centroids.rows());
  const Eigen::VectorXd cnorm = centroids.rowwise().squaredNorm();
  const Eigen::MatrixXd prod = data * centroids.transpose();  // N x k
  double total = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    int best = 0;
    double best_cost = cnorm[0] - 2.0 * prod(r, 0);
    for (int j = 1; j < k; ++j) {
      const double cost = cnorm[j] - 2.0 * prod(r, j);
      if (cost < best_cost) {
        best_cost = cost;
        best = j;
      }
    }
    assign[r] = best;
    if (inertia) total += best_cost + data.row(r).squaredNorm();
  }
  if (inertia) *inertia = std::max(total, 0.0);
}

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& data, int k, Rng& rng) {
  const int64_t n = data.rows();
  Eigen::MatrixXd centroids(k, data.cols());
  centroids.row(0) = data.row(rng.uniform_int(0, static_cast<int>(n - 1)));
  Eigen::VectorXd d2 = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int t = 1; t < k; ++t) {
    const double total = d2.sum();
    int64_t pick;
    if (total <= 0.0) {
      pick = rng.uniform_int(0, static_cast<int>(n - 1));
    } else {
      double u = rng.uniform() * total;
      pick = n - 1;
      for (int64_t r = 0; r < n; ++r) {
        u -= d2[r];
        if (u < 0.0) {
          pick = r;
          break;
        }
      }
    }
    centroids.row(t) = data.row(pick);
    d2 = d2.cwiseMin((data.rowwise() - centroids.row(t)).rowwise().squaredNorm());
  }
  return centroids;
}

inline ClusterResult lloyd_from(const Eigen::MatrixXd& data, Eigen::MatrixXd centroids,
                                int max_iter) {
  const int64_t n = data.rows();
  const int k = static_cast<int>(centroids.rows());
  ClusterResult res;
  res.k = k;
  res.assignments.assign(n, -1);
  std::vector<int> prev(n, -2);
  std::vector<int64_t> counts(k, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    lloyd_assign(data, centroids, res.assignments);
    if (res.assignments == prev) break;
    prev = res.assignments;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
    std::fill(counts.begin(), counts.end(), 0);
    for (int64_t r = 0; r < n; ++r) {
      sums.row(res.assignments[r]) += data.row(r);
      counts[res.assignments[r]]++;
    }
    for (int j = 0; j < k; ++j)
      if (counts[j] > 0) centroids.row(j) = sums.row(j) / counts[j];
    // empty clusters keep their previous centroid
  }
  lloyd_assign(data, centroids, res.assignments, &res.inertia);
  std::fill(counts.begin(), counts.end(), 0);
  for (int64_t r = 0; r < n; ++r) counts[res.assignments[r]]++;
  res.degenerate = std::any_of(counts.begin(), counts.end(), [](int64_t c) { return c == 0; });
  res.centroids = std::move(centroids);
  return res;
}

}  // namespace detail

// Lloyd iteration with k-means++ seeding; deterministic given seed.
inline ClusterResult cluster(const Eigen::MatrixXd& data, int k, uint64_t seed,
                             ClusterOptions opt = {}) {
  if (k < 1) throw std::invalid_argument("cluster: k must be >= 1");
  if (data.rows() < k) throw std::invalid_argument("cluster: fewer rows than clusters");
  const Rng base(seed);
  ClusterResult best;
  bool have_best = false;
  ClusterResult best_degenerate;
  bool have_degenerate = false;
  for (int init = 0; init < opt.n_init; ++init) {
    for (int retry = 0; retry <= opt.empty_reseed; ++retry) {
      Rng rng = base.derive(static_cast<uint64_t>(init) * 131 + retry);
      ClusterResult res = detail::lloyd_from(data, detail::kmeanspp_init(data, k, rng), opt.max_iter);
      if (res.degenerate) {
        if (!have_degenerate || res.inertia < best_degenerate.inertia) {
          best_degenerate = res;
          have_degenerate = true;
        }
        continue;
      }
      if (!have_best || res.inertia < best.inertia) {
        best = std::move(res);
        have_best = true;
      }
      break;
    }
  }
  if (have_best) return best;
  return best_degenerate;  // degenerate flag reports the empty clusters
}

// Lloyd iteration warm-started from the given centroids.
inline ClusterResult cluster_with_init(const Eigen::MatrixXd& data,
                                       const Eigen::MatrixXd& init_centroids,
                                       ClusterOptions opt = {}) {
  if (init_centroids.rows() < 1) throw std::invalid_argument("cluster_with_init: empty init");
  return detail::lloyd_from(data, init_centroids, opt.max_iter);
}

// Mean silhouette over a fixed subsample with a precomputed distance matrix;
// assignments may use any ids in [0, max_id).
class SilhouetteScorer {
 public:
  SilhouetteScorer(const Eigen::MatrixXd& data, uint64_t seed, int max_points = 2000) {
    const int64_t n = data.rows();
    const int s = static_cast<int>(std::min<int64_t>(n, max_points));
    idx_.resize(n);
    for (int64_t i = 0; i < n; ++i) idx_[i] = i;
    if (s < n) {
      Rng rng = Rng(seed).derive(0x73696cULL);
      for (int i = 0; i < s; ++i)
        std::swap(idx_[i], idx_[rng.uniform_int(i, static_cast<int>(n - 1))]);
      idx_.resize(s);
    }
    dist_.resize(s, s);
    for (int a = 0; a < s; ++a) {
      dist_(a, a) = 0.0;
      for (int b = a + 1; b < s; ++b) {
        const double d = (data.row(idx_[a]) - data.row(idx_[b])).norm();
        dist_(a, b) = d;
        dist_(b, a) = d;
      }
    }
  }

  const std::vector<int64_t>& sample_indices() const { return idx_; }

  double score(const std::vector<int>& assignments, int max_id) const {
    const int s = static_cast<int>(idx_.size());
    std::vector<int> sub(s);
    std::vector<int64_t> count(max_id, 0);
    for (int a = 0; a < s; ++a) {
      sub[a] = assignments[idx_[a]];
      count[sub[a]]++;
    }
    int populated = 0;
    for (int64_t c : count) populated += (c > 0);
    if (populated < 2) return 0.0;

    double total = 0.0;
    std::vector<double> sums(max_id);
    for (int a = 0; a < s; ++a) {
      std::fill(sums.begin(), sums.end(), 0.0);
      for (int b = 0; b < s; ++b) sums[sub[b]] += dist_(a, b);
      const int own = sub[a];
      if (count[own] <= 1) continue;  // convention: singleton silhouette is 0
      const double aval = sums[own] / (count[own] - 1);
      double bval = std::numeric_limits<double>::infinity();
      for (int j = 0; j < max_id; ++j) {
        if (j == own || count[j] == 0) continue;
        bval = std::min(bval, sums[j] / count[j]);
      }
      const double denom = std::max(aval, bval);
      if (denom > 0.0) total += (bval - aval) / denom;
    }
    return total / s;
  }

 private:
  std::vector<int64_t> idx_;
  Eigen::MatrixXd dist_;
};

struct SweepPoint {
  int k = 0;
  double silhouette = 0.0;
  Eigen::MatrixXd centroids;  // k x dim
};

// Starting from a k_max clustering, repeatedly merge the two closest centroids
// down to t = 2, recording silhouette and centroids at every requested t.
inline std::vector<SweepPoint> agglomerative_sweep(const Eigen::MatrixXd& data,
                                                   const ClusterResult& start,
                                                   const SilhouetteScorer& scorer,
                                                   const std::vector<int>& record_ks) {
  const int k0 = start.k;
  std::vector<bool> alive(k0, false);
  std::vector<int64_t> counts(k0, 0);
  std::vector<int> assign = start.assignments;
  for (int a : assign) counts[a]++;
  Eigen::MatrixXd centroids = start.centroids;
  int cur = 0;
  for (int j = 0; j < k0; ++j) {
    alive[j] = counts[j] > 0;
    cur += alive[j];
  }

  std::vector<SweepPoint> out;
  auto record = [&](int t) {
    if (std::find(record_ks.begin(), record_ks.end(), t) == record_ks.end()) return;
    SweepPoint p;
    p.k = t;
    p.silhouette = scorer.score(assign, k0);
    p.centroids.resize(t, data.cols());
    int r = 0;
    for (int j = 0; j < k0; ++j)
      if (alive[j]) p.centroids.row(r++) = centroids.row(j);
    out.push_back(std::move(p));
  };

  record(cur);
  while (cur > 2) {
    int ba = -1, bb = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < k0; ++a) {
      if (!alive[a]) continue;
      for (int b = a + 1; b < k0; ++b) {
        if (!alive[b]) continue;
        const double d = (centroids.row(a) - centroids.row(b)).squaredNorm();
        if (d < best) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    }
    centroids.row(ba) = (counts[ba] * centroids.row(ba) + counts[bb] * centroids.row(bb)) /
                        static_cast<double>(counts[ba] + counts[bb]);
    counts[ba] += counts[bb];
    counts[bb] = 0;
    alive[bb] = false;
    for (int& a : assign)
      if (a == bb) a = ba;
    --cur;
    record(cur);
  }
  return out;
}

}  // namespace latentmix
