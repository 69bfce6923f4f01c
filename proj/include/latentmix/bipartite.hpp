#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "latentmix/model.hpp"
#include "latentmix/rng.hpp"
#include "latentmix/subsets.hpp"

namespace latentmix {

class JennrichFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AlsFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompleteTableError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// W(S) = log k(S), keyed by observed-variable bitmask, |S| <= t.
struct SubsetWeightTable {
  int n = 0;
  int t = 0;
  std::unordered_map<uint64_t, double> w;

  bool has(uint64_t mask) const { return w.count(mask) != 0; }

  double of(uint64_t mask) const {
    auto it = w.find(mask);
    if (it == w.end()) throw IncompleteTableError("SubsetWeightTable: missing subset entry");
    return it->second;
  }
};

inline SubsetWeightTable weights_from_counts(const KTable& counts) {
  SubsetWeightTable table;
  table.n = counts.n;
  table.t = 0;
  for (const auto& [mask, k] : counts.counts) {
    if (k < 1) throw std::invalid_argument("weights_from_counts: k(S) must be >= 1");
    table.w[mask] = std::log(static_cast<double>(k));
    table.t = std::max(table.t, popcount64(mask));
  }
  return table;
}

// Inclusion-exclusion: sum over nonempty U <= S of (-1)^{|U|+1} W(U), which
// equals the total weight of the common neighbors of S.
inline double comw(uint64_t mask, const SubsetWeightTable& table) {
  if (mask == 0) throw std::invalid_argument("comw: subset must be nonempty");
  double acc = 0.0;
  for_each_nonempty_subset(mask, [&](uint64_t sub) {
    const double sign = (popcount64(sub) % 2 == 1) ? 1.0 : -1.0;
    acc += sign * table.of(sub);
  });
  return acc;
}

struct SymmetricTensor3 {
  int n = 0;
  std::vector<double> e;

  SymmetricTensor3() = default;
  explicit SymmetricTensor3(int n_) : n(n_), e(static_cast<size_t>(n_) * n_ * n_, 0.0) {}

  double& at(int i, int j, int k) { return e[(static_cast<size_t>(i) * n + j) * n + k]; }
  double at(int i, int j, int k) const { return e[(static_cast<size_t>(i) * n + j) * n + k]; }

  double frobenius_norm() const {
    double s = 0.0;
    for (double x : e) s += x * x;
    return std::sqrt(s);
  }

  // T_v = sum_k v_k * M3[:,:,k]
  Eigen::MatrixXd contract(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      if (v[k] == 0.0) continue;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) += v[k] * at(i, j, k);
    }
    return out;
  }

  // Mode-1 unfolding, n x n^2, column index j*n+k.
  Eigen::MatrixXd unfold() const {
    Eigen::MatrixXd u(n, static_cast<int64_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) u(i, static_cast<int64_t>(j) * n + k) = at(i, j, k);
    return u;
  }
};

inline SymmetricTensor3 build_m3(const SubsetWeightTable& table) {
  if (table.t < 3 && table.n >= 3)
    throw IncompleteTableError("build_m3: weight table must cover subsets of size 3");
  SymmetricTensor3 t3(table.n);
  const int n = table.n;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int k = j; k < n; ++k) {
        const uint64_t mask = (uint64_t{1} << i) | (uint64_t{1} << j) | (uint64_t{1} << k);
        const double val = comw(mask, table);
        int idx[3] = {i, j, k};
        std::sort(idx, idx + 3);
        do {
          t3.at(idx[0], idx[1], idx[2]) = val;
        } while (std::next_permutation(idx, idx + 3));
      }
    }
  }
  return t3;
}

struct RecoveredBipartite {
  BipartiteGraph gamma;
  DomainSpec dims;
  Eigen::MatrixXd raw_columns;   // n x m, before rounding
  Eigen::VectorXd raw_weights;   // length m, log-domain weights
  std::string method;            // jennrich | als | brute_force
  double residual_rel = 0.0;
};

struct JennrichOptions {
  double rec_tol_rel = 1e-6;    // reconstruction residual, relative to ||M3||_F
  double round_tol = 0.05;      // max allowed distance of raw entries from {0,1}
  double rank_tol_rel = 1e-7;   // singular-value cutoff for rank detection
  double imag_tol = 1e-6;       // allowed relative imaginary residue
  double gap_tol = 1e-8;        // minimum relative eigenvalue separation
  int attempts = 3;
  double zero_tol = 1e-10;      // ||M3||_F below this means no hidden variables
};

struct AlsOptions {
  double als_tol_rel = 1e-6;
  double round_tol = 0.05;
  int restarts = 5;
  int max_iter = 400;
  double converge_tol = 1e-12;
  double zero_tol = 1e-10;
};

namespace detail {

struct RankOneFit {
  Eigen::VectorXd log_weights;
  double residual_rel = 0.0;
  bool ok = false;
  std::string why;
};

// Round raw columns to {0,1}, refit the log-weights by least squares against
// the symmetric rank-one terms, and validate all RecoveredBipartite checks.
inline RankOneFit fit_and_check(const SymmetricTensor3& t3, const Eigen::MatrixXd& raw_cols,
                                Eigen::MatrixXd& rounded, double round_tol, double rec_tol_rel) {
  RankOneFit fit;
  const int n = t3.n;
  const int m = static_cast<int>(raw_cols.cols());
  rounded.resize(n, m);
  double max_dev = 0.0;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      const double v = raw_cols(i, j);
      const double b = (v >= 0.5) ? 1.0 : 0.0;
      max_dev = std::max(max_dev, std::abs(v - b));
      rounded(i, j) = b;
    }
  }
  if (max_dev > round_tol) {
    fit.why = "raw column entries too far from {0,1} (max deviation " + std::to_string(max_dev) + ")";
    return fit;
  }
  // Distinct, nonzero binary columns.
  for (int j = 0; j < m; ++j) {
    if (rounded.col(j).sum() < 0.5) {
      fit.why = "rounded column is zero";
      return fit;
    }
    for (int k = j + 1; k < m; ++k) {
      if ((rounded.col(j) - rounded.col(k)).cwiseAbs().maxCoeff() < 0.5) {
        fit.why = "rounded columns are not distinct";
        return fit;
      }
    }
  }

  // Least squares over the rank-one terms via the Gram identity
  // <b_j^{x3}, b_k^{x3}> = (b_j . b_k)^3.
  const double fro = t3.frobenius_norm();
  Eigen::MatrixXd gram(m, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) {
      const double dot = rounded.col(j).dot(rounded.col(k));
      gram(j, k) = dot * dot * dot;
    }
  Eigen::VectorXd rhs(m);
  for (int j = 0; j < m; ++j) {
    const Eigen::MatrixXd tb = t3.contract(rounded.col(j));
    rhs[j] = rounded.col(j).dot(tb * rounded.col(j));
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    fit.why = "gram matrix of rounded columns is singular";
    return fit;
  }
  fit.log_weights = ldlt.solve(rhs);
  const double res2 = fro * fro - 2.0 * fit.log_weights.dot(rhs) +
                      fit.log_weights.dot(gram * fit.log_weights);
  fit.residual_rel = (fro > 0) ? std::sqrt(std::max(res2, 0.0)) / fro : 0.0;
  if (fit.residual_rel > rec_tol_rel) {
    fit.why = "reconstruction residual " + std::to_string(fit.residual_rel) + " above tolerance";
    return fit;
  }
  for (int j = 0; j < m; ++j) {
    if (fit.log_weights[j] <= 0.0) {
      fit.why = "recovered log-weight is not positive";
      return fit;
    }
    if (std::llround(std::exp(fit.log_weights[j])) < 2) {
      fit.why = "recovered domain size below 2";
      return fit;
    }
  }
  fit.ok = true;
  return fit;
}

// Canonical column order: lexicographic on the binary column pattern.
inline RecoveredBipartite assemble_result(const Eigen::MatrixXd& rounded,
                                          const Eigen::MatrixXd& raw_cols,
                                          const Eigen::VectorXd& log_weights,
                                          const std::string& method, double residual_rel) {
  const int n = static_cast<int>(rounded.rows());
  const int m = static_cast<int>(rounded.cols());
  std::vector<int> order(m);
  for (int j = 0; j < m; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int i = 0; i < n; ++i) {
      if (rounded(i, a) != rounded(i, b)) return rounded(i, a) > rounded(i, b);
    }
    return a < b;
  });

  RecoveredBipartite out;
  out.gamma = BipartiteGraph(n, m);
  out.raw_columns.resize(n, m);
  out.raw_weights.resize(m);
  out.dims.dims.resize(m);
  for (int jj = 0; jj < m; ++jj) {
    const int j = order[jj];
    for (int i = 0; i < n; ++i) out.gamma.at(i, jj) = rounded(i, j) > 0.5 ? 1 : 0;
    out.raw_columns.col(jj) = raw_cols.col(j);
    out.raw_weights[jj] = log_weights[j];
    out.dims.dims[jj] = static_cast<int>(std::llround(std::exp(log_weights[j])));
  }
  out.method = method;
  out.residual_rel = residual_rel;
  return out;
}

inline RecoveredBipartite empty_result(int n, const std::string& method) {
  RecoveredBipartite out;
  out.gamma = BipartiteGraph(n, 0);
  out.raw_columns.resize(n, 0);
  out.raw_weights.resize(0);
  out.method = method;
  return out;
}

// Extract, realify and normalize the top-m eigenvectors of a general real
// matrix, ordered by |eigenvalue| descending. Fails on eigenvalues with a
// large imaginary part or on clustered moduli.
struct EigenPick {
  Eigen::MatrixXd vectors;       // n x m, unit columns
  Eigen::VectorXd values;        // real parts
  bool ok = false;
  std::string why;
};

inline EigenPick pick_eigenpairs(const Eigen::MatrixXd& mat, int m, double imag_tol, double gap_tol) {
  EigenPick pick;
  Eigen::EigenSolver<Eigen::MatrixXd> es(mat);
  if (es.info() != Eigen::Success) {
    pick.why = "eigen decomposition failed";
    return pick;
  }
  const Eigen::VectorXcd vals = es.eigenvalues();
  const int n = static_cast<int>(mat.rows());
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return std::abs(vals[a]) > std::abs(vals[b]); });

  const double scale = std::abs(vals[idx[0]]);
  pick.vectors.resize(n, m);
  pick.values.resize(m);
  for (int t = 0; t < m; ++t) {
    const std::complex<double> lam = vals[idx[t]];
    if (std::abs(lam.imag()) > imag_tol * (std::abs(lam) + 1.0)) {
      pick.why = "complex eigenvalue beyond tolerance";
      return pick;
    }
    Eigen::VectorXcd v = es.eigenvectors().col(idx[t]);
    // Rotate the complex phase so the largest entry is real positive.
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    v *= std::conj(v[arg]) / std::abs(v[arg]);
    if (v.imag().norm() > imag_tol * v.norm()) {
      pick.why = "eigenvector has a large imaginary part";
      return pick;
    }
    Eigen::VectorXd re = v.real();
    pick.vectors.col(t) = re / re.norm();
    pick.values[t] = lam.real();
  }
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (std::abs(pick.values[a] - pick.values[b]) < gap_tol * (scale + 1e-300)) {
        pick.why = "clustered eigenvalues beyond tolerance";
        return pick;
      }
  pick.ok = true;
  return pick;
}

}  // namespace detail

// Jennrich simultaneous diagonalization of M3 = sum_j w_j a_j^{x3} with
// linearly independent a_j: eigenvectors of the two slice problems
// T_x pinv(T_y) and T_y pinv(T_x) recover the columns up to scale.
inline RecoveredBipartite jennrich(const SymmetricTensor3& t3, uint64_t seed,
                                   JennrichOptions opt = {}) {
  const int n = t3.n;
  const double fro = t3.frobenius_norm();
  if (fro <= opt.zero_tol) return detail::empty_result(n, "jennrich");

  // Rank of the unfolding = number of hidden variables.
  Eigen::JacobiSVD<Eigen::MatrixXd> usvd(t3.unfold());
  const Eigen::VectorXd sv = usvd.singularValues();
  int m = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > opt.rank_tol_rel * sv[0]) ++m;
  if (m == 0) return detail::empty_result(n, "jennrich");

  Rng rng = Rng(seed).derive(0x6a656e72ULL);
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < opt.attempts; ++attempt) {
    Rng attempt_rng = rng.derive(attempt);
    const Eigen::VectorXd x = attempt_rng.unit_sphere(n);
    const Eigen::VectorXd y = attempt_rng.unit_sphere(n);
    const Eigen::MatrixXd tx = t3.contract(x);
    const Eigen::MatrixXd ty = t3.contract(y);

    // Rank-m pseudo-inverses.
    auto pinv_rank = [&](const Eigen::MatrixXd& a) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Eigen::VectorXd s = svd.singularValues();
      Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
      for (int i = 0; i < m && i < s.size(); ++i)
        if (s[i] > 1e-13 * s[0]) inv[i] = 1.0 / s[i];
      return Eigen::MatrixXd(svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose());
    };

    const detail::EigenPick right =
        detail::pick_eigenpairs(tx * pinv_rank(ty), m, opt.imag_tol, opt.gap_tol);
    if (!right.ok) {
      last_error = right.why;
      continue;
    }
    const detail::EigenPick left =
        detail::pick_eigenpairs(ty * pinv_rank(tx), m, opt.imag_tol, opt.gap_tol);
    if (!left.ok) {
      last_error = left.why;
      continue;
    }

    // Pair the two eigenproblems by maximal |cosine| and average directions.
    std::vector<int> match(m, -1);
    std::vector<bool> used(m, false);
    bool match_ok = true;
    for (int a = 0; a < m; ++a) {
      int best = -1;
      double best_cos = 0.0;
      for (int b = 0; b < m; ++b) {
        if (used[b]) continue;
        const double c = std::abs(right.vectors.col(a).dot(left.vectors.col(b)));
        if (c > best_cos) {
          best_cos = c;
          best = b;
        }
      }
      if (best < 0 || best_cos < 0.9) {
        match_ok = false;
        break;
      }
      match[a] = best;
      used[best] = true;
    }
    if (!match_ok) {
      last_error = "left/right eigenvector matching is ambiguous";
      continue;
    }

    Eigen::MatrixXd raw(n, m);
    for (int a = 0; a < m; ++a) {
      Eigen::VectorXd va = right.vectors.col(a);
      Eigen::VectorXd vb = left.vectors.col(match[a]);
      if (va.dot(vb) < 0) vb = -vb;
      Eigen::VectorXd dir = (va + vb).normalized();
      // True columns are 0/1 with at least one 1: fix scale so the entry of
      // largest magnitude becomes exactly 1.
      int arg = 0;
      dir.cwiseAbs().maxCoeff(&arg);
      raw.col(a) = dir / dir[arg];
    }

    Eigen::MatrixXd rounded;
    const detail::RankOneFit fit =
        detail::fit_and_check(t3, raw, rounded, opt.round_tol, opt.rec_tol_rel);
    if (!fit.ok) {
      last_error = fit.why;
      continue;
    }
    return detail::assemble_result(rounded, raw, fit.log_weights, "jennrich", fit.residual_rel);
  }
  throw JennrichFailure("jennrich: " + last_error);
}

// Symmetric-CP alternating least squares over candidate ranks; selects the
// smallest candidate whose relative residual clears the tolerance.
inline RecoveredBipartite als_fallback(const SymmetricTensor3& t3,
                                       const std::vector<int>& m_candidates, uint64_t seed,
                                       AlsOptions opt = {}) {
  if (m_candidates.empty()) throw std::invalid_argument("als_fallback: no rank candidates");
  const int n = t3.n;
  const double fro = t3.frobenius_norm();
  if (fro <= opt.zero_tol) return detail::empty_result(n, "als");

  const Eigen::MatrixXd m1 = t3.unfold();
  std::vector<int> cands = m_candidates;
  std::sort(cands.begin(), cands.end());

  Rng rng = Rng(seed).derive(0x616c73ULL);
  std::string last_error = "no candidate fit";
  double best_seen_residual = 1.0;

  for (int r : cands) {
    if (r <= 0 || r > n) continue;
    Eigen::MatrixXd best_u, best_v, best_w;
    double best_res = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < opt.restarts; ++restart) {
      Rng rr = rng.derive(static_cast<uint64_t>(r) * 1000 + restart);
      Eigen::MatrixXd u(n, r), v(n, r), w(n, r);
      for (int j = 0; j < r; ++j) {
        u.col(j) = rr.normal_vector(n);
        v.col(j) = rr.normal_vector(n);
        w.col(j) = rr.normal_vector(n);
      }

      auto khatri_rao = [n, r](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        Eigen::MatrixXd kr(static_cast<int64_t>(n) * n, r);
        for (int j = 0; j < r; ++j)
          for (int p = 0; p < n; ++p)
            kr.block(static_cast<int64_t>(p) * n, j, n, 1) = a(p, j) * b.col(j);
        return kr;
      };
      auto solve_factor = [&](const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) -> Eigen::MatrixXd {
        const Eigen::MatrixXd gram =
            (a.transpose() * a).cwiseProduct(b.transpose() * b);
        const Eigen::MatrixXd rhs = m1 * khatri_rao(a, b);
        return (gram.completeOrthogonalDecomposition().pseudoInverse() * rhs.transpose())
            .transpose();
      };
      auto residual_rel = [&]() {
        // ||T - rec||^2 = ||T||^2 - 2<T,rec> + ||rec||^2 from factor Grams.
        double dot = 0.0;
        for (int j = 0; j < r; ++j) {
          const Eigen::MatrixXd tw = t3.contract(w.col(j));
          dot += u.col(j).dot(tw * v.col(j));
        }
        const Eigen::MatrixXd g = (u.transpose() * u)
                                      .cwiseProduct(v.transpose() * v)
                                      .cwiseProduct(w.transpose() * w);
        const double rec2 = g.sum();
        const double res2 = fro * fro - 2.0 * dot + rec2;
        return std::sqrt(std::max(res2, 0.0)) / fro;
      };

      double prev = std::numeric_limits<double>::infinity();
      bool dead = false;
      for (int iter = 0; iter < opt.max_iter; ++iter) {
        u = solve_factor(v, w);
        v = solve_factor(u, w);
        w = solve_factor(u, v);
        for (int j = 0; j < r; ++j) {
          const double nu = u.col(j).norm(), nv = v.col(j).norm();
          if (nu < 1e-200 || nv < 1e-200) {
            dead = true;
            break;
          }
          // Keep scale in the last factor.
          w.col(j) *= nu * nv;
          u.col(j) /= nu;
          v.col(j) /= nv;
        }
        if (dead) break;
        if (iter % 10 == 9 || iter == opt.max_iter - 1) {
          const double res = residual_rel();
          if (prev - res < opt.converge_tol) break;
          prev = res;
        }
      }
      if (dead) continue;
      const double res = residual_rel();
      if (res < best_res) {
        best_res = res;
        best_u = u;
        best_v = v;
        best_w = w;
      }
    }

    best_seen_residual = std::min(best_seen_residual, best_res);
    if (!std::isfinite(best_res) || best_res > opt.als_tol_rel) continue;

    // Symmetrize each component and rescale so the largest entry is 1.
    Eigen::MatrixXd raw(n, r);
    for (int j = 0; j < r; ++j) {
      Eigen::VectorXd a = best_u.col(j);
      Eigen::VectorXd b = best_v.col(j);
      Eigen::VectorXd c = best_w.col(j).normalized();
      if (a.dot(b) < 0) b = -b;
      if (a.dot(c) < 0) c = -c;
      Eigen::VectorXd dir = (a + b + c).normalized();
      int arg = 0;
      dir.cwiseAbs().maxCoeff(&arg);
      raw.col(j) = dir / dir[arg];
    }
    Eigen::MatrixXd rounded;
    const detail::RankOneFit fit =
        detail::fit_and_check(t3, raw, rounded, opt.round_tol, opt.als_tol_rel);
    if (!fit.ok) {
      last_error = "rank " + std::to_string(r) + ": " + fit.why;
      continue;
    }
    return detail::assemble_result(rounded, raw, fit.log_weights, "als", fit.residual_rel);
  }
  throw AlsFailure("als_fallback: unrecoverable tensor (best residual " +
                   std::to_string(best_seen_residual) + "): " + last_error);
}

// Exponential-time peeling over all subsets: repeatedly locate a maximal
// neighborhood block (comW nonzero, zero on every one-element extension),
// emit a hidden vertex with that neighborhood, subtract its weight.
inline RecoveredBipartite brute_force_recover(const SubsetWeightTable& table, double tol = 1e-8) {
  const int n = table.n;
  if (n > 24) throw std::invalid_argument("brute_force_recover: n too large for 2^n enumeration");
  if (table.t < n)
    throw IncompleteTableError("brute_force_recover: table must cover all 2^n subsets");

  const uint64_t full = (uint64_t{1} << n) - 1;
  std::vector<double> wv(full + 1, 0.0);
  for (uint64_t mask = 1; mask <= full; ++mask) wv[mask] = table.of(mask);

  std::vector<std::vector<double>> columns;
  std::vector<double> weights;
  std::vector<double> comw_v(full + 1, 0.0);

  for (;;) {
    // comW for every subset via a signed subset-sum (zeta) transform.
    for (uint64_t mask = 0; mask <= full; ++mask)
      comw_v[mask] = (popcount64(mask) % 2 == 1) ? wv[mask] : -wv[mask];
    comw_v[0] = 0.0;
    for (int b = 0; b < n; ++b)
      for (uint64_t mask = 0; mask <= full; ++mask)
        if (mask >> b & 1) comw_v[mask] += comw_v[mask ^ (uint64_t{1} << b)];

    double max_left = 0.0;
    for (uint64_t mask = 1; mask <= full; ++mask)
      max_left = std::max(max_left, std::abs(wv[mask]));
    if (max_left <= tol) break;

    uint64_t block = 0;
    for (uint64_t mask = 1; mask <= full && block == 0; ++mask) {
      if (std::abs(comw_v[mask]) <= tol) continue;
      bool maximal = true;
      for (int x = 0; x < n && maximal; ++x) {
        if (mask >> x & 1) continue;
        if (std::abs(comw_v[mask | (uint64_t{1} << x)]) > tol) maximal = false;
      }
      if (maximal) block = mask;
    }
    if (block == 0)
      throw ModelConsistencyError(
          "brute_force_recover: residual weight but no maximal neighborhood block "
          "(no-twins assumption violated)");

    const double w = comw_v[block];
    std::vector<double> col(n, 0.0);
    for (int i = 0; i < n; ++i) col[i] = (block >> i & 1) ? 1.0 : 0.0;
    columns.push_back(col);
    weights.push_back(w);
    for (uint64_t mask = 1; mask <= full; ++mask)
      if (mask & block) wv[mask] -= w;
  }

  const int m = static_cast<int>(columns.size());
  Eigen::MatrixXd raw(n, m);
  Eigen::VectorXd logw(m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) raw(i, j) = columns[j][i];
    logw[j] = weights[j];
    if (std::llround(std::exp(weights[j])) < 2)
      throw ModelConsistencyError("brute_force_recover: recovered domain size below 2");
  }
  if (m == 0) return detail::empty_result(n, "brute_force");
  return detail::assemble_result(raw, raw, logw, "brute_force", 0.0);
}

}  // namespace latentmix
