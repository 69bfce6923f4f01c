#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "latentmix/model.hpp"
#include "latentmix/rng.hpp"

namespace latentmix {

class GenerationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenConfig {
  int m = 2;
  int n = 5;
  int d = 5;
  std::vector<int> dim_choices = {2, 3, 4, 5, 6};
  int64_t max_K = 50;
  double p_lambda = 0.6;
  double p_gamma = 0.5;
  int cpt_weight_min = 1;
  int cpt_weight_max = 4;
  double cov_max_eig = 0.01;
  uint64_t seed = 0;
  int rejection_budget = 10000;

  bool valid() const {
    return m >= 1 && n >= 1 && d >= 1 && !dim_choices.empty() && max_K >= 2 &&
           p_lambda > 0 && p_lambda < 1 && p_gamma > 0 && p_gamma < 1 &&
           cpt_weight_min >= 1 && cpt_weight_max >= cpt_weight_min && cov_max_eig > 0;
  }
};

struct SampleSet {
  int n = 0;
  int d = 0;
  Eigen::MatrixXd data;              // N x (n*d)
  std::vector<int64_t> truth_labels;  // flattened hidden-state index per row
};

namespace detail {

constexpr uint64_t kTagLambda = 1;
constexpr uint64_t kTagDims = 2;
constexpr uint64_t kTagGamma = 3;
constexpr uint64_t kTagCpt = 4;
constexpr uint64_t kTagObs = 5;

inline bool gamma_acceptable(const BipartiteGraph& g) {
  // Every observed variable keeps at least one parent and every hidden
  // variable at least one child.
  for (int i = 0; i < g.n; ++i) {
    bool any = false;
    for (int j = 0; j < g.m; ++j) any |= g.edge(i, j);
    if (!any) return false;
  }
  std::vector<uint64_t> cols(g.m);
  for (int j = 0; j < g.m; ++j) {
    cols[j] = g.children_mask(j);
    if (cols[j] == 0) return false;
  }
  // Subset condition.
  for (int a = 0; a < g.m; ++a)
    for (int b = 0; b < g.m; ++b) {
      if (a == b) continue;
      if ((cols[a] & ~cols[b]) == 0) return false;
    }
  // Linear independence of the columns.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g.as_matrix());
  qr.setThreshold(1e-9);
  return qr.rank() == g.m;
}

}  // namespace detail

inline LatentCausalModel gen_model(const GenConfig& config) {
  if (!config.valid()) throw std::invalid_argument("gen_model: invalid config");
  const Rng base(config.seed);
  LatentCausalModel model;
  model.obs_dim = config.d;

  // Latent DAG: uniform topological order, then each forward edge with p_lambda.
  {
    Rng rng = base.derive(detail::kTagLambda);
    std::vector<int> order(config.m);
    for (int i = 0; i < config.m; ++i) order[i] = i;
    rng.shuffle(order);
    model.lambda.m = config.m;
    for (int a = 0; a < config.m; ++a)
      for (int b = a + 1; b < config.m; ++b)
        if (rng.uniform() < config.p_lambda) model.lambda.edges.insert({order[a], order[b]});
  }

  // Domain sizes, rejected while the total component count exceeds max_K.
  {
    Rng rng = base.derive(detail::kTagDims);
    int tries = 0;
    for (;;) {
      if (++tries > config.rejection_budget)
        throw GenerationFailure("gen_model: domain-size rejection budget exceeded");
      std::vector<int> dims(config.m);
      int64_t prod = 1;
      for (int i = 0; i < config.m; ++i) {
        dims[i] = config.dim_choices[rng.uniform_int(0, static_cast<int>(config.dim_choices.size()) - 1)];
        prod *= dims[i];
      }
      if (prod <= config.max_K) {
        model.dims.dims = dims;
        break;
      }
    }
  }

  // Bipartite graph, resampled until SSC, nonzero rows/columns and linear
  // independence hold.
  {
    Rng rng = base.derive(detail::kTagGamma);
    int tries = 0;
    for (;;) {
      if (++tries > config.rejection_budget)
        throw GenerationFailure("gen_model: bipartite-graph rejection budget exceeded");
      BipartiteGraph g(config.n, config.m);
      for (int i = 0; i < config.n; ++i)
        for (int j = 0; j < config.m; ++j) g.at(i, j) = rng.uniform() < config.p_gamma ? 1 : 0;
      if (detail::gamma_acceptable(g)) {
        model.gamma = g;
        break;
      }
    }
  }

  // P(H) by Markov factorization with integer-weight conditionals.
  {
    Rng rng = base.derive(detail::kTagCpt);
    const std::vector<int> topo = model.lambda.topological_order();
    // cpt[i][cfg][v], cfg indexed mixed-radix over sorted latent parents.
    std::vector<std::vector<std::vector<double>>> cpt(config.m);
    for (int i : topo) {
      std::vector<int> pa = model.lambda.parents_of(i);
      std::sort(pa.begin(), pa.end());
      int64_t q = 1;
      for (int p : pa) q *= model.dims.dims[p];
      cpt[i].resize(q);
      for (int64_t c = 0; c < q; ++c) {
        std::vector<double> weights(model.dims.dims[i]);
        double total = 0.0;
        for (double& w : weights) {
          w = rng.uniform_int(config.cpt_weight_min, config.cpt_weight_max);
          total += w;
        }
        for (double& w : weights) w /= total;
        cpt[i][c] = weights;
      }
    }
    const int64_t K = model.dims.total();
    model.joint.dims = model.dims;
    model.joint.entries.assign(K, 0.0);
    for (int64_t s = 0; s < K; ++s) {
      const std::vector<int> h = unflatten_index(s, model.dims.dims);
      double p = 1.0;
      for (int i = 0; i < config.m; ++i) {
        std::vector<int> pa = model.lambda.parents_of(i);
        std::sort(pa.begin(), pa.end());
        int64_t c = 0;
        for (int pj : pa) c = c * model.dims.dims[pj] + h[pj];
        p *= cpt[i][c][h[i]];
      }
      model.joint.entries[s] = p;
    }
  }

  // Component banks: means on the unit sphere, covariances random symmetric
  // diagonally dominant with largest eigenvalue cov_max_eig.
  {
    Rng rng = base.derive(detail::kTagObs);
    model.obs_law.resize(config.n);
    for (int i = 0; i < config.n; ++i) {
      int64_t q = 1;
      for (int j : model.gamma.parents_of(i)) q *= model.dims.dims[j];
      model.obs_law[i].resize(q);
      for (int64_t c = 0; c < q; ++c) {
        GaussianComponent& comp = model.obs_law[i][c];
        comp.mean = rng.unit_sphere(config.d);
        Eigen::MatrixXd b(config.d, config.d);
        for (int r = 0; r < config.d; ++r)
          for (int cc = 0; cc < config.d; ++cc) b(r, cc) = rng.uniform();
        Eigen::MatrixXd cmat = 0.5 * (b + b.transpose());
        cmat += (config.d + 1) * Eigen::MatrixXd::Identity(config.d, config.d);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cmat);
        comp.cov = cmat * (config.cov_max_eig / es.eigenvalues().maxCoeff());
      }
    }
  }

  const AssumptionReport rep = validate_assumptions(model);
  if (!rep.all())
    throw GenerationFailure("gen_model: generated model failed assumption validation");
  return model;
}

inline SampleSet sample(const LatentCausalModel& model, int64_t N, uint64_t seed) {
  if (N < 1) throw std::invalid_argument("sample: N must be >= 1");
  SampleSet out;
  out.n = model.n();
  out.d = model.obs_dim;
  out.data.resize(N, static_cast<int64_t>(model.n()) * model.obs_dim);
  out.truth_labels.resize(N);

  // Cholesky factors per (variable, parent configuration), computed once.
  std::vector<std::vector<Eigen::MatrixXd>> chol(model.n());
  for (int i = 0; i < model.n(); ++i) {
    chol[i].reserve(model.obs_law[i].size());
    for (const auto& comp : model.obs_law[i]) {
      Eigen::LLT<Eigen::MatrixXd> llt(comp.cov);
      if (llt.info() != Eigen::Success)
        throw ModelConsistencyError("sample: covariance not positive definite");
      chol[i].push_back(llt.matrixL());
    }
  }

  Rng rng(seed);
  for (int64_t r = 0; r < N; ++r) {
    const int64_t s = rng.categorical(model.joint.entries);
    out.truth_labels[r] = s;
    const std::vector<int> h = unflatten_index(s, model.dims.dims);
    for (int i = 0; i < model.n(); ++i) {
      const int64_t cfg = model.parent_config_index(i, h);
      const Eigen::VectorXd z = rng.normal_vector(model.obs_dim);
      out.data.row(r).segment(static_cast<int64_t>(i) * model.obs_dim, model.obs_dim) =
          model.obs_law[i][cfg].mean + chol[i][cfg] * z;
    }
  }
  return out;
}

}  // namespace latentmix
