#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "latentmix/bipartite.hpp"
#include "latentmix/datagen.hpp"
#include "latentmix/eval.hpp"
#include "latentmix/io.hpp"
#include "latentmix/latentdist.hpp"
#include "latentmix/mixoracle.hpp"
#include "latentmix/model.hpp"
#include "latentmix/structlearn.hpp"

namespace latentmix {

enum class FailureKind { None, Assumption, Numeric, Io };

struct PipelineTolerances {
  JennrichOptions jennrich;
  AlsOptions als;
  OracleOptions oracle;
  int64_t k_cap = 100;  // empirical-mode ceiling on the predicted component count
  int max_als_m = 8;

  static PipelineTolerances exact_defaults() { return {}; }

  static PipelineTolerances empirical_defaults() {
    PipelineTolerances t;
    // Empirical counts are integers, so the log-domain noise is quantized;
    // looser residual/rounding guards route hard cases to the ALS failsafe.
    t.jennrich.rec_tol_rel = 0.15;
    t.jennrich.round_tol = 0.4;
    t.jennrich.rank_tol_rel = 0.02;
    t.jennrich.imag_tol = 0.02;
    t.jennrich.gap_tol = 1e-4;
    t.als.als_tol_rel = 0.15;
    t.als.round_tol = 0.4;
    return t;
  }
};

struct PipelineConfig {
  std::string oracle_mode = "exact";  // exact | empirical
  int64_t N = 10000;                  // samples consumed by the empirical oracle
  int64_t struct_N = 100000;          // rows drawn from J when sampling from the table
  bool from_table = false;            // force the table bridge for structure learning
  std::string output_dir;             // artifacts written here when nonempty
  bool resume = false;
  uint64_t seed = 0;
  PipelineTolerances tol;

  static PipelineConfig for_mode(const std::string& mode) {
    PipelineConfig c;
    c.oracle_mode = mode;
    c.tol = (mode == "empirical") ? PipelineTolerances::empirical_defaults()
                                  : PipelineTolerances::exact_defaults();
    return c;
  }
};

struct PipelineOutcome {
  TrialResult result;
  FailureKind failure = FailureKind::None;
  std::string failure_detail;

  KTable k_table;
  std::optional<RecoveredBipartite> bipartite;
  std::optional<FullMixture> mixture;
  std::optional<JointProbTable> est_joint;
  std::optional<Correspondence> corr;
  std::optional<Cpdag> est_lambda;
};

namespace detail {

inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string artifact_path(const PipelineConfig& cfg, const std::string& name) {
  return cfg.output_dir + "/" + name;
}

inline bool can_resume(const PipelineConfig& cfg, const std::string& name) {
  return cfg.resume && !cfg.output_dir.empty() && file_exists(artifact_path(cfg, name));
}

}  // namespace detail

// Full recovery pipeline: counts -> bipartite graph -> map L -> joint table
// -> latent CPDAG, with per-stage timing, artifacts and failure tags.
inline PipelineOutcome run_pipeline(const LatentCausalModel& truth, const SampleSet* samples,
                                    const PipelineConfig& cfg) {
  PipelineOutcome out;
  TrialResult& res = out.result;
  res.seed = cfg.seed;
  res.m = truth.m();
  res.n = truth.n();
  res.N = (cfg.oracle_mode == "empirical" && samples) ? samples->data.rows() : 0;
  const bool empirical = cfg.oracle_mode == "empirical";
  const bool artifacts = !cfg.output_dir.empty();
  const Rng rng(cfg.seed);

  if (empirical && (!samples || samples->data.rows() < 1)) {
    res.failure_stage = "oracle";
    out.failure = FailureKind::Io;
    out.failure_detail = "empirical mode requires samples";
    return out;
  }

  ExactMixtureOracle exact_oracle_backend(truth);
  std::optional<EmpiricalMixtureOracle> empirical_backend;
  if (empirical)
    empirical_backend.emplace(samples->data, truth.n(), truth.obs_dim,
                              rng.derive(0xa11ceULL).seed(), cfg.tol.oracle);
  MixtureOracle& oracle =
      empirical ? static_cast<MixtureOracle&>(*empirical_backend) : exact_oracle_backend;

  // Stage (a): subset component counts.
  auto t0 = std::chrono::steady_clock::now();
  try {
    if (detail::can_resume(cfg, "k_table.json")) {
      out.k_table = ktable_from_json(read_json(detail::artifact_path(cfg, "k_table.json")));
      if (empirical) empirical_backend->preload_k_table(out.k_table);
    } else {
      out.k_table = oracle.k_table(3);
      if (artifacts) {
        write_json(detail::artifact_path(cfg, "k_table.json"), ktable_to_json(out.k_table));
        if (empirical) {
          json diag;
          diag["singles"] = json::array();
          for (const auto& s : empirical_backend->singles())
            diag["singles"].push_back(kestimate_to_json(s.est));
          diag["pairs"] = json::array();
          for (const auto& [key, s] : empirical_backend->pairs())
            diag["pairs"].push_back(kestimate_to_json(s.est));
          diag["triples"] = json::array();
          for (const auto& [key, s] : empirical_backend->triples())
            diag["triples"].push_back(kestimate_to_json(s.est));
          write_json(detail::artifact_path(cfg, "kestimates.json"), diag);
        }
      }
    }
  } catch (const IoError& e) {
    res.failure_stage = "oracle";
    out.failure = FailureKind::Io;
    out.failure_detail = e.what();
    return out;
  } catch (const std::exception& e) {
    res.failure_stage = "oracle";
    out.failure = FailureKind::Numeric;
    out.failure_detail = e.what();
    return out;
  }
  res.t_oracle = detail::seconds_since(t0);

  // Stage (b): bipartite graph and domain sizes.
  t0 = std::chrono::steady_clock::now();
  try {
    if (detail::can_resume(cfg, "bipartite.json")) {
      out.bipartite = bipartite_from_json(read_json(detail::artifact_path(cfg, "bipartite.json")));
    } else {
      const SubsetWeightTable wt = weights_from_counts(out.k_table);
      const SymmetricTensor3 m3 = build_m3(wt);
      try {
        out.bipartite = jennrich(m3, rng.derive(0xbeefULL).seed(), cfg.tol.jennrich);
      } catch (const JennrichFailure&) {
        std::vector<int> candidates;
        for (int c = 1; c <= std::min(truth.n(), cfg.tol.max_als_m); ++c) candidates.push_back(c);
        out.bipartite = als_fallback(m3, candidates, rng.derive(0xa15ULL).seed(), cfg.tol.als);
      }
      if (artifacts)
        write_json(detail::artifact_path(cfg, "bipartite.json"), bipartite_to_json(*out.bipartite));
    }
    const int64_t khat = out.bipartite->dims.total();
    if (empirical && (khat > cfg.tol.k_cap || khat > samples->data.rows()))
      throw AlsFailure("predicted component count " + std::to_string(khat) + " is infeasible");
    res.method = out.bipartite->method;
  } catch (const std::exception& e) {
    res.failure_stage = "bipartite";
    out.failure = FailureKind::Numeric;
    out.failure_detail = e.what();
    return out;
  }
  res.t_bipartite = detail::seconds_since(t0);

  // Stage (c): map L and full-mixture weights.
  t0 = std::chrono::steady_clock::now();
  const RecoveredBipartite& bip = *out.bipartite;
  try {
    if (detail::can_resume(cfg, "lmap.json")) {
      const json j = read_json(detail::artifact_path(cfg, "lmap.json"));
      FullMixture fm;
      fm.weights = j.at("weights").get<std::vector<double>>();
      fm.lmap.K = j.at("K").get<int64_t>();
      fm.lmap.marginal_ks = j.at("marginal_ks").get<std::vector<int>>();
      fm.lmap.rows = j.at("rows").get<std::vector<std::vector<int>>>();
      const auto means = j.at("component_means").get<std::vector<double>>();
      fm.component_means = Eigen::Map<const Eigen::MatrixXd>(
          means.data(), fm.lmap.K, static_cast<int64_t>(means.size()) / fm.lmap.K);
      fm.assignments = j.at("assignments").get<std::vector<int>>();
      fm.lmap_injective = fm.lmap.is_injective();
      out.mixture = std::move(fm);
    } else {
      std::vector<int> marginal_ks(truth.n(), 1);
      for (int i = 0; i < truth.n(); ++i)
        for (int j = 0; j < bip.gamma.m; ++j)
          if (bip.gamma.edge(i, j)) marginal_ks[i] *= bip.dims.dims[j];
      out.mixture = oracle.full_mixture(bip.dims.total(), marginal_ks);
      if (artifacts) {
        json j;
        j["K"] = out.mixture->lmap.K;
        j["marginal_ks"] = out.mixture->lmap.marginal_ks;
        j["rows"] = out.mixture->lmap.rows;
        j["weights"] = out.mixture->weights;
        j["injective"] = out.mixture->lmap_injective;
        const Eigen::MatrixXd& cm = out.mixture->component_means;
        j["component_means"] = std::vector<double>(cm.data(), cm.data() + cm.size());
        j["assignments"] = out.mixture->assignments;
        write_json(detail::artifact_path(cfg, "lmap.json"), j);
      }
    }
  } catch (const std::exception& e) {
    res.failure_stage = "component_map";
    out.failure = FailureKind::Numeric;
    out.failure_detail = e.what();
    return out;
  }
  res.t_oracle += detail::seconds_since(t0);  // L construction is oracle work

  // Stage (d): joint probability table.
  t0 = std::chrono::steady_clock::now();
  try {
    if (detail::can_resume(cfg, "joint.json")) {
      auto [joint, corr] = joint_from_json(read_json(detail::artifact_path(cfg, "joint.json")));
      out.est_joint = std::move(joint);
      out.corr = std::move(corr);
    } else {
      auto [joint, corr] =
          reconstruct(out.mixture->lmap, bip.gamma, bip.dims, out.mixture->weights);
      out.est_joint = std::move(joint);
      out.corr = std::move(corr);
      if (artifacts)
        write_json(detail::artifact_path(cfg, "joint.json"),
                   joint_to_json(*out.est_joint, *out.corr));
    }
  } catch (const InconsistentInput& e) {
    res.failure_stage = "latentdist";
    out.failure = FailureKind::Assumption;
    out.failure_detail = e.what();
    return out;
  } catch (const std::exception& e) {
    res.failure_stage = "latentdist";
    out.failure = FailureKind::Numeric;
    out.failure_detail = e.what();
    return out;
  }
  res.t_latent = detail::seconds_since(t0);

  // Stage (e): latent CPDAG.
  t0 = std::chrono::steady_clock::now();
  try {
    if (detail::can_resume(cfg, "cpdag.json")) {
      out.est_lambda = cpdag_from_json(read_json(detail::artifact_path(cfg, "cpdag.json")));
    } else {
      DiscreteDataset dataset;
      if (empirical && !cfg.from_table && !out.mixture->assignments.empty()) {
        dataset = dataset_from_pipeline(out.mixture->assignments, *out.corr);
      } else {
        dataset = dataset_from_table(*out.est_joint, cfg.struct_N, rng.derive(0x57247ULL).seed());
      }
      out.est_lambda = greedy_search(dataset);
      if (artifacts)
        write_json(detail::artifact_path(cfg, "cpdag.json"), cpdag_to_json(*out.est_lambda));
    }
  } catch (const std::exception& e) {
    res.failure_stage = "structlearn";
    out.failure = FailureKind::Numeric;
    out.failure_detail = e.what();
    return out;
  }
  res.t_struct = detail::seconds_since(t0);

  // Metrics against the generating model.
  const auto sigma_strict = align_gamma(bip, truth);
  res.dims_exact = sigma_strict.has_value();
  res.gamma_exact = false;
  if (bip.gamma.m == truth.m()) {
    // column-only match for the gamma_exact flag
    std::vector<bool> used(truth.m(), false);
    bool all = true;
    for (int j = 0; j < truth.m() && all; ++j) {
      bool found = false;
      for (int c = 0; c < truth.m(); ++c) {
        if (used[c] || found) continue;
        if (bip.gamma.children_mask(c) == truth.gamma.children_mask(j)) {
          used[c] = true;
          found = true;
        }
      }
      all = found;
    }
    res.gamma_exact = all;
  }
  if (sigma_strict) {
    try {
      res.joint_tv = align_joint(*out.est_joint, truth.joint, *sigma_strict, *out.corr,
                                 out.mixture->component_means, truth);
    } catch (const std::exception&) {
      res.joint_tv = std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (bip.gamma.m == truth.m()) {
    const auto [s, u] = full_graph_metrics(bip, *out.est_lambda, truth);
    res.shd = s;
    res.uce = u;
  } else {
    res.failure_stage = "structure_mismatch";
    out.failure = FailureKind::Numeric;
    out.failure_detail = "recovered hidden-variable count " + std::to_string(bip.gamma.m) +
                         " differs from the model's " + std::to_string(truth.m());
    return out;
  }

  if (artifacts)
    write_json(detail::artifact_path(cfg, "result.json"), trial_to_json(res));
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark harness
// ---------------------------------------------------------------------------

struct BenchCell {
  int m = 2;
  int n = 5;
  int64_t N = 10000;
  int trials = 1;
  uint64_t base_seed = 0;
};

struct BenchConfig {
  std::vector<BenchCell> cells;
  std::string oracle_mode = "empirical";
  GenConfig gen_template;
  int jobs = 1;
  int64_t struct_N = 100000;
};

inline void parallel_for(int jobs, int64_t count, const std::function<void(int64_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::vector<std::thread> threads;
  const int nthreads = static_cast<int>(std::min<int64_t>(jobs, count));
  for (int t = 0; t < nthreads; ++t) {
    threads.emplace_back([&]() {
      for (;;) {
        const int64_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : threads) th.join();
}

// One benchmark trial: generate, sample, run the pipeline, evaluate.
inline TrialResult run_trial(const BenchCell& cell, int trial_index, const std::string& oracle_mode,
                             const GenConfig& gen_template, int64_t struct_N) {
  const uint64_t seed = mix_seed(cell.base_seed, static_cast<uint64_t>(trial_index));
  TrialResult fallback;
  fallback.seed = seed;
  fallback.m = cell.m;
  fallback.n = cell.n;
  fallback.N = cell.N;
  try {
    GenConfig gen = gen_template;
    gen.m = cell.m;
    gen.n = cell.n;
    gen.seed = seed;
    const LatentCausalModel model = gen_model(gen);
    PipelineConfig cfg = PipelineConfig::for_mode(oracle_mode);
    cfg.seed = mix_seed(seed, 0x7141ULL);
    cfg.N = cell.N;
    cfg.struct_N = struct_N;
    if (oracle_mode == "empirical") {
      const SampleSet samples = sample(model, cell.N, mix_seed(seed, 0xda7aULL));
      return run_pipeline(model, &samples, cfg).result;
    }
    return run_pipeline(model, nullptr, cfg).result;
  } catch (const std::exception&) {
    fallback.failure_stage = "generation";
    return fallback;
  }
}

}  // namespace latentmix
