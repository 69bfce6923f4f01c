// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Build and run via ctest (test name "acceptance") or directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "latentmix/pipeline.hpp"

using namespace latentmix;

namespace {

struct Criterion {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// 1. Worked-example golden tables, zero tolerance.
// ---------------------------------------------------------------------------
Criterion criterion_worked_examples() {
  Criterion c{"worked-example golden tables"};

  BipartiteGraph g3(3, 3);
  g3.at(0, 0) = g3.at(1, 0) = 1;
  g3.at(0, 1) = g3.at(2, 1) = 1;
  g3.at(1, 2) = g3.at(2, 2) = 1;
  ComponentMap l3;
  l3.K = 8;
  l3.marginal_ks = {4, 4, 4};
  const int rows3[8][3] = {{2, 4, 3}, {4, 3, 4}, {4, 4, 2}, {3, 2, 4},
                           {2, 3, 1}, {1, 1, 3}, {3, 1, 2}, {1, 2, 1}};
  for (const auto& r : rows3) l3.rows.push_back({r[0] - 1, r[1] - 1, r[2] - 1});
  std::vector<double> w3(8);
  for (int i = 0; i < 8; ++i) w3[i] = (i + 1) / 36.0;
  const auto [j3, c3] = reconstruct(l3, g3, DomainSpec{{2, 2, 2}}, w3);
  const int want3[8] = {0, 4, 2, 1, 5, 7, 6, 3};  // flat state -> component
  bool ok = true;
  for (int s = 0; s < 8; ++s) ok &= (c3.component_of_state[s] == want3[s]);

  BipartiteGraph g2(4, 2);
  g2.at(0, 0) = g2.at(1, 0) = g2.at(2, 0) = 1;
  g2.at(0, 1) = g2.at(3, 1) = 1;
  ComponentMap l2;
  l2.K = 9;
  l2.marginal_ks = {9, 3, 3, 3};
  const int rows2[9][4] = {{1, 2, 1, 3}, {3, 3, 3, 1}, {4, 1, 2, 2}, {2, 2, 1, 1}, {7, 2, 1, 2},
                           {5, 1, 2, 1}, {9, 1, 2, 3}, {8, 3, 3, 3}, {6, 3, 3, 2}};
  for (const auto& r : rows2) l2.rows.push_back({r[0] - 1, r[1] - 1, r[2] - 1, r[3] - 1});
  std::vector<double> w2(9);
  for (int i = 0; i < 9; ++i) w2[i] = (i + 1) / 45.0;
  const auto [j2, c2] = reconstruct(l2, g2, DomainSpec{{3, 3}}, w2);
  const int want2[9] = {0, 3, 4, 6, 5, 2, 7, 1, 8};
  for (int s = 0; s < 9; ++s) ok &= (c2.component_of_state[s] == want2[s]);

  c.pass = ok;
  c.detail = ok ? "both correspondence tables reproduced exactly" : "table mismatch";
  return c;
}

// ---------------------------------------------------------------------------
// 2. Inclusion-exclusion oracle equivalence over 200 random graphs.
// ---------------------------------------------------------------------------
Criterion criterion_inclusion_exclusion() {
  Criterion c{"inclusion-exclusion oracle equivalence"};
  Rng rng(20240601);
  double max_err = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(3, 10);
    const int m = rng.uniform_int(1, 5);
    BipartiteGraph g(n, m);
    std::vector<int> dims(m);
    for (int j = 0; j < m; ++j) {
      bool nonzero = false;
      while (!nonzero)
        for (int i = 0; i < n; ++i) {
          g.at(i, j) = rng.uniform() < 0.5 ? 1 : 0;
          nonzero |= g.at(i, j) != 0;
        }
      dims[j] = rng.uniform_int(2, 6);
    }
    KTable counts;
    counts.n = n;
    for (uint64_t mask : subsets_up_to(n, 3)) {
      const uint64_t pa = g.parent_mask(mask);
      int64_t k = 1;
      for (int j = 0; j < m; ++j)
        if (pa >> j & 1) k *= dims[j];
      counts.counts[mask] = k;
    }
    const SubsetWeightTable w = weights_from_counts(counts);
    for (uint64_t mask : subsets_up_to(n, 3)) {
      double direct = 0.0;
      for (int j = 0; j < m; ++j)
        if ((mask & ~g.children_mask(j)) == 0) direct += std::log(static_cast<double>(dims[j]));
      max_err = std::max(max_err, std::abs(comw(mask, w) - direct));
      ++checked;
    }
  }
  c.pass = max_err <= 1e-10;
  c.detail = std::to_string(checked) + " subsets, max |comW - direct| = " + std::to_string(max_err);
  return c;
}

// ---------------------------------------------------------------------------
// 3. Exact-oracle end-to-end identifiability on 50 generated models.
// ---------------------------------------------------------------------------
Criterion criterion_exact_end_to_end() {
  Criterion c{"exact-oracle end-to-end identifiability"};
  int successes = 0;
  const int trials = 50;
  std::string first_failure;
  for (int t = 0; t < trials; ++t) {
    GenConfig gen;
    gen.m = 1 + (t % 4);
    gen.n = std::min(8, gen.m + 2 + (t % 5));
    gen.seed = 52000 + static_cast<uint64_t>(t);
    const LatentCausalModel model = gen_model(gen);
    if (!validate_assumptions(model).all()) continue;

    PipelineConfig cfg = PipelineConfig::for_mode("exact");
    cfg.seed = 7000 + static_cast<uint64_t>(t);
    cfg.struct_N = 10000;
    const PipelineOutcome out = run_pipeline(model, nullptr, cfg);
    const bool ok = out.result.ok() && out.result.gamma_exact && out.result.dims_exact &&
                    out.result.joint_tv <= 1e-9;
    if (ok)
      ++successes;
    else if (first_failure.empty())
      first_failure = " first failure at seed " + std::to_string(gen.seed) + " stage " +
                      out.result.failure_stage;
  }
  c.pass = successes == trials;
  c.detail = std::to_string(successes) + "/" + std::to_string(trials) +
             " models recovered exactly (joint_tv <= 1e-9)" + first_failure;
  return c;
}

// ---------------------------------------------------------------------------
// 4. Method agreement: brute-force peeling vs Jennrich.
// ---------------------------------------------------------------------------
Criterion criterion_method_agreement() {
  Criterion c{"brute-force / Jennrich method agreement"};
  int agreements = 0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    GenConfig gen;
    gen.m = 1 + (t % 4);
    gen.n = std::min(7, gen.m + 2 + (t % 3));
    gen.seed = 61000 + static_cast<uint64_t>(t);
    const LatentCausalModel model = gen_model(gen);
    const RecoveredBipartite je =
        jennrich(build_m3(weights_from_counts(exact_k_table(model, 3))), gen.seed);
    const RecoveredBipartite bf =
        brute_force_recover(weights_from_counts(exact_k_table(model, model.n())));
    if (je.gamma.adj == bf.gamma.adj && je.dims.dims == bf.dims.dims) ++agreements;
  }

  // Nested neighborhoods: subset condition violated, no twins holds.
  BipartiteGraph g(2, 2);
  g.at(0, 0) = 1;
  g.at(0, 1) = 1;
  g.at(1, 1) = 1;
  KTable counts;
  counts.n = 2;
  counts.counts[0b01] = 4;  // pa = {H0, H1}, both binary
  counts.counts[0b10] = 2;  // pa = {H1}
  counts.counts[0b11] = 4;
  const RecoveredBipartite nested = brute_force_recover(weights_from_counts(counts));
  std::set<uint64_t> cols;
  for (int j = 0; j < nested.gamma.m; ++j) cols.insert(nested.gamma.children_mask(j));
  const bool nested_ok = nested.gamma.m == 2 && cols == std::set<uint64_t>{0b01, 0b11} &&
                         nested.dims.dims == std::vector<int>{2, 2};

  c.pass = (agreements == trials) && nested_ok;
  c.detail = std::to_string(agreements) + "/" + std::to_string(trials) + " agreements; " +
             (nested_ok ? "nested-neighborhood instance peeled correctly"
                        : "nested-neighborhood instance FAILED");
  return c;
}

// ---------------------------------------------------------------------------
// 5. Jennrich complexity contract at n = 10, 20, 40.
// ---------------------------------------------------------------------------
Criterion criterion_jennrich_complexity() {
  Criterion c{"Jennrich complexity contract"};
  Rng rng(73);
  std::vector<double> ns, times;
  double t40 = 0.0;
  for (int n : {10, 20, 40}) {
    const int m = n / 2;
    // Random distinct binary columns with linearly independent columns.
    BipartiteGraph g(n, m);
    for (;;) {
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) g.at(i, j) = rng.uniform() < 0.5 ? 1 : 0;
      bool cols_ok = g.columns_nonzero();
      if (cols_ok) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g.as_matrix());
        qr.setThreshold(1e-9);
        cols_ok = qr.rank() == m;
      }
      if (cols_ok) break;
    }
    KTable counts;
    counts.n = n;
    for (uint64_t mask : subsets_up_to(n, 3))
      counts.counts[mask] = int64_t{1} << popcount64(g.parent_mask(mask));
    const SubsetWeightTable w = weights_from_counts(counts);

    // Repeat until the measurement is comfortably above timer noise.
    int reps = 0;
    const double start = now_seconds();
    double elapsed = 0.0;
    RecoveredBipartite last;
    do {
      const SymmetricTensor3 m3 = build_m3(w);
      last = jennrich(m3, 91 + reps);
      ++reps;
      elapsed = now_seconds() - start;
    } while (elapsed < 0.05 && reps < 200);
    const double per_call = elapsed / reps;
    if (last.gamma.m != m) {
      c.detail = "recovery failed at n=" + std::to_string(n);
      return c;
    }
    ns.push_back(std::log(static_cast<double>(n)));
    times.push_back(std::log(per_call));
    if (n == 40) t40 = per_call;
  }
  // Least-squares slope through the three points.
  const double mean_x = (ns[0] + ns[1] + ns[2]) / 3.0;
  const double mean_y = (times[0] + times[1] + times[2]) / 3.0;
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    num += (ns[i] - mean_x) * (times[i] - mean_y);
    den += (ns[i] - mean_x) * (ns[i] - mean_x);
  }
  const double slope = num / den;
  c.pass = slope <= 4.5 && t40 < 60.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "log-log slope %.2f (<= 4.5), t(n=40) = %.3f s (< 60 s)", slope,
                t40);
  c.detail = buf;
  return c;
}

// ---------------------------------------------------------------------------
// 6. Linear scaling of the joint-table reconstruction in K.
// ---------------------------------------------------------------------------
Criterion criterion_reconstruct_runtime() {
  Criterion c{"joint-table reconstruction runtime"};
  // Fixed (n, m) = (4, 2): H0 -> {X0,X1,X2}, H1 -> {X0,X3}; K = s^2.
  BipartiteGraph g(4, 2);
  g.at(0, 0) = g.at(1, 0) = g.at(2, 0) = 1;
  g.at(0, 1) = g.at(3, 1) = 1;

  std::vector<double> lk, lt;
  double t1024 = 0.0;
  for (int s : {8, 16, 32}) {
    const int64_t K = static_cast<int64_t>(s) * s;
    const DomainSpec dims{{s, s}};
    ComponentMap lmap;
    lmap.K = K;
    lmap.marginal_ks = {static_cast<int>(K), s, s, s};
    for (int64_t j = 0; j < K; ++j) {
      const int h0 = static_cast<int>(j / s), h1 = static_cast<int>(j % s);
      lmap.rows.push_back({static_cast<int>(j), h0, h0, h1});
    }
    const std::vector<double> weights(K, 1.0 / static_cast<double>(K));

    int reps = 0;
    const double start = now_seconds();
    double elapsed = 0.0;
    do {
      const auto [joint, corr] = reconstruct(lmap, g, dims, weights);
      if (std::abs(joint.sum() - 1.0) > 1e-9) {
        c.detail = "reconstruction wrong at K=" + std::to_string(K);
        return c;
      }
      ++reps;
      elapsed = now_seconds() - start;
    } while (elapsed < 0.05 && reps < 5000);
    const double per_call = elapsed / reps;
    lk.push_back(std::log(static_cast<double>(K)));
    lt.push_back(std::log(per_call));
    if (K == 1024) t1024 = per_call;
  }
  const double mean_x = (lk[0] + lk[1] + lk[2]) / 3.0;
  const double mean_y = (lt[0] + lt[1] + lt[2]) / 3.0;
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    num += (lk[i] - mean_x) * (lt[i] - mean_y);
    den += (lk[i] - mean_x) * (lk[i] - mean_x);
  }
  const double slope = num / den;
  c.pass = slope >= 0.7 && slope <= 1.5 && t1024 < 1.0;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "log-log slope in K %.2f (in [0.7, 1.5]), t(K=1024) = %.4f s",
                slope, t1024);
  c.detail = buf;
  return c;
}

// ---------------------------------------------------------------------------
// 7. Desk-scale empirical reproduction at (m, n) = (2, 5), N = 10000.
// ---------------------------------------------------------------------------
Criterion criterion_empirical_desk_scale() {
  Criterion c{"desk-scale empirical pipeline at (2,5)"};
  const int trials = 20;
  std::vector<TrialResult> results(trials);
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  parallel_for(std::min(jobs, 8), trials, [&](int64_t t) {
    BenchCell cell;
    cell.m = 2;
    cell.n = 5;
    cell.N = 10000;
    cell.base_seed = 777000;
    results[t] = run_trial(cell, static_cast<int>(t), "empirical", GenConfig{}, 100000);
  });

  int failures = 0, max_shd = 0;
  double shd_sum = 0.0;
  int ok_count = 0;
  for (const auto& r : results) {
    if (!r.ok()) {
      ++failures;
      continue;
    }
    ++ok_count;
    shd_sum += r.shd;
    max_shd = std::max(max_shd, r.shd);
  }
  const double mean_shd = ok_count > 0 ? shd_sum / ok_count : 1e9;
  const double failure_rate = static_cast<double>(failures) / trials;
  c.pass = ok_count > 0 && mean_shd <= 2.0 && max_shd <= 6 && failure_rate <= 0.25;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "mean SHD %.2f (<= 2.0), max SHD %d (<= 6), failures %d/%d (<= 25%%)", mean_shd,
                max_shd, failures, trials);
  c.detail = buf;
  return c;
}

// ---------------------------------------------------------------------------
// 8. Structure-learning sanity and score equivalence.
// ---------------------------------------------------------------------------
Criterion criterion_structure_learning() {
  Criterion c{"structure-learning recovery and score equivalence"};
  const int trials = 30;
  int exact = 0;
  double shd_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    GenConfig gen;
    gen.m = 2 + (t % 3);
    gen.n = gen.m * 2;
    gen.seed = 81000 + static_cast<uint64_t>(t);
    const LatentCausalModel model = gen_model(gen);
    const DiscreteDataset data =
        dataset_from_table(model.joint, 100000, 4500 + static_cast<uint64_t>(t));
    const Cpdag est = greedy_search(data);
    const int s = shd(est, dag_to_cpdag(model.lambda));
    shd_sum += s;
    if (s == 0) ++exact;
  }
  const double mean_shd = shd_sum / trials;
  const double exact_rate = static_cast<double>(exact) / trials;

  // Score equivalence over every equivalence class for m <= 4.
  bool equivalence_ok = true;
  for (int m = 2; m <= 4 && equivalence_ok; ++m) {
    GenConfig gen;
    gen.m = m;
    gen.n = m * 2;
    gen.seed = 90000 + static_cast<uint64_t>(m);
    const LatentCausalModel model = gen_model(gen);
    const DiscreteDataset data = dataset_from_table(model.joint, 3000, 17);

    std::vector<std::pair<int, int>> slots;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) slots.push_back({i, j});
    std::map<std::string, double> class_score;
    std::vector<int> state(slots.size(), 0);
    for (;;) {
      LatentDag dag;
      dag.m = m;
      for (size_t s = 0; s < slots.size(); ++s) {
        if (state[s] == 1) dag.edges.insert(slots[s]);
        if (state[s] == 2) dag.edges.insert({slots[s].second, slots[s].first});
      }
      if (dag.is_acyclic()) {
        const Cpdag cls = dag_to_cpdag(dag);
        std::string key;
        for (const auto& [a, b] : cls.directed)
          key += std::to_string(a) + ">" + std::to_string(b) + ";";
        for (const auto& [a, b] : cls.undirected)
          key += std::to_string(a) + "-" + std::to_string(b) + ";";
        const double score = bic_score(data, dag);
        auto [it, inserted] = class_score.try_emplace(key, score);
        if (!inserted && std::abs(it->second - score) > 1e-7 * (1.0 + std::abs(score)))
          equivalence_ok = false;
      }
      size_t pos = 0;
      while (pos < state.size() && ++state[pos] == 3) state[pos++] = 0;
      if (pos == state.size()) break;
    }
  }

  c.pass = exact_rate >= 0.8 && mean_shd <= 0.5 && equivalence_ok;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "exact CPDAG %d/%d (>= 80%%), mean SHD %.3f (<= 0.5), score equivalence %s", exact,
                trials, mean_shd, equivalence_ok ? "holds" : "VIOLATED");
  c.detail = buf;
  return c;
}

}  // namespace

int main() {
  const std::vector<std::function<Criterion()>> criteria = {
      criterion_worked_examples,     criterion_inclusion_exclusion,
      criterion_exact_end_to_end,    criterion_method_agreement,
      criterion_jennrich_complexity, criterion_reconstruct_runtime,
      criterion_empirical_desk_scale, criterion_structure_learning,
  };

  bool all_pass = true;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const double start = now_seconds();
    Criterion c;
    try {
      c = criteria[i]();
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = now_seconds() - start;
    all_pass &= c.pass;
    std::printf("[%s] criterion %zu: %s — %s (%.2f s)\n", c.pass ? "PASS" : "FAIL", i + 1,
                c.name.c_str(), c.detail.c_str(), c.seconds);
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
