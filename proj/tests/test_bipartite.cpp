#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latentmix/bipartite.hpp"
#include "latentmix/datagen.hpp"
#include "test_support.hpp"

using namespace latentmix;
using lmtest::fig3_model;

namespace {

// Direct intersection oracle: sum of w over common neighbors of S.
double comw_direct(const BipartiteGraph& g, const std::vector<int>& dims, uint64_t mask) {
  double total = 0.0;
  for (int j = 0; j < g.m; ++j) {
    const uint64_t nb = g.children_mask(j);
    if ((mask & ~nb) == 0) total += std::log(static_cast<double>(dims[j]));
  }
  return total;
}

KTable k_table_from_graph(const BipartiteGraph& g, const std::vector<int>& dims, int t) {
  KTable table;
  table.n = g.n;
  for (uint64_t mask : subsets_up_to(g.n, t)) {
    const uint64_t pa = g.parent_mask(mask);
    int64_t k = 1;
    for (int j = 0; j < g.m; ++j)
      if (pa >> j & 1) k *= dims[j];
    table.counts[mask] = k;
  }
  return table;
}

bool same_recovery(const RecoveredBipartite& a, const RecoveredBipartite& b) {
  return a.gamma.adj == b.gamma.adj && a.dims.dims == b.dims.dims && a.gamma.m == b.gamma.m;
}

}  // namespace

TEST_CASE("weights_from_counts takes logarithms") {
  KTable counts;
  counts.n = 3;
  counts.counts[0b001] = 1;
  counts.counts[0b010] = 4;
  counts.counts[0b111] = 8;
  const SubsetWeightTable w = weights_from_counts(counts);
  CHECK(w.of(0b001) == 0.0);
  CHECK(w.of(0b010) == Catch::Approx(std::log(4.0)));
  CHECK(w.of(0b111) == Catch::Approx(std::log(8.0)));

  counts.counts[0b100] = 0;
  CHECK_THROWS_AS(weights_from_counts(counts), std::invalid_argument);
}

TEST_CASE("comw on singletons equals W") {
  const LatentCausalModel model = fig3_model();
  const SubsetWeightTable w = weights_from_counts(exact_k_table(model, 3));
  CHECK(comw(0b001, w) == Catch::Approx(std::log(4.0)));
}

TEST_CASE("comw recovers the common-parent weight on the triangle graph") {
  const LatentCausalModel model = fig3_model();
  const SubsetWeightTable w = weights_from_counts(exact_k_table(model, 3));
  // X0 and X1 share exactly H0 (binary): comW = ln 2
  CHECK(comw(0b011, w) == Catch::Approx(std::log(2.0)).margin(1e-12));
  // all three share nothing
  CHECK(comw(0b111, w) == Catch::Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(comw(0b1011, w), IncompleteTableError);
}

TEST_CASE("inclusion-exclusion equals the direct intersection oracle on random graphs") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = rng.uniform_int(3, 10);
    const int m = rng.uniform_int(1, 5);
    auto [g, dims] = lmtest::random_gamma_dims(rng, n, m);
    const SubsetWeightTable w = weights_from_counts(k_table_from_graph(g, dims, 3));
    for (uint64_t mask : subsets_up_to(n, 3))
      CHECK(comw(mask, w) == Catch::Approx(comw_direct(g, dims, mask)).margin(1e-10));
  }
}

TEST_CASE("build_m3 diagonal entries are the singleton weights") {
  const LatentCausalModel model = fig3_model();
  const SubsetWeightTable w = weights_from_counts(exact_k_table(model, 3));
  const SymmetricTensor3 t3 = build_m3(w);
  for (int i = 0; i < 3; ++i) CHECK(t3.at(i, i, i) == Catch::Approx(w.of(uint64_t{1} << i)));
}

TEST_CASE("build_m3 matches the rank-three expansion for the triangle graph") {
  const LatentCausalModel model = fig3_model();
  const SymmetricTensor3 t3 = build_m3(weights_from_counts(exact_k_table(model, 3)));
  // M3 = ln2 (a0^x3 + a1^x3 + a2^x3), a0=(1,1,0), a1=(1,0,1), a2=(0,1,1)
  const double ln2 = std::log(2.0);
  Eigen::MatrixXd a(3, 3);
  a << 1, 1, 0, 1, 0, 1, 0, 1, 1;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        double want = 0;
        for (int c = 0; c < 3; ++c) want += ln2 * a(i, c) * a(j, c) * a(k, c);
        CHECK(t3.at(i, j, k) == Catch::Approx(want).margin(1e-12));
      }
  CHECK(t3.at(0, 1, 2) == Catch::Approx(0.0).margin(1e-12));
  CHECK(t3.at(0, 0, 1) == Catch::Approx(ln2).margin(1e-12));
  // symmetry under index permutations
  CHECK(t3.at(0, 1, 1) == t3.at(1, 0, 1));
  CHECK(t3.at(0, 1, 1) == t3.at(1, 1, 0));
}

TEST_CASE("all counts 1 give the zero tensor and an empty recovery") {
  KTable counts;
  counts.n = 4;
  for (uint64_t mask : subsets_up_to(4, 3)) counts.counts[mask] = 1;
  const SymmetricTensor3 t3 = build_m3(weights_from_counts(counts));
  CHECK(t3.frobenius_norm() == 0.0);
  const RecoveredBipartite rb = jennrich(t3, 1);
  CHECK(rb.gamma.m == 0);
}

TEST_CASE("jennrich on a rank-one tensor") {
  SymmetricTensor3 t3(3);
  const double ln2 = std::log(2.0);
  const double a[3] = {1, 1, 0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) t3.at(i, j, k) = ln2 * a[i] * a[j] * a[k];
  const RecoveredBipartite rb = jennrich(t3, 3);
  REQUIRE(rb.gamma.m == 1);
  CHECK(rb.gamma.children_mask(0) == 0b011);
  CHECK(rb.dims.dims[0] == 2);
}

TEST_CASE("jennrich recovers the triangle graph from its exact tensor") {
  const LatentCausalModel model = fig3_model();
  const SymmetricTensor3 t3 = build_m3(weights_from_counts(exact_k_table(model, 3)));
  const RecoveredBipartite rb = jennrich(t3, 5);
  REQUIRE(rb.gamma.m == 3);
  std::set<uint64_t> cols;
  for (int j = 0; j < 3; ++j) {
    cols.insert(rb.gamma.children_mask(j));
    CHECK(rb.dims.dims[j] == 2);
  }
  CHECK(cols == std::set<uint64_t>{0b011, 0b101, 0b110});
}

TEST_CASE("jennrich is exact on generated models with independent columns") {
  for (uint64_t seed = 0; seed < 15; ++seed) {
    GenConfig cfg;
    cfg.m = 1 + static_cast<int>(seed % 5);
    cfg.n = std::min(10, cfg.m * 2 + 2);
    cfg.seed = 3000 + seed;
    const LatentCausalModel model = gen_model(cfg);
    const SymmetricTensor3 t3 = build_m3(weights_from_counts(exact_k_table(model, 3)));
    const RecoveredBipartite rb = jennrich(t3, seed);
    REQUIRE(rb.gamma.m == model.m());
    // Columns and dims agree as multisets of (neighborhood, dim) pairs.
    std::multiset<std::pair<uint64_t, int>> want, got;
    for (int j = 0; j < model.m(); ++j) {
      want.insert({model.gamma.children_mask(j), model.dims.dims[j]});
      got.insert({rb.gamma.children_mask(j), rb.dims.dims[j]});
    }
    CHECK(want == got);
  }
}

TEST_CASE("jennrich rounding stays near-binary on exact input") {
  const LatentCausalModel model = fig3_model();
  const SymmetricTensor3 t3 = build_m3(weights_from_counts(exact_k_table(model, 3)));
  const RecoveredBipartite rb = jennrich(t3, 5);
  for (int i = 0; i < rb.raw_columns.rows(); ++i)
    for (int j = 0; j < rb.raw_columns.cols(); ++j) {
      const double v = rb.raw_columns(i, j);
      CHECK(std::min(std::abs(v), std::abs(v - 1.0)) < 0.05);
    }
}

TEST_CASE("als fallback selects the smallest fitting rank") {
  SymmetricTensor3 t3(3);
  const double ln2 = std::log(2.0);
  const double a[3] = {1, 0, 1};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) t3.at(i, j, k) = ln2 * a[i] * a[j] * a[k];
  const RecoveredBipartite rb = als_fallback(t3, {1, 2, 3}, 7);
  CHECK(rb.gamma.m == 1);
  CHECK(rb.method == "als");
}

TEST_CASE("als fallback agrees with jennrich on the triangle tensor") {
  const LatentCausalModel model = fig3_model();
  const SymmetricTensor3 t3 = build_m3(weights_from_counts(exact_k_table(model, 3)));
  const RecoveredBipartite je = jennrich(t3, 5);
  const RecoveredBipartite al = als_fallback(t3, {2, 3, 4}, 11);
  CHECK(al.gamma.m == 3);
  CHECK(same_recovery(je, al));
}

TEST_CASE("als on a noisy tensor reports the residual") {
  const LatentCausalModel model = fig3_model();
  KTable counts = exact_k_table(model, 3);
  counts.counts[0b011] += 1;  // one pair count off by one
  const SymmetricTensor3 t3 = build_m3(weights_from_counts(counts));
  AlsOptions opt;
  opt.als_tol_rel = 0.2;
  opt.round_tol = 0.45;
  try {
    const RecoveredBipartite rb = als_fallback(t3, {2, 3, 4}, 13, opt);
    CHECK(rb.residual_rel > 0.0);  // noise shows up in the reported fit
  } catch (const AlsFailure& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("brute force: zero table gives zero hidden variables") {
  KTable counts;
  counts.n = 3;
  for (uint64_t mask : subsets_up_to(3, 3)) counts.counts[mask] = 1;
  const RecoveredBipartite rb = brute_force_recover(weights_from_counts(counts));
  CHECK(rb.gamma.m == 0);
}

TEST_CASE("brute force recovers the triangle graph") {
  const LatentCausalModel model = fig3_model();
  const RecoveredBipartite rb =
      brute_force_recover(weights_from_counts(exact_k_table(model, model.n())));
  REQUIRE(rb.gamma.m == 3);
  std::set<uint64_t> cols;
  for (int j = 0; j < 3; ++j) {
    cols.insert(rb.gamma.children_mask(j));
    CHECK(rb.raw_weights[j] == Catch::Approx(std::log(2.0)).margin(1e-9));
  }
  CHECK(cols == std::set<uint64_t>{0b011, 0b101, 0b110});
}

TEST_CASE("brute force peels nested neighborhoods that violate the subset condition") {
  const LatentCausalModel model = lmtest::nested_model();
  const RecoveredBipartite rb =
      brute_force_recover(weights_from_counts(exact_k_table(model, model.n())));
  REQUIRE(rb.gamma.m == 2);
  std::set<uint64_t> cols;
  for (int j = 0; j < 2; ++j) cols.insert(rb.gamma.children_mask(j));
  CHECK(cols == std::set<uint64_t>{0b01, 0b11});
  CHECK(rb.dims.dims == std::vector<int>{2, 2});
}

TEST_CASE("brute force and jennrich agree on generated models") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    GenConfig cfg;
    cfg.m = 1 + static_cast<int>(seed % 4);
    cfg.n = std::min(7, cfg.m + 3);
    cfg.seed = 4000 + seed;
    const LatentCausalModel model = gen_model(cfg);
    const RecoveredBipartite je =
        jennrich(build_m3(weights_from_counts(exact_k_table(model, 3))), seed);
    const RecoveredBipartite bf =
        brute_force_recover(weights_from_counts(exact_k_table(model, model.n())));
    CHECK(same_recovery(je, bf));
  }
}
