#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "otnfm/errors.hpp"
#include "otnfm/eval.hpp"

using namespace otnfm;

namespace {

PointBatch random_cloud(int n, Rng& rng, double scale = 1.0) {
  Tensor x = Tensor::zeros({n, 2});
  rng.fill_normal(x.values_mut());
  for (double& v : x.values_mut()) v *= scale;
  return x;
}

}  // namespace

TEST_CASE("w2_squared") {
  Rng rng(1, 1);

  SUBCASE("identical clouds") {
    PointBatch a = random_cloud(32, rng);
    CHECK(w2_squared(a, a) == 0.0);
  }

  SUBCASE("constant shift costs its squared norm") {
    PointBatch a = random_cloud(32, rng);
    PointBatch b = a.detach();
    for (int i = 0; i < b.rows(); ++i) {
      b.at_mut(i, 0) += 3.0;
      b.at_mut(i, 1) += -4.0;
    }
    CHECK(w2_squared(a, b) == doctest::Approx(25.0).epsilon(1e-12));
  }

  SUBCASE("n = 6 against the permutation oracle") {
    for (int rep = 0; rep < 5; ++rep) {
      PointBatch a = random_cloud(6, rng);
      PointBatch b = random_cloud(6, rng);
      Tensor c = cost_matrix(a, b);
      const std::vector<double> cv(c.values().begin(), c.values().end());
      const double want = oracles::brute_force_assignment_cost(cv, 6) / 6.0;
      CHECK(w2_squared(a, b) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  SUBCASE("symmetry") {
    PointBatch a = random_cloud(16, rng);
    PointBatch b = random_cloud(16, rng);
    CHECK(w2_squared(a, b) == doctest::Approx(w2_squared(b, a)).epsilon(1e-12));
  }

  SUBCASE("minimality: any fixed pairing is an upper bound") {
    PointBatch a = random_cloud(16, rng);
    PointBatch b = random_cloud(16, rng);
    double fixed = 0.0;
    for (int i = 0; i < 16; ++i)
      for (int k = 0; k < 2; ++k) {
        const double d = a.at(i, k) - b.at(i, k);
        fixed += d * d / 16.0;
      }
    CHECK(w2_squared(a, b) <= fixed + 1e-12);
  }

  SUBCASE("size mismatch rejected") {
    PointBatch a = random_cloud(4, rng);
    PointBatch b = random_cloud(5, rng);
    CHECK_THROWS_AS(w2_squared(a, b), Error);
  }
}

TEST_CASE("collapse_index") {
  Rng rng(3, 1);
  PointBatch target = random_cloud(256, rng, 2.0);

  double tmx = 0, tmy = 0;
  for (int i = 0; i < target.rows(); ++i) {
    tmx += target.at(i, 0) / target.rows();
    tmy += target.at(i, 1) / target.rows();
  }

  SUBCASE("all generated points at the target mean") {
    PointBatch gen = Tensor::zeros({64, 2});
    for (int i = 0; i < 64; ++i) {
      gen.at_mut(i, 0) = tmx;
      gen.at_mut(i, 1) = tmy;
    }
    const auto ci = collapse_index(gen, target);
    CHECK(ci.mean_dist == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ci.var_ratio == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("generated equal to target") {
    const auto ci = collapse_index(target, target);
    CHECK(ci.var_ratio == doctest::Approx(1.0).epsilon(1e-12));
    double want = 0.0;
    for (int i = 0; i < target.rows(); ++i)
      want += std::hypot(target.at(i, 0) - tmx, target.at(i, 1) - tmy) /
              target.rows();
    CHECK(ci.mean_dist == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("shrinking about the mean scales the ratio quadratically") {
    PointBatch gen = target.detach();
    for (int i = 0; i < gen.rows(); ++i) {
      gen.at_mut(i, 0) = tmx + 0.5 * (gen.at(i, 0) - tmx);
      gen.at_mut(i, 1) = tmy + 0.5 * (gen.at(i, 1) - tmy);
    }
    const auto ci = collapse_index(gen, target);
    CHECK(ci.var_ratio == doctest::Approx(0.25).epsilon(1e-12));
  }

  SUBCASE("fewer than two points rejected") {
    PointBatch one = Tensor::zeros({1, 2});
    CHECK_THROWS_AS(collapse_index(one, target), Error);
  }
}

TEST_CASE("run_benchmark protocol") {
  // Small but real: one task, one method, two seeds.
  BenchmarkTask task{"gauss-gauss", DistributionSpec::parse("gaussian"),
                     DistributionSpec::parse("gaussian")};
  MethodSpec method{"ot-nfm", FlowMode::NeuralFlow, CouplingStrategy::Global,
                    Schedule{}, 1};
  BenchmarkSettings s;
  s.steps = 300;
  s.batch = 64;
  s.n_train = 256;
  s.n_eval = 256;
  s.net.hidden = 32;
  s.net.blocks = 2;
  s.net.time_feat_k = 4;
  s.threads = 2;

  const std::vector<std::uint64_t> seeds{0, 1};
  auto reports = run_benchmark({task}, {method}, seeds, s);
  REQUIRE(reports.size() == 1);
  const BenchmarkReport& r = reports[0];
  CHECK(r.task == "gauss-gauss");
  CHECK(r.method == "ot-nfm");
  CHECK(r.nfe == 1);
  REQUIRE(r.w2sq.size() == 2);  // exactly one value per seed
  for (double v : r.w2sq) {
    CHECK(std::isfinite(v));
    CHECK(v < 0.05);  // self transport at toy scale
  }
  // mean/std recomputable from the per-seed values
  const double mean = (r.w2sq[0] + r.w2sq[1]) / 2.0;
  CHECK(r.mean == doctest::Approx(mean).epsilon(1e-12));

  // Rerun: identical per-seed values.
  auto again = run_benchmark({task}, {method}, seeds, s);
  for (int i = 0; i < 2; ++i) CHECK(again[0].w2sq[i] == r.w2sq[i]);
}
