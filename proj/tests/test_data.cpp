#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "otnfm/data.hpp"
#include "otnfm/errors.hpp"

using namespace otnfm;

TEST_CASE("gaussian moments") {
  Rng rng(1, 1);
  PointBatch x = sample(DistributionSpec::parse("gaussian"), 100000, rng);
  double mx = 0, my = 0;
  const int n = x.rows();
  for (int i = 0; i < n; ++i) {
    mx += x.at(i, 0) / n;
    my += x.at(i, 1) / n;
  }
  CHECK(std::abs(mx) < 0.02);
  CHECK(std::abs(my) < 0.02);
  double cxx = 0, cyy = 0, cxy = 0;
  for (int i = 0; i < n; ++i) {
    cxx += (x.at(i, 0) - mx) * (x.at(i, 0) - mx) / (n - 1);
    cyy += (x.at(i, 1) - my) * (x.at(i, 1) - my) / (n - 1);
    cxy += (x.at(i, 0) - mx) * (x.at(i, 1) - my) / (n - 1);
  }
  CHECK(std::abs(cxx - 1.0) < 0.05);
  CHECK(std::abs(cyy - 1.0) < 0.05);
  CHECK(std::abs(cxy) < 0.05);
}

TEST_CASE("checkerboard tiles") {
  Rng rng(2, 1);
  const auto spec = DistributionSpec::parse("checkerboard");
  const int n = 10000;
  PointBatch x = sample(spec, n, rng);

  // Analytic tile membership: active tiles have even (row + col) parity.
  std::vector<int> counts(16, 0);
  for (int i = 0; i < n; ++i) {
    const double px = x.at(i, 0), py = x.at(i, 1);
    CHECK(px >= -4.0);
    CHECK(px <= 4.0);
    CHECK(py >= -4.0);
    CHECK(py <= 4.0);
    const int col = std::min(3, static_cast<int>(std::floor((px + 4.0) / 2.0)));
    const int row = std::min(3, static_cast<int>(std::floor((py + 4.0) / 2.0)));
    CHECK((row + col) % 2 == 0);
    ++counts[row * 4 + col];
  }

  // Exactly the 8 active tiles receive mass, n/8 +- 4 sqrt(n) each.
  const double lo = n / 8.0 - 4.0 * std::sqrt(static_cast<double>(n));
  const double hi = n / 8.0 + 4.0 * std::sqrt(static_cast<double>(n));
  int active = 0;
  for (int t = 0; t < 16; ++t) {
    if ((t / 4 + t % 4) % 2 == 0) {
      ++active;
      CHECK(counts[t] >= lo);
      CHECK(counts[t] <= hi);
    } else {
      CHECK(counts[t] == 0);
    }
  }
  CHECK(active == 8);
}

TEST_CASE("eight-gaussian ring hits its anchors") {
  Rng rng(3, 1);
  const auto spec = DistributionSpec::parse("8gmm");
  const int n = 10000;
  PointBatch x = sample(spec, n, rng);

  // Nearest-anchor clustering; per-cluster means must sit on the anchors.
  std::vector<double> ax(8), ay(8);
  for (int k = 0; k < 8; ++k) {
    ax[k] = 4.0 * std::cos(2.0 * M_PI * k / 8.0);
    ay[k] = 4.0 * std::sin(2.0 * M_PI * k / 8.0);
  }
  std::vector<double> sx(8, 0), sy(8, 0);
  std::vector<int> cnt(8, 0);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double bd = 1e300;
    for (int k = 0; k < 8; ++k) {
      const double d = (x.at(i, 0) - ax[k]) * (x.at(i, 0) - ax[k]) +
                       (x.at(i, 1) - ay[k]) * (x.at(i, 1) - ay[k]);
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    sx[best] += x.at(i, 0);
    sy[best] += x.at(i, 1);
    ++cnt[best];
  }
  for (int k = 0; k < 8; ++k) {
    REQUIRE(cnt[k] > 0);
    const double mx = sx[k] / cnt[k], my = sy[k] / cnt[k];
    CHECK(std::hypot(mx - ax[k], my - ay[k]) < 0.1);
  }
}

TEST_CASE("two moons stay in their bands") {
  Rng rng(4, 1);
  DistributionSpec spec = DistributionSpec::parse("moons");
  const int n = 20000;
  PointBatch x = sample(spec, n, rng);

  // Derived from the generator: pre-scale coordinates y_pre = y/2 + 0.25.
  // Upper-arc points have y_pre >= -3*sigma, lower-arc y_pre <= 0.5 + 3*sigma;
  // classify by the nearest noiseless arc and allow a 4-sigma noise margin.
  const double margin = 4.0 * spec.moons_noise;
  int upper_n = 0;
  for (int i = 0; i < n; ++i) {
    const double xp = x.at(i, 0) / spec.moons_scale + 0.5;
    const double yp = x.at(i, 1) / spec.moons_scale + 0.25;
    double d_up = 1e300, d_lo = 1e300;
    for (int g = 0; g <= 200; ++g) {
      const double th = M_PI * g / 200.0;
      d_up = std::min(d_up, std::hypot(xp - std::cos(th), yp - std::sin(th)));
      d_lo = std::min(d_lo, std::hypot(xp - (1.0 - std::cos(th)),
                                       yp - (0.5 - std::sin(th))));
    }
    CHECK(std::min(d_up, d_lo) < margin);
    if (d_up < d_lo) {
      ++upper_n;
      CHECK(yp >= -0.2 - 3.0 * spec.moons_noise);
    } else {
      CHECK(yp <= 0.7 + 3.0 * spec.moons_noise);
    }
  }
  // Both branches get roughly half the mass.
  CHECK(upper_n > n / 3);
  CHECK(upper_n < 2 * n / 3);
}

TEST_CASE("support bounds for every kind") {
  const char* names[] = {"gaussian", "checkerboard", "spiral",
                         "crescent", "8gmm", "moons"};
  for (const char* name : names) {
    Rng rng(5, 1);
    PointBatch x = sample(DistributionSpec::parse(name), 1000000, rng);
    double worst = 0.0;
    for (double v : x.values()) worst = std::max(worst, std::abs(v));
    CHECK(worst <= 10.0);
  }
}

TEST_CASE("make_dataset") {
  const auto p0 = DistributionSpec::parse("gaussian");
  const auto p1 = DistributionSpec::parse("moons");

  SUBCASE("same seed twice gives identical arrays") {
    Dataset a = make_dataset(p0, p1, 512, 99);
    Dataset b = make_dataset(p0, p1, 512, 99);
    for (std::size_t i = 0; i < a.x0.size(); ++i)
      CHECK(a.x0.values()[i] == b.x0.values()[i]);
    for (std::size_t i = 0; i < a.x1.size(); ++i)
      CHECK(a.x1.values()[i] == b.x1.values()[i]);
  }

  SUBCASE("source and target streams are independent") {
    Dataset d = make_dataset(p0, p0, 10000, 7);
    std::vector<double> a, b;
    for (int i = 0; i < d.x0.rows(); ++i) {
      a.push_back(d.x0.at(i, 0));
      b.push_back(d.x1.at(i, 0));
    }
    CHECK(std::abs(oracles::pearson_r(a, b)) < 0.05);
  }

  SUBCASE("n = 0 rejected") {
    CHECK_THROWS_AS(make_dataset(p0, p1, 0, 1), Error);
  }
}

TEST_CASE("unknown distribution rejected") {
  CHECK_THROWS_AS(DistributionSpec::parse("donut"), ConfigError);
}
