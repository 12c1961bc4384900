#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "otnfm/errors.hpp"
#include "otnfm/nn.hpp"

using namespace otnfm;

TEST_CASE("spectral_normalize") {
  SUBCASE("diagonal matrix with known singular values") {
    Tensor w = Tensor::from({2, 2}, {2.0, 0.0, 0.0, 0.5});
    Tensor r = spectral_normalize(w, 0.9, 50);
    CHECK(r.at(0, 0) == doctest::Approx(0.9).epsilon(1e-10));
    CHECK(r.at(1, 1) == doctest::Approx(0.5 * 0.45).epsilon(1e-10));
    SpectralState s;
    CHECK(estimate_top_singular(r, s, 50) == doctest::Approx(0.9).epsilon(1e-9));
  }

  SUBCASE("already contractive matrix unchanged") {
    Tensor w = Tensor::from({2, 2}, {0.3, 0.1, -0.2, 0.25});
    SpectralState s;
    REQUIRE(estimate_top_singular(w, s, 50) < 0.9);
    Tensor r = spectral_normalize(w, 0.9, 50);
    for (std::size_t i = 0; i < w.size(); ++i)
      CHECK(r.values()[i] == w.values()[i]);
  }

  SUBCASE("zero matrix unchanged") {
    Tensor w = Tensor::zeros({3, 3});
    Tensor r = spectral_normalize(w, 0.9, 5);
    for (double v : r.values()) CHECK(v == 0.0);
  }

  SUBCASE("power iteration vs Jacobi SVD oracle") {
    Rng rng(13, 1);
    for (int rep = 0; rep < 10; ++rep) {
      Tensor w = Tensor::zeros({8, 8});
      rng.fill_normal(w.values_mut());
      SpectralState s;
      // 5 warm-started iterations: estimate twice, keep the warm state.
      estimate_top_singular(w, s, 5);
      const double est = estimate_top_singular(w, s, 5);
      const std::vector<double> a(w.values().begin(), w.values().end());
      const double ref = oracles::top_singular_jacobi(a, 8, 8);
      CHECK(std::abs(est - ref) / ref < 1e-2);
    }
  }
}

TEST_CASE("time_features") {
  SUBCASE("t = 0") {
    const auto f = time_features(0.0, 8);
    REQUIRE(f.size() == 9);
    CHECK(f[0] == 0.0);
    for (int j = 0; j < 4; ++j) {
      CHECK(f[1 + 2 * j] == 0.0);  // sin
      CHECK(f[2 + 2 * j] == 1.0);  // cos
    }
  }

  SUBCASE("integer frequencies wrap, raw t distinguishes") {
    const auto f0 = time_features(0.0, 8);
    const auto f1 = time_features(1.0, 8);
    for (std::size_t i = 1; i < f0.size(); ++i)
      CHECK(f0[i] == doctest::Approx(f1[i]).epsilon(1e-12));
    CHECK(f0[0] != f1[0]);
  }

  SUBCASE("k = 4 matches the direct formula") {
    const double t = 0.37;
    const auto f = time_features(t, 4);
    REQUIRE(f.size() == 5);
    CHECK(f[0] == t);
    CHECK(f[1] == std::sin(2.0 * M_PI * 1.0 * t));
    CHECK(f[2] == std::cos(2.0 * M_PI * 1.0 * t));
    CHECK(f[3] == std::sin(2.0 * M_PI * 2.0 * t));
    CHECK(f[4] == std::cos(2.0 * M_PI * 2.0 * t));
  }

  SUBCASE("odd k rejected") { CHECK_THROWS_AS(time_features(0.5, 3), Error); }
}

namespace {

ResidualNetConfig small_cfg() {
  ResidualNetConfig cfg;
  cfg.hidden = 16;
  cfg.blocks = 2;
  cfg.time_feat_k = 4;
  return cfg;
}

Tensor tfeat_matrix(int n, double t, int k) {
  const auto f = time_features(t, k);
  Tensor out = Tensor::zeros({n, static_cast<int>(f.size())});
  auto v = out.values_mut();
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f.size(); ++j) v[i * f.size() + j] = f[j];
  return out;
}

}  // namespace

TEST_CASE("residual net forward") {
  SUBCASE("all weights zero: constant map equal to the output bias") {
    Tape tape;
    Rng rng(1, 1);
    ResidualNet net(small_cfg(), tape, rng);
    for (Tensor* p : net.params())
      for (double& v : p->values_mut()) v = 0.0;
    net.out_bias.values_mut()[0] = 0.7;
    net.out_bias.values_mut()[1] = -0.3;

    Tensor x = Tensor::from({2, 2}, {1, 2, -3, 4});
    Tensor y = net.forward(x, tfeat_matrix(2, 0.5, 4));
    for (int i = 0; i < 2; ++i) {
      CHECK(y.at(i, 0) == 0.7);
      CHECK(y.at(i, 1) == -0.3);
    }
  }

  SUBCASE("blocks with W2 = 0 act as the identity on the hidden state") {
    Tape tape;
    Rng rng(2, 1);
    ResidualNetConfig cfg = small_cfg();
    ResidualNet with_blocks(cfg, tape, rng);
    for (auto& b : with_blocks.blocks)
      for (double& v : b.w2.values_mut()) v = 0.0;

    ResidualNetConfig no_blocks_cfg = cfg;
    no_blocks_cfg.blocks = 0;
    Rng rng2(3, 1);
    ResidualNet no_blocks(no_blocks_cfg, tape, rng2);
    // Same projections in both nets.
    for (std::size_t i = 0; i < with_blocks.in_proj.size(); ++i)
      no_blocks.in_proj.values_mut()[i] = with_blocks.in_proj.values()[i];
    for (std::size_t i = 0; i < with_blocks.in_bias.size(); ++i)
      no_blocks.in_bias.values_mut()[i] = with_blocks.in_bias.values()[i];
    for (std::size_t i = 0; i < with_blocks.out_proj.size(); ++i)
      no_blocks.out_proj.values_mut()[i] = with_blocks.out_proj.values()[i];
    for (std::size_t i = 0; i < with_blocks.out_bias.size(); ++i)
      no_blocks.out_bias.values_mut()[i] = with_blocks.out_bias.values()[i];

    Rng data_rng(4, 1);
    Tensor x = Tensor::zeros({5, 2});
    data_rng.fill_normal(x.values_mut());
    Tensor tf = tfeat_matrix(5, 0.3, 4);
    Tensor ya = with_blocks.forward(x, tf);
    Tensor yb = no_blocks.forward(x, tf);
    for (std::size_t i = 0; i < ya.size(); ++i)
      CHECK(ya.values()[i] == doctest::Approx(yb.values()[i]).epsilon(1e-14));
  }

  SUBCASE("gradient check through two blocks") {
    Tape tape;
    Rng rng(5, 1);
    ResidualNetConfig cfg = small_cfg();
    cfg.norm_iters_init = 30;
    ResidualNet net(cfg, tape, rng);
    // Give the zero-initialized output projection some signal.
    rng.fill_normal(net.out_proj.values_mut());

    Tensor x = Tensor::zeros({3, 2});
    Tensor y = Tensor::zeros({3, 2});
    rng.fill_normal(x.values_mut());
    rng.fill_normal(y.values_mut());
    Tensor tf = tfeat_matrix(3, 0.42, 4);

    auto ptrs = net.params();
    std::vector<Tensor> params;
    for (Tensor* p : ptrs) params.push_back(*p);
    const double err =
        grad_check([&]() { return mse(net.forward(x, tf), y); }, params);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tape tape;
    Tensor p = Tensor::param({3}, tape);
    p.values_mut()[0] = 1.0;
    p.values_mut()[1] = -2.0;
    p.values_mut()[2] = 0.5;
    Adam opt;
    std::vector<Tensor*> params{&p};
    opt.step(params, 0.1);
    CHECK(p.values()[0] == 1.0);
    CHECK(p.values()[1] == -2.0);
    CHECK(p.values()[2] == 0.5);
  }

  SUBCASE("1-D quadratic reaches the minimizer") {
    Tape tape;
    Tensor x = Tensor::param({}, tape);
    x.values_mut()[0] = 3.0;
    Adam opt;
    std::vector<Tensor*> params{&x};
    for (int i = 0; i < 200; ++i) {
      Tensor loss = sum(mul(x, x));
      tape.backward(loss);
      opt.step(params, 0.1);
    }
    CHECK(std::abs(x.value()) < 1e-3);
  }

  SUBCASE("bias-corrected first step has magnitude ~lr for a unit gradient") {
    Tape tape;
    Tensor x = Tensor::param({}, tape);
    x.values_mut()[0] = 2.0;
    x.grad_mut()[0] = 1.0;
    Adam opt(0.9, 0.999, 1e-8);
    std::vector<Tensor*> params{&x};
    opt.step(params, 0.05);
    // Closed form: m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps).
    const double want = 2.0 - 0.05 / (1.0 + 1e-8);
    CHECK(x.value() == doctest::Approx(want).epsilon(1e-9));
  }

  SUBCASE("non-finite gradient aborts") {
    Tape tape;
    Tensor x = Tensor::param({}, tape);
    x.grad_mut()[0] = std::nan("");
    Adam opt;
    std::vector<Tensor*> params{&x};
    CHECK_THROWS_AS(opt.step(params, 0.1), NumericAbort);
  }
}

TEST_CASE("cosine_lr") {
  CHECK(cosine_lr(0, 100, 0.5) == doctest::Approx(0.5));
  CHECK(cosine_lr(100, 100, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_lr(50, 100, 0.5) == doctest::Approx(0.25));
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.5), Error);
}

TEST_CASE("contractivity is preserved across optimizer steps") {
  // Train the net on a displacement target that a contractive field can
  // represent, re-normalizing after every step; the block-constrained field
  // must stay within the surrogate Lipschitz bound on sampled pairs.
  Tape tape;
  Rng rng(21, 1);
  ResidualNetConfig cfg;
  cfg.hidden = 32;
  cfg.blocks = 2;
  cfg.time_feat_k = 4;
  cfg.lipschitz_c = 0.9;
  ResidualNet net(cfg, tape, rng);
  const double c_eff = 0.9 + 0.02;

  Rng data_rng(22, 1);
  Adam opt;
  auto params = net.params();
  Tensor tf = tfeat_matrix(16, 0.5, 4);

  auto max_pair_ratio = [&](int pairs) {
    Tape::NoRecord pause(tape);
    Rng pr(23, 1);
    double worst = 0.0;
    Tensor tf1 = tfeat_matrix(1, 0.5, 4);
    for (int p = 0; p < pairs; ++p) {
      Tensor xa = Tensor::zeros({1, 2});
      Tensor xb = Tensor::zeros({1, 2});
      pr.fill_normal(xa.values_mut());
      pr.fill_normal(xb.values_mut());
      Tensor ga = net.forward(xa, tf1);
      Tensor gb = net.forward(xb, tf1);
      double dg = 0.0, dx = 0.0;
      for (int k = 0; k < 2; ++k) {
        dg += (ga.at(0, k) - gb.at(0, k)) * (ga.at(0, k) - gb.at(0, k));
        dx += (xa.at(0, k) - xb.at(0, k)) * (xa.at(0, k) - xb.at(0, k));
      }
      worst = std::max(worst, std::sqrt(dg / dx));
    }
    return worst;
  };

  // The output projection starts at zero; bound it to keep the composite map
  // within the advertised budget, mirroring how the flow keeps spectra in
  // check block-wise. Target: a gentle rotation field, Lipschitz ~0.3.
  for (int step = 0; step < 60; ++step) {
    Tensor x = Tensor::zeros({16, 2});
    data_rng.fill_normal(x.values_mut());
    Tensor target = Tensor::zeros({16, 2});
    for (int i = 0; i < 16; ++i) {
      target.at_mut(i, 0) = -0.3 * x.at(i, 1);
      target.at_mut(i, 1) = 0.3 * x.at(i, 0);
    }
    Tensor loss = mse(net.forward(x, tf), target);
    tape.backward(loss);
    opt.step(params, 1e-2);
    net.renormalize();

    // Network-level surrogate: projections stay small for this target, so the
    // sampled Lipschitz ratio must respect the block budget.
    SpectralState sin_, sout_;
    const double s_in = estimate_top_singular(net.in_proj, sin_, 30);
    const double s_out = estimate_top_singular(net.out_proj, sout_, 30);
    const double budget =
        s_in * s_out * std::pow(1.0 + c_eff * c_eff, cfg.blocks);
    const double measured = max_pair_ratio(100);
    CHECK(measured <= budget + 1e-9);
  }

  // After training on a 0.3-Lipschitz target the realized field is gentle.
  CHECK(max_pair_ratio(100) < c_eff);
}
