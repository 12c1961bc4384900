#include "otnfm/nn.hpp"

#include <cmath>
#include <numbers>

#include "otnfm/errors.hpp"

namespace otnfm {

namespace {

double vec_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

void normalize_or_reset(std::vector<double>& x) {
  const double n = vec_norm(x);
  if (n < 1e-300) {
    for (double& v : x) v = 1.0 / std::sqrt(static_cast<double>(x.size()));
  } else {
    for (double& v : x) v /= n;
  }
}

}  // namespace

double estimate_top_singular(const Tensor& w, SpectralState& state, int iters) {
  if (w.shape().size() != 2) throw Error("estimate_top_singular: 2-D only");
  if (iters < 1) throw Error("estimate_top_singular: iters >= 1 required");
  const int m = w.rows(), n = w.cols();
  const auto wv = w.values();

  if (static_cast<int>(state.u.size()) != m || static_cast<int>(state.v.size()) != n) {
    state.u.assign(m, 1.0 / std::sqrt(static_cast<double>(m)));
    state.v.assign(n, 1.0 / std::sqrt(static_cast<double>(n)));
  }

  for (int it = 0; it < iters; ++it) {
    // u <- W v
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* wi = wv.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) acc += wi[j] * state.v[j];
      state.u[i] = acc;
    }
    normalize_or_reset(state.u);
    // v <- W^T u
    for (int j = 0; j < n; ++j) state.v[j] = 0.0;
    for (int i = 0; i < m; ++i) {
      const double ui = state.u[i];
      const double* wi = wv.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) state.v[j] += wi[j] * ui;
    }
    normalize_or_reset(state.v);
  }

  // sigma = u^T W v
  double sigma = 0.0;
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* wi = wv.data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += wi[j] * state.v[j];
    sigma += state.u[i] * acc;
  }
  return std::abs(sigma);
}

void spectral_normalize_inplace(Tensor& w, double c, int iters, SpectralState& state) {
  const double sigma = std::max(estimate_top_singular(w, state, iters), 1e-12);
  // Slack absorbs power-iteration drift so re-projecting unchanged weights is
  // a no-op; the singular values stay within c + 1e-4 either way.
  if (sigma <= c * (1.0 + 1e-4)) return;
  const double f = c / sigma;
  for (double& x : w.values_mut()) x *= f;
}

Tensor spectral_normalize(const Tensor& w, double c, int iters) {
  Tensor out = w.detach();
  SpectralState state;
  spectral_normalize_inplace(out, c, iters, state);
  return out;
}

std::vector<double> time_features(double t, int k) {
  if (k % 2 != 0 || k < 0) throw Error("time_features: k must be even and >= 0");
  std::vector<double> f;
  f.reserve(k + 1);
  f.push_back(t);
  double freq = 1.0;
  for (int j = 0; j < k / 2; ++j) {
    const double w = 2.0 * std::numbers::pi * freq * t;
    f.push_back(std::sin(w));
    f.push_back(std::cos(w));
    freq *= 2.0;
  }
  return f;
}

// --- ResidualNet ------------------------------------------------------------

ResidualNet::ResidualNet(const ResidualNetConfig& cfg, Tape& tape, Rng& init_rng)
    : cfg_(cfg), tape_(&tape) {
  const int in_dim = cfg.data_dim + cfg.time_feat_k + 1;
  const int h = cfg.hidden;

  auto gaussian = [&](Tensor& t, double std_dev) {
    for (double& x : t.values_mut()) x = std_dev * init_rng.normal();
  };

  in_proj = Tensor::param({in_dim, h}, tape);
  gaussian(in_proj, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  in_bias = Tensor::param({h}, tape);

  blocks.resize(cfg.blocks);
  for (auto& b : blocks) {
    b.w1 = Tensor::param({h, h}, tape);
    b.w2 = Tensor::param({h, h}, tape);
    gaussian(b.w1, 1.0 / std::sqrt(static_cast<double>(h)));
    gaussian(b.w2, 1.0 / std::sqrt(static_cast<double>(h)));
    b.b1 = Tensor::param({h}, tape);
    b.b2 = Tensor::param({h}, tape);
    if (cfg.normalize) {
      spectral_normalize_inplace(b.w1, cfg.lipschitz_c, cfg.norm_iters_init, b.s1);
      spectral_normalize_inplace(b.w2, cfg.lipschitz_c, cfg.norm_iters_init, b.s2);
    }
  }

  // Zero output projection: the net starts as the constant map out_bias = 0.
  out_proj = Tensor::param({h, cfg.out_dim}, tape);
  out_bias = Tensor::param({cfg.out_dim}, tape);
}

Tensor ResidualNet::forward(const Tensor& x, const Tensor& tfeat) {
  if (x.cols() != cfg_.data_dim)
    throw Error("ResidualNet: input width " + x.shape_str());
  if (tfeat.rows() != x.rows() || tfeat.cols() != cfg_.time_feat_k + 1)
    throw Error("ResidualNet: time-feature shape " + tfeat.shape_str());
  ++forward_evals;

  Tensor h = add_bias(matmul(concat_cols(x, tfeat), in_proj), in_bias);
  for (auto& b : blocks) {
    Tensor branch = add_bias(matmul(tanh_op(add_bias(matmul(h, b.w1), b.b1)), b.w2), b.b2);
    h = add(h, branch);
  }
  return add_bias(matmul(h, out_proj), out_bias);
}

std::vector<Tensor*> ResidualNet::params() {
  std::vector<Tensor*> ps{&in_proj, &in_bias};
  for (auto& b : blocks) {
    ps.push_back(&b.w1);
    ps.push_back(&b.b1);
    ps.push_back(&b.w2);
    ps.push_back(&b.b2);
  }
  ps.push_back(&out_proj);
  ps.push_back(&out_bias);
  return ps;
}

void ResidualNet::renormalize() {
  if (!cfg_.normalize) return;
  for (auto& b : blocks) {
    spectral_normalize_inplace(b.w1, cfg_.lipschitz_c, cfg_.norm_iters_step, b.s1);
    spectral_normalize_inplace(b.w2, cfg_.lipschitz_c, cfg_.norm_iters_step, b.s2);
  }
}

// --- Adam -------------------------------------------------------------------

Adam::Adam(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<Tensor* const> params, double lr) {
  if (slots_.empty()) {
    slots_.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      slots_[k].m.assign(params[k]->size(), 0.0);
      slots_[k].v.assign(params[k]->size(), 0.0);
    }
  }
  if (slots_.size() != params.size()) throw Error("Adam: parameter set changed");

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    auto g = p.grad_mut();  // params with no accumulated grad get zeros
    auto v = p.values_mut();
    auto& slot = slots_[k];
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw NumericAbort("Adam: non-finite gradient", t_);
      slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g[i];
      slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      v[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
    p.zero_grad();
  }
}

double cosine_lr(long step, long total, double base) {
  if (total <= 0) throw Error("cosine_lr: total must be positive");
  if (step < 0 || step > total) throw Error("cosine_lr: step outside [0, total]");
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                      static_cast<double>(total)));
}

}  // namespace otnfm
