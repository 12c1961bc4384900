#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "otnfm/rng.hpp"
#include "otnfm/tensor.hpp"

namespace otnfm {

// Warm-started power-iteration vectors for one weight matrix.
struct SpectralState {
  std::vector<double> u, v;
};

// Power-iteration estimate of the top singular value. `state` carries the
// left/right vectors across calls; pass a fresh state for a cold estimate.
double estimate_top_singular(const Tensor& w, SpectralState& state, int iters);

// W * min(1, c / sigma_hat). A zero matrix comes back unchanged (sigma_hat is
// clamped below at 1e-12).
Tensor spectral_normalize(const Tensor& w, double c, int iters);
// In-place projection used each training step, warm-started.
void spectral_normalize_inplace(Tensor& w, double c, int iters, SpectralState& state);

// [t, sin(2*pi*f_j*t), cos(2*pi*f_j*t)] for f_j = 1, 2, 4, ... (k/2 freqs).
// k must be even; output has k + 1 entries.
std::vector<double> time_features(double t, int k);

struct ResidualNetConfig {
  int data_dim = 2;
  int out_dim = 2;
  int hidden = 128;
  int blocks = 4;
  int time_feat_k = 8;        // sinusoidal features; raw t is prepended
  double lipschitz_c = 0.97;  // cap on block-weight singular values
  bool normalize = true;
  int norm_iters_init = 30;   // power iterations at construction
  int norm_iters_step = 1;    // per training step, warm-started
};

// Residual MLP: x and time features are concatenated, projected to the hidden
// width, passed through blocks h <- h + W2 tanh(W1 h + b1) + b2, and projected
// to the output dimension. Block weights are kept inside the spectral ball of
// radius lipschitz_c; the projections are unconstrained.
class ResidualNet {
 public:
  ResidualNet(const ResidualNetConfig& cfg, Tape& tape, Rng& init_rng);

  // x: [n x data_dim], tfeat: [n x (time_feat_k + 1)].
  Tensor forward(const Tensor& x, const Tensor& tfeat);

  std::vector<Tensor*> params();
  void renormalize();  // project block weights, warm-started
  const ResidualNetConfig& config() const { return cfg_; }
  Tape& tape() { return *tape_; }

  long forward_evals = 0;  // batched forward passes since last reset

  struct Block {
    Tensor w1, b1, w2, b2;
    SpectralState s1, s2;
  };
  Tensor in_proj, in_bias;
  std::vector<Block> blocks;
  Tensor out_proj, out_bias;

 private:
  ResidualNetConfig cfg_;
  Tape* tape_;
};

// step(params, lr) applies one bias-corrected update from the accumulated
// gradients and zeroes them. Non-finite gradients raise NumericAbort.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<Tensor* const> params, double lr);
  long step_count() const { return t_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  long t_ = 0;
  double beta1_, beta2_, eps_;
};

// base * 0.5 * (1 + cos(pi * step / total)).
double cosine_lr(long step, long total, double base);

}  // namespace otnfm
