#pragma once

#include <string>

#include "otnfm/rng.hpp"
#include "otnfm/tensor.hpp"

namespace otnfm {

// Points are n x d tensors throughout.
using PointBatch = Tensor;

enum class ScheduleKind { Linear, Cosine, Polynomial, Stochastic };

struct ScheduleCoeffs {
  double alpha, beta, sigma;
};

// Interpolation path x_t = alpha(t) x0 + beta(t) x1 + sigma(t) eps with
// alpha(0) = beta(1) = 1 and alpha(1) = beta(0) = 0 exactly for every kind.
struct Schedule {
  ScheduleKind kind = ScheduleKind::Linear;
  double alpha_exp = 2.0;    // Polynomial exponent, > 0
  double sigma_noise = 0.5;  // Stochastic scale, >= 0

  // "linear" | "cosine" | "poly:<alpha>" | "stoch:<sigma>"
  static Schedule parse(const std::string& name);
  std::string name() const;

  ScheduleCoeffs coeffs(double t) const;
  bool deterministic() const { return kind != ScheduleKind::Stochastic; }
};

// alpha x0 + beta x1 (+ sigma eps, eps drawn fresh per row). If eps_out is
// given it receives the noise actually used (zeros when sigma(t) = 0).
PointBatch interpolate(const Schedule& s, const PointBatch& x0, const PointBatch& x1,
                       double t, Rng& rng, PointBatch* eps_out = nullptr);

// Analytic path derivative. Stochastic schedules need `eps` and t in (0, 1);
// the endpoints are rejected (the noise term's derivative diverges there).
PointBatch velocity(const Schedule& s, const PointBatch& x0, const PointBatch& x1,
                    double t, const PointBatch* eps = nullptr);

}  // namespace otnfm
