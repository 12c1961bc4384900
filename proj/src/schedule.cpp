#include "otnfm/schedule.hpp"

#include <cmath>
#include <numbers>

#include "otnfm/errors.hpp"

namespace otnfm {

Schedule Schedule::parse(const std::string& name) {
  Schedule s;
  if (name == "linear") {
    s.kind = ScheduleKind::Linear;
  } else if (name == "cosine") {
    s.kind = ScheduleKind::Cosine;
  } else if (name.rfind("poly:", 0) == 0) {
    s.kind = ScheduleKind::Polynomial;
    s.alpha_exp = std::stod(name.substr(5));
    if (!(s.alpha_exp > 0.0)) throw ConfigError("schedule: poly exponent must be > 0");
  } else if (name.rfind("stoch:", 0) == 0) {
    s.kind = ScheduleKind::Stochastic;
    s.sigma_noise = std::stod(name.substr(6));
    if (s.sigma_noise < 0.0) throw ConfigError("schedule: stoch sigma must be >= 0");
  } else {
    throw ConfigError("unknown schedule '" + name + "'");
  }
  return s;
}

std::string Schedule::name() const {
  switch (kind) {
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Cosine: return "cosine";
    case ScheduleKind::Polynomial: {
      std::string a = std::to_string(alpha_exp);
      a.erase(a.find_last_not_of('0') + 1);
      if (!a.empty() && a.back() == '.') a.pop_back();
      return "poly:" + a;
    }
    case ScheduleKind::Stochastic: {
      std::string a = std::to_string(sigma_noise);
      a.erase(a.find_last_not_of('0') + 1);
      if (!a.empty() && a.back() == '.') a.pop_back();
      return "stoch:" + a;
    }
  }
  return "?";
}

ScheduleCoeffs Schedule::coeffs(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw Error("schedule: t outside [0, 1]");
  // Exact boundary values for every kind.
  if (t == 0.0) return {1.0, 0.0, 0.0};
  if (t == 1.0) return {0.0, 1.0, 0.0};

  switch (kind) {
    case ScheduleKind::Linear:
      return {1.0 - t, t, 0.0};
    case ScheduleKind::Cosine: {
      const double a = std::numbers::pi * t / 2.0;
      return {std::cos(a), std::sin(a), 0.0};
    }
    case ScheduleKind::Polynomial: {
      const double b = std::pow(t, alpha_exp);
      return {1.0 - b, b, 0.0};
    }
    case ScheduleKind::Stochastic:
      return {1.0 - t, t, sigma_noise * std::sqrt(t * (1.0 - t))};
  }
  throw Error("schedule: bad kind");
}

PointBatch interpolate(const Schedule& s, const PointBatch& x0, const PointBatch& x1,
                       double t, Rng& rng, PointBatch* eps_out) {
  if (x0.shape() != x1.shape())
    throw Error("interpolate: shape mismatch " + x0.shape_str() + " vs " + x1.shape_str());
  const auto [alpha, beta, sigma] = s.coeffs(t);

  PointBatch out = Tensor::zeros(x0.shape());
  const auto a = x0.values();
  const auto b = x1.values();
  auto o = out.values_mut();
  if (sigma > 0.0) {
    PointBatch eps = Tensor::zeros(x0.shape());
    auto e = eps.values_mut();
    rng.fill_normal(e);
    for (std::size_t i = 0; i < o.size(); ++i)
      o[i] = alpha * a[i] + beta * b[i] + sigma * e[i];
    if (eps_out) *eps_out = eps;
  } else {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = alpha * a[i] + beta * b[i];
    if (eps_out) *eps_out = Tensor::zeros(x0.shape());
  }
  return out;
}

PointBatch velocity(const Schedule& s, const PointBatch& x0, const PointBatch& x1,
                    double t, const PointBatch* eps) {
  if (x0.shape() != x1.shape())
    throw Error("velocity: shape mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw Error("velocity: t outside [0, 1]");

  PointBatch out = Tensor::zeros(x0.shape());
  const auto a = x0.values();
  const auto b = x1.values();
  auto o = out.values_mut();

  switch (s.kind) {
    case ScheduleKind::Linear:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = b[i] - a[i];
      break;
    case ScheduleKind::Cosine: {
      const double w = std::numbers::pi / 2.0;
      const double da = -w * std::sin(w * t);
      const double db = w * std::cos(w * t);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = da * a[i] + db * b[i];
      break;
    }
    case ScheduleKind::Polynomial: {
      const double d = s.alpha_exp * std::pow(t, s.alpha_exp - 1.0);
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = d * (b[i] - a[i]);
      break;
    }
    case ScheduleKind::Stochastic: {
      if (t <= 0.0 || t >= 1.0)
        throw Error("velocity: stochastic path derivative is unbounded at t in {0, 1}");
      if (!eps || eps->shape() != x0.shape())
        throw Error("velocity: stochastic schedule requires the noise that built x_t");
      const double dn = s.sigma_noise * (1.0 - 2.0 * t) / (2.0 * std::sqrt(t * (1.0 - t)));
      const auto e = eps->values();
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = b[i] - a[i] + dn * e[i];
      break;
    }
  }
  return out;
}

}  // namespace otnfm
