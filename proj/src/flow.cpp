#include "otnfm/flow.hpp"

#include <algorithm>
#include <cmath>

#include "otnfm/errors.hpp"

namespace otnfm {

FlowMode parse_mode(const std::string& name) {
  if (name == "nfm") return FlowMode::NeuralFlow;
  if (name == "cfm") return FlowMode::VelocityField;
  throw ConfigError("unknown method '" + name + "' (expected nfm or cfm)");
}

std::string mode_name(FlowMode m) {
  return m == FlowMode::NeuralFlow ? "nfm" : "cfm";
}

PhiKind parse_phi(const std::string& name) {
  if (name == "t") return PhiKind::Identity;
  if (name == "t2") return PhiKind::Quadratic;
  throw ConfigError("unknown time gate '" + name + "' (expected t or t2)");
}

std::string phi_name(PhiKind p) { return p == PhiKind::Identity ? "t" : "t2"; }

double phi_eval(PhiKind p, double t) {
  return p == PhiKind::Identity ? t : t * t;
}

FlowModel::FlowModel(const ResidualNetConfig& cfg, FlowMode mode_, PhiKind phi_,
                     Rng& init_rng)
    : tape(std::make_unique<Tape>()), mode(mode_), phi(phi_) {
  net = std::make_unique<ResidualNet>(cfg, *tape, init_rng);
}

namespace {

Tensor tfeat_rows(int n, double t, int k) {
  const std::vector<double> f = time_features(t, k);
  Tensor out = Tensor::zeros({n, static_cast<int>(f.size())});
  auto v = out.values_mut();
  for (int i = 0; i < n; ++i)
    std::copy(f.begin(), f.end(), v.begin() + static_cast<std::size_t>(i) * f.size());
  return out;
}

Tensor tfeat_rows(std::span<const double> ts, int k) {
  const int n = static_cast<int>(ts.size());
  const int w = k + 1;
  Tensor out = Tensor::zeros({n, w});
  auto v = out.values_mut();
  for (int i = 0; i < n; ++i) {
    const std::vector<double> f = time_features(ts[i], k);
    std::copy(f.begin(), f.end(), v.begin() + static_cast<std::size_t>(i) * w);
  }
  return out;
}

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error("flow: t outside [0, 1]");
}

}  // namespace

PointBatch displacement(FlowModel& m, double t, const PointBatch& x0) {
  check_time(t);
  Tape::NoRecord pause(*m.tape);
  return m.net->forward(x0, tfeat_rows(x0.rows(), t, m.net->config().time_feat_k));
}

Tensor flow_forward(FlowModel& m, double t, const Tensor& x0) {
  if (m.mode != FlowMode::NeuralFlow)
    throw Error("flow_forward: model is a velocity field");
  check_time(t);
  const double ph = phi_eval(m.phi, t);
  if (ph == 0.0) return x0;  // identity at the initial time, bitwise
  Tensor g = m.net->forward(x0, tfeat_rows(x0.rows(), t, m.net->config().time_feat_k));
  return add(x0, scale(g, ph));
}

Tensor flow_forward_rows(FlowModel& m, std::span<const double> ts, const Tensor& x0) {
  if (m.mode != FlowMode::NeuralFlow)
    throw Error("flow_forward: model is a velocity field");
  if (static_cast<int>(ts.size()) != x0.rows())
    throw Error("flow_forward_rows: one t per row required");
  std::vector<double> phis(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    check_time(ts[i]);
    phis[i] = phi_eval(m.phi, ts[i]);
  }
  Tensor g = m.net->forward(x0, tfeat_rows(ts, m.net->config().time_feat_k));
  return add(x0, row_scale(g, phis));
}

Tensor velocity_eval(FlowModel& m, const Tensor& x, double t) {
  if (m.mode != FlowMode::VelocityField)
    throw Error("velocity_eval: model is a flow map");
  check_time(t);
  return m.net->forward(x, tfeat_rows(x.rows(), t, m.net->config().time_feat_k));
}

Tensor nfm_loss(FlowModel& m, const Schedule& s, const PointBatch& x0,
                const PointBatch& x1, double t, Rng& noise_rng) {
  if (x0.shape() != x1.shape()) throw Error("nfm_loss: batch shapes differ");
  const Tensor target = interpolate(s, x0, x1, t, noise_rng);
  return mse(flow_forward(m, t, x0), target);
}

Tensor cfm_loss(FlowModel& m, const Schedule& s, const PointBatch& x0,
                const PointBatch& x1, double t, Rng& noise_rng) {
  if (x0.shape() != x1.shape()) throw Error("cfm_loss: batch shapes differ");
  if (!s.deterministic() && (t <= 0.0 || t >= 1.0))
    throw Error("cfm_loss: stochastic schedule has no finite velocity at t in {0, 1}");
  Tensor eps;
  const Tensor xt = interpolate(s, x0, x1, t, noise_rng, &eps);
  const Tensor u = velocity(s, x0, x1, t, &eps);
  return mse(velocity_eval(m, xt, t), u);
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (coupling != CouplingStrategy::Independent && batch < 2)
    throw ConfigError("train: batch must be >= 2 for OT strategies");
  if (!(base_lr > 0.0)) throw ConfigError("train: base_lr must be > 0");
}

TrainTrace train(FlowModel& m, const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  const int n = data.x0.rows();
  if (cfg.batch > n &&
      cfg.coupling != CouplingStrategy::Independent &&
      cfg.coupling != CouplingStrategy::PerBatch)
    throw ConfigError("train: batch exceeds dataset size");

  Coupling coup;
  Coupling* coup_ptr = nullptr;
  Rng coupling_rng(cfg.seed, streams::kCoupling);
  switch (cfg.coupling) {
    case CouplingStrategy::Global:
      coup = global_coupling(data.x0, data.x1);
      coup_ptr = &coup;
      break;
    case CouplingStrategy::Minibatch:
      coup = minibatch_precompute(data.x0, data.x1, std::min(cfg.coupling_chunk, n),
                                  cfg.coupling_sweeps, coupling_rng);
      coup_ptr = &coup;
      break;
    case CouplingStrategy::Loom:
      coup = loom_init(n);
      coup.total_cost = pairing_cost(data.x0, data.x1, coup.sigma);
      coup_ptr = &coup;
      break;
    default:
      break;
  }

  Rng batch_rng(cfg.seed, streams::kBatchIndices);
  Rng t_rng(cfg.seed, streams::kTimeDraw);
  Rng noise_rng(cfg.seed, streams::kPathNoise);

  Adam opt;
  const std::vector<Tensor*> params = m.net->params();
  TrainTrace trace;
  trace.loss.reserve(cfg.steps);
  trace.lr.reserve(cfg.steps);
  const bool track_cost = cfg.coupling == CouplingStrategy::Loom;
  if (track_cost) trace.coupling_cost.reserve(cfg.steps);

  for (long step = 0; step < cfg.steps; ++step) {
    PairedBatch batch =
        pair_batch(cfg.coupling, batch_rng, data.x0, data.x1, coup_ptr, cfg.batch);

    Tensor loss;
    if (cfg.per_row_t) {
      std::vector<double> ts(cfg.batch);
      for (double& t : ts) t = t_rng.uniform();
      // Row-wise targets built outside the tape.
      Tensor target = Tensor::zeros(batch.x0.shape());
      Tensor eps = Tensor::zeros(batch.x0.shape());
      {
        auto tv = target.values_mut();
        auto ev = eps.values_mut();
        const auto a = batch.x0.values();
        const auto b = batch.x1.values();
        const int d = batch.x0.cols();
        for (int i = 0; i < cfg.batch; ++i) {
          const auto [alpha, beta, sigma] = cfg.schedule.coeffs(ts[i]);
          for (int k = 0; k < d; ++k) {
            const std::size_t o = static_cast<std::size_t>(i) * d + k;
            const double e = sigma > 0.0 ? noise_rng.normal() : 0.0;
            ev[o] = e;
            tv[o] = alpha * a[o] + beta * b[o] + sigma * e;
          }
        }
      }
      if (m.mode == FlowMode::NeuralFlow) {
        loss = mse(flow_forward_rows(m, ts, batch.x0), target);
      } else {
        throw ConfigError("train: per_row_t supports nfm only");
      }
    } else {
      const double t = t_rng.uniform();
      loss = m.mode == FlowMode::NeuralFlow
                 ? nfm_loss(m, cfg.schedule, batch.x0, batch.x1, t, noise_rng)
                 : cfm_loss(m, cfg.schedule, batch.x0, batch.x1, t, noise_rng);
    }

    const double loss_val = loss.value();
    if (!std::isfinite(loss_val)) throw NumericAbort("train: non-finite loss", step);

    m.tape->backward(loss);
    const double lr = cosine_lr(step, cfg.steps, cfg.base_lr);
    opt.step(params, lr);
    m.net->renormalize();

    trace.loss.push_back(loss_val);
    trace.lr.push_back(lr);
    if (track_cost) trace.coupling_cost.push_back(coup.total_cost);
  }
  return trace;
}

PointBatch one_step_sample(FlowModel& m, const PointBatch& x0) {
  if (m.mode != FlowMode::NeuralFlow)
    throw Error("one_step_sample: model is a velocity field");
  Tape::NoRecord pause(*m.tape);
  return flow_forward(m, 1.0, x0);
}

PointBatch euler_sample(FlowModel& m, const PointBatch& x0, int nfe) {
  if (m.mode != FlowMode::VelocityField)
    throw Error("euler_sample: model is a flow map");
  if (nfe < 1) throw Error("euler_sample: nfe must be >= 1");
  Tape::NoRecord pause(*m.tape);
  const double dt = 1.0 / nfe;
  Tensor x = x0.detach();
  for (int k = 0; k < nfe; ++k) {
    const Tensor v = velocity_eval(m, x, static_cast<double>(k) / nfe);
    auto xv = x.values_mut();
    const auto vv = v.values();
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += dt * vv[i];
  }
  return x;
}

std::vector<PointBatch> trajectory(FlowModel& m, const PointBatch& x0,
                                   const std::vector<double>& grid) {
  if (m.mode != FlowMode::NeuralFlow)
    throw Error("trajectory: model is a velocity field");
  Tape::NoRecord pause(*m.tape);
  std::vector<PointBatch> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(flow_forward(m, t, x0).detach());
  return out;
}

double displacement_time_variation(FlowModel& m, const PointBatch& x0,
                                   const std::vector<double>& grid) {
  if (m.mode != FlowMode::NeuralFlow)
    throw Error("displacement_time_variation: model is a velocity field");
  if (grid.empty()) throw Error("displacement_time_variation: empty grid");
  const int n = x0.rows(), d = x0.cols();

  std::vector<PointBatch> gs;
  gs.reserve(grid.size());
  for (double t : grid) gs.push_back(displacement(m, t, x0));

  auto median = [](std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t k = xs.size();
    return k % 2 == 1 ? xs[k / 2] : 0.5 * (xs[k / 2 - 1] + xs[k / 2]);
  };

  std::vector<double> variation(n, 0.0), norms;
  norms.reserve(static_cast<std::size_t>(n) * grid.size());
  for (int i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < gs.size(); ++a) {
      double nrm = 0.0;
      for (int k = 0; k < d; ++k) {
        const double v = gs[a].at(i, k);
        nrm += v * v;
      }
      norms.push_back(std::sqrt(nrm));
      for (std::size_t b = a + 1; b < gs.size(); ++b) {
        double diff = 0.0;
        for (int k = 0; k < d; ++k) {
          const double dv = gs[a].at(i, k) - gs[b].at(i, k);
          diff += dv * dv;
        }
        variation[i] = std::max(variation[i], std::sqrt(diff));
      }
    }
  }
  const double denom = std::max(median(std::move(norms)), 1e-12);
  return median(std::move(variation)) / denom;
}

}  // namespace otnfm
