#pragma once

#include <memory>
#include <string>
#include <vector>

#include "otnfm/coupling.hpp"
#include "otnfm/data.hpp"
#include "otnfm/nn.hpp"
#include "otnfm/schedule.hpp"

namespace otnfm {

enum class FlowMode { NeuralFlow, VelocityField };
enum class PhiKind { Identity, Quadratic };

FlowMode parse_mode(const std::string& name);  // "nfm" | "cfm"
std::string mode_name(FlowMode m);
PhiKind parse_phi(const std::string& name);  // "t" | "t2"
std::string phi_name(PhiKind p);
double phi_eval(PhiKind p, double t);

// A flow map F(t, x0) = x0 + phi(t) g(t, x0) (NeuralFlow) or a velocity field
// v(x, t) (VelocityField), both backed by the same residual net.
struct FlowModel {
  std::unique_ptr<Tape> tape;
  std::unique_ptr<ResidualNet> net;
  FlowMode mode = FlowMode::NeuralFlow;
  PhiKind phi = PhiKind::Identity;

  FlowModel(const ResidualNetConfig& cfg, FlowMode mode, PhiKind phi, Rng& init_rng);
  FlowModel(FlowModel&&) = default;
  FlowModel& operator=(FlowModel&&) = default;

  long nfe() const { return net->forward_evals; }
  void reset_nfe() { net->forward_evals = 0; }
};

// Displacement net evaluated at a shared time (no tape).
PointBatch displacement(FlowModel& m, double t, const PointBatch& x0);

// x0 + phi(t) g(t, x0); records on the tape only while it is recording.
// At t = 0 the result equals x0 bitwise.
Tensor flow_forward(FlowModel& m, double t, const Tensor& x0);
// Per-row times (used when per_row_t is enabled).
Tensor flow_forward_rows(FlowModel& m, std::span<const double> ts, const Tensor& x0);

// Velocity net evaluated at state x and time t.
Tensor velocity_eval(FlowModel& m, const Tensor& x, double t);

// || F(t, x0) - x_t ||^2 averaged over rows; targets are detached.
Tensor nfm_loss(FlowModel& m, const Schedule& s, const PointBatch& x0,
                const PointBatch& x1, double t, Rng& noise_rng);
// || v(x_t, t) - dx_t/dt ||^2 with the same noise draw in both terms.
Tensor cfm_loss(FlowModel& m, const Schedule& s, const PointBatch& x0,
                const PointBatch& x1, double t, Rng& noise_rng);

struct TrainConfig {
  long steps = 20000;
  int batch = 256;
  double base_lr = 1e-3;
  Schedule schedule;
  CouplingStrategy coupling = CouplingStrategy::Global;
  int coupling_chunk = 256;  // minibatch precompute chunk size
  int coupling_sweeps = 5;
  std::uint64_t seed = 0;
  long eval_every = 0;  // 0 = disabled
  bool per_row_t = false;

  void validate() const;
};

struct TrainTrace {
  std::vector<double> loss;           // one entry per step
  std::vector<double> lr;             // matching learning rate
  std::vector<double> coupling_cost;  // per step; only for loom
};

// pair -> interpolate -> loss -> backward -> adam (cosine lr) -> renormalize.
// Aborts with NumericAbort when the loss goes non-finite.
TrainTrace train(FlowModel& m, const TrainConfig& cfg, const Dataset& data);

// F(1, x0): one network evaluation per batch.
PointBatch one_step_sample(FlowModel& m, const PointBatch& x0);

// Explicit Euler over the learned velocity field.
PointBatch euler_sample(FlowModel& m, const PointBatch& x0, int nfe);

// Independent single evaluations of the flow map on a time grid.
std::vector<PointBatch> trajectory(FlowModel& m, const PointBatch& x0,
                                   const std::vector<double>& grid);

// median_i max_{t,t'} ||g(t, x_i) - g(t', x_i)|| over the median displacement
// norm across all (i, t). Near zero when the displacement ignores time.
double displacement_time_variation(FlowModel& m, const PointBatch& x0,
                                   const std::vector<double>& grid);

}  // namespace otnfm
