#include "otnfm/eval.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include "otnfm/coupling.hpp"
#include "otnfm/errors.hpp"

namespace otnfm {

double w2_squared(const PointBatch& a, const PointBatch& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error("w2_squared: point sets must have equal size");
  const int n = a.rows();
  if (n > kGlobalAssignmentCap)
    throw Error("w2_squared: n exceeds the exact-assignment cap");
  const std::vector<int> sigma = solve_assignment(cost_matrix(a, b));
  return pairing_cost(a, b, sigma) / n;
}

CollapseIndex collapse_index(const PointBatch& generated, const PointBatch& target) {
  const int ng = generated.rows(), nt = target.rows(), d = generated.cols();
  if (ng < 1 || nt < 1) throw Error("collapse_index: empty input");
  if (ng < 2 || nt < 2) throw Error("collapse_index: need >= 2 points for variance");
  if (target.cols() != d) throw Error("collapse_index: dimension mismatch");

  std::vector<double> tmean(d, 0.0), gmean(d, 0.0);
  for (int i = 0; i < nt; ++i)
    for (int k = 0; k < d; ++k) tmean[k] += target.at(i, k) / nt;
  for (int i = 0; i < ng; ++i)
    for (int k = 0; k < d; ++k) gmean[k] += generated.at(i, k) / ng;

  double mean_dist = 0.0;
  for (int i = 0; i < ng; ++i) {
    double sq = 0.0;
    for (int k = 0; k < d; ++k) {
      const double diff = generated.at(i, k) - tmean[k];
      sq += diff * diff;
    }
    mean_dist += std::sqrt(sq) / ng;
  }

  auto cov_trace = [d](const PointBatch& x, const std::vector<double>& mean) {
    const int n = x.rows();
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) {
        const double diff = x.at(i, k) - mean[k];
        acc += diff * diff;
      }
    return acc / (n - 1);
  };
  const double tv = cov_trace(target, tmean);
  const double gv = cov_trace(generated, gmean);
  return {mean_dist, tv > 0.0 ? gv / tv : std::numeric_limits<double>::infinity()};
}

void BenchmarkReport::finalize() {
  const std::size_t n = w2sq.size();
  mean = 0.0;
  for (double v : w2sq) mean += v / n;
  double acc = 0.0;
  for (double v : w2sq) acc += (v - mean) * (v - mean);
  stddev = n > 1 ? std::sqrt(acc / (n - 1)) : 0.0;
}

FlowModel train_model(const BenchmarkTask& task, const MethodSpec& method,
                      const BenchmarkSettings& settings, std::uint64_t seed,
                      TrainTrace* trace_out, Dataset* data_out) {
  Dataset data = make_dataset(task.p0, task.p1, settings.n_train, seed);

  Rng init_rng(seed, streams::kParamInit);
  FlowModel model(settings.net, method.mode, PhiKind::Identity, init_rng);

  TrainConfig cfg;
  cfg.steps = settings.steps;
  cfg.batch = settings.batch;
  cfg.base_lr = settings.base_lr;
  cfg.schedule = method.schedule;
  cfg.coupling = method.coupling;
  cfg.coupling_chunk = settings.coupling_chunk;
  cfg.coupling_sweeps = settings.coupling_sweeps;
  cfg.seed = seed;

  TrainTrace trace = train(model, cfg, data);
  if (trace_out) *trace_out = std::move(trace);
  if (data_out) *data_out = std::move(data);
  return model;
}

PointBatch generate(FlowModel& m, const BenchmarkTask& task, int n,
                    std::uint64_t seed, int nfe, PointBatch* sources_out) {
  Rng src_rng(seed, streams::kEvalSource);
  PointBatch x0 = sample(task.p0, n, src_rng);
  if (sources_out) *sources_out = x0;
  if (m.mode == FlowMode::NeuralFlow) return one_step_sample(m, x0);
  return euler_sample(m, x0, nfe);
}

PointBatch eval_targets(const BenchmarkTask& task, int n, std::uint64_t seed) {
  Rng tgt_rng(seed, streams::kEvalTarget);
  return sample(task.p1, n, tgt_rng);
}

namespace {

struct CellResult {
  double w2 = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

CellResult run_cell(const BenchmarkTask& task, const MethodSpec& method,
                    const BenchmarkSettings& settings, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  CellResult out;
  try {
    FlowModel model = train_model(task, method, settings, seed);
    const PointBatch gen = generate(model, task, settings.n_eval, seed, method.nfe);
    const PointBatch tgt = eval_targets(task, settings.n_eval, seed);
    out.w2 = w2_squared(gen, tgt);
  } catch (const Error&) {
    // Failed cells stay NaN; the caller reports them without killing the run.
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

std::vector<BenchmarkReport> run_benchmark(const std::vector<BenchmarkTask>& tasks,
                                           const std::vector<MethodSpec>& methods,
                                           const std::vector<std::uint64_t>& seeds,
                                           const BenchmarkSettings& settings) {
  struct Cell {
    std::size_t task_i, method_i, seed_i;
  };
  std::vector<Cell> cells;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti)
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
      for (std::size_t si = 0; si < seeds.size(); ++si) cells.push_back({ti, mi, si});

  unsigned workers = settings.threads > 0
                         ? static_cast<unsigned>(settings.threads)
                         : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, cells.size());

  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) break;
        const Cell& c = cells[i];
        results[i] = run_cell(tasks[c.task_i], methods[c.method_i], settings,
                              seeds[c.seed_i]);
      }
    });
  }
  for (auto& t : pool) t.join();

  // Deterministic order: tasks then methods then seeds, as given.
  std::vector<BenchmarkReport> reports;
  std::size_t i = 0;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti)
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      BenchmarkReport r;
      r.task = tasks[ti].name;
      r.method = methods[mi].name;
      r.nfe = methods[mi].nfe;
      for (std::size_t si = 0; si < seeds.size(); ++si, ++i) {
        r.seeds.push_back(seeds[si]);
        r.w2sq.push_back(results[i].w2);
        r.wallclock_s.push_back(results[i].seconds);
      }
      r.finalize();
      reports.push_back(std::move(r));
    }
  return reports;
}

}  // namespace otnfm
