#pragma once

#include <string>
#include <vector>

#include "otnfm/checkpoint.hpp"
#include "otnfm/config.hpp"

namespace otnfm {

// Train per config, write checkpoint + traces + config echo into cfg.out_dir.
// resume_path, when non-empty, loads parameters from an existing checkpoint
// (its architecture must match). steps == 0 re-saves without training.
// On a numerical abort the partial traces are still written before rethrow.
void cmd_train(const RunConfig& cfg, const std::string& resume_path);

// One-step (or Euler) generation from fresh sources into a samples CSV.
struct SampleArgs {
  std::string checkpoint;
  std::string out_csv = "samples.csv";
  int n = 2048;
  std::optional<std::uint64_t> seed;  // defaults to the checkpoint seed
  std::optional<int> nfe;             // velocity-field models only
};
void cmd_sample(const SampleArgs& args);

// Long-format flow-map trajectories (point_id, t, x, y).
struct TrajectoryArgs {
  std::string checkpoint;
  std::string out_csv = "trajectories.csv";
  int n = 256;
  std::vector<double> grid;  // empty = 0, 0.1, ..., 1
  bool euler = false;        // integrate velocity-field checkpoints
  std::optional<std::uint64_t> seed;
};
void cmd_trajectories(const TrajectoryArgs& args);

// Full suite: per-cell training + W2^2, CSV/JSON reports.
void cmd_benchmark(const SuiteConfig& suite, const std::string& out_dir);

// Sweeps trajectory schedules or coupling strategies around a base config.
void cmd_ablate(const std::string& kind, const RunConfig& base, const std::string& out_dir);

// Fast internal diagnostics; returns the number of failed checks.
int cmd_selftest();

}  // namespace otnfm
