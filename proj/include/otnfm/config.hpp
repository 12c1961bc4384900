#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "otnfm/data.hpp"
#include "otnfm/eval.hpp"
#include "otnfm/flow.hpp"

namespace otnfm {

// Flat `key = value` file with [section] headers and # comments. Unknown keys
// are rejected with their line number.
class IniFile {
 public:
  static IniFile parse_file(const std::string& path);
  static IniFile parse_text(const std::string& text, const std::string& origin);

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_long(const std::string& section, const std::string& key, long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // Keys never read back; used to reject typos.
  std::vector<std::string> unconsumed() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool consumed = false;
  };
  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::string origin_;
};

// Everything one training run needs, plus output routing.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  FlowMode method = FlowMode::NeuralFlow;

  DistributionSpec p0 = DistributionSpec::parse("gaussian");
  DistributionSpec p1 = DistributionSpec::parse("moons");
  int n_train = 2048;

  TrainConfig train;
  ResidualNetConfig net;
  PhiKind phi = PhiKind::Identity;

  int sample_n = 2048;
  int nfe = 100;  // Euler steps for velocity-field sampling

  static RunConfig defaults();
  static RunConfig from_ini(const IniFile& ini);
  // Normalized echo; parsing it back reproduces this config exactly.
  std::string to_text() const;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long> steps;
  std::optional<std::string> coupling;
  std::optional<std::string> schedule;
  std::optional<int> nfe;

  void apply(RunConfig& cfg) const;
};

// Benchmark suite description (tasks x methods x seeds).
struct SuiteConfig {
  std::vector<BenchmarkTask> tasks;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  BenchmarkSettings settings;

  static SuiteConfig defaults();
  static SuiteConfig from_ini(const IniFile& ini);
  std::string to_text() const;
};

BenchmarkTask parse_task(const std::string& name);
MethodSpec method_from_name(const std::string& name, int nfe_velocity);

}  // namespace otnfm
