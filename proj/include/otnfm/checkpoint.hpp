#pragma once

#include <optional>
#include <string>

#include "otnfm/config.hpp"
#include "otnfm/coupling.hpp"
#include "otnfm/flow.hpp"

namespace otnfm {

// Model + coupling + config snapshot. Numbers are stored as 17-significant-
// digit decimal strings, so save -> load -> save is byte-identical.
struct Checkpoint {
  int format_version = 1;
  RunConfig config;                // includes seed and architecture fields
  std::optional<Coupling> coupling;

  // Named flat parameter arrays in model order.
  std::vector<std::pair<std::string, std::vector<double>>> params;

  static Checkpoint capture(const FlowModel& m, const RunConfig& cfg,
                            const Coupling* coup);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Rebuilds the model; fails loudly when the stored shapes disagree with the
  // architecture descriptor.
  FlowModel restore() const;
};

}  // namespace otnfm
