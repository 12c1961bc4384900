#pragma once

#include <string>
#include <vector>

#include "otnfm/rng.hpp"
#include "otnfm/schedule.hpp"
#include "otnfm/tensor.hpp"

namespace otnfm {

enum class CouplingStrategy { Independent, PerBatch, Minibatch, Loom, Global };

CouplingStrategy parse_strategy(const std::string& name);
std::string strategy_name(CouplingStrategy s);

// Pairwise squared Euclidean distances, [B x B].
Tensor cost_matrix(const PointBatch& x0, const PointBatch& x1);

// Exact minimum-cost assignment (shortest augmenting path, O(n^3)).
// Returns sigma with row i matched to column sigma[i]. Entries must be finite.
std::vector<int> solve_assignment(const Tensor& cost);

// Sum of squared distances ||X0[i] - X1[sigma[i]]||^2.
double pairing_cost(const PointBatch& x0, const PointBatch& x1,
                    const std::vector<int>& sigma);

// A bijective pairing of dataset rows: X0[i] <-> X1[sigma[i]].
struct Coupling {
  std::vector<int> sigma;
  CouplingStrategy strategy = CouplingStrategy::Global;
  double total_cost = 0.0;

  bool is_permutation() const;
};

inline constexpr int kGlobalAssignmentCap = 4096;

// Exact full-dataset plan. Rejects n > kGlobalAssignmentCap.
Coupling global_coupling(const PointBatch& x0, const PointBatch& x1);

// Approximate plan: starts from a random pairing, then for each sweep
// re-shuffles the pair order, partitions it into chunks of size B (ragged
// tail allowed) and solves each chunk exactly. The result is frozen.
Coupling minibatch_precompute(const PointBatch& x0, const PointBatch& x1,
                              int chunk, int sweeps, Rng& rng);

// Identity-initialized coupling for online refinement.
Coupling loom_init(int n);

// Re-solves the assignment restricted to `batch_idx` (distinct indices) and
// splices it into sigma. total_cost never increases.
void loom_update(Coupling& coup, const std::vector<int>& batch_idx,
                 const PointBatch& x0, const PointBatch& x1);

struct PairedBatch {
  PointBatch x0, x1;
  std::vector<int> source_rows;  // rows of X0 used (empty for Independent)
};

// Draws one training batch under the given strategy. Strategies backed by a
// plan require `coup`; Loom refines it in place before pairing.
PairedBatch pair_batch(CouplingStrategy strategy, Rng& rng, const PointBatch& x0,
                       const PointBatch& x1, Coupling* coup, int batch);

}  // namespace otnfm
