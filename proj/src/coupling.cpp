#include "otnfm/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otnfm/errors.hpp"

namespace otnfm {

CouplingStrategy parse_strategy(const std::string& name) {
  if (name == "independent") return CouplingStrategy::Independent;
  if (name == "perbatch") return CouplingStrategy::PerBatch;
  if (name == "minibatch") return CouplingStrategy::Minibatch;
  if (name == "loom") return CouplingStrategy::Loom;
  if (name == "global") return CouplingStrategy::Global;
  throw ConfigError("unknown coupling strategy '" + name + "'");
}

std::string strategy_name(CouplingStrategy s) {
  switch (s) {
    case CouplingStrategy::Independent: return "independent";
    case CouplingStrategy::PerBatch: return "perbatch";
    case CouplingStrategy::Minibatch: return "minibatch";
    case CouplingStrategy::Loom: return "loom";
    case CouplingStrategy::Global: return "global";
  }
  return "?";
}

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

PointBatch gather_rows(const PointBatch& x, const std::vector<int>& idx) {
  const int d = x.cols();
  Tensor out = Tensor::zeros({static_cast<int>(idx.size()), d});
  auto o = out.values_mut();
  const auto v = x.values();
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (int k = 0; k < d; ++k)
      o[i * d + k] = v[static_cast<std::size_t>(idx[i]) * d + k];
  return out;
}

}  // namespace

Tensor cost_matrix(const PointBatch& x0, const PointBatch& x1) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols())
    throw Error("cost_matrix: batch sizes differ");
  const int n = x0.rows(), d = x0.cols();
  Tensor c = Tensor::zeros({n, n});
  auto cv = c.values_mut();
  const auto a = x0.values();
  const auto b = x1.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cv[static_cast<std::size_t>(i) * n + j] =
          sq_dist(&a[static_cast<std::size_t>(i) * d], &b[static_cast<std::size_t>(j) * d], d);
  return c;
}

// Shortest augmenting path over column duals; one augmentation per row.
// Column scans go in ascending index order, so equal-cost alternatives resolve
// to the lowest index deterministically.
std::vector<int> solve_assignment(const Tensor& cost) {
  if (cost.shape().size() != 2 || cost.rows() != cost.cols())
    throw Error("solve_assignment: cost matrix must be square");
  const int n = cost.rows();
  const auto c = cost.values();
  for (double x : c)
    if (!std::isfinite(x)) throw Error("solve_assignment: non-finite cost entry");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n, 0.0), v(n, 0.0), path_cost(n);
  std::vector<int> col4row(n, -1), row4col(n, -1), pred(n, -1);
  std::vector<char> in_rows(n), in_cols(n);

  for (int cur_row = 0; cur_row < n; ++cur_row) {
    std::fill(path_cost.begin(), path_cost.end(), kInf);
    std::fill(in_rows.begin(), in_rows.end(), 0);
    std::fill(in_cols.begin(), in_cols.end(), 0);

    double min_val = 0.0;
    int i = cur_row;
    int sink = -1;
    while (sink == -1) {
      in_rows[i] = 1;
      const double* ci = c.data() + static_cast<std::size_t>(i) * n;
      double lowest = kInf;
      int lowest_j = -1;
      for (int j = 0; j < n; ++j) {
        if (in_cols[j]) continue;
        const double r = min_val + ci[j] - u[i] - v[j];
        if (r < path_cost[j]) {
          path_cost[j] = r;
          pred[j] = i;
        }
        if (path_cost[j] < lowest ||
            (path_cost[j] == lowest && lowest_j != -1 && row4col[j] == -1 &&
             row4col[lowest_j] != -1)) {
          lowest = path_cost[j];
          lowest_j = j;
        }
      }
      if (lowest_j == -1 || lowest == kInf)
        throw Error("solve_assignment: no augmenting path (invalid matrix)");
      min_val = lowest;
      in_cols[lowest_j] = 1;
      if (row4col[lowest_j] == -1)
        sink = lowest_j;
      else
        i = row4col[lowest_j];
    }

    u[cur_row] += min_val;
    for (int ip = 0; ip < n; ++ip)
      if (in_rows[ip] && ip != cur_row) u[ip] += min_val - path_cost[col4row[ip]];
    for (int j = 0; j < n; ++j)
      if (in_cols[j]) v[j] -= min_val - path_cost[j];

    int j = sink;
    while (true) {
      const int ip = pred[j];
      row4col[j] = ip;
      const int next = col4row[ip];
      col4row[ip] = j;
      if (ip == cur_row) break;
      j = next;
    }
  }
  return col4row;
}

double pairing_cost(const PointBatch& x0, const PointBatch& x1,
                    const std::vector<int>& sigma) {
  const int n = x0.rows(), d = x0.cols();
  if (static_cast<int>(sigma.size()) != n) throw Error("pairing_cost: sigma length");
  const auto a = x0.values();
  const auto b = x1.values();
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += sq_dist(&a[static_cast<std::size_t>(i) * d],
                   &b[static_cast<std::size_t>(sigma[i]) * d], d);
  return acc;
}

bool Coupling::is_permutation() const {
  std::vector<char> seen(sigma.size(), 0);
  for (int s : sigma) {
    if (s < 0 || s >= static_cast<int>(sigma.size()) || seen[s]) return false;
    seen[s] = 1;
  }
  return true;
}

Coupling global_coupling(const PointBatch& x0, const PointBatch& x1) {
  const int n = x0.rows();
  if (n > kGlobalAssignmentCap)
    throw Error("global coupling capped at n <= " + std::to_string(kGlobalAssignmentCap) +
                "; use minibatch or loom");
  Coupling coup;
  coup.strategy = CouplingStrategy::Global;
  coup.sigma = solve_assignment(cost_matrix(x0, x1));
  coup.total_cost = pairing_cost(x0, x1, coup.sigma);
  return coup;
}

namespace {

// Solves the assignment restricted to rows `idx` of the current pairing and
// splices it into sigma. Returns the (non-positive) cost change; keeps the old
// pairing when the local solution is not an improvement, so total cost never
// increases even under float rounding.
double refine_chunk(std::vector<int>& sigma, const std::vector<int>& idx,
                    const PointBatch& x0, const PointBatch& x1) {
  const int b = static_cast<int>(idx.size());
  const int d = x0.cols();
  const auto xa = x0.values();
  const auto xb = x1.values();

  Tensor local_cost = Tensor::zeros({b, b});
  auto lc = local_cost.values_mut();
  for (int r = 0; r < b; ++r)
    for (int s = 0; s < b; ++s)
      lc[static_cast<std::size_t>(r) * b + s] =
          sq_dist(&xa[static_cast<std::size_t>(idx[r]) * d],
                  &xb[static_cast<std::size_t>(sigma[idx[s]]) * d], d);

  const std::vector<int> local = solve_assignment(local_cost);
  double old_cost = 0.0, new_cost = 0.0;
  for (int r = 0; r < b; ++r) {
    old_cost += lc[static_cast<std::size_t>(r) * b + r];
    new_cost += lc[static_cast<std::size_t>(r) * b + local[r]];
  }
  if (new_cost > old_cost) return 0.0;

  std::vector<int> staged(b);
  for (int r = 0; r < b; ++r) staged[r] = sigma[idx[local[r]]];
  for (int r = 0; r < b; ++r) sigma[idx[r]] = staged[r];
  return new_cost - old_cost;
}

}  // namespace

Coupling minibatch_precompute(const PointBatch& x0, const PointBatch& x1,
                              int chunk, int sweeps, Rng& rng) {
  const int n = x0.rows();
  if (x1.rows() != n) throw Error("minibatch_precompute: dataset sizes differ");
  if (chunk < 1 || chunk > n) throw Error("minibatch_precompute: chunk must be in [1, n]");

  Coupling coup;
  coup.strategy = CouplingStrategy::Minibatch;
  coup.sigma.resize(n);
  for (int i = 0; i < n; ++i) coup.sigma[i] = i;
  rng.shuffle(coup.sigma);  // initial random pairing

  std::vector<int> order(n);
  for (int s = 0; s < sweeps; ++s) {
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (int start = 0; start < n; start += chunk) {
      const int end = std::min(start + chunk, n);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      refine_chunk(coup.sigma, idx, x0, x1);
    }
  }
  coup.total_cost = pairing_cost(x0, x1, coup.sigma);
  return coup;
}

Coupling loom_init(int n) {
  Coupling coup;
  coup.strategy = CouplingStrategy::Loom;
  coup.sigma.resize(n);
  for (int i = 0; i < n; ++i) coup.sigma[i] = i;
  coup.total_cost = 0.0;  // set by the owner once the dataset is known
  return coup;
}

void loom_update(Coupling& coup, const std::vector<int>& batch_idx,
                 const PointBatch& x0, const PointBatch& x1) {
  if (coup.strategy != CouplingStrategy::Loom)
    throw Error("loom_update: coupling is not in loom mode");
  std::vector<char> seen(coup.sigma.size(), 0);
  for (int i : batch_idx) {
    if (i < 0 || i >= static_cast<int>(coup.sigma.size()) || seen[i])
      throw Error("loom_update: batch indices must be distinct and in range");
    seen[i] = 1;
  }
  coup.total_cost += refine_chunk(coup.sigma, batch_idx, x0, x1);
}

PairedBatch pair_batch(CouplingStrategy strategy, Rng& rng, const PointBatch& x0,
                       const PointBatch& x1, Coupling* coup, int batch) {
  const int n = x0.rows();
  if (batch < 1) throw Error("pair_batch: batch must be >= 1");

  switch (strategy) {
    case CouplingStrategy::Independent: {
      std::vector<int> i0(batch), i1(batch);
      for (int k = 0; k < batch; ++k) i0[k] = rng.uniform_int(n);
      for (int k = 0; k < batch; ++k) i1[k] = rng.uniform_int(x1.rows());
      return {gather_rows(x0, i0), gather_rows(x1, i1), {}};
    }
    case CouplingStrategy::PerBatch: {
      std::vector<int> i0(batch), i1(batch);
      for (int k = 0; k < batch; ++k) i0[k] = rng.uniform_int(n);
      for (int k = 0; k < batch; ++k) i1[k] = rng.uniform_int(x1.rows());
      PointBatch b0 = gather_rows(x0, i0);
      PointBatch b1 = gather_rows(x1, i1);
      const std::vector<int> local = solve_assignment(cost_matrix(b0, b1));
      std::vector<int> reordered(batch);
      for (int k = 0; k < batch; ++k) reordered[k] = i1[local[k]];
      return {std::move(b0), gather_rows(x1, reordered), {}};
    }
    case CouplingStrategy::Minibatch:
    case CouplingStrategy::Global:
    case CouplingStrategy::Loom: {
      if (!coup) throw Error("pair_batch: strategy requires a coupling");
      if (batch > n) throw Error("pair_batch: batch exceeds dataset size");
      std::vector<int> idx = rng.indices_without_replacement(n, batch);
      if (strategy == CouplingStrategy::Loom) loom_update(*coup, idx, x0, x1);
      std::vector<int> partners(batch);
      for (int k = 0; k < batch; ++k) partners[k] = coup->sigma[idx[k]];
      return {gather_rows(x0, idx), gather_rows(x1, partners), std::move(idx)};
    }
  }
  throw Error("pair_batch: bad strategy");
}

}  // namespace otnfm
