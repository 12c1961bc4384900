#include "otnfm/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "otnfm/errors.hpp"

namespace otnfm {

namespace {

// Training allocates and frees hundreds of ~256 KB buffers per step; keep them
// on the heap free-list instead of round-tripping through mmap.
[[maybe_unused]] const bool malloc_tuned = [] {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
#endif
  return true;
}();

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error("negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

// Row-major kernels. The j-inner loops carry no reductions, so they
// auto-vectorize under -O3 without fast-math.

// C = A[m x k] . B[k x n], overwriting C.
void gemm_nn(const double* __restrict a, const double* __restrict b,
             double* __restrict c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C += A[m x k] . B[n x k]^T, via a one-off transpose of B.
void gemm_nt_acc(const double* __restrict a, const double* __restrict b,
                 double* __restrict c, int m, int k, int n) {
  std::vector<double> bt(static_cast<std::size_t>(k) * n);
  for (int j = 0; j < n; ++j)
    for (int p = 0; p < k; ++p)
      bt[static_cast<std::size_t>(p) * n + j] = b[static_cast<std::size_t>(j) * k + p];
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = bt.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C += A[k x m]^T . B[k x n]
void gemm_tn_acc(const double* __restrict a, const double* __restrict b,
                 double* __restrict c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<std::size_t>(p) * m;
    const double* bp = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double api = ap[i];
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->v.assign(shape_size(shape), 0.0);
  t.d_->shape = std::move(shape);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (double& x : t.d_->v) x = value;
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (shape_size(shape) != values.size())
    throw Error("Tensor::from: shape does not match value count");
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = std::move(shape);
  t.d_->v = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

Tensor Tensor::param(std::vector<int> shape, Tape& tape) {
  Tensor t = zeros(std::move(shape));
  t.d_->tape = &tape;
  return t;
}

const std::vector<int>& Tensor::shape() const { return d_->shape; }
std::size_t Tensor::size() const { return d_->v.size(); }

int Tensor::rows() const {
  return d_->shape.size() == 2 ? d_->shape[0] : 1;
}

int Tensor::cols() const {
  if (d_->shape.size() == 2) return d_->shape[1];
  return static_cast<int>(size());
}

std::span<const double> Tensor::values() const { return d_->v; }
std::span<double> Tensor::values_mut() { return d_->v; }

double Tensor::value() const {
  if (size() != 1) throw Error("value(): tensor is not scalar, shape " + shape_str());
  return d_->v[0];
}

double Tensor::at(int i, int j) const { return d_->v[static_cast<std::size_t>(i) * cols() + j]; }
double& Tensor::at_mut(int i, int j) { return d_->v[static_cast<std::size_t>(i) * cols() + j]; }

bool Tensor::has_grad() const { return d_ && !d_->g.empty(); }

std::span<const double> Tensor::grad() const {
  if (d_->g.empty()) throw Error("grad(): no gradient accumulated");
  return d_->g;
}

std::span<double> Tensor::grad_mut() {
  if (d_->g.empty()) d_->g.assign(d_->v.size(), 0.0);
  return d_->g;
}

void Tensor::zero_grad() {
  for (double& x : d_->g) x = 0.0;
}

void Tensor::accumulate_grad(std::span<const double> delta) {
  if (delta.size() != size()) throw Error("accumulate_grad: size mismatch");
  auto g = grad_mut();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

Tape* Tensor::tape() const { return d_ ? d_->tape : nullptr; }

Tensor Tensor::detach() const {
  Tensor t;
  t.d_ = std::make_shared<Data>();
  t.d_->shape = d_->shape;
  t.d_->v = d_->v;
  return t;
}

Tensor Tensor::clone() const { return detach(); }

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < d_->shape.size(); ++i)
    os << (i ? "x" : "") << d_->shape[i];
  os << "]";
  return os.str();
}

// --- Tape -------------------------------------------------------------------

void Tape::record(std::function<void()> backward_fn) {
  if (recording_) nodes_.push_back(std::move(backward_fn));
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) throw Error("backward: loss must be scalar");
  if (loss.tape() != this)
    throw Error("backward: loss is detached from this tape");
  loss.grad_mut()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    (*it)();
    ++adjoint_visits_;
  }
  nodes_.clear();
}

// --- op plumbing ------------------------------------------------------------

namespace {

Tape* common_tape(const Tensor& a, const Tensor& b) {
  Tape* ta = a.tape();
  Tape* tb = b.tape();
  if (ta && tb && ta != tb) throw Error("operands recorded on different tapes");
  Tape* t = ta ? ta : tb;
  return (t && t->recording()) ? t : nullptr;
}

Tape* live_tape(const Tensor& a) {
  Tape* t = a.tape();
  return (t && t->recording()) ? t : nullptr;
}

}  // namespace

Tensor make_op_output(std::vector<int> shape, Tape* tape) {
  Tensor t = Tensor::zeros(std::move(shape));
  t.d_->tape = tape;
  return t;
}

namespace {

bool wants_grad(const Tensor& t) { return t.tape() != nullptr; }

// Output gradient may be absent when the output never reached the loss.
bool has_out_grad(const Tensor& out) { return out.has_grad(); }

}  // namespace

// --- matmul -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw Error("matmul: operands must be 2-D");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw Error("matmul: inner dims disagree " + a.shape_str() + " . " + b.shape_str());

  Tape* tape = common_tape(a, b);
  Tensor out = make_op_output({m, n}, tape);
  gemm_nn(a.values().data(), b.values().data(), out.values_mut().data(), m, k, n);

  if (tape) {
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, m, k, n]() mutable {
      if (!has_out_grad(oc)) return;
      const double* g = oc.grad().data();
      if (wants_grad(ac))
        gemm_nt_acc(g, bc.values().data(), ac.grad_mut().data(), m, n, k);
      if (wants_grad(bc))
        gemm_tn_acc(ac.values().data(), g, bc.grad_mut().data(), k, m, n);
    });
  }
  return out;
}

// --- elementwise ------------------------------------------------------------

namespace {

enum class BinKind { Add, Sub, Mul };

Tensor binary_ew(const Tensor& a, const Tensor& b, BinKind kind) {
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw Error("elementwise: incompatible shapes " + a.shape_str() + " vs " + b.shape_str());

  const Tensor& big = a_scalar ? b : a;
  Tape* tape = common_tape(a, b);
  Tensor out = make_op_output(big.shape(), tape);

  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values_mut();
  const std::size_t n = ov.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    switch (kind) {
      case BinKind::Add: ov[i] = x + y; break;
      case BinKind::Sub: ov[i] = x - y; break;
      case BinKind::Mul: ov[i] = x * y; break;
    }
  }

  if (tape) {
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, kind, a_scalar, b_scalar]() mutable {
      if (!has_out_grad(oc)) return;
      const auto g = oc.grad();
      const std::size_t n = g.size();
      if (wants_grad(ac)) {
        auto ga = ac.grad_mut();
        for (std::size_t i = 0; i < n; ++i) {
          double d = g[i];
          if (kind == BinKind::Mul) d *= bc.values()[b_scalar ? 0 : i];
          ga[a_scalar ? 0 : i] += d;
        }
      }
      if (wants_grad(bc)) {
        auto gb = bc.grad_mut();
        for (std::size_t i = 0; i < n; ++i) {
          double d = g[i];
          switch (kind) {
            case BinKind::Add: break;
            case BinKind::Sub: d = -d; break;
            case BinKind::Mul: d *= ac.values()[a_scalar ? 0 : i]; break;
          }
          gb[b_scalar ? 0 : i] += d;
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_ew(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_ew(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_ew(a, b, BinKind::Mul); }

Tensor scale(const Tensor& a, double factor) {
  Tape* tape = live_tape(a);
  Tensor out = make_op_output(a.shape(), tape);
  const auto av = a.values();
  auto ov = out.values_mut();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * factor;

  if (tape) {
    Tensor ac = a, oc = out;
    tape->record([ac, oc, factor]() mutable {
      if (!has_out_grad(oc) || !wants_grad(ac)) return;
      const auto g = oc.grad();
      auto ga = ac.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
  }
  return out;
}

Tensor tanh_op(const Tensor& a) {
  Tape* tape = live_tape(a);
  Tensor out = make_op_output(a.shape(), tape);
  const auto av = a.values();
  auto ov = out.values_mut();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = std::tanh(av[i]);

  if (tape) {
    Tensor ac = a, oc = out;
    tape->record([ac, oc]() mutable {
      if (!has_out_grad(oc) || !wants_grad(ac)) return;
      const auto g = oc.grad();
      const auto y = oc.values();
      auto ga = ac.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tape* tape = live_tape(a);
  Tensor out = make_op_output(a.shape(), tape);
  const auto av = a.values();
  auto ov = out.values_mut();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;

  if (tape) {
    Tensor ac = a, oc = out;
    tape->record([ac, oc]() mutable {
      if (!has_out_grad(oc) || !wants_grad(ac)) return;
      const auto g = oc.grad();
      const auto x = ac.values();
      auto ga = ac.grad_mut();
      // Subgradient 0 at and below the kink.
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] > 0.0) ga[i] += g[i];
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.shape().size() != 2 || bias.shape().size() != 1)
    throw Error("add_bias: expected 2-D input and 1-D bias");
  const int n = x.rows(), m = x.cols();
  if (static_cast<int>(bias.size()) != m)
    throw Error("add_bias: bias length != columns");

  Tape* tape = common_tape(x, bias);
  Tensor out = make_op_output({n, m}, tape);
  const auto xv = x.values();
  const auto bv = bias.values();
  auto ov = out.values_mut();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      ov[static_cast<std::size_t>(i) * m + j] = xv[static_cast<std::size_t>(i) * m + j] + bv[j];

  if (tape) {
    Tensor xc = x, bc = bias, oc = out;
    tape->record([xc, bc, oc, n, m]() mutable {
      if (!has_out_grad(oc)) return;
      const auto g = oc.grad();
      if (wants_grad(xc)) {
        auto gx = xc.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (wants_grad(bc)) {
        auto gb = bc.grad_mut();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < m; ++j) gb[j] += g[static_cast<std::size_t>(i) * m + j];
      }
    });
  }
  return out;
}

Tensor row_scale(const Tensor& x, std::span<const double> s) {
  if (x.shape().size() != 2) throw Error("row_scale: expected 2-D input");
  const int n = x.rows(), m = x.cols();
  if (static_cast<int>(s.size()) != n) throw Error("row_scale: one factor per row required");

  Tape* tape = live_tape(x);
  Tensor out = make_op_output({n, m}, tape);
  const auto xv = x.values();
  auto ov = out.values_mut();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      ov[static_cast<std::size_t>(i) * m + j] = xv[static_cast<std::size_t>(i) * m + j] * s[i];

  if (tape) {
    Tensor xc = x, oc = out;
    std::vector<double> sc(s.begin(), s.end());
    tape->record([xc, oc, sc, n, m]() mutable {
      if (!has_out_grad(oc) || !wants_grad(xc)) return;
      const auto g = oc.grad();
      auto gx = xc.grad_mut();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          gx[static_cast<std::size_t>(i) * m + j] += g[static_cast<std::size_t>(i) * m + j] * sc[i];
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.rows() != b.rows())
    throw Error("concat_cols: row counts differ");
  const int n = a.rows(), p = a.cols(), q = b.cols();

  Tape* tape = common_tape(a, b);
  Tensor out = make_op_output({n, p + q}, tape);
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values_mut();
  for (int i = 0; i < n; ++i) {
    std::memcpy(&ov[static_cast<std::size_t>(i) * (p + q)],
                &av[static_cast<std::size_t>(i) * p], sizeof(double) * p);
    std::memcpy(&ov[static_cast<std::size_t>(i) * (p + q) + p],
                &bv[static_cast<std::size_t>(i) * q], sizeof(double) * q);
  }

  if (tape) {
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, n, p, q]() mutable {
      if (!has_out_grad(oc)) return;
      const auto g = oc.grad();
      if (wants_grad(ac)) {
        auto ga = ac.grad_mut();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < p; ++j)
            ga[static_cast<std::size_t>(i) * p + j] += g[static_cast<std::size_t>(i) * (p + q) + j];
      }
      if (wants_grad(bc)) {
        auto gb = bc.grad_mut();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < q; ++j)
            gb[static_cast<std::size_t>(i) * q + j] += g[static_cast<std::size_t>(i) * (p + q) + p + j];
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tape* tape = live_tape(a);
  Tensor out = make_op_output({}, tape);
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  out.values_mut()[0] = acc;

  if (tape) {
    Tensor ac = a, oc = out;
    tape->record([ac, oc]() mutable {
      if (!has_out_grad(oc) || !wants_grad(ac)) return;
      const double g = oc.grad()[0];
      auto ga = ac.grad_mut();
      for (double& x : ga) x += g;
    });
  }
  return out;
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw Error("mse: shape mismatch " + pred.shape_str() + " vs " + target.shape_str());
  const int n = pred.rows();

  Tape* tape = common_tape(pred, target);
  Tensor out = make_op_output({}, tape);
  const auto pv = pred.values();
  const auto tv = target.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - tv[i];
    acc += d * d;
  }
  out.values_mut()[0] = acc / n;

  if (tape) {
    Tensor pc = pred, tc = target, oc = out;
    tape->record([pc, tc, oc, n]() mutable {
      if (!has_out_grad(oc)) return;
      const double g = oc.grad()[0] * 2.0 / n;
      const auto pv = pc.values();
      const auto tv = tc.values();
      if (wants_grad(pc)) {
        auto gp = pc.grad_mut();
        for (std::size_t i = 0; i < pv.size(); ++i) gp[i] += g * (pv[i] - tv[i]);
      }
      if (wants_grad(tc)) {
        auto gt = tc.grad_mut();
        for (std::size_t i = 0; i < pv.size(); ++i) gt[i] -= g * (pv[i] - tv[i]);
      }
    });
  }
  return out;
}

// --- gradient checking ------------------------------------------------------

double grad_check(const std::function<Tensor()>& loss_fn,
                  std::span<Tensor> params, double h) {
  if (params.empty()) throw Error("grad_check: no parameters");
  Tape* tape = params[0].tape();
  if (!tape) throw Error("grad_check: parameters are detached");

  for (Tensor& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  tape->backward(loss);

  std::vector<std::vector<double>> recorded;
  recorded.reserve(params.size());
  for (Tensor& p : params) {
    auto g = p.grad_mut();
    recorded.emplace_back(g.begin(), g.end());
  }

  double worst = 0.0;
  {
    Tape::NoRecord pause(*tape);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto v = params[pi].values_mut();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double orig = v[i];
        v[i] = orig + h;
        const double up = loss_fn().value();
        v[i] = orig - h;
        const double down = loss_fn().value();
        v[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double tg = recorded[pi][i];
        const double err = std::abs(fd - tg) / std::max({std::abs(fd), std::abs(tg), 1.0});
        if (err > worst) worst = err;
      }
    }
  }
  return worst;
}

}  // namespace otnfm
