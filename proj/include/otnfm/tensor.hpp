#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace otnfm {

class Tape;

// Dense 64-bit real array, 0-, 1- or 2-dimensional. A tensor is a cheap handle
// (shared storage); copies alias. Tensors created while a tape is recording
// carry a pointer to it and receive gradients on backward; detached tensors
// never do.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);
  // Leaf tensor that participates in differentiation on `tape`.
  static Tensor param(std::vector<int> shape, Tape& tape);

  bool defined() const { return d_ != nullptr; }
  const std::vector<int>& shape() const;
  std::size_t size() const;
  int rows() const;  // 1 for scalars and 1-D tensors
  int cols() const;  // size() for 1-D tensors

  std::span<const double> values() const;
  std::span<double> values_mut();
  double value() const;  // scalar tensors only
  double at(int i, int j) const;
  double& at_mut(int i, int j);

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();   // allocates (zeroed) on first use
  void zero_grad();               // keeps allocation
  void accumulate_grad(std::span<const double> delta);

  Tape* tape() const;
  bool attached() const { return tape() != nullptr; }
  Tensor detach() const;  // deep copy with no tape association

  Tensor clone() const;  // deep copy, keeps tape association off

  std::string shape_str() const;

 private:
  friend class Tape;
  friend Tensor make_op_output(std::vector<int> shape, Tape* tape);

  struct Data {
    std::vector<int> shape;
    std::vector<double> v;
    std::vector<double> g;  // empty until a gradient is accumulated
    Tape* tape = nullptr;
  };
  std::shared_ptr<Data> d_;
};

// Records one backward closure per forward primitive, in forward order.
// backward() seeds the loss gradient, visits every node exactly once in
// reverse order, then clears the node list.
class Tape {
 public:
  void record(std::function<void()> backward_fn);
  void backward(Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t adjoint_visits() const { return adjoint_visits_; }
  void reset_counters() { adjoint_visits_ = 0; }
  void clear() { nodes_.clear(); }

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  // RAII pause used by inference and finite-difference probes.
  struct NoRecord {
    explicit NoRecord(Tape& t) : tape(t), prev(t.recording_) { t.recording_ = false; }
    ~NoRecord() { tape.recording_ = prev; }
    Tape& tape;
    bool prev;
  };

 private:
  std::vector<std::function<void()>> nodes_;
  std::size_t adjoint_visits_ = 0;
  bool recording_ = true;
};

// --- primitives -------------------------------------------------------------

// c[m x n] = a[m x k] . b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise with scalar<->tensor broadcast (no other broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh_op(const Tensor& a);
Tensor relu(const Tensor& a);

// x[n x m] + row-broadcast bias[m].
Tensor add_bias(const Tensor& x, const Tensor& bias);
// Rows of x scaled by constants s[n] (s is not differentiated).
Tensor row_scale(const Tensor& x, std::span<const double> s);
// [a | b] along columns.
Tensor concat_cols(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& a);
// Mean over rows of the squared Euclidean row distance.
Tensor mse(const Tensor& pred, const Tensor& target);

// Max relative error (scaled by max(|g|, 1)) between tape gradients of
// loss_fn and central finite differences over every coordinate of params.
// loss_fn must be deterministic and re-evaluate from current param values.
double grad_check(const std::function<Tensor()>& loss_fn,
                  std::span<Tensor> params, double h = 1e-5);

}  // namespace otnfm
