#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dgflow/tensor.hpp"

namespace dgflow {

class Tape;

enum class Op : std::uint8_t {
  leaf,
  constant,
  add,
  sub,
  mul,
  div,
  neg,
  scale,
  shift,
  matmul,
  tanh,
  sin,
  cos,
  rsqrt,
  sum_all,
  expand,
  sum_rows,
  broadcast_rows,
  sum_cols,
  broadcast_cols,
  select,
  roll,
  reshape,
  slice_cols,
  pad_cols,
  kernel_tap,
  kernel_embed,
};

const char* op_name(Op op);

// Handle to a node of a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const;
  Tape* tape_ptr() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  // By value: the tape may reallocate while the caller still holds it.
  Shape shape() const;
  std::size_t numel() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Node {
  Op op = Op::leaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  // Whether gradients may flow into this node (false for constants and for
  // anything computed only from constants).
  bool needs_grad = false;
  // Op attributes; their meaning depends on op.
  double c = 0.0;
  std::int64_t i0 = 0, i1 = 0, i2 = 0;
  bool ta = false, tb = false;
  Shape shape;
  std::vector<std::uint8_t> mask;
};

// Gradients of a scalar root with respect to selected nodes.
class GradMap {
 public:
  GradMap() = default;
  explicit GradMap(std::vector<std::optional<Var>> grads) : grads_(std::move(grads)) {}

  // True when the root depends on the node.
  bool has(const Var& v) const;
  // Gradient as a tape node; throws if the root does not depend on v.
  Var at(const Var& v) const;
  // Gradient tensor; zeros of the node's shape when unreachable.
  Tensor value(const Var& v) const;

 private:
  std::vector<std::optional<Var>> grads_;
};

// Define-by-run record of a computation. Every operation appends a node;
// backward() appends the adjoint computation as further nodes so gradients
// can themselves be differentiated.
class Tape {
 public:
  explicit Tape(Precision precision = Precision::f64) : precision_(precision) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Precision precision() const noexcept { return precision_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Differentiable input (parameter or state).
  Var leaf(Tensor value);
  // Non-differentiable input.
  Var constant(Tensor value);
  Var constant(double value) { return constant(Tensor::scalar(value)); }

  Var record(Node node);

  // Gradients of scalar `root` with respect to `wrt`. Only the parts of the
  // graph that depend on `wrt` are differentiated.
  GradMap backward(const Var& root, const std::vector<Var>& wrt);
  // Gradients with respect to every leaf.
  GradMap backward(const Var& root);

  // Recomputes every non-input node from its inputs. Returns false when any
  // recomputed value differs bitwise from the stored one.
  bool verify_replay() const;
  // Overwrites leaf values and recomputes all dependent nodes.
  void replay(const std::vector<std::pair<Var, Tensor>>& new_inputs);

 private:
  Tensor evaluate(const Node& n) const;

  Precision precision_;
  std::vector<Node> nodes_;
};

// Elementwise arithmetic. Operands have equal shapes or one is a single entry.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);

// a[m x k] * b[k x n], with optional transposes. A rank-1 b is a column.
Var matmul(const Var& a, const Var& b, bool ta = false, bool tb = false);

Var tanh(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var rsqrt(const Var& x);

// Sum of every entry, as a rank-0 tensor.
Var sum(const Var& x);
Var expand(const Var& scalar, const Shape& shape);
// [R x C] -> [C]
Var sum_rows(const Var& x);
// [C] -> [R x C]
Var broadcast_rows(const Var& x, std::size_t rows);
// [R x C] -> [R]
Var sum_cols(const Var& x);
// [R] -> [R x C]
Var broadcast_cols(const Var& x, std::size_t cols);

// Entrywise mask ? a : b. Either branch may be a single entry.
Var select(const std::vector<std::uint8_t>& mask, const Var& a, const Var& b);

// Periodic shift on the flat data viewed as [outer x period x inner]:
// y[o, i, c] = x[o, (i + shift) mod period, c].
Var roll(const Var& x, std::int64_t shift, std::size_t period, std::size_t inner = 1);
Var reshape(const Var& x, const Shape& shape);
// Columns [start, start+len) of a rank-2 tensor.
Var slice_cols(const Var& x, std::size_t start, std::size_t len);
// Places a rank-2 tensor at column `start` of a zero tensor with `total` columns.
Var pad_cols(const Var& x, std::size_t start, std::size_t total);
Var concat_cols(const Var& a, const Var& b);

// Tap j of a [c_out x c_in x k] kernel as a [c_out x c_in] matrix.
Var kernel_tap(const Var& kernel, std::size_t j);
// Inverse placement: [c_out x c_in] matrix into tap j of a zero kernel.
Var kernel_embed(const Var& tap, std::size_t j, std::size_t k);

// Circular cross-correlation y[o, i] = sum_{c,j} K[o, c, j] x[c, i + j - r],
// r = (k - 1) / 2, for x of shape [c_in x N].
Var conv1d_periodic(const Var& kernel, const Var& x);
// Same stencil for a batch laid out position-major: x is [(B*N) x c_in] and
// the result is [(B*N) x c_out].
Var conv1d_periodic_rows(const Var& kernel, const Var& x, std::size_t n);

// Fast hyperbolic tangent used by the tape; agrees with std::tanh to a few ulp.
void tanh_kernel(const double* x, double* y, std::size_t n);

}  // namespace dgflow
