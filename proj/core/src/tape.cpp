#include "dgflow/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "dgflow/errors.hpp"

namespace dgflow {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using CArrMap = Eigen::Map<const Eigen::ArrayXd>;

[[noreturn]] void shape_fail(Op op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

Shape broadcast_shape(Op op, const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (shape_numel(a) == 1) return b;
  if (shape_numel(b) == 1) return a;
  shape_fail(op, a, b);
}

std::size_t as_size(std::int64_t v) { return static_cast<std::size_t>(v); }

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::neg: return "neg";
    case Op::scale: return "scale";
    case Op::shift: return "shift";
    case Op::matmul: return "matmul";
    case Op::tanh: return "tanh";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::rsqrt: return "rsqrt";
    case Op::sum_all: return "sum";
    case Op::expand: return "expand";
    case Op::sum_rows: return "sum_rows";
    case Op::broadcast_rows: return "broadcast_rows";
    case Op::sum_cols: return "sum_cols";
    case Op::broadcast_cols: return "broadcast_cols";
    case Op::select: return "select";
    case Op::roll: return "roll";
    case Op::reshape: return "reshape";
    case Op::slice_cols: return "slice_cols";
    case Op::pad_cols: return "pad_cols";
    case Op::kernel_tap: return "kernel_tap";
    case Op::kernel_embed: return "kernel_embed";
  }
  return "?";
}

void tanh_kernel(const double* x, double* y, std::size_t n) {
  // Rational approximation near zero, exponential form elsewhere.
  static constexpr double p0 = -9.64399179425052238628E-1, p1 = -9.92877231001918586564E1,
                          p2 = -1.61468768441708447952E3;
  static constexpr double q0 = 1.12811678491632931402E2, q1 = 2.23548839060100448583E3,
                          q2 = 4.84406305325125486048E3;
  // The exponential form runs vectorized over everything; the second pass
  // applies the sign and swaps in the rational form near zero.
  ArrMap ya(y, static_cast<Eigen::Index>(n));
  ya = 1.0 - 2.0 / ((2.0 * CArrMap(x, static_cast<Eigen::Index>(n)).abs().min(40.0)).exp() + 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i], z = v * v;
    const double small = v + v * z * (((p0 * z + p1) * z + p2) / (((z + q0) * z + q1) * z + q2));
    const double big = std::copysign(y[i], v);
    y[i] = std::abs(v) < 0.625 ? small : big;
  }
}

// ---------------------------------------------------------------- Var

Tape& Var::tape() const {
  if (!tape_) throw std::logic_error("use of an unbound Var");
  return *tape_;
}
const Tensor& Var::value() const { return tape().node(id_).value; }
Shape Var::shape() const { return value().shape(); }
std::size_t Var::numel() const { return value().numel(); }

// ---------------------------------------------------------------- GradMap

bool GradMap::has(const Var& v) const {
  return v.id() < grads_.size() && grads_[v.id()].has_value();
}

Var GradMap::at(const Var& v) const {
  if (!has(v)) throw std::out_of_range("no gradient recorded for node " + std::to_string(v.id()));
  return *grads_[v.id()];
}

Tensor GradMap::value(const Var& v) const {
  if (has(v)) return grads_[v.id()]->value();
  return Tensor::zeros(v.shape(), v.value().precision());
}

// ---------------------------------------------------------------- Tape

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = value.precision() == precision_ ? std::move(value) : value.with_precision(precision_);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::constant;
  n.value = value.precision() == precision_ ? std::move(value) : value.with_precision(precision_);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Node n) {
  for (std::size_t in : n.inputs) {
    if (in >= nodes_.size()) throw std::logic_error("tape input out of order");
    n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
  }
  n.value = evaluate(n);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::evaluate(const Node& n) const {
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
  std::vector<double> out;
  Shape shape;

  switch (n.op) {
    case Op::leaf:
    case Op::constant:
      return n.value;

    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      shape = broadcast_shape(n.op, a.shape(), b.shape());
      const std::size_t m = shape_numel(shape);
      out.resize(m);
      const bool sa = a.numel() == 1 && m != 1;
      const bool sb = b.numel() == 1 && m != 1;
      const double* pa = a.data().data();
      const double* pb = b.data().data();
      if (n.op == Op::div) {
        bool zero = false;
        for (std::size_t i = 0; i < b.numel(); ++i) zero |= pb[i] == 0.0;
        if (zero) throw NumericalError("div: zero entry in denominator");
      }
      double* po = out.data();
      auto run = [&](auto f) {
        if (!sa && !sb) {
          for (std::size_t i = 0; i < m; ++i) po[i] = f(pa[i], pb[i]);
        } else if (sa) {
          const double s = pa[0];
          for (std::size_t i = 0; i < m; ++i) po[i] = f(s, pb[i]);
        } else {
          const double s = pb[0];
          for (std::size_t i = 0; i < m; ++i) po[i] = f(pa[i], s);
        }
      };
      switch (n.op) {
        case Op::add: run([](double x, double y) { return x + y; }); break;
        case Op::sub: run([](double x, double y) { return x - y; }); break;
        case Op::mul: run([](double x, double y) { return x * y; }); break;
        default: run([](double x, double y) { return x / y; }); break;
      }
      break;
    }

    case Op::neg:
    case Op::scale:
    case Op::shift: {
      const Tensor& a = in(0);
      shape = a.shape();
      out.resize(a.numel());
      const double c = n.c;
      const double* pa = a.data().data();
      double* po = out.data();
      const std::size_t m = out.size();
      if (n.op == Op::neg) {
        for (std::size_t i = 0; i < m; ++i) po[i] = -pa[i];
      } else if (n.op == Op::scale) {
        for (std::size_t i = 0; i < m; ++i) po[i] = c * pa[i];
      } else {
        for (std::size_t i = 0; i < m; ++i) po[i] = pa[i] + c;
      }
      break;
    }

    case Op::matmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const auto ar = static_cast<Eigen::Index>(a.dim(0)), ac = static_cast<Eigen::Index>(a.dim(1));
      const auto br = static_cast<Eigen::Index>(b.dim(0)), bc = static_cast<Eigen::Index>(b.dim(1));
      Eigen::Map<const RowMat> A(a.data().data(), ar, ac);
      Eigen::Map<const RowMat> B(b.data().data(), br, bc);
      const Eigen::Index m = n.ta ? ac : ar;
      const Eigen::Index k = n.ta ? ar : ac;
      const Eigen::Index nn = n.tb ? br : bc;
      if (k != (n.tb ? bc : br)) shape_fail(n.op, a.shape(), b.shape());
      shape = {static_cast<std::size_t>(m), static_cast<std::size_t>(nn)};
      out.assign(static_cast<std::size_t>(m * nn), 0.0);
      Eigen::Map<RowMat> C(out.data(), m, nn);
      if (k == 0) break;
      // out is already zero, so accumulate instead of letting Eigen clear it again.
      if (!n.ta && !n.tb) C.noalias() += A * B;
      else if (n.ta && !n.tb) C.noalias() += A.transpose() * B;
      else if (!n.ta && n.tb) C.noalias() += A * B.transpose();
      else C.noalias() += A.transpose() * B.transpose();
      break;
    }

    case Op::tanh:
    case Op::sin:
    case Op::cos:
    case Op::rsqrt: {
      const Tensor& a = in(0);
      shape = a.shape();
      out.resize(a.numel());
      const double* pa = a.data().data();
      if (n.op == Op::tanh) {
        tanh_kernel(pa, out.data(), out.size());
      } else if (n.op == Op::sin) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(pa[i]);
      } else if (n.op == Op::cos) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::cos(pa[i]);
      } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (!(pa[i] > 0.0)) throw NumericalError("rsqrt: non-positive argument");
          out[i] = 1.0 / std::sqrt(pa[i]);
        }
      }
      break;
    }

    case Op::sum_all: {
      double s = 0.0;
      for (double v : in(0).data()) s += v;
      out = {s};
      break;
    }

    case Op::expand:
      shape = n.shape;
      out.assign(shape_numel(shape), in(0)[0]);
      break;

    case Op::sum_rows: {
      const Tensor& a = in(0);
      const std::size_t r = a.dim(0), c = a.dim(1);
      shape = {c};
      out.assign(c, 0.0);
      const double* pa = a.data().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += pa[i * c + j];
      break;
    }

    case Op::broadcast_rows: {
      const Tensor& a = in(0);
      const std::size_t r = as_size(n.i0), c = a.numel();
      shape = {r, c};
      out.resize(r * c);
      for (std::size_t i = 0; i < r; ++i)
        std::copy(a.data().begin(), a.data().end(), out.begin() + static_cast<std::ptrdiff_t>(i * c));
      break;
    }

    case Op::sum_cols: {
      const Tensor& a = in(0);
      const std::size_t r = a.dim(0), c = a.dim(1);
      shape = {r};
      out.assign(r, 0.0);
      const double* pa = a.data().data();
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += pa[i * c + j];
        out[i] = s;
      }
      break;
    }

    case Op::broadcast_cols: {
      const Tensor& a = in(0);
      const std::size_t r = a.numel(), c = as_size(n.i0);
      shape = {r, c};
      out.resize(r * c);
      for (std::size_t i = 0; i < r; ++i)
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(i * c), c, a[i]);
      break;
    }

    case Op::select: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      shape = broadcast_shape(n.op, a.shape(), b.shape());
      const std::size_t m = shape_numel(shape);
      out.resize(m);
      const bool sa = a.numel() == 1 && m != 1;
      const bool sb = b.numel() == 1 && m != 1;
      for (std::size_t i = 0; i < m; ++i)
        out[i] = n.mask[i] ? a[sa ? 0 : i] : b[sb ? 0 : i];
      break;
    }

    case Op::roll: {
      const Tensor& a = in(0);
      shape = a.shape();
      const std::size_t period = as_size(n.i1), inner = as_size(n.i2);
      const std::size_t seg = period * inner;
      const std::size_t outer = a.numel() / seg;
      const auto p = static_cast<std::int64_t>(period);
      const std::size_t s = as_size(((n.i0 % p) + p) % p);
      out.resize(a.numel());
      const double* pa = a.data().data();
      for (std::size_t o = 0; o < outer; ++o) {
        const double* src = pa + o * seg;
        double* dst = out.data() + o * seg;
        // dst[i] = src[i + s] for i < period - s, then wrap.
        std::copy(src + s * inner, src + seg, dst);
        std::copy(src, src + s * inner, dst + (period - s) * inner);
      }
      break;
    }

    case Op::reshape:
      shape = n.shape;
      out = in(0).values();
      break;

    case Op::slice_cols: {
      const Tensor& a = in(0);
      const std::size_t r = a.dim(0), c = a.dim(1);
      const std::size_t st = as_size(n.i0), len = as_size(n.i1);
      shape = {r, len};
      out.resize(r * len);
      for (std::size_t i = 0; i < r; ++i)
        std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * c + st), len,
                    out.begin() + static_cast<std::ptrdiff_t>(i * len));
      break;
    }

    case Op::pad_cols: {
      const Tensor& a = in(0);
      const std::size_t r = a.dim(0), len = a.dim(1);
      const std::size_t st = as_size(n.i0), total = as_size(n.i1);
      shape = {r, total};
      out.assign(r * total, 0.0);
      for (std::size_t i = 0; i < r; ++i)
        std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * len), len,
                    out.begin() + static_cast<std::ptrdiff_t>(i * total + st));
      break;
    }

    case Op::kernel_tap: {
      const Tensor& a = in(0);
      const std::size_t co = a.dim(0), ci = a.dim(1), k = a.dim(2), j = as_size(n.i0);
      shape = {co, ci};
      out.resize(co * ci);
      for (std::size_t o = 0; o < co; ++o)
        for (std::size_t c = 0; c < ci; ++c) out[o * ci + c] = a[(o * ci + c) * k + j];
      break;
    }

    case Op::kernel_embed: {
      const Tensor& a = in(0);
      const std::size_t co = a.dim(0), ci = a.dim(1), j = as_size(n.i0), k = as_size(n.i1);
      shape = {co, ci, k};
      out.assign(co * ci * k, 0.0);
      for (std::size_t o = 0; o < co; ++o)
        for (std::size_t c = 0; c < ci; ++c) out[(o * ci + c) * k + j] = a[o * ci + c];
      break;
    }
  }

  if (precision_ == Precision::f32) {
    for (double& v : out) v = round_to(v, precision_);
  }
  require_finite(out, op_name(n.op));
  return Tensor::from_unchecked(std::move(shape), std::move(out), precision_);
}

GradMap Tape::backward(const Var& root) {
  std::vector<Var> leaves;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::leaf) leaves.emplace_back(this, i);
  }
  return backward(root, leaves);
}

GradMap Tape::backward(const Var& root, const std::vector<Var>& wrt) {
  if (root.tape_ptr() != this) throw std::invalid_argument("backward: root belongs to another tape");
  const std::size_t r = root.id();
  if (nodes_[r].value.numel() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_string(nodes_[r].value.shape()));
  }

  const std::size_t count = r + 1;
  std::vector<char> relevant(count, 0);
  for (const Var& w : wrt) {
    if (w.tape_ptr() != this) throw std::invalid_argument("backward: wrt node from another tape");
    if (w.id() < count) relevant[w.id()] = 1;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (relevant[i]) continue;
    for (std::size_t in : nodes_[i].inputs) {
      if (relevant[in]) {
        relevant[i] = 1;
        break;
      }
    }
  }

  std::vector<std::optional<Var>> grads(count);
  if (!relevant[r]) return GradMap(std::move(grads));
  grads[r] = constant(Tensor::full(nodes_[r].value.shape(), 1.0));

  std::optional<Var> zero;
  auto zero_scalar = [&]() {
    if (!zero) zero = constant(0.0);
    return *zero;
  };
  auto accumulate = [&](std::size_t id, Var contrib) {
    const Shape target = nodes_[id].value.shape();
    if (contrib.shape() != target) {
      if (shape_numel(target) == 1) contrib = reshape(sum(contrib), target);
      else throw std::logic_error("backward: adjoint shape mismatch");
    }
    grads[id] = grads[id] ? *grads[id] + contrib : contrib;
  };

  for (std::size_t i = count; i-- > 0;) {
    if (!grads[i] || !relevant[i]) continue;
    const Op op = nodes_[i].op;
    if (op == Op::leaf || op == Op::constant) continue;
    const std::vector<std::size_t> inputs = nodes_[i].inputs;
    const Var g = *grads[i];
    const Var y(this, i);
    const Var a(this, inputs[0]);
    const bool ra = relevant[inputs[0]];
    const bool rb = inputs.size() > 1 && relevant[inputs[1]];
    const Var b = inputs.size() > 1 ? Var(this, inputs[1]) : Var();
    const double c = nodes_[i].c;
    const std::int64_t i0 = nodes_[i].i0, i1 = nodes_[i].i1, i2 = nodes_[i].i2;

    switch (op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::add:
        if (ra) accumulate(a.id(), g);
        if (rb) accumulate(b.id(), g);
        break;
      case Op::sub:
        if (ra) accumulate(a.id(), g);
        if (rb) accumulate(b.id(), -g);
        break;
      case Op::mul:
        if (ra) accumulate(a.id(), g * b);
        if (rb) accumulate(b.id(), g * a);
        break;
      case Op::div: {
        if (ra) accumulate(a.id(), g / b);
        if (rb) accumulate(b.id(), -((g * y) / b));
        break;
      }
      case Op::neg:
        accumulate(a.id(), -g);
        break;
      case Op::scale:
        accumulate(a.id(), c * g);
        break;
      case Op::shift:
        accumulate(a.id(), g);
        break;
      case Op::matmul: {
        const bool ta = nodes_[i].ta, tb = nodes_[i].tb;
        if (!ta && !tb) {
          if (ra) accumulate(a.id(), matmul(g, b, false, true));
          if (rb) accumulate(b.id(), matmul(a, g, true, false));
        } else if (ta && !tb) {
          if (ra) accumulate(a.id(), matmul(b, g, false, true));
          if (rb) accumulate(b.id(), matmul(a, g, false, false));
        } else if (!ta && tb) {
          if (ra) accumulate(a.id(), matmul(g, b, false, false));
          if (rb) accumulate(b.id(), matmul(g, a, true, false));
        } else {
          if (ra) accumulate(a.id(), matmul(b, g, true, true));
          if (rb) accumulate(b.id(), matmul(g, a, true, true));
        }
        break;
      }
      case Op::tanh:
        accumulate(a.id(), g * (1.0 - y * y));
        break;
      case Op::sin:
        accumulate(a.id(), g * cos(a));
        break;
      case Op::cos:
        accumulate(a.id(), -(g * sin(a)));
        break;
      case Op::rsqrt:
        accumulate(a.id(), -0.5 * (g * (y * (y * y))));
        break;
      case Op::sum_all:
        accumulate(a.id(), expand(g, a.shape()));
        break;
      case Op::expand:
        accumulate(a.id(), reshape(sum(g), a.shape()));
        break;
      case Op::sum_rows:
        accumulate(a.id(), broadcast_rows(g, a.value().dim(0)));
        break;
      case Op::broadcast_rows:
        accumulate(a.id(), reshape(sum_rows(g), a.shape()));
        break;
      case Op::sum_cols:
        accumulate(a.id(), broadcast_cols(g, a.value().dim(1)));
        break;
      case Op::broadcast_cols:
        accumulate(a.id(), reshape(sum_cols(g), a.shape()));
        break;
      case Op::select: {
        const std::vector<std::uint8_t> mask = nodes_[i].mask;
        if (ra) accumulate(a.id(), select(mask, g, zero_scalar()));
        if (rb) accumulate(b.id(), select(mask, zero_scalar(), g));
        break;
      }
      case Op::roll:
        accumulate(a.id(), roll(g, -i0, as_size(i1), as_size(i2)));
        break;
      case Op::reshape:
        accumulate(a.id(), reshape(g, a.shape()));
        break;
      case Op::slice_cols:
        accumulate(a.id(), pad_cols(g, as_size(i0), a.value().dim(1)));
        break;
      case Op::pad_cols:
        accumulate(a.id(), slice_cols(g, as_size(i0), a.value().dim(1)));
        break;
      case Op::kernel_tap:
        accumulate(a.id(), kernel_embed(g, as_size(i0), a.value().dim(2)));
        break;
      case Op::kernel_embed:
        accumulate(a.id(), kernel_tap(g, as_size(i0)));
        break;
    }
  }
  return GradMap(std::move(grads));
}

bool Tape::verify_replay() const {
  for (const Node& n : nodes_) {
    if (n.op == Op::leaf || n.op == Op::constant) continue;
    if (!evaluate(n).identical(n.value)) return false;
  }
  return true;
}

void Tape::replay(const std::vector<std::pair<Var, Tensor>>& new_inputs) {
  for (const auto& [v, t] : new_inputs) {
    Node& n = nodes_.at(v.id());
    if (n.op != Op::leaf && n.op != Op::constant) throw std::invalid_argument("replay: not an input node");
    if (t.shape() != n.value.shape()) shape_fail(Op::leaf, t.shape(), n.value.shape());
    n.value = t.with_precision(precision_);
  }
  for (Node& n : nodes_) {
    if (n.op == Op::leaf || n.op == Op::constant) continue;
    n.value = evaluate(n);
  }
}

// ---------------------------------------------------------------- ops

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape_ptr() != b.tape_ptr()) throw std::invalid_argument("operands live on different tapes");
  return a.tape();
}

Var binary(Op op, const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  broadcast_shape(op, a.shape(), b.shape());
  Node n;
  n.op = op;
  n.inputs = {a.id(), b.id()};
  return t.record(std::move(n));
}

Var unary(Op op, const Var& a, double c = 0.0) {
  Node n;
  n.op = op;
  n.inputs = {a.id()};
  n.c = c;
  return a.tape().record(std::move(n));
}

void require_rank(const Var& v, std::size_t rank, const char* what) {
  if (v.shape().size() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(v.shape()));
  }
}

}  // namespace

Var operator+(const Var& a, const Var& b) { return binary(Op::add, a, b); }
Var operator-(const Var& a, const Var& b) { return binary(Op::sub, a, b); }
Var operator*(const Var& a, const Var& b) { return binary(Op::mul, a, b); }
Var operator/(const Var& a, const Var& b) { return binary(Op::div, a, b); }
Var operator-(const Var& a) { return unary(Op::neg, a); }
Var operator*(double c, const Var& a) { return unary(Op::scale, a, c); }
Var operator*(const Var& a, double c) { return unary(Op::scale, a, c); }
Var operator+(const Var& a, double c) { return unary(Op::shift, a, c); }
Var operator+(double c, const Var& a) { return unary(Op::shift, a, c); }
Var operator-(const Var& a, double c) { return unary(Op::shift, a, -c); }
Var operator-(double c, const Var& a) { return unary(Op::shift, -a, c); }

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  Tape& t = same_tape(a, b);
  if (b.shape().size() == 1 && !tb) {
    const std::size_t k = b.shape()[0];
    const Var col = reshape(b, {k, 1});
    const Var y = matmul(a, col, ta, false);
    return reshape(y, {y.shape()[0]});
  }
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t ka = ta ? a.shape()[0] : a.shape()[1];
  const std::size_t kb = tb ? b.shape()[1] : b.shape()[0];
  if (ka != kb) shape_fail(Op::matmul, a.shape(), b.shape());
  Node n;
  n.op = Op::matmul;
  n.inputs = {a.id(), b.id()};
  n.ta = ta;
  n.tb = tb;
  return t.record(std::move(n));
}

Var tanh(const Var& x) { return unary(Op::tanh, x); }
Var sin(const Var& x) { return unary(Op::sin, x); }
Var cos(const Var& x) { return unary(Op::cos, x); }
Var rsqrt(const Var& x) { return unary(Op::rsqrt, x); }
Var sum(const Var& x) { return unary(Op::sum_all, x); }

Var expand(const Var& scalar, const Shape& shape) {
  if (scalar.numel() != 1) throw ShapeError("expand: operand must have a single entry");
  Node n;
  n.op = Op::expand;
  n.inputs = {scalar.id()};
  n.shape = shape;
  return scalar.tape().record(std::move(n));
}

Var sum_rows(const Var& x) {
  require_rank(x, 2, "sum_rows");
  return unary(Op::sum_rows, x);
}

Var broadcast_rows(const Var& x, std::size_t rows) {
  require_rank(x, 1, "broadcast_rows");
  Node n;
  n.op = Op::broadcast_rows;
  n.inputs = {x.id()};
  n.i0 = static_cast<std::int64_t>(rows);
  return x.tape().record(std::move(n));
}

Var sum_cols(const Var& x) {
  require_rank(x, 2, "sum_cols");
  return unary(Op::sum_cols, x);
}

Var broadcast_cols(const Var& x, std::size_t cols) {
  require_rank(x, 1, "broadcast_cols");
  Node n;
  n.op = Op::broadcast_cols;
  n.inputs = {x.id()};
  n.i0 = static_cast<std::int64_t>(cols);
  return x.tape().record(std::move(n));
}

Var select(const std::vector<std::uint8_t>& mask, const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Shape s = broadcast_shape(Op::select, a.shape(), b.shape());
  if (mask.size() != shape_numel(s)) throw ShapeError("select: mask size does not match operands");
  Node n;
  n.op = Op::select;
  n.inputs = {a.id(), b.id()};
  n.mask = mask;
  return t.record(std::move(n));
}

Var roll(const Var& x, std::int64_t shift, std::size_t period, std::size_t inner) {
  if (period == 0 || inner == 0 || x.numel() % (period * inner) != 0) {
    throw ShapeError("roll: period " + std::to_string(period) + " does not divide " +
                     shape_string(x.shape()));
  }
  Node n;
  n.op = Op::roll;
  n.inputs = {x.id()};
  n.i0 = shift;
  n.i1 = static_cast<std::int64_t>(period);
  n.i2 = static_cast<std::int64_t>(inner);
  return x.tape().record(std::move(n));
}

Var reshape(const Var& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  if (shape == x.shape()) return x;
  Node n;
  n.op = Op::reshape;
  n.inputs = {x.id()};
  n.shape = shape;
  return x.tape().record(std::move(n));
}

Var slice_cols(const Var& x, std::size_t start, std::size_t len) {
  require_rank(x, 2, "slice_cols");
  if (start + len > x.shape()[1]) throw ShapeError("slice_cols: range out of bounds");
  if (start == 0 && len == x.shape()[1]) return x;
  Node n;
  n.op = Op::slice_cols;
  n.inputs = {x.id()};
  n.i0 = static_cast<std::int64_t>(start);
  n.i1 = static_cast<std::int64_t>(len);
  return x.tape().record(std::move(n));
}

Var pad_cols(const Var& x, std::size_t start, std::size_t total) {
  require_rank(x, 2, "pad_cols");
  if (start + x.shape()[1] > total) throw ShapeError("pad_cols: range out of bounds");
  if (start == 0 && total == x.shape()[1]) return x;
  Node n;
  n.op = Op::pad_cols;
  n.inputs = {x.id()};
  n.i0 = static_cast<std::int64_t>(start);
  n.i1 = static_cast<std::int64_t>(total);
  return x.tape().record(std::move(n));
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  const std::size_t total = a.shape()[1] + b.shape()[1];
  return pad_cols(a, 0, total) + pad_cols(b, a.shape()[1], total);
}

Var kernel_tap(const Var& kernel, std::size_t j) {
  require_rank(kernel, 3, "kernel_tap");
  if (j >= kernel.shape()[2]) throw ShapeError("kernel_tap: tap out of range");
  Node n;
  n.op = Op::kernel_tap;
  n.inputs = {kernel.id()};
  n.i0 = static_cast<std::int64_t>(j);
  return kernel.tape().record(std::move(n));
}

Var kernel_embed(const Var& tap, std::size_t j, std::size_t k) {
  require_rank(tap, 2, "kernel_embed");
  if (j >= k) throw ShapeError("kernel_embed: tap out of range");
  Node n;
  n.op = Op::kernel_embed;
  n.inputs = {tap.id()};
  n.i0 = static_cast<std::int64_t>(j);
  n.i1 = static_cast<std::int64_t>(k);
  return tap.tape().record(std::move(n));
}

namespace {
void check_kernel(const Var& kernel, std::size_t c_in, std::size_t n) {
  require_rank(kernel, 3, "conv1d_periodic");
  const std::size_t k = kernel.shape()[2];
  if (k % 2 == 0) throw ShapeError("conv1d_periodic: kernel size must be odd, got " + std::to_string(k));
  if (kernel.shape()[1] != c_in) throw ShapeError("conv1d_periodic: input channel mismatch");
  if (n < k) throw ShapeError("conv1d_periodic: signal shorter than kernel");
}
}  // namespace

Var conv1d_periodic(const Var& kernel, const Var& x) {
  require_rank(x, 2, "conv1d_periodic");
  const std::size_t c_in = x.shape()[0], n = x.shape()[1];
  check_kernel(kernel, c_in, n);
  const std::size_t k = kernel.shape()[2];
  const auto r = static_cast<std::int64_t>((k - 1) / 2);
  std::optional<Var> y;
  for (std::size_t j = 0; j < k; ++j) {
    const Var shifted = roll(x, static_cast<std::int64_t>(j) - r, n);
    const Var term = matmul(kernel_tap(kernel, j), shifted);
    y = y ? *y + term : term;
  }
  return *y;
}

Var conv1d_periodic_rows(const Var& kernel, const Var& x, std::size_t n) {
  require_rank(x, 2, "conv1d_periodic_rows");
  const std::size_t c_in = x.shape()[1];
  check_kernel(kernel, c_in, n);
  if (x.shape()[0] % n != 0) throw ShapeError("conv1d_periodic_rows: rows not a multiple of N");
  const std::size_t k = kernel.shape()[2], c_out = kernel.shape()[0];
  const auto r = static_cast<std::int64_t>((k - 1) / 2);
  if (c_in == 1) {
    // Single input channel: gather the k shifted copies as columns and apply
    // the kernel in one product.
    std::optional<Var> cols;
    for (std::size_t j = 0; j < k; ++j) {
      const Var c = pad_cols(roll(x, static_cast<std::int64_t>(j) - r, n), j, k);
      cols = cols ? *cols + c : c;
    }
    return matmul(*cols, reshape(kernel, {c_out, k}), false, true);
  }
  std::optional<Var> y;
  for (std::size_t j = 0; j < k; ++j) {
    const Var shifted = roll(x, static_cast<std::int64_t>(j) - r, n, c_in);
    const Var term = matmul(shifted, kernel_tap(kernel, j), false, true);
    y = y ? *y + term : term;
  }
  return *y;
}

}  // namespace dgflow
