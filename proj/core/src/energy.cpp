#include "dgflow/energy.hpp"

#include <algorithm>
#include <cmath>

#include "dgflow/errors.hpp"

namespace dgflow {

Tensor as_batch(const Tensor& x) {
  if (x.rank() == 2) return x;
  if (x.rank() == 1) return x.reshaped({1, x.numel()});
  throw ShapeError("state must be rank 1 or 2, got " + shape_string(x.shape()));
}

Tensor energy_values(const Energy& h, const Tensor& x, Precision p) {
  Tape tape(p);
  return h.energy(tape.constant(as_batch(x))).value();
}

Var gradient(const Energy& h, const Var& x) {
  Tape& tape = x.tape();
  const Var e = sum(h.energy(x));
  GradMap g = tape.backward(e, {x});
  if (!g.has(x)) return tape.constant(Tensor::zeros(x.shape(), tape.precision()));
  return g.at(x);
}

Tensor gradient(const Energy& h, const Tensor& x, Precision p) {
  Tape tape(p);
  const Tensor xb = as_batch(x);
  const Var xv = tape.leaf(xb);
  return gradient(h, xv).value().reshaped(x.shape());
}

DgVars discrete_gradient(const Energy& h, const Var& u, const Var& v, double eps) {
  if (u.shape() != v.shape()) throw ShapeError("discrete_gradient: u and v differ in shape");
  if (u.shape().size() != 2 || u.shape()[1] != h.state_dim()) {
    throw ShapeError("discrete_gradient: expected [B x " + std::to_string(h.state_dim()) +
                     "], got " + shape_string(u.shape()));
  }
  DiscreteGraph graph(u.tape(), eps);
  const DVar x = graph.input(u, v);
  const DVar e = h.energy(x);
  const Var dg = graph.backward(e, x);
  return {dg, e.u(), e.v()};
}

DgResult discrete_gradient(const Energy& h, const Tensor& u, const Tensor& v, Precision p,
                           double eps) {
  Tape tape(p);
  const DgVars r = discrete_gradient(h, tape.constant(as_batch(u)), tape.constant(as_batch(v)), eps);
  return {r.dg.value().reshaped(u.shape()), r.h_u.value(), r.h_v.value()};
}

DgResiduals verify_dg_conditions(const Energy& h, const Tensor& u, const Tensor& v,
                                 const Tensor& dg, Precision p) {
  if (!u.same_shape(v) || !u.same_shape(dg)) throw ShapeError("verify_dg_conditions: shape mismatch");
  const Tensor ub = as_batch(u), vb = as_batch(v), db = as_batch(dg);
  const Tensor hu = energy_values(h, ub, p);
  const Tensor hv = energy_values(h, vb, p);
  const std::size_t rows = ub.dim(0), cols = ub.dim(1);
  DgResiduals r;
  for (std::size_t b = 0; b < rows; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += db.at(b, j) * (ub.at(b, j) - vb.at(b, j));
    r.residual1 = std::max(r.residual1, std::abs(hu[b] - hv[b] - s));
  }
  const Tensor same = discrete_gradient(h, ub, ub, p).dg;
  const Tensor grad = gradient(h, ub, p);
  r.residual2 = max_abs_diff(same, grad);
  return r;
}

}  // namespace dgflow
