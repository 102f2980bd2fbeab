#pragma once

#include <cstddef>
#include <functional>

#include "dgflow/discrete.hpp"

namespace dgflow {

// A scalar energy evaluated on a batch of states x[B x dim], returning [B].
// Implementations are written once for Var and once (usually through a
// shared template) for DVar, so the same program yields both the ordinary
// gradient and a discrete gradient.
class Energy {
 public:
  virtual ~Energy() = default;
  virtual std::size_t state_dim() const = 0;
  virtual Var energy(const Var& x) const = 0;
  virtual DVar energy(const DVar& x) const = 0;
  // Factor turning the Euclidean gradient of H into the gradient used by the
  // flow; 1/dx for energies defined with a dx-weighted inner product.
  virtual double gradient_scale() const { return 1.0; }
};

// Promotes a rank-1 state to a one-row batch; rank-2 passes through.
Tensor as_batch(const Tensor& x);

// H(x) for each row of x.
Tensor energy_values(const Energy& h, const Tensor& x, Precision p = Precision::f64);
// Euclidean gradient of sum_b H(x_b) with respect to x, on x's tape.
Var gradient(const Energy& h, const Var& x);
Tensor gradient(const Energy& h, const Tensor& x, Precision p = Precision::f64);

struct DgVars {
  Var dg;   // [B x dim]
  Var h_u;  // [B]
  Var h_v;  // [B]
};

struct DgResult {
  Tensor dg;
  Tensor h_u;
  Tensor h_v;
};

// Discrete gradient of h between the rows of u and v via automatic discrete
// differentiation. The Var form stays on the tape for further differentiation.
DgVars discrete_gradient(const Energy& h, const Var& u, const Var& v, double eps = 0.0);
DgResult discrete_gradient(const Energy& h, const Tensor& u, const Tensor& v,
                           Precision p = Precision::f64, double eps = 0.0);

struct DgResiduals {
  double residual1 = 0.0;  // max_b |H(u)-H(v) - dg.(u-v)|
  double residual2 = 0.0;  // max |dg(u,u) - grad H(u)|
};

// Checks both defining conditions of a discrete gradient for the given dg.
DgResiduals verify_dg_conditions(const Energy& h, const Tensor& u, const Tensor& v,
                                 const Tensor& dg, Precision p = Precision::f64);

using ScalarFn = std::function<double(const Tensor&)>;

// Coordinate-increment discrete gradient. Component i is the difference of h
// between states switching coordinate i from u to v, over u_i - v_i; nearly
// coincident coordinates use a central difference with step sqrt(eps).
Tensor itoh_abe_gradient(const ScalarFn& h, const Tensor& u, const Tensor& v, double eps = 1e-12);

// Adapts an Energy on single states to a scalar function.
ScalarFn scalar_fn(const Energy& h, Precision p = Precision::f64);

}  // namespace dgflow
