#pragma once

#include <functional>

#include "dgflow/energy.hpp"

namespace dgflow {

using VarFn = std::function<Var(const Var&)>;

// Central-difference gradient of f at x.
Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, double step = 1e-6);

// Max over coordinates of |analytic - numeric| / max(1, |analytic|), where the
// analytic gradient of the scalar f(x) comes from backward(). An empty x
// gives 0.
double grad_check(const VarFn& f, const Tensor& x, double step = 1e-6,
                  Precision p = Precision::f64);

}  // namespace dgflow
