#include "dgflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dgflow/errors.hpp"

namespace dgflow {

Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, double step) {
  std::vector<double> w(x.values());
  std::vector<double> g(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double xi = w[i];
    w[i] = xi + step;
    const double fp = f(Tensor(x.shape(), w, x.precision()));
    w[i] = xi - step;
    const double fm = f(Tensor(x.shape(), w, x.precision()));
    w[i] = xi;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return Tensor(x.shape(), std::move(g), x.precision());
}

double grad_check(const VarFn& f, const Tensor& x, double step, Precision p) {
  if (x.numel() == 0) return 0.0;
  Tape tape(p);
  const Var xv = tape.leaf(x);
  const Var y = f(xv);
  if (y.numel() != 1) throw ShapeError("grad_check: function must be scalar-valued");
  const Tensor analytic = tape.backward(y, {xv}).value(xv);
  const Tensor numeric = numeric_gradient(
      [&](const Tensor& z) {
        Tape t(p);
        return f(t.constant(z)).value()[0];
      },
      x, step);
  double err = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    err = std::max(err, std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i])));
  }
  return err;
}

}  // namespace dgflow
