#include <cmath>

#include "dgflow/energy.hpp"
#include "dgflow/errors.hpp"

namespace dgflow {

Tensor itoh_abe_gradient(const ScalarFn& h, const Tensor& u, const Tensor& v, double eps) {
  if (!u.same_shape(v)) throw ShapeError("itoh_abe_gradient: u and v differ in shape");
  const std::size_t n = u.numel();
  std::vector<double> w(u.values());
  std::vector<double> out(n, 0.0);
  auto eval = [&](const std::vector<double>& x) { return h(Tensor(u.shape(), x, u.precision())); };
  const double step = std::sqrt(eps);
  double h_prev = eval(w);
  for (std::size_t i = 0; i < n; ++i) {
    const double ui = u[i], vi = v[i];
    w[i] = vi;
    const double h_next = eval(w);
    if (std::abs(ui - vi) > eps) {
      out[i] = (h_prev - h_next) / (ui - vi);
    } else {
      const double mid = 0.5 * (ui + vi);
      const double s = step * std::max(1.0, std::abs(mid));
      w[i] = mid + s;
      const double hp = eval(w);
      w[i] = mid - s;
      const double hm = eval(w);
      w[i] = vi;
      out[i] = (hp - hm) / (2.0 * s);
    }
    h_prev = h_next;
  }
  return Tensor(u.shape(), std::move(out), u.precision());
}

ScalarFn scalar_fn(const Energy& h, Precision p) {
  return [&h, p](const Tensor& x) { return energy_values(h, x, p)[0]; };
}

}  // namespace dgflow
