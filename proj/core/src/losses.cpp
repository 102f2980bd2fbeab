#include "dgflow/losses.hpp"

#include <stdexcept>

#include "dgflow/errors.hpp"

namespace dgflow {

namespace {

void check_pair(const Var& u0, const Var& u1, double dt, std::size_t dim) {
  if (!(dt > 0.0)) throw std::invalid_argument("loss: dt must be positive");
  if (u0.shape() != u1.shape())
    throw ShapeError("loss: state shapes differ: " + shape_string(u0.shape()) + " vs " +
                     shape_string(u1.shape()));
  if (u0.shape().size() != 2 || u0.shape()[1] != dim)
    throw ShapeError("loss: expected [B x " + std::to_string(dim) + "], got " +
                     shape_string(u0.shape()));
}

Var apply_g(const GSpec& g, const Var& x, const std::optional<Var>& friction) {
  return friction ? g.apply(x, *friction) : g.apply(x);
}

Var mean_sq_rows(const Var& r) {
  const double rows = static_cast<double>(r.shape()[0]);
  return (1.0 / rows) * sum(r * r);
}

}  // namespace

Var loss_dgnet(const Energy& h, const GSpec& g, const Var& u0, const Var& u1, double dt,
               std::optional<Var> friction, double eps) {
  check_pair(u0, u1, dt, h.state_dim());
  const DgVars d = discrete_gradient(h, u1, u0, eps);
  const Var rhs = apply_g(g, h.gradient_scale() * d.dg, friction);
  return mean_sq_rows((1.0 / dt) * (u1 - u0) - rhs);
}

std::string to_string(TrainIntegrator k) { return k == TrainIntegrator::euler ? "euler" : "rk2"; }

TrainIntegrator train_integrator_from_string(const std::string& s) {
  if (s == "euler") return TrainIntegrator::euler;
  if (s == "rk2") return TrainIntegrator::rk2;
  throw std::invalid_argument("training integrator must be euler or rk2, got '" + s + "'");
}

Var energy_field(const Energy& h, const GSpec& g, const Var& u, std::optional<Var> friction) {
  return apply_g(g, h.gradient_scale() * gradient(h, u), friction);
}

Var loss_integrator(const Energy& h, const GSpec& g, TrainIntegrator k, const Var& u0,
                    const Var& u1, double dt, bool normalize, std::optional<Var> friction) {
  check_pair(u0, u1, dt, h.state_dim());
  const auto f = [&](const Var& u) { return energy_field(h, g, u, friction); };
  const Var r = u1 - explicit_step(k, f, u0, dt);
  return mean_sq_rows(normalize ? (1.0 / dt) * r : r);
}

Var loss_integrator(const NodeModel& m, const std::vector<Var>& params, TrainIntegrator k,
                    const Var& u0, const Var& u1, double dt, bool normalize) {
  check_pair(u0, u1, dt, m.state_dim());
  const auto f = [&](const Var& u) { return m.forward(u, params); };
  const Var r = u1 - explicit_step(k, f, u0, dt);
  return mean_sq_rows(normalize ? (1.0 / dt) * r : r);
}

}  // namespace dgflow
