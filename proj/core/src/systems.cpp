#include "dgflow/systems.hpp"

#include <cmath>

#include "dgflow/errors.hpp"

namespace dgflow {

Tensor AnalyticSystem::rhs(const Tensor& x) const {
  return gspec().apply(gradient_scale() * analytic_gradient(x));
}

Tensor central_difference(const Tensor& x, double dx) {
  const Tensor xb = as_batch(x);
  const std::size_t rows = xb.dim(0), n = xb.dim(1);
  std::vector<double> out(xb.numel());
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t i = 0; i < n; ++i)
      out[b * n + i] = (xb.at(b, (i + 1) % n) - xb.at(b, (i + n - 1) % n)) / (2.0 * dx);
  return Tensor(x.shape(), std::move(out));
}

Tensor second_difference(const Tensor& x, double dx) {
  const Tensor xb = as_batch(x);
  const std::size_t rows = xb.dim(0), n = xb.dim(1);
  std::vector<double> out(xb.numel());
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t i = 0; i < n; ++i)
      out[b * n + i] =
          (xb.at(b, (i + 1) % n) - 2.0 * xb.at(b, i) + xb.at(b, (i + n - 1) % n)) / (dx * dx);
  return Tensor(x.shape(), std::move(out));
}

namespace {
template <class F>
Tensor map_rows(const Tensor& x, std::size_t dim, F f) {
  const Tensor xb = as_batch(x);
  if (xb.dim(1) != dim) throw ShapeError("state dimension mismatch: " + shape_string(x.shape()));
  std::vector<double> out(xb.numel());
  for (std::size_t b = 0; b < xb.dim(0); ++b) f(&xb.values()[b * dim], &out[b * dim]);
  return Tensor(x.shape(), std::move(out));
}
}  // namespace

// ---------------------------------------------------------------- KdV

KdvSystem::KdvSystem(std::size_t n, double dx, double alpha, double beta)
    : n_(n), dx_(dx), alpha_(alpha), beta_(beta), g_(GSpec::central_diff(n, dx)) {
  if (n < 5) throw std::invalid_argument("kdv: N must be >= 5");
}

// Forward difference in the gradient-energy term makes the exact gradient
// -alpha/2 u^2 + beta D2 u with the standard three-point D2.
template <class V>
V KdvSystem::program(const V& x) const {
  const V dp = (1.0 / dx_) * (roll(x, 1, n_) - x);
  const V e = (-alpha_ / 6.0) * ((x * x) * x) + (-beta_ / 2.0) * (dp * dp);
  return dx_ * sum_cols(e);
}

Var KdvSystem::energy(const Var& x) const { return program(x); }
DVar KdvSystem::energy(const DVar& x) const { return program(x); }

Tensor KdvSystem::analytic_gradient(const Tensor& x) const {
  const Tensor d2 = second_difference(x, dx_);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = dx_ * (-0.5 * alpha_ * x[i] * x[i] + beta_ * d2[i]);
  return Tensor(x.shape(), std::move(out));
}

std::map<std::string, double> KdvSystem::params() const {
  return {{"N", static_cast<double>(n_)}, {"dx", dx_}, {"alpha", alpha_}, {"beta", beta_}};
}

// ---------------------------------------------------------------- Cahn-Hilliard

CahnHilliardSystem::CahnHilliardSystem(std::size_t n, double dx, double gamma)
    : n_(n), dx_(dx), gamma_(gamma), g_(GSpec::laplacian(n, dx)) {
  if (n < 5) throw std::invalid_argument("cahn-hilliard: N must be >= 5");
  if (!(gamma > 0.0)) throw std::invalid_argument("cahn-hilliard: gamma must be positive");
}

template <class V>
V CahnHilliardSystem::program(const V& x) const {
  const V w = (x * x) - 1.0;
  const V dp = (1.0 / dx_) * (roll(x, 1, n_) - x);
  const V e = 0.25 * (w * w) + (0.5 * gamma_) * (dp * dp);
  return dx_ * sum_cols(e);
}

Var CahnHilliardSystem::energy(const Var& x) const { return program(x); }
DVar CahnHilliardSystem::energy(const DVar& x) const { return program(x); }

Tensor CahnHilliardSystem::analytic_gradient(const Tensor& x) const {
  const Tensor d2 = second_difference(x, dx_);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = dx_ * ((x[i] * x[i] - 1.0) * x[i] - gamma_ * d2[i]);
  return Tensor(x.shape(), std::move(out));
}

std::map<std::string, double> CahnHilliardSystem::params() const {
  return {{"N", static_cast<double>(n_)}, {"dx", dx_}, {"gamma", gamma_}};
}

// ---------------------------------------------------------------- ODEs

namespace {
GSpec ode_gspec(std::size_t n, double friction) {
  if (friction < 0.0) throw std::invalid_argument("friction must be non-negative");
  if (friction == 0.0) return GSpec::symplectic(n);
  return GSpec::damped(n, Tensor::full({n}, friction));
}
}  // namespace

MassSpringSystem::MassSpringSystem(double friction, double k, double m)
    : friction_(friction), k_(k), m_(m), g_(ode_gspec(1, friction)) {}

template <class V>
V MassSpringSystem::program(const V& x) const {
  const V q = slice_cols(x, 0, 1);
  const V p = slice_cols(x, 1, 1);
  return sum_cols((0.5 * k_) * (q * q) + (0.5 / m_) * (p * p));
}

Var MassSpringSystem::energy(const Var& x) const { return program(x); }
DVar MassSpringSystem::energy(const DVar& x) const { return program(x); }

Tensor MassSpringSystem::analytic_gradient(const Tensor& x) const {
  return map_rows(x, 2, [&](const double* s, double* o) {
    o[0] = k_ * s[0];
    o[1] = s[1] / m_;
  });
}

std::map<std::string, double> MassSpringSystem::params() const {
  return {{"friction", friction_}, {"k", k_}, {"m", m_}};
}

PendulumSystem::PendulumSystem(double friction, double m, double g, double l)
    : friction_(friction), m_(m), grav_(g), l_(l), g_(ode_gspec(1, friction)) {}

template <class V>
V PendulumSystem::program(const V& x) const {
  const V q = slice_cols(x, 0, 1);
  const V p = slice_cols(x, 1, 1);
  return sum_cols((2.0 * m_ * grav_ * l_) * (1.0 - cos(q)) + (0.5 / (m_ * l_ * l_)) * (p * p));
}

Var PendulumSystem::energy(const Var& x) const { return program(x); }
DVar PendulumSystem::energy(const DVar& x) const { return program(x); }

Tensor PendulumSystem::analytic_gradient(const Tensor& x) const {
  return map_rows(x, 2, [&](const double* s, double* o) {
    o[0] = 2.0 * m_ * grav_ * l_ * std::sin(s[0]);
    o[1] = s[1] / (m_ * l_ * l_);
  });
}

std::map<std::string, double> PendulumSystem::params() const {
  return {{"friction", friction_}, {"m", m_}, {"g", grav_}, {"l", l_}};
}

TwoBodySystem::TwoBodySystem(double m1, double m2, double grav)
    : m1_(m1), m2_(m2), grav_(grav), g_(GSpec::symplectic(4)) {}

template <class V>
V TwoBodySystem::program(const V& x) const {
  const V d = slice_cols(x, 0, 2) - slice_cols(x, 2, 2);
  const V p1 = slice_cols(x, 4, 2);
  const V p2 = slice_cols(x, 6, 2);
  const V kinetic = (0.5 / m1_) * sum_cols(p1 * p1) + (0.5 / m2_) * sum_cols(p2 * p2);
  return kinetic - (grav_ * m1_ * m2_) * rsqrt(sum_cols(d * d));
}

Var TwoBodySystem::energy(const Var& x) const { return program(x); }
DVar TwoBodySystem::energy(const DVar& x) const { return program(x); }

Tensor TwoBodySystem::analytic_gradient(const Tensor& x) const {
  return map_rows(x, 8, [&](const double* s, double* o) {
    const double dx = s[0] - s[2], dy = s[1] - s[3];
    const double r2 = dx * dx + dy * dy;
    const double c = grav_ * m1_ * m2_ / (r2 * std::sqrt(r2));
    o[0] = c * dx;
    o[1] = c * dy;
    o[2] = -c * dx;
    o[3] = -c * dy;
    o[4] = s[4] / m1_;
    o[5] = s[5] / m1_;
    o[6] = s[6] / m2_;
    o[7] = s[7] / m2_;
  });
}

std::map<std::string, double> TwoBodySystem::params() const {
  return {{"m1", m1_}, {"m2", m2_}, {"G", grav_}};
}

std::unique_ptr<AnalyticSystem> kdv_system(std::size_t n, double dx, double alpha, double beta) {
  return std::make_unique<KdvSystem>(n, dx, alpha, beta);
}

std::unique_ptr<AnalyticSystem> ch_system(std::size_t n, double dx, double gamma) {
  return std::make_unique<CahnHilliardSystem>(n, dx, gamma);
}

std::unique_ptr<AnalyticSystem> ode_system(const std::string& name, double friction) {
  if (name == "mass_spring" || name == "spring") return std::make_unique<MassSpringSystem>(friction);
  if (name == "damped_spring") return std::make_unique<MassSpringSystem>(friction > 0 ? friction : 0.1);
  if (name == "pendulum") return std::make_unique<PendulumSystem>(friction);
  if (name == "twobody" || name == "2body") {
    if (friction != 0.0) throw std::invalid_argument("twobody: friction is not supported");
    return std::make_unique<TwoBodySystem>();
  }
  throw std::invalid_argument("unknown system '" + name + "'");
}

}  // namespace dgflow
