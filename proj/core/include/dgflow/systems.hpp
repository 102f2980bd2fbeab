#pragma once

#include <map>
#include <memory>
#include <string>

#include "dgflow/energy.hpp"
#include "dgflow/structure.hpp"

namespace dgflow {

// Known physical system (H, G). The flow is du/dt = G * s * grad H(u) where
// s is gradient_scale().
class AnalyticSystem : public Energy {
 public:
  virtual std::string name() const = 0;
  virtual const GSpec& gspec() const = 0;
  // Closed-form Euclidean gradient of H, row by row.
  virtual Tensor analytic_gradient(const Tensor& x) const = 0;
  virtual std::map<std::string, double> params() const = 0;

  Tensor rhs(const Tensor& x) const;
};

class KdvSystem final : public AnalyticSystem {
 public:
  KdvSystem(std::size_t n, double dx, double alpha = -6.0, double beta = 1.0);

  std::string name() const override { return "kdv"; }
  std::size_t state_dim() const override { return n_; }
  const GSpec& gspec() const override { return g_; }
  double gradient_scale() const override { return 1.0 / dx_; }
  Var energy(const Var& x) const override;
  DVar energy(const DVar& x) const override;
  Tensor analytic_gradient(const Tensor& x) const override;
  std::map<std::string, double> params() const override;

  double dx() const { return dx_; }

 private:
  template <class V> V program(const V& x) const;
  std::size_t n_;
  double dx_, alpha_, beta_;
  GSpec g_;
};

class CahnHilliardSystem final : public AnalyticSystem {
 public:
  CahnHilliardSystem(std::size_t n, double dx, double gamma = 0.0005);

  std::string name() const override { return "ch"; }
  std::size_t state_dim() const override { return n_; }
  const GSpec& gspec() const override { return g_; }
  double gradient_scale() const override { return 1.0 / dx_; }
  Var energy(const Var& x) const override;
  DVar energy(const DVar& x) const override;
  Tensor analytic_gradient(const Tensor& x) const override;
  std::map<std::string, double> params() const override;

  double dx() const { return dx_; }

 private:
  template <class V> V program(const V& x) const;
  std::size_t n_;
  double dx_, gamma_;
  GSpec g_;
};

// H = (k q^2 + p^2 / m) / 2 with optional friction on p.
class MassSpringSystem final : public AnalyticSystem {
 public:
  explicit MassSpringSystem(double friction = 0.0, double k = 1.0, double m = 1.0);

  std::string name() const override { return friction_ > 0 ? "damped_spring" : "mass_spring"; }
  std::size_t state_dim() const override { return 2; }
  const GSpec& gspec() const override { return g_; }
  Var energy(const Var& x) const override;
  DVar energy(const DVar& x) const override;
  Tensor analytic_gradient(const Tensor& x) const override;
  std::map<std::string, double> params() const override;

 private:
  template <class V> V program(const V& x) const;
  double friction_, k_, m_;
  GSpec g_;
};

// H = 2 m g l (1 - cos q) + p^2 / (2 m l^2) with optional friction on p.
class PendulumSystem final : public AnalyticSystem {
 public:
  explicit PendulumSystem(double friction = 0.0, double m = 1.0, double g = 1.0, double l = 1.0);

  std::string name() const override { return "pendulum"; }
  std::size_t state_dim() const override { return 2; }
  const GSpec& gspec() const override { return g_; }
  Var energy(const Var& x) const override;
  DVar energy(const DVar& x) const override;
  Tensor analytic_gradient(const Tensor& x) const override;
  std::map<std::string, double> params() const override;

 private:
  template <class V> V program(const V& x) const;
  double friction_, m_, grav_, l_;
  GSpec g_;
};

// Two bodies in the plane, state (q1, q2, p1, p2) in R^8,
// H = |p1|^2/(2 m1) + |p2|^2/(2 m2) - G m1 m2 / |q1 - q2|.
class TwoBodySystem final : public AnalyticSystem {
 public:
  explicit TwoBodySystem(double m1 = 1.0, double m2 = 1.0, double grav = 1.0);

  std::string name() const override { return "twobody"; }
  std::size_t state_dim() const override { return 8; }
  const GSpec& gspec() const override { return g_; }
  Var energy(const Var& x) const override;
  DVar energy(const DVar& x) const override;
  Tensor analytic_gradient(const Tensor& x) const override;
  std::map<std::string, double> params() const override;

 private:
  template <class V> V program(const V& x) const;
  double m1_, m2_, grav_;
  GSpec g_;
};

std::unique_ptr<AnalyticSystem> kdv_system(std::size_t n = 50, double dx = 0.2, double alpha = -6.0,
                                           double beta = 1.0);
std::unique_ptr<AnalyticSystem> ch_system(std::size_t n = 50, double dx = 0.02, double gamma = 0.0005);
// name: mass_spring, pendulum, twobody (also damped_spring).
std::unique_ptr<AnalyticSystem> ode_system(const std::string& name, double friction = 0.0);

// Periodic mesh helpers on rows of x.
Tensor central_difference(const Tensor& x, double dx);
Tensor second_difference(const Tensor& x, double dx);

}  // namespace dgflow
