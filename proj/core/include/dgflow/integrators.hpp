#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dgflow/energy.hpp"
#include "dgflow/structure.hpp"

namespace dgflow {

using RhsFn = std::function<Tensor(const Tensor&)>;

struct StepDiagnostics {
  std::size_t iterations = 0;  // solver iterations, or accepted steps for dopri
  double residual = 0.0;       // final solver residual (inf-norm)
  std::size_t rejected = 0;    // rejected adaptive steps
  bool newton = false;         // discrete-gradient step finished with Newton
};

struct RolloutResult {
  std::vector<double> times;
  std::vector<Tensor> states;  // states[0] is the initial condition
  std::vector<StepDiagnostics> diagnostics;  // one per step
};

// Explicit midpoint: u + dt * f(u + dt/2 * f(u)).
Tensor step_rk2(const RhsFn& f, const Tensor& u, double dt);

// Kick-drift-kick for H = T(p) + V(q).
std::pair<Tensor, Tensor> step_leapfrog(const RhsFn& dV, const RhsFn& dT, const Tensor& q,
                                        const Tensor& p, double dt);

struct DopriOptions {
  double rtol = 1e-9;
  double atol = 1e-9;
  double initial_step = 0.0;  // 0 chooses automatically
  double min_step = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 10'000'000;
};

// Adaptive Dormand-Prince 5(4) with PI step control and dense output at the
// requested, increasing sample times (the first is the initial time).
RolloutResult integrate_dopri(const RhsFn& f, const Tensor& u0, const std::vector<double>& t_eval,
                              const DopriOptions& opt = {});

enum class DgSolver { fixed_point, newton_fd };

struct DgSolverConfig {
  DgSolver solver = DgSolver::fixed_point;
  double tol = 0.0;  // <= 0: 1e-10 in double, 1e-5 in single precision
  std::size_t max_iter = 100;
  // Fixed point hands over to Newton after this many non-contracting iterations.
  std::size_t fallback_after = 20;
  Precision precision = Precision::f64;
  double eps = 0.0;  // secant threshold; <= 0 uses the precision default

  double effective_tol() const;
};

struct DgStepResult {
  Tensor u;
  StepDiagnostics diag;
};

// Solves u' = u + dt * s * G * dg(u', u) for every row of u, where dg is the
// discrete gradient of h and s its gradient scale. When `sticky_newton` is
// given, a fallback to Newton is remembered there and reused.
DgStepResult step_discrete_gradient(const Energy& h, const GSpec& g, const Tensor& u, double dt,
                                    const DgSolverConfig& cfg = {}, bool* sticky_newton = nullptr);

// s * G * grad H(u) via automatic differentiation (closed form for analytic systems).
Tensor energy_rhs(const Energy& h, const GSpec& g, const Tensor& u, Precision p = Precision::f64);
RhsFn make_rhs(const Energy& h, const GSpec& g, Precision p = Precision::f64);

enum class StepperKind { rk2, dopri, leapfrog, discrete_gradient };

std::string to_string(StepperKind k);
StepperKind stepper_from_string(const std::string& s);

struct StepperConfig {
  StepperKind kind = StepperKind::discrete_gradient;
  double dt = 0.01;
  DopriOptions dopri;
  DgSolverConfig dg;
};

// n_steps applications of the chosen stepper to the rows of u0.
RolloutResult rollout(const StepperConfig& cfg, const Energy& h, const GSpec& g, const Tensor& u0,
                      std::size_t n_steps);

}  // namespace dgflow
