#include "dgflow/integrators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dgflow/errors.hpp"
#include "dgflow/parallel.hpp"
#include "dgflow/systems.hpp"

namespace dgflow {

namespace {

Tensor axpy(double a, const Tensor& x, const Tensor& y) {
  // y + a * x
  if (x.numel() != y.numel()) throw ShapeError("state and rhs differ in size");
  std::vector<double> out(y.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = round_to(y[i] + a * x[i], y.precision());
  require_finite(out, "integrator");
  return Tensor::from_unchecked(y.shape(), std::move(out), y.precision());
}

Tensor checked_rhs(const RhsFn& f, const Tensor& u) {
  Tensor r = f(u);
  if (r.numel() != u.numel()) throw ShapeError("rhs output does not match state size");
  require_finite(r.data(), "rhs");
  return r;
}

}  // namespace

Tensor step_rk2(const RhsFn& f, const Tensor& u, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("step_rk2: dt must be non-negative");
  const Tensor k1 = checked_rhs(f, u);
  const Tensor k2 = checked_rhs(f, axpy(0.5 * dt, k1, u));
  return axpy(dt, k2, u);
}

std::pair<Tensor, Tensor> step_leapfrog(const RhsFn& dV, const RhsFn& dT, const Tensor& q,
                                        const Tensor& p, double dt) {
  const Tensor p_half = axpy(-0.5 * dt, checked_rhs(dV, q), p);
  const Tensor q_new = axpy(dt, checked_rhs(dT, p_half), q);
  const Tensor p_new = axpy(-0.5 * dt, checked_rhs(dV, q_new), p_half);
  return {q_new, p_new};
}

// ---------------------------------------------------------------- Dormand-Prince

RolloutResult integrate_dopri(const RhsFn& f, const Tensor& u0, const std::vector<double>& t_eval,
                              const DopriOptions& opt) {
  static constexpr double a21 = 0.2, a31 = 3.0 / 40.0, a32 = 9.0 / 40.0, a41 = 44.0 / 45.0,
                          a42 = -56.0 / 15.0, a43 = 32.0 / 9.0, a51 = 19372.0 / 6561.0,
                          a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0,
                          a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                          a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0, a71 = 35.0 / 384.0,
                          a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                          a76 = 11.0 / 84.0;
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
  static constexpr double beta = 0.04, alpha = 0.2 - 0.75 * beta, safety = 0.9;
  static constexpr double fac_min = 0.2, fac_max = 10.0;

  if (t_eval.empty()) throw std::invalid_argument("integrate_dopri: no sample times");
  for (std::size_t i = 1; i < t_eval.size(); ++i) {
    if (!(t_eval[i] > t_eval[i - 1])) throw std::invalid_argument("integrate_dopri: times must increase");
  }
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw std::invalid_argument("integrate_dopri: tolerances must be positive");

  const std::size_t n = u0.numel();
  const Shape shape = u0.shape();
  const Precision prec = u0.precision();
  auto eval = [&](const std::vector<double>& y) {
    return checked_rhs(f, Tensor(shape, y, prec)).values();
  };

  RolloutResult res;
  res.times = t_eval;
  res.states.push_back(u0);

  std::vector<double> y(u0.values()), y1(n), k1 = eval(y), k2, k3, k4, k5, k6, k7, tmp(n), err(n);
  std::vector<double> r1(n), r2(n), r3(n), r4(n), r5(n);
  double t = t_eval.front();
  const double t_end = t_eval.back();

  auto norm = [&](const std::vector<double>& v, const std::vector<double>& ya, const std::vector<double>& yb) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      s += (v[i] / sc) * (v[i] / sc);
    }
    return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
  };

  double h = opt.initial_step;
  if (h <= 0.0) {
    const double d0 = norm(y, y, y), d1n = norm(k1, y, y);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, t_end - t);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k1[i];
    const std::vector<double> f1 = eval(tmp);
    for (std::size_t i = 0; i < n; ++i) err[i] = f1[i] - k1[i];
    const double d2 = norm(err, y, y) / h0;
    const double h1 = std::max(d1n, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                  : std::pow(0.01 / std::max(d1n, d2), 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min(h, opt.max_step);

  std::size_t next = 1;
  std::size_t total = 0;
  double err_old = 1e-4;
  StepDiagnostics interval;

  while (next < t_eval.size()) {
    if (++total > opt.max_steps) throw ConvergenceError("dopri: too many steps", 0.0, total);
    if (h < opt.min_step) throw ConvergenceError("dopri: step size underflow (stiff problem?)", h, total);
    const bool last = t + h >= t_end;
    if (last) h = t_end - t;

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    k2 = eval(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    k3 = eval(tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = eval(tmp);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = eval(tmp);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    k6 = eval(tmp);
    for (std::size_t i = 0; i < n; ++i)
      y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    k7 = eval(y1);
    for (std::size_t i = 0; i < n; ++i)
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    const double e = norm(err, y, y1);

    if (e <= 1.0) {
      ++interval.iterations;
      for (std::size_t i = 0; i < n; ++i) {
        const double dy = y1[i] - y[i];
        const double bspl = h * k1[i] - dy;
        r1[i] = y[i];
        r2[i] = dy;
        r3[i] = bspl;
        r4[i] = dy - h * k7[i] - bspl;
        r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      const double t_new = last ? t_end : t + h;
      while (next < t_eval.size() && (t_eval[next] <= t_new || (last && next + 1 == t_eval.size()))) {
        std::vector<double> out(n);
        if (t_eval[next] >= t_new) {
          out = y1;
        } else {
          const double th = (t_eval[next] - t) / h, th1 = 1.0 - th;
          for (std::size_t i = 0; i < n; ++i)
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
        res.states.emplace_back(shape, std::move(out), prec);
        res.diagnostics.push_back(interval);
        interval = {};
        ++next;
      }
      y.swap(y1);
      k1 = k7;
      t = t_new;
      double fac = std::pow(std::max(e, 1e-10), -alpha) * std::pow(err_old, beta) * safety;
      fac = std::clamp(fac, fac_min, fac_max);
      err_old = std::max(e, 1e-4);
      h = std::min(h * fac, opt.max_step);
    } else {
      ++interval.rejected;
      const double fac = std::max(fac_min, safety * std::pow(e, -alpha));
      h *= fac;
    }
  }
  return res;
}

// ---------------------------------------------------------------- discrete gradient

double DgSolverConfig::effective_tol() const {
  if (tol > 0.0) return tol;
  return precision == Precision::f32 ? 1e-5 : 1e-10;
}

namespace {

// dt * s * G * dg(w, u) for every row.
Tensor dg_increment(const Energy& h, const GSpec& g, const Tensor& w, const Tensor& u, double dt,
                    const DgSolverConfig& cfg) {
  Tape tape(cfg.precision);
  const DgVars r = discrete_gradient(h, tape.constant(w), tape.constant(u), cfg.eps);
  const Var v = g.apply((dt * h.gradient_scale()) * r.dg);
  return v.value();
}

double inf_norm_diff(const Tensor& a, const Tensor& b) { return max_abs_diff(a, b); }

struct NewtonOutcome {
  Tensor w;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

NewtonOutcome newton_solve(const Energy& h, const GSpec& g, const Tensor& u, double dt,
                           const DgSolverConfig& cfg, Tensor w, std::size_t max_iter) {
  const std::size_t rows = u.dim(0), dim = u.dim(1);
  const double tol = cfg.effective_tol();
  auto residual = [&](const Tensor& x) {
    const Tensor inc = dg_increment(h, g, x, u, dt, cfg);
    std::vector<double> r(x.numel());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] - u[i] - inc[i];
    return r;
  };
  NewtonOutcome out;
  std::vector<double> f = residual(w);
  double fn = 0.0;
  for (double v : f) fn = std::max(fn, std::abs(v));
  const double hstep = cfg.precision == Precision::f32 ? 1e-3 : 1e-7;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    // Forward-difference Jacobian; rows are independent so one perturbed
    // evaluation per coordinate serves the whole batch.
    std::vector<Eigen::MatrixXd> jac(rows, Eigen::MatrixXd(dim, dim));
    std::vector<double> steps(rows);
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> wp(w.values());
      for (std::size_t b = 0; b < rows; ++b) {
        steps[b] = hstep * std::max(1.0, std::abs(wp[b * dim + j]));
        wp[b * dim + j] += steps[b];
      }
      const std::vector<double> fp = residual(Tensor(w.shape(), wp, w.precision()));
      for (std::size_t b = 0; b < rows; ++b)
        for (std::size_t i = 0; i < dim; ++i)
          jac[b](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              (fp[b * dim + i] - f[b * dim + i]) / steps[b];
    }
    std::vector<double> wn(w.values());
    double step_norm = 0.0;
    for (std::size_t b = 0; b < rows; ++b) {
      Eigen::VectorXd rhs(dim);
      for (std::size_t i = 0; i < dim; ++i) rhs(static_cast<Eigen::Index>(i)) = f[b * dim + i];
      const Eigen::VectorXd delta = jac[b].partialPivLu().solve(rhs);
      for (std::size_t i = 0; i < dim; ++i) {
        wn[b * dim + i] -= delta(static_cast<Eigen::Index>(i));
        step_norm = std::max(step_norm, std::abs(delta(static_cast<Eigen::Index>(i))));
      }
    }
    require_finite(wn, "newton iterate");
    w = Tensor(w.shape(), std::move(wn), w.precision());
    f = residual(w);
    fn = 0.0;
    for (double v : f) fn = std::max(fn, std::abs(v));
    out.residual = fn;
    if (fn <= tol || step_norm <= tol) {
      out.converged = true;
      break;
    }
  }
  out.w = std::move(w);
  return out;
}

}  // namespace

DgStepResult step_discrete_gradient(const Energy& h, const GSpec& g, const Tensor& u_in, double dt,
                                    const DgSolverConfig& cfg, bool* sticky_newton) {
  if (!(dt >= 0.0)) throw std::invalid_argument("step_discrete_gradient: dt must be non-negative");
  if (cfg.max_iter == 0) throw std::invalid_argument("step_discrete_gradient: max_iter must be >= 1");
  const Tensor u = as_batch(u_in).with_precision(cfg.precision);
  if (u.dim(1) != h.state_dim() || u.dim(1) != g.dim()) {
    throw ShapeError("step_discrete_gradient: state dimension mismatch");
  }
  const double tol = cfg.effective_tol();

  // Explicit predictor u + dt * s * G * grad H(u).
  const Tensor predictor = u + dg_increment(h, g, u, u, dt, cfg);

  DgStepResult res;
  bool use_newton = cfg.solver == DgSolver::newton_fd || (sticky_newton && *sticky_newton);
  if (!use_newton) {
    Tensor w = predictor;
    double prev = std::numeric_limits<double>::infinity();
    std::size_t stalls = 0;
    bool ok = false;
    try {
      for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        Tensor next = u + dg_increment(h, g, w, u, dt, cfg);
        const double r = inf_norm_diff(next, w);
        w = std::move(next);
        res.diag.iterations = it;
        res.diag.residual = r;
        if (r <= tol) {
          ok = true;
          break;
        }
        if (!(r < prev)) {
          if (++stalls >= cfg.fallback_after) break;
        }
        prev = r;
      }
    } catch (const NumericalError&) {
      ok = false;
    }
    if (ok) {
      res.u = w.reshaped(u_in.rank() == 1 ? u_in.shape() : u.shape());
      return res;
    }
    use_newton = true;
    if (sticky_newton) *sticky_newton = true;
  }

  const std::size_t fp_iters = res.diag.iterations;
  NewtonOutcome nw = newton_solve(h, g, u, dt, cfg, predictor, cfg.max_iter);
  res.diag.iterations = fp_iters + nw.iterations;
  res.diag.residual = nw.residual;
  res.diag.newton = true;
  if (!nw.converged) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "discrete-gradient step did not converge (residual %.3e, tol %.1e)",
                  nw.residual, tol);
    throw ConvergenceError(buf,
                           nw.residual, res.diag.iterations);
  }
  res.u = nw.w.reshaped(u_in.rank() == 1 ? u_in.shape() : u.shape());
  return res;
}

// ---------------------------------------------------------------- rollouts

Tensor energy_rhs(const Energy& h, const GSpec& g, const Tensor& u, Precision p) {
  if (const auto* sys = dynamic_cast<const AnalyticSystem*>(&h); sys && &sys->gspec() == &g) {
    return sys->rhs(u.with_precision(Precision::f64)).with_precision(p);
  }
  Tape tape(p);
  const Tensor ub = as_batch(u);
  const Var x = tape.leaf(ub);
  const Var grad = gradient(h, x);
  return g.apply(h.gradient_scale() * grad).value().reshaped(u.shape());
}

RhsFn make_rhs(const Energy& h, const GSpec& g, Precision p) {
  return [&h, &g, p](const Tensor& u) { return energy_rhs(h, g, u, p); };
}

std::string to_string(StepperKind k) {
  switch (k) {
    case StepperKind::rk2: return "rk2";
    case StepperKind::dopri: return "dopri";
    case StepperKind::leapfrog: return "leapfrog";
    case StepperKind::discrete_gradient: return "dg";
  }
  return "?";
}

StepperKind stepper_from_string(const std::string& s) {
  if (s == "rk2" || s == "midpoint") return StepperKind::rk2;
  if (s == "dopri" || s == "dp" || s == "dopri5") return StepperKind::dopri;
  if (s == "leapfrog") return StepperKind::leapfrog;
  if (s == "dg" || s == "discrete_gradient") return StepperKind::discrete_gradient;
  throw std::invalid_argument("unknown integrator '" + s + "'");
}

namespace {

// Columns [start, start + n) of a batch with 2n columns.
Tensor half(const Tensor& x, std::size_t start) {
  const std::size_t rows = x.dim(0), n = x.dim(1) / 2;
  std::vector<double> out(rows * n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x.at(r, start + j);
  return Tensor::matrix(rows, n, std::move(out));
}

Tensor join(const Tensor& q, const Tensor& p) {
  const std::size_t rows = q.dim(0), n = q.dim(1);
  std::vector<double> out(rows * 2 * n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      out[r * 2 * n + j] = q.at(r, j);
      out[r * 2 * n + n + j] = p.at(r, j);
    }
  return Tensor::matrix(rows, 2 * n, std::move(out));
}

}  // namespace

RolloutResult rollout(const StepperConfig& cfg, const Energy& h, const GSpec& g, const Tensor& u0,
                      std::size_t n_steps) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("rollout: dt must be positive");
  tune_allocator();
  const Precision p = cfg.dg.precision;
  RolloutResult res;
  res.times.push_back(0.0);
  res.states.push_back(u0);
  if (n_steps == 0) return res;

  if (cfg.kind == StepperKind::dopri) {
    std::vector<double> t(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) t[i] = cfg.dt * static_cast<double>(i);
    try {
      return integrate_dopri(make_rhs(h, g, p), u0, t, cfg.dopri);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(std::string("rollout: ") + e.what(), e.residual(), e.iterations());
    }
  }

  const RhsFn rhs = make_rhs(h, g, p);
  bool sticky = false;
  Tensor u = u0;
  for (std::size_t step = 0; step < n_steps; ++step) {
    StepDiagnostics d;
    try {
      switch (cfg.kind) {
        case StepperKind::rk2:
          u = step_rk2(rhs, u, cfg.dt);
          d.iterations = 1;
          break;
        case StepperKind::leapfrog: {
          if (g.kind() != GKind::symplectic) throw std::invalid_argument("leapfrog needs G = S");
          const Tensor ub = as_batch(u);
          const std::size_t n = ub.dim(1) / 2;
          const Tensor q0 = half(ub, 0);
          const Tensor p0 = half(ub, n);
          // Separable H: the q-part of grad H does not depend on p and vice versa.
          const RhsFn dV = [&](const Tensor& qq) { return half(gradient(h, join(qq, p0), p), 0); };
          const RhsFn dT = [&](const Tensor& pp) { return half(gradient(h, join(q0, pp), p), n); };
          auto [qn, pn] = step_leapfrog(dV, dT, q0, p0, cfg.dt);
          u = join(qn, pn).reshaped(u.shape());
          d.iterations = 1;
          break;
        }
        case StepperKind::discrete_gradient: {
          DgStepResult r = step_discrete_gradient(h, g, u, cfg.dt, cfg.dg, &sticky);
          u = std::move(r.u);
          d = r.diag;
          break;
        }
        case StepperKind::dopri:
          break;
      }
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("rollout step " + std::to_string(step) + ": " + e.what(), e.residual(),
                             e.iterations());
    } catch (const NumericalError& e) {
      throw NumericalError("rollout step " + std::to_string(step) + ": " + e.what());
    }
    res.times.push_back(cfg.dt * static_cast<double>(step + 1));
    res.states.push_back(u);
    res.diagnostics.push_back(d);
  }
  return res;
}

}  // namespace dgflow
