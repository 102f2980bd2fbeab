#include "pipeline.hpp"

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "dgflow/parallel.hpp"

namespace dgflow::cli {

namespace {

double param(const Dataset& ds, const std::string& key, double fallback) {
  const auto it = ds.params.find(key);
  return it == ds.params.end() ? fallback : it->second;
}

Tensor stack(const std::vector<Tensor>& states) {
  const std::size_t dim = as_batch(states.front()).dim(1);
  std::vector<double> v;
  v.reserve(states.size() * dim);
  for (const Tensor& s : states) {
    const Tensor b = as_batch(s);
    v.insert(v.end(), b.values().begin(), b.values().begin() + static_cast<std::ptrdiff_t>(dim));
  }
  return Tensor::matrix(states.size(), dim, std::move(v));
}

}  // namespace

std::unique_ptr<AnalyticSystem> truth_system(const Dataset& ds) {
  const auto n = static_cast<std::size_t>(param(ds, "N", 50));
  if (ds.system == "kdv") return kdv_system(n, param(ds, "dx", ds.dx), param(ds, "alpha", -6.0), param(ds, "beta", 1.0));
  if (ds.system == "ch") return ch_system(n, param(ds, "dx", ds.dx), param(ds, "gamma", 0.0005));
  if (ds.system == "real_pendulum") return ode_system("pendulum");
  return ode_system(ds.system, param(ds, "friction", 0.0));
}

GSpec structure_for(const Dataset& ds) {
  if (ds.system == "real_pendulum") return GSpec::symplectic(1);
  return truth_system(ds)->gspec();
}

ArchSpec default_arch(const Dataset& ds, ModelRole role) {
  ArchSpec a;
  a.state_dim = ds.dim();
  const bool mesh = ds.dx > 0.0;
  if (role == ModelRole::node) {
    a.kind = mesh ? ArchKind::node_conv : ArchKind::node_mlp;
    a.kernel = 7;
  } else {
    a.kind = mesh ? ArchKind::conv : ArchKind::mlp;
    a.kernel = 3;
  }
  if (mesh) a.dx = ds.dx;
  return a;
}

Checkpoint train_model(const Dataset& ds, const ArchSpec& arch, const TrainConfig& cfg, TrainResult* result) {
  if (arch.is_energy() == (cfg.role == ModelRole::node))
    throw UsageError("architecture " + to_string(arch.kind) + " does not fit model " + to_string(cfg.role));
  if (arch.state_dim != ds.dim()) throw UsageError("architecture state_dim differs from the dataset dimension");
  if (ds.train.empty()) throw UsageError("dataset has no train split");
  const PairSet pairs = make_pairs(ds.train, ds.dt);
  Checkpoint ck;
  ck.model = to_string(cfg.role);
  ck.arch = arch;
  ck.precision = cfg.precision;
  ck.config = cfg.to_json();
  TrainResult r;
  if (cfg.role == ModelRole::node) {
    NodeModel m(arch, cfg.seed, cfg.precision);
    r = train_node(m, pairs, cfg);
    ck.params = m.params();
  } else {
    EnergyModel m(arch, cfg.seed, cfg.precision);
    r = train_energy(m, structure_for(ds), pairs, cfg);
    ck.params = m.params();
    ck.friction = r.friction;
  }
  if (result) *result = std::move(r);
  return ck;
}

LoadedModel load_model(Checkpoint ck, const Dataset& ds) {
  if (ck.arch.state_dim != ds.dim())
    throw UsageError("checkpoint state_dim " + std::to_string(ck.arch.state_dim) + " differs from dataset dimension " +
                     std::to_string(ds.dim()));
  LoadedModel m;
  m.g = structure_for(ds);
  if (ck.arch.is_energy()) {
    m.energy.emplace(ck.arch, ck.params, ck.precision);
  } else {
    m.node.emplace(ck.arch, ck.params, ck.precision);
  }
  if (ck.friction) m.g = GSpec::damped(m.g.dim() / 2, *ck.friction);
  m.ck = std::move(ck);
  return m;
}

RhsFn LoadedModel::rhs() const {
  if (energy) return make_rhs(*energy, g);
  const NodeModel* n = &*node;
  return [n](const Tensor& x) { return n->forward(as_batch(x)); };
}

std::string LoadedModel::train_integrator() const {
  try {
    const auto j = nlohmann::json::parse(ck.config);
    if (j.contains("integrator")) return j["integrator"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return "NA";
}

bool Prediction::ok() const {
  for (const auto& e : errors)
    if (!e.empty()) return false;
  return true;
}

namespace {

void check_supported(const LoadedModel& m, StepperKind kind) {
  if (m.node && kind != StepperKind::rk2 && kind != StepperKind::dopri)
    throw UsageError("a vector-field model predicts with rk2 or dopri, not " + to_string(kind));
}

std::vector<Tensor> node_rollout(const LoadedModel& m, const Tensor& u0, std::size_t n, const PredictOptions& opt,
                                 std::vector<StepDiagnostics>& diag) {
  const RhsFn f = m.rhs();
  if (opt.kind == StepperKind::dopri) {
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k) t[k] = static_cast<double>(k) * opt.dt;
    if (n == 0) return {u0};
    RolloutResult r = integrate_dopri(f, u0, t, opt.dopri);
    diag = std::move(r.diagnostics);
    return std::move(r.states);
  }
  std::vector<Tensor> states{u0};
  for (std::size_t k = 0; k < n; ++k) states.push_back(step_rk2(f, states.back(), opt.dt));
  diag.assign(n, StepDiagnostics{});
  return states;
}

}  // namespace

Prediction predict(const LoadedModel& m, const std::vector<Trajectory>& source, const PredictOptions& opt) {
  check_supported(m, opt.kind);
  if (!(opt.dt > 0.0)) throw UsageError("prediction dt must be positive");
  Prediction p;
  p.trajectories.resize(source.size());
  p.diagnostics.resize(source.size());
  p.errors.resize(source.size());
  parallel_for(
      source.size(),
      [&](std::size_t j) {
        const Trajectory& src = source[j];
        const std::size_t n = opt.steps.value_or(src.length() - 1);
        const Tensor u0 = as_batch(src.state(0));
        try {
          std::vector<Tensor> states;
          if (m.energy) {
            StepperConfig sc;
            sc.kind = opt.kind;
            sc.dt = opt.dt;
            sc.dg = opt.dg;
            sc.dopri = opt.dopri;
            RolloutResult r = rollout(sc, *m.energy, m.g, u0, n);
            states = std::move(r.states);
            p.diagnostics[j] = std::move(r.diagnostics);
          } else {
            states = node_rollout(m, u0, n, opt, p.diagnostics[j]);
          }
          Trajectory out;
          out.seed = src.seed;
          for (std::size_t k = 0; k <= n; ++k) out.times.push_back(src.times.front() + static_cast<double>(k) * opt.dt);
          out.states = stack(states);
          p.trajectories[j] = std::move(out);
        } catch (const std::exception& e) {
          p.errors[j] = e.what();
        }
      },
      opt.deterministic);
  return p;
}

Tensor one_step(const LoadedModel& m, const Tensor& x, const PredictOptions& opt) {
  check_supported(m, opt.kind);
  if (m.node) {
    std::vector<StepDiagnostics> diag;
    return as_batch(node_rollout(m, x, 1, opt, diag).back());
  }
  StepperConfig sc;
  sc.kind = opt.kind;
  sc.dt = opt.dt;
  sc.dg = opt.dg;
  sc.dopri = opt.dopri;
  return as_batch(rollout(sc, *m.energy, m.g, x, 1).states.back());
}

RhsFn chunked(RhsFn f, std::size_t block) {
  return [f = std::move(f), block](const Tensor& x) {
    const Tensor b = as_batch(x);
    const std::size_t rows = b.dim(0), dim = b.dim(1);
    std::vector<double> out;
    out.reserve(b.numel());
    for (std::size_t lo = 0; lo < rows; lo += block) {
      const std::size_t hi = std::min(rows, lo + block);
      std::vector<double> part(b.values().begin() + static_cast<std::ptrdiff_t>(lo * dim),
                               b.values().begin() + static_cast<std::ptrdiff_t>(hi * dim));
      const Tensor y = f(Tensor::matrix(hi - lo, dim, std::move(part)));
      out.insert(out.end(), y.values().begin(), y.values().end());
    }
    return Tensor::matrix(rows, dim, std::move(out));
  };
}

MetricsReport evaluate(const EvalInput& in, std::vector<EnergySeries>* series) {
  const Dataset& ds = *in.data;
  const auto& truth = *in.truth;
  const auto& pred = *in.pred;
  if (truth.size() != pred.size())
    throw std::runtime_error("evaluate: " + std::to_string(pred.size()) + " predicted trajectories for " +
                             std::to_string(truth.size()) + " reference trajectories");
  const auto sys = truth_system(ds);
  const double dx = ds.dx > 0.0 ? ds.dx : 1.0;
  MetricsReport r;
  r.model = in.model ? in.model->ck.model : "NA";
  r.train_integrator = in.model ? in.model->train_integrator() : "NA";
  r.predict_integrator = in.predict_name;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const Tensor& p = pred[j].states;
    const Tensor& t = truth[j].states;
    if (p.shape() != t.shape())
      throw std::runtime_error("evaluate: trajectory " + std::to_string(j) + " has " + shape_string(p.shape()) +
                               " predicted states for " + shape_string(t.shape()) + " reference states");
    TrajectoryMetrics tm;
    tm.energy_mse = energy_mse(p, t, *sys);
    if (ds.dx > 0.0) tm.mass_mse = mass_mse(p, t, ds.dx);
    tm.state_mse = mse(p, t);
    r.per_trajectory.push_back(tm);
    if (series) {
      EnergySeries s;
      s.t = pred[j].times;
      s.h_true_on_pred = energy_values(*sys, p).values();
      s.h_true_on_true = energy_values(*sys, t).values();
      if (in.model && in.model->energy) {
        s.h_learned_on_pred = energy_values(*in.model->energy, p).values();
      } else {
        s.h_learned_on_pred.assign(s.t.size(), std::numeric_limits<double>::quiet_NaN());
      }
      s.mass = mass_series(p, dx).values();
      series->push_back(std::move(s));
    }
  }
  summarize(r);
  if (in.model && !ds.test.empty()) {
    const AnalyticSystem* truth_sys = sys.get();
    r.deriv_mse = deriv_mse(chunked(in.model->rhs()), [truth_sys](const Tensor& x) { return truth_sys->rhs(x); },
                            ds.test);
    const LoadedModel* m = in.model;
    const PredictOptions opt = in.predict;
    r.diff_mse = diff_mse(chunked([m, opt](const Tensor& x) { return one_step(*m, x, opt); }), ds.test);
  }
  return r;
}

MetricsReport average(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("average: no reports");
  MetricsReport a = reports.front();
  a.per_trajectory.clear();
  const double n = static_cast<double>(reports.size());
  const auto mean_opt = [&](std::optional<double> MetricsReport::*f) -> std::optional<double> {
    double s = 0.0;
    for (const auto& r : reports) {
      if (!(r.*f)) return std::nullopt;
      s += *(r.*f);
    }
    return s / n;
  };
  double e = 0.0;
  for (const auto& r : reports) {
    e += r.energy_mse;
    a.per_trajectory.insert(a.per_trajectory.end(), r.per_trajectory.begin(), r.per_trajectory.end());
  }
  a.energy_mse = e / n;
  a.deriv_mse = mean_opt(&MetricsReport::deriv_mse);
  a.mass_mse = mean_opt(&MetricsReport::mass_mse);
  a.diff_mse = mean_opt(&MetricsReport::diff_mse);
  return a;
}

}  // namespace dgflow::cli
