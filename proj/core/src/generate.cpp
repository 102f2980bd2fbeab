#include "dgflow/generate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dgflow/errors.hpp"
#include "dgflow/parallel.hpp"
#include "dgflow/systems.hpp"

namespace dgflow {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index + 1));
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

Trajectory from_rollout(const RolloutResult& r, std::uint64_t seed) {
  const std::size_t t = r.states.size(), d = r.states.front().numel();
  std::vector<double> s;
  s.reserve(t * d);
  for (const auto& x : r.states) s.insert(s.end(), x.values().begin(), x.values().end());
  return {r.times, Tensor::matrix(t, d, std::move(s)), seed};
}

double row_sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return s;
}

// Rolls every initial state forward with the discrete-gradient stepper; a
// trajectory whose solve fails is regenerated from a derived seed.
template <class Init, class Check>
std::vector<Trajectory> dg_trajectories(std::size_t count, std::uint64_t seed, const AnalyticSystem& sys,
                                        double dt, std::size_t steps, double tol, bool deterministic,
                                        Init init, Check check) {
  std::vector<Trajectory> out(count);
  parallel_for(
      count,
      [&](std::size_t i) {
        std::uint64_t s = trajectory_seed(seed, i);
        for (int attempt = 0;; ++attempt) {
          StepperConfig cfg;
          cfg.kind = StepperKind::discrete_gradient;
          cfg.dt = dt;
          cfg.dg.tol = tol;
          try {
            const Tensor u0 = init(s).reshaped({1, sys.state_dim()});
            RolloutResult r = rollout(cfg, sys, sys.gspec(), u0, steps);
            for (auto& st : r.states) st = st.reshaped({sys.state_dim()});
            out[i] = from_rollout(r, s);
            check(out[i]);
            return;
          } catch (const ConvergenceError&) {
            if (attempt >= 2) throw;
            s = splitmix64(s);
          }
        }
      },
      deterministic);
  return out;
}

}  // namespace

Tensor kdv_initial_state(const KdvGenConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> kappa(cfg.kappa_lo, cfg.kappa_hi);
  const double length = static_cast<double>(cfg.n) * cfg.dx;
  std::uniform_real_distribution<double> centre(0.0, length);
  const double k1 = kappa(rng), k2 = kappa(rng);
  const double d1 = centre(rng);
  double d2 = d1;
  for (int tries = 0;; ++tries) {
    d2 = centre(rng);
    const double sep = std::abs(d2 - d1);
    if (std::min(sep, length - sep) >= cfg.min_separation) break;
    if (tries > 10000) throw std::invalid_argument("kdv: domain too small for the soliton separation");
  }
  std::vector<double> u(cfg.n, 0.0);
  const double amp = -12.0 / cfg.alpha;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const double x = static_cast<double>(i) * cfg.dx;
    // Periodic images keep the profile smooth across the boundary.
    for (int img = -3; img <= 3; ++img) {
      const double shift = static_cast<double>(img) * length;
      for (auto [k, d] : {std::pair{k1, d1}, std::pair{k2, d2}}) {
        const double c = 1.0 / std::cosh(k * (x - d + shift));
        u[i] += amp * k * k * c * c;
      }
    }
  }
  return Tensor::vector(std::move(u));
}

Tensor ch_initial_state(const ChGenConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-cfg.amplitude, cfg.amplitude);
  std::vector<double> u(cfg.n);
  for (double& v : u) v = unif(rng);
  return Tensor::vector(std::move(u));
}

Dataset gen_kdv(const KdvGenConfig& cfg) {
  if (cfg.n_train > cfg.n_series) throw std::invalid_argument("kdv: more training series than series");
  if (!(cfg.dt > 0.0) || !(cfg.dx > 0.0)) throw std::invalid_argument("kdv: dt and dx must be positive");
  if (cfg.alpha == 0.0) throw std::invalid_argument("kdv: alpha must be nonzero");
  const auto sys = kdv_system(cfg.n, cfg.dx, cfg.alpha, cfg.beta);
  double worst_h = 0.0, worst_m = 0.0;
  std::mutex mu;
  auto check = [&](const Trajectory& tr) {
    const Tensor h = energy_values(*sys, tr.states);
    const double m0 = row_sum(tr.state(0));
    double dh = 0.0, dm = 0.0;
    for (std::size_t t = 0; t < tr.length(); ++t) {
      dh = std::max(dh, std::abs(h[t] - h[0]));
      dm = std::max(dm, std::abs(row_sum(tr.state(t)) - m0) * cfg.dx);
    }
    if (dh > cfg.max_energy_drift || dm > cfg.max_mass_drift)
      throw ConvergenceError("kdv: generated trajectory violates conservation (energy drift " + fmt(dh) +
                                 ", mass drift " + fmt(dm) + ")",
                             std::max(dh, dm), 0);
    std::lock_guard<std::mutex> lock(mu);
    worst_h = std::max(worst_h, dh);
    worst_m = std::max(worst_m, dm);
  };
  auto all = dg_trajectories(
      cfg.n_series, cfg.seed, *sys, cfg.dt, cfg.steps, cfg.solver_tol, cfg.deterministic,
      [&](std::uint64_t s) { return kdv_initial_state(cfg, s); }, check);

  Dataset ds;
  ds.system = "kdv";
  ds.params = sys->params();
  ds.seed = cfg.seed;
  ds.dt = cfg.dt;
  ds.dx = cfg.dx;
  ds.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.n_train));
  ds.test.assign(all.begin() + static_cast<std::ptrdiff_t>(cfg.n_train), all.end());
  ds.notes["generator"] = "discrete-gradient stepper, tol " + fmt(cfg.solver_tol);
  ds.notes["initial_state"] = "two periodic sech^2 solitons, kappa ~ U(" + fmt(cfg.kappa_lo) + ", " +
                              fmt(cfg.kappa_hi) + "), separation >= " + fmt(cfg.min_separation);
  ds.notes["max_energy_drift"] = fmt(worst_h);
  ds.notes["max_mass_drift"] = fmt(worst_m);
  return ds;
}

Dataset gen_ch(const ChGenConfig& cfg) {
  if (cfg.n_train > cfg.n_series) throw std::invalid_argument("ch: more training series than series");
  if (!(cfg.dt > 0.0) || !(cfg.dx > 0.0)) throw std::invalid_argument("ch: dt and dx must be positive");
  const auto sys = ch_system(cfg.n, cfg.dx, cfg.gamma);
  double worst_rise = -std::numeric_limits<double>::infinity(), worst_m = 0.0;
  std::mutex mu;
  auto check = [&](const Trajectory& tr) {
    const Tensor h = energy_values(*sys, tr.states);
    const double m0 = row_sum(tr.state(0));
    double rise = -std::numeric_limits<double>::infinity(), dm = 0.0;
    for (std::size_t t = 1; t < tr.length(); ++t) {
      rise = std::max(rise, h[t] - h[t - 1]);
      dm = std::max(dm, std::abs(row_sum(tr.state(t)) - m0) * cfg.dx);
    }
    if (rise > cfg.energy_slack || dm > cfg.max_mass_drift)
      throw ConvergenceError("cahn-hilliard: generated trajectory violates dissipation (energy rise " +
                                 fmt(rise) + ", mass drift " + fmt(dm) + ")",
                             std::max(rise, dm), 0);
    std::lock_guard<std::mutex> lock(mu);
    worst_rise = std::max(worst_rise, rise);
    worst_m = std::max(worst_m, dm);
  };
  auto all = dg_trajectories(
      cfg.n_series, cfg.seed, *sys, cfg.dt, cfg.steps, cfg.solver_tol, cfg.deterministic,
      [&](std::uint64_t s) { return ch_initial_state(cfg, s); }, check);

  Dataset ds;
  ds.system = "cahn_hilliard";
  ds.params = sys->params();
  ds.seed = cfg.seed;
  ds.dt = cfg.dt;
  ds.dx = cfg.dx;
  ds.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.n_train));
  ds.test.assign(all.begin() + static_cast<std::ptrdiff_t>(cfg.n_train), all.end());
  ds.notes["generator"] = "discrete-gradient stepper, tol " + fmt(cfg.solver_tol);
  ds.notes["initial_state"] = "u ~ U(-" + fmt(cfg.amplitude) + ", " + fmt(cfg.amplitude) + ")";
  ds.notes["energy_non_increasing"] = "true";
  ds.notes["max_energy_step_change"] = fmt(worst_rise);
  ds.notes["max_mass_drift"] = fmt(worst_m);
  return ds;
}

OdeGenConfig OdeGenConfig::defaults(const std::string& system) {
  OdeGenConfig c;
  c.system = system;
  if (system == "mass_spring" || system == "spring") {
    c.system = "mass_spring";
  } else if (system == "damped_spring") {
    c.friction = 0.1;
    c.noise = 0.0;
  } else if (system == "pendulum") {
    c.obs = 45;
  } else if (system == "twobody" || system == "2body") {
    c.system = "twobody";
    c.n_train = 800;
    c.n_test = 200;
    c.obs = 50;
    c.long_obs = 500;
    c.long_duration = 25.0;
    c.noise = 0.0;
  } else {
    throw std::invalid_argument("unknown system '" + system + "'");
  }
  return c;
}

Tensor ode_initial_state(const std::string& system, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto on_circle = [&](double r) {
    const double a = 2.0 * std::numbers::pi * unit(rng);
    return Tensor::vector({r * std::cos(a), r * std::sin(a)});
  };
  if (system == "mass_spring" || system == "damped_spring") return on_circle(0.1 + unit(rng));
  if (system == "pendulum") return on_circle(1.3 + unit(rng));
  if (system == "twobody") {
    // Unit masses on a near-circular orbit about the centre of mass.
    std::normal_distribution<double> normal(0.0, 1.0);
    const double r = 0.5 + unit(rng);
    const double a = 2.0 * std::numbers::pi * unit(rng);
    const double v = std::sqrt(1.0 / (4.0 * r)) * (1.0 + 0.05 * normal(rng));
    const double cx = std::cos(a), sy = std::sin(a);
    return Tensor::vector({r * cx, r * sy, -r * cx, -r * sy, -v * sy, v * cx, v * sy, -v * cx});
  }
  throw std::invalid_argument("unknown system '" + system + "'");
}

Dataset gen_ode(const OdeGenConfig& cfg) {
  if (cfg.obs < 2 || cfg.long_obs < 2) throw std::invalid_argument("trajectories need at least two samples");
  if (cfg.noise < 0.0) throw std::invalid_argument("noise must be non-negative");
  const std::string name = cfg.system == "spring" ? "mass_spring" : cfg.system == "2body" ? "twobody" : cfg.system;
  const auto sys = ode_system(name == "damped_spring" ? "mass_spring" : name, cfg.friction);
  const double dt = cfg.dt();
  const RhsFn rhs = make_rhs(*sys, sys->gspec());

  const std::size_t total = cfg.n_train + cfg.n_test + cfg.n_long;
  std::vector<Trajectory> all(total);
  parallel_for(
      total,
      [&](std::size_t i) {
        const bool is_long = i >= cfg.n_train + cfg.n_test;
        const std::size_t obs = is_long ? cfg.long_obs : cfg.obs;
        const std::uint64_t s = trajectory_seed(cfg.seed, i);
        std::vector<double> t(obs);
        for (std::size_t k = 0; k < obs; ++k) t[k] = dt * static_cast<double>(k);
        DopriOptions opt;
        opt.rtol = cfg.rtol;
        opt.atol = cfg.atol;
        const RolloutResult r = integrate_dopri(rhs, ode_initial_state(name, s), t, opt);
        Trajectory tr = from_rollout(r, s);
        if (!is_long && cfg.noise > 0.0) {
          std::mt19937_64 rng(splitmix64(s ^ 0x6e6f697365ULL));
          std::normal_distribution<double> normal(0.0, cfg.noise);
          std::vector<double> v(tr.states.values());
          for (double& x : v) x += normal(rng);
          tr.states = Tensor::matrix(obs, tr.dim(), std::move(v));
        }
        all[i] = std::move(tr);
      },
      cfg.deterministic);

  Dataset ds;
  ds.system = name;
  ds.params = sys->params();
  ds.seed = cfg.seed;
  ds.dt = dt;
  ds.noise = cfg.noise;
  ds.precision = Precision::f64;
  const auto a = all.begin();
  ds.train.assign(a, a + static_cast<std::ptrdiff_t>(cfg.n_train));
  ds.test.assign(a + static_cast<std::ptrdiff_t>(cfg.n_train),
                 a + static_cast<std::ptrdiff_t>(cfg.n_train + cfg.n_test));
  ds.long_term.assign(a + static_cast<std::ptrdiff_t>(cfg.n_train + cfg.n_test), all.end());
  ds.notes["generator"] = "adaptive Dormand-Prince, rtol " + fmt(cfg.rtol);
  ds.notes["grid"] = "dt = long_duration / (long_obs - 1), shared by every split";
  ds.notes["noise"] = "gaussian sigma " + fmt(cfg.noise) + " on train and test; long_term clean";
  return ds;
}

Dataset load_real_pendulum(const std::filesystem::path& path, double train_fraction) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  auto split = [](const std::string& line) {
    std::string norm = line;
    std::replace(norm.begin(), norm.end(), ',', ' ');
    std::replace(norm.begin(), norm.end(), '\t', ' ');
    std::istringstream is(norm);
    std::vector<std::string> f;
    for (std::string w; is >> w;) f.push_back(w);
    return f;
  };
  std::string line;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) header = split(line);
  auto col = [&](std::initializer_list<const char*> names) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      for (const char* n : names)
        if (header[i] == n) return i;
    throw FormatError("real pendulum file: missing column '" + std::string(*names.begin()) + "'");
  };
  const std::size_t ct = col({"time", "t"}), cq = col({"q", "theta"}), cp = col({"p", "omega"});
  std::vector<double> times, states;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split(line);
    if (f.empty()) continue;
    if (f.size() < header.size())
      throw FormatError("real pendulum file: line " + std::to_string(lineno) + " has too few fields");
    try {
      times.push_back(std::stod(f[ct]));
      states.push_back(std::stod(f[cq]));
      states.push_back(std::stod(f[cp]));
    } catch (const std::logic_error&) {
      throw FormatError("real pendulum file: bad number on line " + std::to_string(lineno));
    }
  }
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw FormatError("real pendulum file: time is not strictly increasing at sample " + std::to_string(i));
  if (times.size() < 4) throw FormatError("real pendulum file: too few samples");

  const std::size_t n = times.size();
  const std::size_t cut = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n))), 2, n - 2);
  auto part = [&](std::size_t lo, std::size_t hi) {
    Trajectory tr;
    tr.times.assign(times.begin() + static_cast<std::ptrdiff_t>(lo), times.begin() + static_cast<std::ptrdiff_t>(hi));
    tr.states = Tensor::matrix(hi - lo, 2,
                               std::vector<double>(states.begin() + static_cast<std::ptrdiff_t>(2 * lo),
                                                   states.begin() + static_cast<std::ptrdiff_t>(2 * hi)));
    return tr;
  };
  Dataset ds;
  ds.system = "real_pendulum";
  ds.dt = (times.back() - times.front()) / static_cast<double>(n - 1);
  ds.train.push_back(part(0, cut));
  ds.test.push_back(part(cut, n));
  ds.notes["source"] = path.filename().string();
  ds.notes["split"] = "first " + std::to_string(cut) + " of " + std::to_string(n) +
                      " samples train, remainder test";
  ds.notes["dt"] = "mean measured step";
  return ds;
}

}  // namespace dgflow
