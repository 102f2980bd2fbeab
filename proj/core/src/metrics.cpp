#include "dgflow/metrics.hpp"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dgflow/errors.hpp"

namespace dgflow {

double mse(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel())
    throw ShapeError("mse: size mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  if (a.numel() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

double deriv_mse(const RhsFn& model, const RhsFn& truth, const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("deriv_mse: no trajectories");
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& tr : trajectories) {
    s += mse(model(tr.states), truth(tr.states)) * static_cast<double>(tr.states.numel());
    n += tr.states.numel();
  }
  return s / static_cast<double>(n);
}

double energy_mse(const Tensor& pred, const Tensor& truth, const Energy& h, Precision p) {
  if (pred.shape() != truth.shape())
    throw ShapeError("energy_mse: trajectory lengths differ: " + shape_string(pred.shape()) + " vs " +
                     shape_string(truth.shape()));
  return mse(energy_values(h, pred, p), energy_values(h, truth, p));
}

Tensor mass_series(const Tensor& states, double dx) {
  const Tensor b = as_batch(states);
  std::vector<double> m(b.dim(0), 0.0);
  for (std::size_t t = 0; t < b.dim(0); ++t) {
    for (std::size_t j = 0; j < b.dim(1); ++j) m[t] += b.at(t, j);
    m[t] *= dx;
  }
  return Tensor::vector(std::move(m));
}

double mass_mse(const Tensor& pred, const Tensor& truth, double dx) {
  if (pred.shape() != truth.shape())
    throw ShapeError("mass_mse: trajectory lengths differ: " + shape_string(pred.shape()) + " vs " +
                     shape_string(truth.shape()));
  return mse(mass_series(pred, dx), mass_series(truth, dx));
}

double diff_mse(const std::function<Tensor(const Tensor&)>& step,
                const std::vector<Trajectory>& trajectories) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& tr : trajectories) {
    const std::size_t t = tr.length(), d = tr.dim();
    if (t < 2) continue;
    std::vector<double> head(tr.states.values().begin(), tr.states.values().end() - static_cast<std::ptrdiff_t>(d));
    std::vector<double> tail(tr.states.values().begin() + static_cast<std::ptrdiff_t>(d), tr.states.values().end());
    const Tensor next = step(Tensor::matrix(t - 1, d, std::move(head)));
    const Tensor want = Tensor::matrix(t - 1, d, std::move(tail));
    s += mse(next, want) * static_cast<double>(want.numel());
    n += want.numel();
  }
  if (n == 0) throw std::invalid_argument("diff_mse: no step pairs");
  return s / static_cast<double>(n);
}

void summarize(MetricsReport& r) {
  if (r.per_trajectory.empty()) return;
  double e = 0.0, m = 0.0;
  bool has_mass = true;
  for (const auto& t : r.per_trajectory) {
    e += t.energy_mse;
    if (t.mass_mse) m += *t.mass_mse;
    else has_mass = false;
  }
  const double n = static_cast<double>(r.per_trajectory.size());
  r.energy_mse = e / n;
  if (has_mass) r.mass_mse = m / n;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["train_integrator"] = train_integrator;
  j["predict_integrator"] = predict_integrator;
  j["deriv_mse"] = deriv_mse ? nlohmann::json(*deriv_mse) : nlohmann::json(nullptr);
  j["energy_mse"] = energy_mse;
  j["mass_mse"] = mass_mse ? nlohmann::json(*mass_mse) : nlohmann::json(nullptr);
  j["diff_mse"] = diff_mse ? nlohmann::json(*diff_mse) : nlohmann::json(nullptr);
  nlohmann::json per = nlohmann::json::array();
  for (const auto& t : per_trajectory) {
    per.push_back({{"energy_mse", t.energy_mse},
                   {"mass_mse", t.mass_mse ? nlohmann::json(*t.mass_mse) : nlohmann::json(nullptr)},
                   {"state_mse", t.state_mse}});
  }
  j["per_trajectory"] = per;
  return j.dump(2);
}

void write_metrics_csv(std::ostream& os, const EnergySeries& s) {
  const std::size_t n = s.t.size();
  if (s.h_true_on_pred.size() != n || s.h_true_on_true.size() != n || s.h_learned_on_pred.size() != n ||
      s.mass.size() != n)
    throw ShapeError("metrics csv: column lengths differ");
  os << "# dgflow metrics csv v" << kMetricsCsvVersion << "\n" << kMetricsCsvColumns << "\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < n; ++i)
    os << s.t[i] << ',' << s.h_true_on_pred[i] << ',' << s.h_true_on_true[i] << ','
       << s.h_learned_on_pred[i] << ',' << s.mass[i] << "\n";
}

EnergySeries read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != std::string("# dgflow metrics csv v") + kMetricsCsvVersion)
    throw FormatError("metrics csv: missing or unsupported version line");
  if (!std::getline(is, line) || line != kMetricsCsvColumns) throw FormatError("metrics csv: bad header");
  EnergySeries s;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    // strtod rather than >> so that "nan" (no learned energy) reads back.
    double v[5];
    const char* p = line.c_str();
    for (int k = 0; k < 5; ++k) {
      char* end = nullptr;
      v[k] = std::strtod(p, &end);
      if (end == p || (k < 4 ? *end != ',' : *end != '\0'))
        throw FormatError("metrics csv: bad row '" + line + "'");
      p = end + (k < 4 ? 1 : 0);
    }
    s.t.push_back(v[0]);
    s.h_true_on_pred.push_back(v[1]);
    s.h_true_on_true.push_back(v[2]);
    s.h_learned_on_pred.push_back(v[3]);
    s.mass.push_back(v[4]);
  }
  return s;
}

std::string report_table_header() {
  return "model,train,predict,deriv_mse,energy_mse,mass_mse,diff_mse";
}

std::string report_table_row(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << std::scientific;
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
    else os << "NA";
  };
  os << r.model << ',' << r.train_integrator << ',' << r.predict_integrator << ',';
  opt(r.deriv_mse);
  os << ',' << r.energy_mse << ',';
  opt(r.mass_mse);
  os << ',';
  opt(r.diff_mse);
  return os.str();
}

}  // namespace dgflow
