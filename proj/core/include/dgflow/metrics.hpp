#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dgflow/dataset.hpp"
#include "dgflow/energy.hpp"
#include "dgflow/integrators.hpp"

namespace dgflow {

// Mean of squared entrywise differences.
double mse(const Tensor& a, const Tensor& b);

// MSE between model and true time derivatives at every state of the trajectories.
double deriv_mse(const RhsFn& model, const RhsFn& truth, const std::vector<Trajectory>& trajectories);

// MSE over time of H evaluated on the predicted vs the true states ([T x dim] each).
double energy_mse(const Tensor& pred, const Tensor& truth, const Energy& h,
                  Precision p = Precision::f64);
// Same for the mass sum(u) * dx.
double mass_mse(const Tensor& pred, const Tensor& truth, double dx);
// MSE of one-step predictions step(u_t) against u_{t+1} over every pair.
double diff_mse(const std::function<Tensor(const Tensor&)>& step,
                const std::vector<Trajectory>& trajectories);

Tensor mass_series(const Tensor& states, double dx);

struct TrajectoryMetrics {
  double energy_mse = 0.0;
  std::optional<double> mass_mse;
  double state_mse = 0.0;
};

struct MetricsReport {
  std::string model;
  std::string train_integrator;
  std::string predict_integrator;
  std::optional<double> deriv_mse;
  double energy_mse = 0.0;
  std::optional<double> mass_mse;
  std::optional<double> diff_mse;
  std::vector<TrajectoryMetrics> per_trajectory;

  std::string to_json() const;
};

// Averages the per-trajectory metrics into report.energy_mse / mass_mse.
void summarize(MetricsReport& report);

inline constexpr const char* kMetricsCsvVersion = "1";
inline constexpr const char* kMetricsCsvColumns = "t,H_true_eq_on_pred,H_true_eq_on_true,H_learned_on_pred,mass";

struct EnergySeries {
  std::vector<double> t;
  std::vector<double> h_true_on_pred;
  std::vector<double> h_true_on_true;
  std::vector<double> h_learned_on_pred;
  std::vector<double> mass;  // of the prediction
};

// "# dgflow metrics csv v1" line, the column header, then one row per time.
void write_metrics_csv(std::ostream& os, const EnergySeries& s);
EnergySeries read_metrics_csv(std::istream& is);

// Header row shared by metric tables: model,train,predict,deriv_mse,energy_mse,mass_mse,diff_mse.
std::string report_table_header();
std::string report_table_row(const MetricsReport& r);

}  // namespace dgflow
