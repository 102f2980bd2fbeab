#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgflow/checkpoint.hpp"
#include "dgflow/dataset.hpp"
#include "dgflow/integrators.hpp"
#include "dgflow/metrics.hpp"
#include "dgflow/models.hpp"
#include "dgflow/systems.hpp"
#include "dgflow/train.hpp"

namespace dgflow::cli {

// Bad flags, unsupported combinations, missing inputs: exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Ground-truth system of a dataset. The real pendulum has no known energy;
// the unit pendulum stands in for it.
std::unique_ptr<AnalyticSystem> truth_system(const Dataset& ds);
GSpec structure_for(const Dataset& ds);

// Conv energies (node_conv for NODE, kernel 7) on meshes, dense nets otherwise.
ArchSpec default_arch(const Dataset& ds, ModelRole role);

Checkpoint train_model(const Dataset& ds, const ArchSpec& arch, const TrainConfig& cfg, TrainResult* result);

struct LoadedModel {
  Checkpoint ck;
  std::optional<EnergyModel> energy;
  std::optional<NodeModel> node;
  GSpec g = GSpec::symplectic(1);

  RhsFn rhs() const;
  std::string train_integrator() const;
};
LoadedModel load_model(Checkpoint ck, const Dataset& ds);

struct PredictOptions {
  StepperKind kind = StepperKind::discrete_gradient;
  std::optional<std::size_t> steps;  // default: the source trajectory length - 1
  double dt = 0.0;
  DgSolverConfig dg;
  DopriOptions dopri;
  bool deterministic = false;
};

struct Prediction {
  std::vector<Trajectory> trajectories;
  std::vector<std::vector<StepDiagnostics>> diagnostics;
  std::vector<std::string> errors;  // per trajectory, empty on success
  bool ok() const;
};

// Rollouts from the first state of every source trajectory.
Prediction predict(const LoadedModel& m, const std::vector<Trajectory>& source, const PredictOptions& opt);
// One step of the prediction integrator on every row of x.
Tensor one_step(const LoadedModel& m, const Tensor& x, const PredictOptions& opt);

// Evaluates a row block at a time so tape memory stays bounded.
RhsFn chunked(RhsFn f, std::size_t block = 50);

struct EvalInput {
  const Dataset* data = nullptr;
  const std::vector<Trajectory>* truth = nullptr;  // split the predictions start from
  const std::vector<Trajectory>* pred = nullptr;
  const LoadedModel* model = nullptr;  // optional: enables deriv, diff and learned H
  PredictOptions predict;              // integrator for the one-step (diff) metric
  std::string predict_name = "NA";
};
MetricsReport evaluate(const EvalInput& in, std::vector<EnergySeries>* series = nullptr);

// Mean of several reports; optional fields stay set only if set in all.
MetricsReport average(const std::vector<MetricsReport>& reports);

}  // namespace dgflow::cli
