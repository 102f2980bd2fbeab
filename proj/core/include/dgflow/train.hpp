#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dgflow/adam.hpp"
#include "dgflow/dataset.hpp"
#include "dgflow/losses.hpp"
#include "dgflow/models.hpp"

namespace dgflow {

// dgnet: energy model fitted through the discrete-gradient residual.
// hnn: energy model fitted through an explicit integrator.
// node: vector-field model fitted through an explicit integrator.
enum class ModelRole { dgnet, hnn, node };

std::string to_string(ModelRole r);
ModelRole role_from_string(const std::string& s);

struct TrainConfig {
  ModelRole role = ModelRole::dgnet;
  double lr = 1e-3;
  std::size_t batch = 200;
  std::size_t iterations = 10000;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  TrainIntegrator integrator = TrainIntegrator::rk2;  // hnn and node only
  bool normalize_by_dt = true;                        // integrator losses divided by dt
  std::size_t micro_batch = 0;  // rows per tape; 0 picks a size bounded in memory
  std::size_t log_every = 100;
  bool learn_friction = false;  // G = S - R with R learned, initialized at zero

  void validate() const;
  std::string to_json() const;
};

struct LossRecord {
  std::size_t iteration = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> log;
  double seconds = 0.0;
  std::optional<Tensor> friction;
};

// Minibatch Adam on uniformly sampled pairs (with replacement). `g` is the
// structure operator; with learn_friction it must be damped or symplectic and
// its friction is replaced by the learned one.
TrainResult train_energy(EnergyModel& model, const GSpec& g, const PairSet& data, const TrainConfig& cfg);
TrainResult train_node(NodeModel& model, const PairSet& data, const TrainConfig& cfg);

// Batch loss at the model's current parameters (no update).
double evaluate_loss(const EnergyModel& model, const GSpec& g, const PairSet& data, const TrainConfig& cfg,
                     std::optional<Tensor> friction = std::nullopt);

}  // namespace dgflow
