#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dgflow/dataset.hpp"
#include "dgflow/integrators.hpp"

namespace dgflow {

std::uint64_t splitmix64(std::uint64_t x);
// Seed of trajectory `index` of a dataset generated from `seed`.
std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index);

struct KdvGenConfig {
  std::size_t n_series = 100;
  std::size_t n_train = 90;
  std::size_t steps = 500;  // each trajectory holds steps + 1 states
  double dt = 0.001;
  std::size_t n = 50;
  double dx = 0.2;
  double alpha = -6.0;
  double beta = 1.0;
  double kappa_lo = 0.5, kappa_hi = 2.0;
  double min_separation = 2.0;  // between soliton centres, periodic distance
  double solver_tol = 1e-12;
  double max_energy_drift = 1e-8;
  double max_mass_drift = 1e-10;
  std::uint64_t seed = 0;
  bool deterministic = false;
};

struct ChGenConfig {
  std::size_t n_series = 100;
  std::size_t n_train = 90;
  std::size_t steps = 500;
  double dt = 0.0001;
  std::size_t n = 50;
  double dx = 0.02;
  double gamma = 0.0005;
  double amplitude = 0.05;  // u0 ~ U(-amplitude, amplitude)
  double solver_tol = 1e-12;
  double energy_slack = 1e-9;  // allowed per-step increase of H
  double max_mass_drift = 1e-10;
  std::uint64_t seed = 0;
  bool deterministic = false;
};

struct OdeGenConfig {
  std::string system = "mass_spring";
  double friction = 0.0;
  std::size_t n_train = 25;
  std::size_t n_test = 25;
  std::size_t obs = 30;  // samples per train/test trajectory
  std::size_t n_long = 15;
  std::size_t long_obs = 100;
  double long_duration = 20.0;  // train, test and long-term share dt = long_duration / (long_obs - 1)
  double noise = 0.1;           // Gaussian sigma added to train and test states
  double rtol = 1e-10;
  double atol = 1e-12;
  std::uint64_t seed = 0;
  bool deterministic = false;

  double dt() const { return long_duration / static_cast<double>(long_obs - 1); }
  // Defaults for mass_spring, damped_spring, pendulum and twobody.
  static OdeGenConfig defaults(const std::string& system);
};

// Two periodic sech^2 solitons of heights -12/alpha * kappa^2 at centres at
// least min_separation apart.
Tensor kdv_initial_state(const KdvGenConfig& cfg, std::uint64_t seed);
Tensor ch_initial_state(const ChGenConfig& cfg, std::uint64_t seed);
Tensor ode_initial_state(const std::string& system, std::uint64_t seed);

Dataset gen_kdv(const KdvGenConfig& cfg);
Dataset gen_ch(const ChGenConfig& cfg);
Dataset gen_ode(const OdeGenConfig& cfg);

// Delimited text (comma, tab or spaces) with a header naming the columns
// time (or t), q and p. The first train_fraction of samples trains, the
// rest is the test trajectory.
Dataset load_real_pendulum(const std::filesystem::path& path, double train_fraction = 0.5);

}  // namespace dgflow
