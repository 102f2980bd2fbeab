#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dgflow/tensor.hpp"

namespace dgflow {

struct Trajectory {
  std::vector<double> times;  // strictly increasing
  Tensor states;              // [T x dim]
  std::uint64_t seed = 0;     // seed the trajectory was generated from

  std::size_t length() const { return times.size(); }
  std::size_t dim() const { return states.dim(1); }
  Tensor state(std::size_t t) const { return states.row(t); }
  // Throws if times are not strictly increasing or do not match states.
  void validate() const;
  // Mean step, checking max deviation from it against `tol` (throws otherwise).
  double uniform_dt(double tol = 1e-12) const;
};

struct Dataset {
  std::string system;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double dx = 0.0;  // 0 for ODE systems
  double noise = 0.0;
  Precision precision = Precision::f64;
  std::vector<Trajectory> train, test, long_term;
  // Free-form manifest entries (generation method, checks, conventions).
  std::map<std::string, std::string> notes;

  std::size_t dim() const;
  const std::vector<Trajectory>& split(const std::string& name) const;
};

// Training pairs (u_n, u_{n+1}) gathered from every step of every trajectory.
struct PairSet {
  Tensor u0;  // [M x dim]
  Tensor u1;  // [M x dim]
  double dt = 0.0;
  std::size_t size() const { return u0.dim(0); }
  // Rows idx of both sides.
  PairSet gather(const std::vector<std::size_t>& idx) const;
};

// Pairs at a common step; trajectories whose steps deviate from dt by more
// than rel_tol * dt are rejected.
PairSet make_pairs(const std::vector<Trajectory>& trajectories, double dt, double rel_tol = 1e-6);

// Directory layout: manifest.json plus <split>.bin for each non-empty split.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

// Split blob, all integers and reals little-endian:
//   "DGFD" u32 version u64 n_traj u64 n_steps u64 dim u8 precision
//   u64 seeds[n_traj] f64 states[n_traj][n_steps][dim] f64 times[n_traj][n_steps]
//   u32 crc32 of every preceding byte
std::vector<std::uint8_t> encode_split(const std::vector<Trajectory>& split, Precision p);
std::vector<Trajectory> decode_split(const std::vector<std::uint8_t>& bytes, Precision* p = nullptr);

inline constexpr std::uint32_t kDatasetVersion = 1;

std::uint32_t crc32_bytes(const std::uint8_t* data, std::size_t n);

}  // namespace dgflow
