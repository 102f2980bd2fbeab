#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dgflow/energy.hpp"

namespace dgflow {

enum class ArchKind {
  mlp,        // energy: dense tanh layers on the whole state
  conv,       // energy: periodic conv, pointwise (or flattened) dense layers, dx-weighted sum
  separable,  // energy: T(p) + V(q), two dense nets
  node_mlp,   // vector field: dense net with output dim = state dim
  node_conv,  // vector field: conv net with one output channel per mesh point
};

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

std::string to_string(ArchKind k);
ArchKind arch_from_string(const std::string& s);

struct ArchSpec {
  ArchKind kind = ArchKind::mlp;
  std::size_t state_dim = 2;
  std::vector<std::size_t> hidden{200, 200};  // widths of the hidden layers
  Activation activation = Activation::tanh;
  std::size_t kernel = 3;                     // conv kernel size
  double dx = 1.0;                            // mesh size for conv energies
  bool flattened = false;                     // conv: global dense layer instead of pointwise

  bool is_energy() const { return kind == ArchKind::mlp || kind == ArchKind::conv || kind == ArchKind::separable; }
  std::string to_json() const;
  static ArchSpec from_json(const std::string& text);
};

// Named parameter tensors in a fixed order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t count() const;  // total scalar entries
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Tensor& operator[](std::size_t i) const { return values_.at(i); }
  const Tensor& at(const std::string& name) const;
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const;
  void set(std::size_t i, Tensor value);
  // In-place access for optimizers; callers keep shapes unchanged.
  std::vector<Tensor*> mutable_values();
  const std::vector<Tensor>& values() const noexcept { return values_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  bool identical(const ParamStore& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Random matrix with orthonormal rows or columns (whichever is fewer): QR of
// a standard-normal matrix with the signs of R's diagonal folded into Q.
Tensor orthogonal_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

class BoundEnergyModel;

// Neural energy H(x; theta). As an Energy it evaluates with its current
// parameters held constant.
class EnergyModel : public Energy {
 public:
  EnergyModel(ArchSpec arch, std::uint64_t seed, Precision precision = Precision::f64);
  EnergyModel(ArchSpec arch, ParamStore params, Precision precision = Precision::f64);

  const ArchSpec& arch() const noexcept { return arch_; }
  const ParamStore& params() const noexcept { return params_; }
  ParamStore& params() noexcept { return params_; }
  Precision precision() const noexcept { return precision_; }

  std::size_t state_dim() const override { return arch_.state_dim; }
  double gradient_scale() const override;
  Var energy(const Var& x) const override;
  DVar energy(const DVar& x) const override;

  Var energy(const Var& x, const std::vector<Var>& p) const;
  DVar energy(const DVar& x, const std::vector<Var>& p) const;

  std::vector<Var> bind_params(Tape& tape, bool trainable) const;
  BoundEnergyModel bind(Tape& tape, bool trainable) const;

 private:
  template <class V> V program(const V& x, const std::vector<Var>& p) const;
  ArchSpec arch_;
  ParamStore params_;
  Precision precision_;
};

// An energy model whose parameters are specific nodes of one tape.
class BoundEnergyModel : public Energy {
 public:
  BoundEnergyModel(const EnergyModel& model, std::vector<Var> params)
      : model_(&model), params_(std::move(params)) {}

  const std::vector<Var>& params() const noexcept { return params_; }
  std::size_t state_dim() const override { return model_->state_dim(); }
  double gradient_scale() const override { return model_->gradient_scale(); }
  Var energy(const Var& x) const override { return model_->energy(x, params_); }
  DVar energy(const DVar& x) const override { return model_->energy(x, params_); }

 private:
  const EnergyModel* model_;
  std::vector<Var> params_;
};

// Neural ODE baseline: the network output is the time derivative.
class NodeModel {
 public:
  NodeModel(ArchSpec arch, std::uint64_t seed, Precision precision = Precision::f64);
  NodeModel(ArchSpec arch, ParamStore params, Precision precision = Precision::f64);

  const ArchSpec& arch() const noexcept { return arch_; }
  const ParamStore& params() const noexcept { return params_; }
  ParamStore& params() noexcept { return params_; }
  Precision precision() const noexcept { return precision_; }
  std::size_t state_dim() const noexcept { return arch_.state_dim; }

  // x[B x dim] -> dx/dt [B x dim]
  Var forward(const Var& x, const std::vector<Var>& p) const;
  Tensor forward(const Tensor& x) const;
  std::vector<Var> bind_params(Tape& tape, bool trainable) const;

 private:
  ArchSpec arch_;
  ParamStore params_;
  Precision precision_;
};

// Fresh parameters for an architecture.
ParamStore init_params(const ArchSpec& arch, std::uint64_t seed);

}  // namespace dgflow
