#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "dgflow/tape.hpp"

namespace dgflow {

class DiscreteGraph;

// Scalar nonlinearities that carry a discrete differential.
enum class Activation { identity, tanh, sin, cos, rsqrt };

Var apply_activation(Activation f, const Var& x);
// Ordinary derivative f'(x) recorded on the tape.
Var activation_derivative(Activation f, const Var& x);

// Entrywise discrete differential of f between h and k:
// (f(h) - f(k)) / (h - k) where |h - k| > eps, f'((h + k) / 2) elsewhere.
// fh and fk may pass already computed f(h), f(k).
Var secant_slope(const Var& h, const Var& k, Activation f, double eps,
                 std::optional<Var> fh = std::nullopt, std::optional<Var> fk = std::nullopt);

// avg(g) * df + avg(f) * dg, the discrete differential of a product f * g.
Var discrete_product_rule(const Var& f1, const Var& f2, const Var& g1, const Var& g2, const Var& df,
                          const Var& dg);
Tensor discrete_product_rule(const Tensor& f1, const Tensor& f2, const Tensor& g1,
                             const Tensor& g2, const Tensor& df, const Tensor& dg);

// A value evaluated at two states at once. The two chains are ordinary tape
// nodes; the pair remembers how to pull an adjoint back through a discrete
// differential.
class DVar {
 public:
  DVar() = default;
  DVar(DiscreteGraph* graph, std::size_t id) : graph_(graph), id_(id) {}

  DiscreteGraph& graph() const;
  std::size_t id() const noexcept { return id_; }
  const Var& u() const;
  const Var& v() const;
  Shape shape() const { return u().shape(); }
  std::size_t numel() const { return u().numel(); }

 private:
  DiscreteGraph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class DiscreteGraph {
 public:
  // Maps the adjoint of a node's output to adjoints of its inputs, in input
  // order. An invalid Var means no contribution.
  using Pullback = std::function<std::vector<Var>(const Var&)>;

  // eps <= 0 selects the default threshold for the tape precision.
  explicit DiscreteGraph(Tape& tape, double eps = 0.0);
  DiscreteGraph(const DiscreteGraph&) = delete;
  DiscreteGraph& operator=(const DiscreteGraph&) = delete;

  Tape& tape() const noexcept { return *tape_; }
  double eps() const noexcept { return eps_; }

  DVar input(const Var& u, const Var& v);
  DVar record(Var hu, Var hv, std::vector<std::size_t> inputs, Pullback pullback);

  const Var& u(std::size_t id) const { return nodes_.at(id).hu; }
  const Var& v(std::size_t id) const { return nodes_.at(id).hv; }

  // Discrete adjoint of `input` for the root seeded with ones (or `seed`).
  // The result is a tape node, so it can be differentiated further.
  Var backward(const DVar& root, const DVar& input, std::optional<Var> seed = std::nullopt);

 private:
  struct DNode {
    Var hu, hv;
    std::vector<std::size_t> inputs;
    Pullback pullback;
  };
  Tape* tape_;
  double eps_;
  std::vector<DNode> nodes_;
};

// Linear operations use the ordinary adjoint.
DVar operator+(const DVar& a, const DVar& b);
DVar operator-(const DVar& a, const DVar& b);
DVar operator-(const DVar& a);
DVar operator*(double c, const DVar& a);
DVar operator*(const DVar& a, double c);
DVar operator+(const DVar& a, double c);
DVar operator+(double c, const DVar& a);
DVar operator-(const DVar& a, double c);
DVar operator-(double c, const DVar& a);
DVar operator+(const DVar& a, const Var& b);
DVar operator+(const Var& a, const DVar& b);
DVar operator-(const DVar& a, const Var& b);
DVar operator-(const Var& a, const DVar& b);
DVar operator*(const DVar& a, const Var& b);
DVar operator*(const Var& a, const DVar& b);
DVar operator/(const DVar& a, const Var& b);
// Product of two state-dependent factors: discrete product rule.
DVar operator*(const DVar& a, const DVar& b);
// No discrete rule; throws NoDiscreteRuleError.
DVar operator/(const DVar& a, const DVar& b);

DVar matmul(const DVar& a, const Var& b, bool ta = false, bool tb = false);
DVar matmul(const Var& a, const DVar& b, bool ta = false, bool tb = false);
// No discrete rule; throws NoDiscreteRuleError.
DVar matmul(const DVar& a, const DVar& b, bool ta = false, bool tb = false);

DVar activate(Activation f, const DVar& x);
DVar tanh(const DVar& x);
DVar sin(const DVar& x);
DVar cos(const DVar& x);
DVar rsqrt(const DVar& x);

DVar sum(const DVar& x);
DVar expand(const DVar& scalar, const Shape& shape);
DVar sum_rows(const DVar& x);
DVar broadcast_rows(const DVar& x, std::size_t rows);
DVar sum_cols(const DVar& x);
DVar broadcast_cols(const DVar& x, std::size_t cols);
DVar roll(const DVar& x, std::int64_t shift, std::size_t period, std::size_t inner = 1);
DVar reshape(const DVar& x, const Shape& shape);
DVar slice_cols(const DVar& x, std::size_t start, std::size_t len);
DVar pad_cols(const DVar& x, std::size_t start, std::size_t total);
DVar concat_cols(const DVar& a, const DVar& b);
DVar conv1d_periodic(const Var& kernel, const DVar& x);
DVar conv1d_periodic_rows(const Var& kernel, const DVar& x, std::size_t n);

}  // namespace dgflow
