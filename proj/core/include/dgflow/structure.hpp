#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "dgflow/tape.hpp"

namespace dgflow {

enum class GKind { symplectic, damped, central_diff, laplacian, custom };

std::string to_string(GKind k);

// Properties an operator G is declared to have.
struct Laws {
  bool skew = false;         // x'Gx = 0
  bool neg_semidef = false;  // x'Gx <= 0
  bool mass_kernel = false;  // 1'G = 0
};

// Structure operator mapping an energy gradient to a state velocity. States
// are rows of a [B x dim] tensor (a rank-1 state is one row).
class GSpec {
 public:
  // [0 I; -I 0] on (q, p), q and p of length n.
  static GSpec symplectic(std::size_t n);
  // S - R with R = diag(0, g), g >= 0 per momentum coordinate.
  static GSpec damped(std::size_t n, const Tensor& friction, bool learnable = false);
  // Periodic central difference (x[i+1] - x[i-1]) / (2 dx).
  static GSpec central_diff(std::size_t n, double dx);
  // Periodic second difference (x[i+1] - 2 x[i] + x[i-1]) / dx^2.
  static GSpec laplacian(std::size_t n, double dx);
  // Dense operator with declared laws (verified by check_laws, not trusted).
  static GSpec custom(const Tensor& matrix, Laws laws);

  GKind kind() const noexcept { return kind_; }
  const Laws& laws() const noexcept { return laws_; }
  std::size_t dim() const noexcept { return dim_; }
  double dx() const noexcept { return dx_; }
  bool learnable() const noexcept { return learnable_; }
  const Tensor& friction() const noexcept { return friction_; }
  const Tensor& matrix() const noexcept { return matrix_; }

  // Replaces the friction of a damped operator; negative entries are rejected.
  void set_friction(const Tensor& g);

  Tensor apply(const Tensor& x) const;
  Var apply(const Var& x) const;
  // Damped operator with friction supplied as a tape node (for learning it).
  Var apply(const Var& x, const Var& friction) const;

  // Materialized operator, for tests and small systems.
  Tensor dense() const;

 private:
  GKind kind_ = GKind::symplectic;
  Laws laws_;
  std::size_t dim_ = 0;
  double dx_ = 1.0;
  bool learnable_ = false;
  Tensor friction_;
  Tensor matrix_;
};

GSpec build_S(std::size_t n);
GSpec build_SminusR(std::size_t n, const Tensor& g);
GSpec build_D(std::size_t n, double dx);
GSpec build_D2(std::size_t n, double dx);

struct OperatorSplit {
  Tensor sym;      // (A + A') / 2
  Tensor antisym;  // (A - A') / 2
};
OperatorSplit split_operator(const Tensor& a);

struct LawReport {
  double skew_violation = 0.0;         // max |x'Gx| / |x|^2
  double neg_semidef_violation = 0.0;  // max(0, x'Gx / |x|^2)
  double mass_violation = 0.0;         // |1'G|_inf
  bool skew = false;
  bool neg_semidef = false;
  bool mass_kernel = false;
  // Every declared law holds.
  bool ok = false;
};

LawReport check_laws(const GSpec& g, std::size_t trials, std::uint64_t seed = 0);

}  // namespace dgflow
