#include "dgflow/structure.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dgflow/errors.hpp"

namespace dgflow {

std::string to_string(GKind k) {
  switch (k) {
    case GKind::symplectic: return "S";
    case GKind::damped: return "S-R";
    case GKind::central_diff: return "D";
    case GKind::laplacian: return "D2";
    case GKind::custom: return "custom";
  }
  return "?";
}

namespace {
void check_friction(const Tensor& g, std::size_t n) {
  if (g.numel() != n) throw ShapeError("friction must have one entry per momentum coordinate");
  for (double v : g.data()) {
    if (v < 0.0) throw std::invalid_argument("friction must be non-negative");
  }
}
}  // namespace

GSpec GSpec::symplectic(std::size_t n) {
  if (n == 0) throw std::invalid_argument("symplectic operator needs n >= 1");
  GSpec g;
  g.kind_ = GKind::symplectic;
  g.dim_ = 2 * n;
  g.laws_ = {true, true, false};
  return g;
}

GSpec GSpec::damped(std::size_t n, const Tensor& friction, bool learnable) {
  if (n == 0) throw std::invalid_argument("damped operator needs n >= 1");
  check_friction(friction, n);
  GSpec g;
  g.kind_ = GKind::damped;
  g.dim_ = 2 * n;
  g.laws_ = {false, true, false};
  g.friction_ = friction.reshaped({n});
  g.learnable_ = learnable;
  return g;
}

GSpec GSpec::central_diff(std::size_t n, double dx) {
  if (n < 3 || !(dx > 0.0)) throw std::invalid_argument("central difference needs N >= 3 and dx > 0");
  GSpec g;
  g.kind_ = GKind::central_diff;
  g.dim_ = n;
  g.dx_ = dx;
  g.laws_ = {true, true, true};
  return g;
}

GSpec GSpec::laplacian(std::size_t n, double dx) {
  if (n < 3 || !(dx > 0.0)) throw std::invalid_argument("laplacian needs N >= 3 and dx > 0");
  GSpec g;
  g.kind_ = GKind::laplacian;
  g.dim_ = n;
  g.dx_ = dx;
  g.laws_ = {false, true, true};
  return g;
}

GSpec GSpec::custom(const Tensor& matrix, Laws laws) {
  if (matrix.rank() != 2 || matrix.dim(0) != matrix.dim(1)) {
    throw ShapeError("custom operator must be a square matrix");
  }
  GSpec g;
  g.kind_ = GKind::custom;
  g.dim_ = matrix.dim(0);
  g.laws_ = laws;
  g.matrix_ = matrix.with_precision(Precision::f64);
  return g;
}

void GSpec::set_friction(const Tensor& g) {
  if (kind_ != GKind::damped) throw std::logic_error("set_friction on a non-damped operator");
  check_friction(g, dim_ / 2);
  friction_ = g.reshaped({dim_ / 2});
}

Var GSpec::apply(const Var& x) const {
  if (kind_ == GKind::damped) return apply(x, x.tape().constant(friction_));
  const Shape s = x.shape();
  const Var xb = s.size() == 1 ? reshape(x, {1, s[0]}) : x;
  if (xb.shape().size() != 2 || xb.shape()[1] != dim_) {
    throw ShapeError("apply_G: state " + shape_string(s) + " does not match operator dimension " +
                     std::to_string(dim_));
  }
  Var y;
  switch (kind_) {
    case GKind::symplectic: {
      const std::size_t n = dim_ / 2;
      y = concat_cols(slice_cols(xb, n, n), -slice_cols(xb, 0, n));
      break;
    }
    case GKind::central_diff:
      y = (1.0 / (2.0 * dx_)) * (roll(xb, 1, dim_) - roll(xb, -1, dim_));
      break;
    case GKind::laplacian:
      y = (1.0 / (dx_ * dx_)) * ((roll(xb, 1, dim_) + roll(xb, -1, dim_)) - 2.0 * xb);
      break;
    case GKind::custom:
      y = matmul(xb, x.tape().constant(matrix_), false, true);
      break;
    case GKind::damped:
      break;
  }
  return reshape(y, s);
}

Var GSpec::apply(const Var& x, const Var& friction) const {
  if (kind_ != GKind::damped) return apply(x);
  const Shape s = x.shape();
  const Var xb = s.size() == 1 ? reshape(x, {1, s[0]}) : x;
  if (xb.shape().size() != 2 || xb.shape()[1] != dim_) {
    throw ShapeError("apply_G: state " + shape_string(s) + " does not match operator dimension " +
                     std::to_string(dim_));
  }
  const std::size_t n = dim_ / 2;
  if (friction.numel() != n) throw ShapeError("apply_G: friction size");
  const Var a = slice_cols(xb, 0, n);
  const Var b = slice_cols(xb, n, n);
  const Var g = broadcast_rows(reshape(friction, {n}), xb.shape()[0]);
  return reshape(concat_cols(b, -a - g * b), s);
}

Tensor GSpec::apply(const Tensor& x) const {
  Tape tape(x.precision());
  return apply(tape.constant(x)).value();
}

Tensor GSpec::dense() const {
  if (kind_ == GKind::custom) return matrix_;
  // Column j of G is G e_j; rows of the identity are the unit vectors.
  std::vector<double> eye(dim_ * dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) eye[i * dim_ + i] = 1.0;
  const Tensor cols = apply(Tensor::matrix(dim_, dim_, eye));
  std::vector<double> m(dim_ * dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) m[i * dim_ + j] = cols.at(j, i);
  return Tensor::matrix(dim_, dim_, std::move(m));
}

GSpec build_S(std::size_t n) { return GSpec::symplectic(n); }
GSpec build_SminusR(std::size_t n, const Tensor& g) { return GSpec::damped(n, g); }
GSpec build_D(std::size_t n, double dx) { return GSpec::central_diff(n, dx); }
GSpec build_D2(std::size_t n, double dx) { return GSpec::laplacian(n, dx); }

OperatorSplit split_operator(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("split_operator: matrix must be square");
  const std::size_t n = a.dim(0);
  std::vector<double> s(n * n), k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      s[i * n + j] = 0.5 * (a.at(i, j) + a.at(j, i));
      k[i * n + j] = 0.5 * (a.at(i, j) - a.at(j, i));
    }
  }
  return {Tensor::matrix(n, n, std::move(s)), Tensor::matrix(n, n, std::move(k))};
}

LawReport check_laws(const GSpec& g, std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("check_laws: trials must be >= 1");
  const std::size_t n = g.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> xs(trials * n);
  for (double& v : xs) v = normal(rng);
  const Tensor x = Tensor::matrix(trials, n, xs);
  const Tensor gx = g.apply(x);
  LawReport r;
  for (std::size_t t = 0; t < trials; ++t) {
    double q = 0.0, nn = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      q += x.at(t, j) * gx.at(t, j);
      nn += x.at(t, j) * x.at(t, j);
    }
    r.skew_violation = std::max(r.skew_violation, std::abs(q) / nn);
    r.neg_semidef_violation = std::max(r.neg_semidef_violation, q / nn);
  }
  const Tensor dense = g.dense();
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += dense.at(i, j);
    r.mass_violation = std::max(r.mass_violation, std::abs(s));
  }
  r.skew = r.skew_violation <= 1e-12;
  r.neg_semidef = r.neg_semidef_violation <= 1e-12;
  r.mass_kernel = r.mass_violation <= 1e-13 * std::max(1.0, max_abs(dense));
  const Laws& d = g.laws();
  r.ok = (!d.skew || r.skew) && (!d.neg_semidef || r.neg_semidef) && (!d.mass_kernel || r.mass_kernel);
  return r;
}

}  // namespace dgflow
