#include "dgflow/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <sstream>

#include "dgflow/errors.hpp"

namespace dgflow {

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision precision_from_string(const std::string& s) {
  if (s == "f32" || s == "single" || s == "float") return Precision::f32;
  if (s == "f64" || s == "double") return Precision::f64;
  throw std::invalid_argument("unknown precision '" + s + "'");
}

double default_secant_eps(Precision p) { return p == Precision::f32 ? 1e-6 : 1e-12; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

void require_finite(std::span<const double> values, const char* what) {
  // Branch-free scan over the exponent bits so the loop vectorizes.
  constexpr std::uint64_t kExp = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (double v : values) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExp) == kExp);
  if (bad) throw NumericalError(std::string(what) + ": non-finite value");
}

Tensor::Tensor(Shape shape, std::vector<double> data, Precision precision)
    : shape_(std::move(shape)), data_(std::move(data)), precision_(precision) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
  require_finite(data_, "tensor construction");
  if (precision_ == Precision::f32) {
    for (double& v : data_) v = round_to(v, precision_);
    require_finite(data_, "tensor construction (f32 overflow)");
  }
}

Tensor::Tensor(Unchecked, Shape shape, std::vector<double> data, Precision precision)
    : shape_(std::move(shape)), data_(std::move(data)), precision_(precision) {}

Tensor Tensor::from_unchecked(Shape shape, std::vector<double> data, Precision precision) {
  return Tensor(Unchecked{}, std::move(shape), std::move(data), precision);
}

Tensor Tensor::zeros(Shape shape, Precision precision) {
  const std::size_t n = shape_numel(shape);
  return Tensor(Unchecked{}, std::move(shape), std::vector<double>(n, 0.0), precision);
}

Tensor Tensor::full(Shape shape, double value, Precision precision) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), precision);
}

Tensor Tensor::scalar(double value, Precision precision) {
  return Tensor(Shape{}, std::vector<double>{value}, precision);
}

Tensor Tensor::vector(std::vector<double> values, Precision precision) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), precision);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      Precision precision) {
  return Tensor(Shape{rows, cols}, std::move(values), precision);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      Precision precision) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix initializer");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(v), precision);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for " + shape_string(shape_));
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() <= 1) return 1;
  throw ShapeError("rows() needs rank <= 2, got " + shape_string(shape_));
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  if (rank() == 0) return 1;
  throw ShapeError("cols() needs rank <= 2, got " + shape_string(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(Unchecked{}, std::move(shape), data_, precision_);
}

Tensor Tensor::with_precision(Precision p) const { return Tensor(shape_, data_, p); }

Tensor Tensor::row(std::size_t r) const {
  if (rank() != 2 || r >= shape_[0]) throw ShapeError("row index out of range");
  const std::size_t c = shape_[1];
  return Tensor(Unchecked{}, Shape{c},
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(r * c),
                                    data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)),
                precision_);
}

bool Tensor::identical(const Tensor& other) const noexcept {
  if (shape_ != other.shape_ || precision_ != other.precision_) return false;
  return std::equal(data_.begin(), data_.end(), other.data_.begin(),
                    [](double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; });
}

std::ostream& operator<<(std::ostream& os, const Tensor& t) {
  os << "Tensor" << shape_string(t.shape()) << '(' << to_string(t.precision()) << "){";
  const std::size_t n = std::min<std::size_t>(t.numel(), 16);
  for (std::size_t i = 0; i < n; ++i) os << (i ? ", " : "") << t[i];
  if (t.numel() > n) os << ", ...";
  return os << '}';
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw ShapeError("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

namespace {
template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const Precision p = std::min(a.precision(), b.precision());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = round_to(f(a[i], b[i]), p);
  require_finite(out, what);
  return Tensor::from_unchecked(a.shape(), std::move(out), p);
}
}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x + y; }, "add");
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x - y; }, "sub");
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x * y; }, "hadamard");
}

Tensor operator*(double s, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = round_to(s * a[i], a.precision());
  require_finite(out, "scale");
  return Tensor::from_unchecked(a.shape(), std::move(out), a.precision());
}

}  // namespace dgflow
