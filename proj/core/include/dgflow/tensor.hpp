#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dgflow {

using Shape = std::vector<std::size_t>;

// Arithmetic precision of a tensor. Storage is always double; single
// precision values are rounded to the nearest float after every operation.
enum class Precision : std::uint8_t { f32 = 0, f64 = 1 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

// Threshold below which two scalars are treated as coincident by the secant
// rule of activation functions.
double default_secant_eps(Precision p);

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Rounds x to float when p is single precision.
inline double round_to(double x, Precision p) {
  return p == Precision::f32 ? static_cast<double>(static_cast<float>(x)) : x;
}

// Dense row-major array of real scalars. Every entry is finite.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  Tensor(Shape shape, std::vector<double> data, Precision precision = Precision::f64);

  static Tensor zeros(Shape shape, Precision precision = Precision::f64);
  static Tensor full(Shape shape, double value, Precision precision = Precision::f64);
  static Tensor scalar(double value, Precision precision = Precision::f64);
  static Tensor vector(std::vector<double> values, Precision precision = Precision::f64);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       Precision precision = Precision::f64);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       Precision precision = Precision::f64);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  Precision precision() const noexcept { return precision_; }

  // Rows and columns of a rank-2 tensor; a rank-1 tensor is one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const& noexcept { return data_; }
  // A temporary hands over its storage, so range-for over values() of a
  // returned tensor stays valid.
  std::vector<double> values() && noexcept { return std::move(data_); }
  double operator[](std::size_t i) const { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  // Value of a single-entry tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;
  Tensor with_precision(Precision p) const;
  // Row r of a rank-2 tensor as a rank-1 tensor.
  Tensor row(std::size_t r) const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  // Bitwise equality of shape, precision and values.
  bool identical(const Tensor& other) const noexcept;

  // Construction helper for kernels that have already rounded and checked.
  static Tensor from_unchecked(Shape shape, std::vector<double> data, Precision precision);

 private:
  struct Unchecked {};
  Tensor(Unchecked, Shape shape, std::vector<double> data, Precision precision);

  Shape shape_;
  std::vector<double> data_;
  Precision precision_ = Precision::f64;
};

std::ostream& operator<<(std::ostream& os, const Tensor& t);

// Throws NumericalError naming `what` if any entry is non-finite.
void require_finite(std::span<const double> values, const char* what);

double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor hadamard(const Tensor& a, const Tensor& b);

}  // namespace dgflow
