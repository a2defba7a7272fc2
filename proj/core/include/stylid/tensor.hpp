#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stylid {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major array of doubles with an explicit shape.
///
/// Every extent is positive and `size() == shape_volume(shape())`. Tensors are
/// plain values: copies are deep and operations return new tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value);
  static Tensor identity(std::size_t n);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // Matrix accessors; require rank 2.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& operator()(std::size_t a, std::size_t b, std::size_t c) {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * shape_[1] + b) * shape_[2] + c];
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  Tensor reshaped(Shape shape) const;
  Tensor row(std::size_t r) const;  // 1×cols
  bool all_finite() const noexcept;

  // Bitwise comparison of shape and every stored double.
  bool identical(const Tensor& other) const noexcept;

  Tensor& operator+=(const Tensor& rhs);
  Tensor& operator-=(const Tensor& rhs);
  Tensor& operator*=(double s);

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor lhs, const Tensor& rhs);
Tensor operator-(Tensor lhs, const Tensor& rhs);
Tensor operator*(Tensor t, double s);
Tensor operator*(double s, Tensor t);

/// a[m×k] · b[k×n]. Throws ShapeError naming both shapes on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);
Tensor hadamard(const Tensor& a, const Tensor& b);

/// Adds a 1×c (or length-c) row to every row of an r×c matrix.
Tensor add_row(const Tensor& m, const Tensor& row);
/// Column sums of an r×c matrix as a 1×c row.
Tensor column_sums(const Tensor& m);

/// Row-wise softmax, stabilized by subtracting each row's max.
Tensor softmax_rows(const Tensor& m);

double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& t);
double frobenius_norm(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

using ScalarFunction = std::function<double(const Tensor&)>;

/// Central finite-difference gradient, (f(x+h·e_i) - f(x-h·e_i)) / 2h for each
/// coordinate. Throws EvaluationError if f returns a non-finite value.
Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& x, double h = 1e-4);

}  // namespace stylid
