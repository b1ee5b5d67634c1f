#ifndef TRANSSENT_NN_MATRIX_HPP
#define TRANSSENT_NN_MATRIX_HPP

#include <cstddef>
#include <vector>

#include "transsent/nn/rng.hpp"

namespace transsent::nn {

// Dense row-major matrix of doubles. Vectors are 1xN matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return a_.size(); }
  bool empty() const { return a_.empty(); }

  double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  double* row(int i) { return a_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const { return a_.data() + static_cast<std::size_t>(i) * cols_; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(double v) { std::fill(a_.begin(), a_.end(), v); }

  void add_(const Matrix& o);
  void scale_(double c);

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols, 0.0); }
  static Matrix randn(int rows, int cols, double stddev, Rng& rng);
  // uniform in [-bound, bound]
  static Matrix rand_uniform(int rows, int cols, double bound, Rng& rng);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C += A * B
void mm_acc(Matrix& c, const Matrix& a, const Matrix& b);
// C += A * B^T
void mm_acc_nt(Matrix& c, const Matrix& a, const Matrix& b);
// C += A^T * B
void mm_acc_tn(Matrix& c, const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

bool allclose(const Matrix& a, const Matrix& b, double atol);

}  // namespace transsent::nn

#endif  // TRANSSENT_NN_MATRIX_HPP
