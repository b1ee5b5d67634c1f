#include "transsent/nn/matrix.hpp"

#include <cassert>
#include <cmath>

namespace transsent::nn {

void Matrix::add_(const Matrix& o) {
  assert(same_shape(o));
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
}

void Matrix::scale_(double c) {
  for (double& v : a_) v *= c;
}

Matrix Matrix::randn(int rows, int cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

Matrix Matrix::rand_uniform(int rows, int cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = bound * (2.0 * rng.uniform() - 1.0);
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  mm_acc(c, a, b);
  return c;
}

void mm_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b.row(p);
      for (int j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
}

void mm_acc_nt(Matrix& c, const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows());
  const int n = a.rows(), k = a.cols(), m = b.rows();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < m; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

void mm_acc_tn(Matrix& c, const Matrix& a, const Matrix& b) {
  assert(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int p = 0; p < n; ++p) {
    const double* arow = a.row(p);
    const double* brow = b.row(p);
    for (int i = 0; i < k; ++i) {
      const double api = arow[i];
      if (api == 0.0) continue;
      double* crow = c.row(i);
      for (int j = 0; j < m; ++j) crow[j] += api * brow[j];
    }
  }
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

bool allclose(const Matrix& a, const Matrix& b, double atol) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::fabs(a.data()[i] - b.data()[i]) > atol) return false;
  return true;
}

}  // namespace transsent::nn
