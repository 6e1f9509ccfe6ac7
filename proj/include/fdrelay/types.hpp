#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fdrelay {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

/// Invalid parameters or inconsistent dimensions.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed data handed to a pure transform (wrong lengths etc).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric that has no defined value for the given arguments.
class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive filter state left the finite/bounded region.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Dense row-major complex matrix. Small sizes only (a few dozen entries).
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols, cplx fill = {})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> data() noexcept { return data_; }
  std::span<const cplx> data() const noexcept { return data_; }
  std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  CMatrix adjoint() const {
    CMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  double frobenius_norm_sq() const {
    double acc = 0.0;
    for (const auto& v : data_) acc += std::norm(v);
    return acc;
  }

  CMatrix& operator+=(const CMatrix& other) {
    check_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  CMatrix& operator-=(const CMatrix& other) {
    check_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  CMatrix& operator*=(cplx s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }
  friend CMatrix operator-(CMatrix a) { return a *= -1.0; }

  friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols_ != b.rows_) throw ConfigError("matrix product: inner dimensions differ");
    CMatrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a(i, k);
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  bool operator==(const CMatrix&) const = default;

 private:
  void check_same_shape(const CMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_)
      throw ConfigError("matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// out += m * v
inline void accumulate_product(const CMatrix& m, std::span<const cplx> v, std::span<cplx> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const cplx* row = m.data().data() + r * m.cols();
    cplx acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * v[c];
    out[r] += acc;
  }
}

inline CVector operator*(const CMatrix& m, std::span<const cplx> v) {
  if (m.cols() != v.size()) throw ConfigError("matrix-vector product: dimension mismatch");
  CVector out(m.rows());
  accumulate_product(m, v, out);
  return out;
}

inline double norm_sq(std::span<const cplx> v) {
  double acc = 0.0;
  for (const auto& x : v) acc += std::norm(x);
  return acc;
}

/// Solves a x = b for each column of b by Gaussian elimination with partial
/// pivoting. Throws RankDeficiencyError when a pivot falls below
/// `relative_tolerance` times the largest absolute entry of a.
inline CMatrix solve(CMatrix a, CMatrix b, double relative_tolerance = 1e-12) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw ConfigError("solve: shape mismatch");
  double scale = 0.0;
  for (const auto& v : a.data()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw RankDeficiencyError("solve: zero matrix");

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (std::abs(a(pivot, col)) <= relative_tolerance * scale)
      throw RankDeficiencyError("solve: matrix is singular to working precision");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
      for (std::size_t c = 0; c < b.cols(); ++c) std::swap(b(col, c), b(pivot, c));
    }
    const cplx inv = 1.0 / a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const cplx factor = a(r, col) * inv;
      if (factor == cplx{}) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= factor * a(col, c);
      for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) -= factor * b(col, c);
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t c = 0; c < b.cols(); ++c) {
      cplx acc = b(i, c);
      for (std::size_t k = i + 1; k < n; ++k) acc -= a(i, k) * b(k, c);
      b(i, c) = acc / a(i, i);
    }
  }
  return b;
}

}  // namespace fdrelay
