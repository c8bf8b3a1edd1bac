#pragma once

// Small dense linear algebra: row-major matrices and LU with partial
// pivoting. The factorization is templated over the scalar type so a solve
// can be differentiated by running it on dual numbers; pivoting compares the
// primal (value) parts only, which keeps the pivot sequence identical to the
// undifferentiated solve.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "varlag/dual.hpp"

namespace varlag {

/// Raised when a mass matrix is singular or numerically degenerate.
struct DegeneracyError : std::runtime_error {
  double condition_estimate;
  explicit DegeneracyError(double cond)
      : std::runtime_error("degenerate mass matrix, condition estimate " +
                           std::to_string(cond)),
        condition_estimate(cond) {}
};

template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<T>& data() const { return a_; }
  std::vector<T>& data() { return a_; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1.0);
    return m;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> a_;
};

using Matd = Mat<double>;

inline Matd transpose(const Matd& a) {
  Matd t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double max_abs(const Matd& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

inline double norm_1(const Matd& a) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    m = std::max(m, s);
  }
  return m;
}

/// LU decomposition with partial pivoting. `singular()` reports an exactly
/// zero pivot; near-degeneracy is judged by the caller via condition_1().
template <class T>
class LuFactors {
 public:
  explicit LuFactors(Mat<T> a) : lu_(std::move(a)), piv_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    for (std::size_t i = 0; i < n; ++i) piv_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(primal(lu_(k, k)));
      for (std::size_t i = k + 1; i < n; ++i) {
        double cand = std::abs(primal(lu_(i, k)));
        if (cand > best) {
          best = cand;
          p = i;
        }
      }
      if (best == 0.0) {
        singular_ = true;
        return;
      }
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(piv_[k], piv_[p]);
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        T m = lu_(i, k) / lu_(k, k);
        lu_(i, k) = m;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) = lu_(i, j) - m * lu_(k, j);
      }
    }
  }

  bool singular() const { return singular_; }

  std::vector<T> solve(const std::vector<T>& b) const {
    const std::size_t n = lu_.rows();
    std::vector<T> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[piv_[i]];
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] = x[i] - lu_(i, j) * x[j];
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t j = ii + 1; j < n; ++j) x[ii] = x[ii] - lu_(ii, j) * x[j];
      x[ii] = x[ii] / lu_(ii, ii);
    }
    return x;
  }

 private:
  Mat<T> lu_;
  std::vector<std::size_t> piv_;
  bool singular_ = false;
};

/// 1-norm condition number via the factorization (exact inverse, fine for
/// the small dimensions used here).
inline double condition_1(const Matd& a, const LuFactors<double>& f) {
  if (f.singular()) return std::numeric_limits<double>::infinity();
  const std::size_t n = a.rows();
  double inv_norm = 0.0;
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    std::vector<double> col = f.solve(e);
    e[j] = 0.0;
    double s = 0.0;
    for (double v : col) s += std::abs(v);
    inv_norm = std::max(inv_norm, s);
  }
  return norm_1(a) * inv_norm;
}

inline constexpr double kDegeneracyThreshold = 1e12;

/// Solve a x = b, raising DegeneracyError when the condition estimate
/// exceeds kDegeneracyThreshold.
inline std::vector<double> solve_checked(const Matd& a, const std::vector<double>& b) {
  LuFactors<double> f(a);
  double cond = condition_1(a, f);
  if (f.singular() || cond > kDegeneracyThreshold) throw DegeneracyError(cond);
  return f.solve(b);
}

}  // namespace varlag
