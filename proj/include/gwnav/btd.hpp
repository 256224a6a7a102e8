#pragma once

// Block-tridiagonal linear algebra on 6x6 blocks: the implicit rod step
// produces one such system per time step; contact resolution reuses its
// factorization for many right-hand sides.

#include <vector>

#include "gwnav/common.hpp"
#include "gwnav/geom.hpp"

namespace gwnav {

/// Square block-tridiagonal matrix with n diagonal blocks.
/// lower[i] is block (i+1, i), upper[i] is block (i, i+1); both have n-1
/// entries. Dimension of the represented matrix is 6n x 6n.
struct BtdMatrix {
  std::vector<Mat6> diag;
  std::vector<Mat6> lower;
  std::vector<Mat6> upper;

  int blocks() const { return static_cast<int>(diag.size()); }
  int dim() const { return 6 * blocks(); }

  static BtdMatrix zero(int n) {
    require(n >= 1, ErrorKind::config, "block count must be >= 1");
    BtdMatrix m;
    m.diag.assign(n, Mat6::Zero());
    m.lower.assign(n - 1, Mat6::Zero());
    m.upper.assign(n - 1, Mat6::Zero());
    return m;
  }

  void check_shape() const {
    require(!diag.empty(), ErrorKind::config, "empty block-tridiagonal matrix");
    require(lower.size() == diag.size() - 1 && upper.size() == diag.size() - 1,
            ErrorKind::config, "off-diagonal block count must be n-1");
  }

  VecX multiply(const VecX& x) const {
    const int n = blocks();
    require(x.size() == dim(), ErrorKind::config, "dimension mismatch");
    VecX y(dim());
    for (int i = 0; i < n; ++i) {
      Vec6 acc = diag[i] * x.segment<6>(6 * i);
      if (i > 0) acc += lower[i - 1] * x.segment<6>(6 * (i - 1));
      if (i + 1 < n) acc += upper[i] * x.segment<6>(6 * (i + 1));
      y.segment<6>(6 * i) = acc;
    }
    return y;
  }
};

/// Block-Thomas LU factorization. One O(n) elimination sweep; solves reuse
/// the stored pivot factorizations, so the per-solve cost is O(n) as well.
class BtdFactorization {
public:
  explicit BtdFactorization(const BtdMatrix& m) : matrix_(m) { factor(); }

  int blocks() const { return matrix_.blocks(); }
  const BtdMatrix& matrix() const { return matrix_; }

  /// Solve A x = rhs. Residual is checked and, when needed, polished with
  /// one step of iterative refinement; failure to reach the bound is a
  /// numerical error.
  VecX solve(const VecX& rhs) const {
    require(rhs.size() == matrix_.dim(), ErrorKind::config,
            "dimension mismatch");
    VecX x = substitute(rhs);
    const double scale = rhs.norm();
    if (scale == 0.0) return VecX::Zero(rhs.size());
    double resid = (matrix_.multiply(x) - rhs).norm();
    if (resid > 0.5e-8 * scale) {
      x += substitute(rhs - matrix_.multiply(x));
      resid = (matrix_.multiply(x) - rhs).norm();
      require(resid <= 1e-8 * scale, ErrorKind::numerical,
              "block-tridiagonal solve lost accuracy (residual " +
                  fmt_csv(resid / scale) + " relative)");
    }
    return x;
  }

private:
  void factor() {
    matrix_.check_shape();
    const int n = matrix_.blocks();
    pivot_lu_.reserve(n);
    gain_.assign(n > 1 ? n - 1 : 0, Mat6::Zero());
    Mat6 schur = matrix_.diag[0];
    for (int i = 0;; ++i) {
      pivot_lu_.emplace_back(schur);
      check_pivot(i);
      if (i + 1 == n) break;
      // gain_[i] = lower[i] * schur^-1, the elimination multiplier
      gain_[i] = matrix_.lower[i] * pivot_lu_.back().inverse();
      schur = matrix_.diag[i + 1] - gain_[i] * matrix_.upper[i];
    }
  }

  void check_pivot(int i) {
    const auto& lu = pivot_lu_.back().matrixLU();
    double dmax = lu.diagonal().cwiseAbs().maxCoeff();
    double dmin = lu.diagonal().cwiseAbs().minCoeff();
    require(dmax > 0.0 && dmin > 1e-14 * dmax, ErrorKind::numerical,
            "singular pivot block at index " + std::to_string(i));
  }

  // forward/back substitution without residual checking
  VecX substitute(const VecX& rhs) const {
    const int n = matrix_.blocks();
    VecX y(rhs.size());
    y.segment<6>(0) = rhs.segment<6>(0);
    for (int i = 1; i < n; ++i)
      y.segment<6>(6 * i) =
          rhs.segment<6>(6 * i) - gain_[i - 1] * y.segment<6>(6 * (i - 1));
    VecX x(rhs.size());
    x.segment<6>(6 * (n - 1)) =
        pivot_lu_[n - 1].solve(y.segment<6>(6 * (n - 1)));
    for (int i = n - 2; i >= 0; --i)
      x.segment<6>(6 * i) = pivot_lu_[i].solve(
          Vec6(y.segment<6>(6 * i) - matrix_.upper[i] * x.segment<6>(6 * (i + 1))));
    return x;
  }

  BtdMatrix matrix_;
  std::vector<Eigen::PartialPivLU<Mat6>> pivot_lu_;
  std::vector<Mat6> gain_;
};

inline VecX btd_solve(const BtdMatrix& m, const VecX& rhs) {
  return BtdFactorization(m).solve(rhs);
}

} // namespace gwnav
