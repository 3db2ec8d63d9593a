#pragma once

#include "apportion/types.hpp"

namespace apportion::geometry {

struct AffineInverse {
  Matrix R;  // (J+1)×K
  bool rank_deficient = false;
};

/// Moore-Penrose pseudoinverse via SVD, singular values below
/// max(rows, cols) * eps * sigma_max treated as zero.
inline Matrix pseudo_inverse(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = double(std::max(a.rows(), a.cols())) * std::numeric_limits<double>::epsilon() *
                        (s.size() ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// R = H_aug^T (H_aug H_aug^T)^+ with H_aug = [H* | 1_K]. For full row rank
/// H_aug, H_aug R = I_K. A RankDeficient warning is recorded when the
/// smallest singular value of H_aug is below 1e-10 times the largest.
inline AffineInverse affine_right_inverse(const Matrix& hstar, Warnings* warnings = nullptr) {
  const Index K = hstar.rows();
  const Index J = hstar.cols();
  require(K >= 1 && J >= 1, "affine_right_inverse: empty profile matrix");
  require(all_finite(hstar), "affine_right_inverse: non-finite entry");
  require((hstar.array() >= 0).all(), "affine_right_inverse: negative entry");
  for (Index k = 0; k < K; ++k)
    require(std::abs(hstar.row(k).sum() - 1.0) <= 1e-8,
            "affine_right_inverse: row " + std::to_string(k) + " does not sum to 1");

  Matrix aug(K, J + 1);
  aug.leftCols(J) = hstar;
  aug.col(J).setOnes();

  AffineInverse out;
  out.R = aug.transpose() * pseudo_inverse(aug * aug.transpose());

  Eigen::JacobiSVD<Matrix> svd(aug);
  const Vector& s = svd.singularValues();
  if (s.size() < K || s(s.size() - 1) < 1e-10 * s(0)) {
    out.rank_deficient = true;
    if (warnings)
      warnings->push_back({WarningCode::RankDeficient,
                           "affine_right_inverse: augmented profile matrix is rank deficient"});
  }
  return out;
}

}  // namespace apportion::geometry
