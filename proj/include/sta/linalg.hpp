#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace sta {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kOrthoTol = 1e-10;

// A subspace of R^ambient carried by an orthonormal basis.
struct Subspace {
  MatrixXd basis;  // ambient x dim, orthonormal columns

  Subspace() = default;
  explicit Subspace(MatrixXd b) : basis(std::move(b)) {
    if (basis.cols() > 0) {
      const MatrixXd gram = basis.transpose() * basis;
      const double err = (gram - MatrixXd::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
      if (err > 1e-8) throw std::invalid_argument("Subspace: basis not orthonormal");
    }
  }
  static Subspace span_of(const MatrixXd& cols) {
    // Orthonormalize via thin QR with rank truncation.
    Eigen::ColPivHouseholderQR<MatrixXd> qr(cols);
    qr.setThreshold(1e-12);
    const Eigen::Index rank = qr.rank();
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(cols.rows(), rank);
    return Subspace(std::move(q));
  }
  Eigen::Index ambient() const { return basis.rows(); }
  Eigen::Index dim() const { return basis.cols(); }
};

inline Eigen::VectorXd singular_values(const MatrixXd& M) {
  return Eigen::JacobiSVD<MatrixXd>(M).singularValues();
}

// k-th largest singular value.
inline double sigma_k(const MatrixXd& M, int k) {
  if (k < 1 || k > std::min(M.rows(), M.cols()))
    throw std::out_of_range("sigma_k: index out of range");
  return singular_values(M)[k - 1];
}

inline double sigma_min(const MatrixXd& M) {
  return sigma_k(M, static_cast<int>(std::min(M.rows(), M.cols())));
}

// Min over columns i of dist(M_i, span of the other columns).
inline double leave_one_out(const MatrixXd& M) {
  if (M.cols() < 2) throw std::invalid_argument("leave_one_out: need at least 2 columns");
  double best = std::numeric_limits<double>::infinity();
  MatrixXd others(M.rows(), M.cols() - 1);
  for (Eigen::Index i = 0; i < M.cols(); ++i) {
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      if (j != i) others.col(c++) = M.col(j);
    const Subspace s = Subspace::span_of(others);
    const VectorXd v = M.col(i);
    const VectorXd resid = v - s.basis * (s.basis.transpose() * v);
    best = std::min(best, resid.norm());
  }
  return best;
}

// || Pi_{S-perp} v ||_2.
inline double proj_orth(const VectorXd& v, const Subspace& S) {
  if (v.size() != S.ambient()) throw std::invalid_argument("proj_orth: dimension mismatch");
  if (S.dim() == 0) return v.norm();
  return (v - S.basis * (S.basis.transpose() * v)).norm();
}

// Frobenius norm of sin Theta between equal-dimensional subspaces, computed
// from the Gram matrix as sqrt(d - ||U^T V||_F^2) to stay stable near 0.
inline double sin_theta(const Subspace& U, const Subspace& V) {
  if (U.dim() != V.dim()) throw std::invalid_argument("sin_theta: dimension mismatch");
  if (U.ambient() != V.ambient()) throw std::invalid_argument("sin_theta: ambient mismatch");
  const double d = static_cast<double>(U.dim());
  const double g = (U.basis.transpose() * V.basis).squaredNorm();
  return std::sqrt(std::max(0.0, d - g));
}

// Frobenius-nearest PSD matrix: zero out negative eigenvalues.
inline MatrixXd psd_project(const MatrixXd& S, double sym_tol = 1e-8) {
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > sym_tol * std::max(1.0, S.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("psd_project: input not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (S + S.transpose()));
  const VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

// H = E_R Lambda_R^{1/2} from the rank-R truncated eigendecomposition of a
// PSD matrix; HH^T is the best rank-R PSD approximation. Columns ordered by
// decreasing eigenvalue, each oriented so its largest-magnitude entry is
// positive.
inline MatrixXd sqrt_factor(const MatrixXd& S, int R, double rank_tol_rel = 1e-10) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (S + S.transpose()));
  const VectorXd lam = eig.eigenvalues();  // ascending
  const Eigen::Index n = lam.size();
  const double tol = rank_tol_rel * std::max(1.0, lam.cwiseAbs().maxCoeff());
  int positive = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (lam[i] > tol) ++positive;
  if (R > positive) throw std::invalid_argument("sqrt_factor: R exceeds numerical rank");
  MatrixXd H(n, R);
  for (int c = 0; c < R; ++c) {
    const Eigen::Index src = n - 1 - c;  // descending order
    VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    H.col(c) = std::sqrt(lam[src]) * v;
  }
  return H;
}

// Moore-Penrose pseudoinverse via SVD with relative tolerance.
inline MatrixXd pinv(const MatrixXd& M, double tol_rel = 1e-12) {
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd sv = svd.singularValues();
  const double tol = tol_rel * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
  VectorXd inv = VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace sta
