#pragma once

#include "sta/linalg.hpp"
#include "sta/rng.hpp"
#include "sta/tensor.hpp"

namespace sta {

// Psi(X, Y)(i_1..i_l, j_1..j_l) =
//   X_{i_1..i_l} Y_{j_1..j_l} - X_{i_1..i_{l-1} j_l} Y_{j_1..j_{l-1} i_l}.
// Vanishes at (X, Y) = (u^{x l}, u^{x l}) -- the rank-1 detector.
inline DenseTensor psi(const DenseTensor& X, const DenseTensor& Y) {
  if (X.shape != Y.shape || !X.cubic()) throw std::invalid_argument("psi: shape mismatch");
  const int n = X.shape[0];
  const int ell = X.order();
  const std::int64_t half = int_pow(n, ell);
  DenseTensor out = DenseTensor::zeros(std::vector<int>(2 * ell, n));
  for (std::int64_t I = 0; I < half; ++I) {
    const std::int64_t i_last = I % n;
    for (std::int64_t J = 0; J < half; ++J) {
      const std::int64_t j_last = J % n;
      // swap the last index of each half
      const std::int64_t Is = I - i_last + j_last;
      const std::int64_t Js = J - j_last + i_last;
      out.data[I * half + J] = X.data[I] * Y.data[J] - X.data[Is] * Y.data[Js];
    }
  }
  return out;
}

inline DenseTensor phi(const DenseTensor& X, const DenseTensor& Y) {
  DenseTensor out = psi(X, Y);
  out.data += psi(Y, X).data;
  return out;
}

inline DenseTensor as_order_ell_tensor(const VectorXd& flat, int n, int ell) {
  return DenseTensor(std::vector<int>(ell, n), flat);
}

// Columns Phi(A_i^{x l}, A_j^{x l}) for i < j, lexicographic pair order.
inline MatrixXd build_M_phi(const MatrixXd& A, int ell) {
  const int n = static_cast<int>(A.rows());
  const int R = static_cast<int>(A.cols());
  if (R < 2) throw std::invalid_argument("build_M_phi: R >= 2 required");
  std::vector<DenseTensor> powers;
  for (int i = 0; i < R; ++i) powers.push_back(as_order_ell_tensor(outer_power(A.col(i), ell), n, ell));
  MatrixXd out(int_pow(n, 2 * ell), R * (R - 1) / 2);
  Eigen::Index c = 0;
  for (int i = 0; i < R; ++i)
    for (int j = i + 1; j < R; ++j) out.col(c++) = phi(powers[i], powers[j]).data;
  return out;
}

// Columns over pairs i <= j: Phi(H_i, H_i) on the diagonal, sqrt(2) *
// Phi(H_i, H_j) off it, so that H_Phi z = sum_ij psi_map(z)_ij Phi(H_i, H_j).
inline MatrixXd build_H_phi(const MatrixXd& H, int n, int ell) {
  const int R = static_cast<int>(H.cols());
  std::vector<DenseTensor> cols;
  for (int i = 0; i < R; ++i) cols.push_back(as_order_ell_tensor(H.col(i), n, ell));
  MatrixXd out(int_pow(n, 2 * ell), R * (R + 1) / 2);
  const double root2 = std::sqrt(2.0);
  Eigen::Index c = 0;
  for (int i = 0; i < R; ++i)
    for (int j = i; j < R; ++j)
      out.col(c++) = (i == j) ? phi(cols[i], cols[i]).data : root2 * phi(cols[i], cols[j]).data;
  return out;
}

// Isometry between R(R+1)/2-vectors (pair order i <= j) and symmetric R x R
// matrices: diagonal passes through, off-diagonal entries are z_ij/sqrt(2).
inline MatrixXd psi_map(const VectorXd& z) {
  // solve R from R(R+1)/2 = len
  const Eigen::Index len = z.size();
  const int R = static_cast<int>((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0 + 0.5);
  if (R * (R + 1) / 2 != len) throw std::invalid_argument("psi_map: not a triangular length");
  MatrixXd out(R, R);
  const double inv_root2 = 1.0 / std::sqrt(2.0);
  Eigen::Index c = 0;
  for (int i = 0; i < R; ++i)
    for (int j = i; j < R; ++j, ++c) {
      if (i == j)
        out(i, i) = z[c];
      else
        out(i, j) = out(j, i) = z[c] * inv_root2;
    }
  return out;
}

inline VectorXd psi_map_inverse(const MatrixXd& W) {
  const int R = static_cast<int>(W.rows());
  VectorXd z(R * (R + 1) / 2);
  const double root2 = std::sqrt(2.0);
  Eigen::Index c = 0;
  for (int i = 0; i < R; ++i)
    for (int j = i; j < R; ++j, ++c) z[c] = (i == j) ? W(i, i) : root2 * W(i, j);
  return z;
}

struct Kappas {
  double kappa_U = 0.0;
  double kappa_M = 0.0;
  int deficient_index_U = 0;  // 0 when full rank
  int deficient_index_M = 0;
};

// Condition numbers of U = A^{(.l)} (column-wise ell-fold Kronecker power)
// and of M_Phi. Exact rank deficiency reported as infinity plus the index.
inline Kappas condition_kappas(const MatrixXd& A, int ell, double rank_tol_rel = 1e-13) {
  Kappas out;
  const int R = static_cast<int>(A.cols());
  MatrixXd U(int_pow(A.rows(), ell), R);
  for (int i = 0; i < R; ++i) U.col(i) = outer_power(A.col(i), ell);
  const auto ratio = [&](const MatrixXd& M, double& kappa, int& bad_index) {
    const VectorXd sv = singular_values(M);
    const double tol = rank_tol_rel * sv[0];
    const Eigen::Index last = std::min<Eigen::Index>(M.rows(), M.cols()) - 1;
    if (sv[last] <= tol) {
      kappa = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i <= last; ++i)
        if (sv[i] <= tol) {
          bad_index = static_cast<int>(i) + 1;
          break;
        }
    } else {
      kappa = sv[0] / sv[last];
    }
  };
  ratio(U, out.kappa_U, out.deficient_index_U);
  ratio(build_M_phi(A, ell), out.kappa_M, out.deficient_index_M);
  return out;
}

struct FoobiParams {
  int retries = 20;
  double gap_floor_scale = 1.0;  // eigengap requirement = scale / (20 R^2)
  double rank_energy_tol = 1e-6;
  std::uint64_t seed = 1;
};

struct FoobiError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Generalized FOOBI pipeline for T = sum_i A_i^{x 2l} + Err:
// matricize/symmetrize, PSD-project, rank-R square-root factor H, null space
// of H_Phi, random symmetric element eigendecomposition, rank-1 extraction.
// Output defined up to permutation and per-vector sign.
inline std::vector<VectorXd> decompose(const DenseTensor& T, int R, const FoobiParams& params) {
  if (!T.cubic() || T.order() % 2 != 0) throw std::invalid_argument("decompose: need cubic order-2l tensor");
  const int ell = T.order() / 2;
  if (ell < 2) throw std::invalid_argument("decompose: ell >= 2 required (Phi degenerates at ell = 1)");
  const int n = T.shape[0];
  const std::int64_t half = int_pow(n, ell);

  // (1) matricize and symmetrize
  MatrixXd Tmat = Eigen::Map<const MatrixXd>(T.data.data(), half, half).transpose();
  Tmat = 0.5 * (Tmat + Tmat.transpose());
  // (2) PSD projection, (3) rank-R square root
  const MatrixXd Tpsd = psd_project(Tmat, 1e-4);
  {
    const VectorXd sv = singular_values(Tpsd);
    if (R > sv.size() || sv[R - 1] <= params.rank_energy_tol * std::max(1.0, sv[0]))
      throw FoobiError("rank overestimate");
  }
  const MatrixXd H = sqrt_factor(Tpsd, R);

  // (4)-(5) null space of H_Phi
  const MatrixXd Hphi = build_H_phi(H, n, ell);
  Eigen::JacobiSVD<MatrixXd> svd(Hphi, Eigen::ComputeThinV);
  const MatrixXd nullspace = svd.matrixV().rightCols(R);

  // (6)-(7) random element of the solution space, retry on a flat spectrum
  Rng rng(params.seed);
  const double gap_floor = params.gap_floor_scale / (20.0 * R * R);
  MatrixXd G;
  bool found = false;
  for (int attempt = 0; attempt < params.retries; ++attempt) {
    VectorXd g(R);
    for (int i = 0; i < R; ++i) g[i] = rng.gaussian();
    const MatrixXd Z = psi_map(nullspace * g);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Z);
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 1; i < R; ++i)
      min_gap = std::min(min_gap, eig.eigenvalues()[i] - eig.eigenvalues()[i - 1]);
    if (min_gap >= gap_floor) {
      G = eig.eigenvectors();
      found = true;
      break;
    }
  }
  if (!found) throw FoobiError("degenerate spectrum");

  // (8)-(9) rank-1 extraction per recovered column of U = H G
  const MatrixXd U = H * G;
  std::vector<VectorXd> out;
  for (int i = 0; i < R; ++i) {
    const Eigen::Map<const MatrixXd> reshaped(U.col(i).data(), int_pow(n, ell - 1), n);
    Eigen::JacobiSVD<MatrixXd> rsvd(reshaped.transpose(), Eigen::ComputeThinU);
    const double scale = std::pow(rsvd.singularValues()[0], 1.0 / ell);
    out.push_back(scale * rsvd.matrixU().col(0));
  }
  return out;
}

struct MatchResult {
  double error = 0.0;            // min over permutations/signs of sum_i ||A_i - s_i B_pi(i)||
  std::vector<int> permutation;  // B column matched to A column i
  std::vector<int> signs;        // +1 / -1 applied to B
};

// Exact assignment over permutations and signs via bitmask DP on the cost
// matrix min(||A_i - B_j||, ||A_i + B_j||).
inline MatchResult match_components(const MatrixXd& A, const MatrixXd& B) {
  const int R = static_cast<int>(A.cols());
  if (B.cols() != R) throw std::invalid_argument("match_components: equal column counts required");
  if (R > 20) throw std::invalid_argument("match_components: R too large for exact assignment");
  MatrixXd cost(R, R);
  Eigen::MatrixXi sign(R, R);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j) {
      const double plus = (A.col(i) - B.col(j)).norm();
      const double minus = (A.col(i) + B.col(j)).norm();
      cost(i, j) = std::min(plus, minus);
      sign(i, j) = plus <= minus ? 1 : -1;
    }
  const int full = 1 << R;
  std::vector<double> dp(full, std::numeric_limits<double>::infinity());
  std::vector<int> choice(full, -1);
  dp[0] = 0.0;
  for (int mask = 0; mask < full - 1; ++mask) {
    if (!std::isfinite(dp[mask])) continue;
    const int i = __builtin_popcount(static_cast<unsigned>(mask));  // next A column to assign
    for (int j = 0; j < R; ++j) {
      if (mask & (1 << j)) continue;
      const double cand = dp[mask] + cost(i, j);
      if (cand < dp[mask | (1 << j)]) {
        dp[mask | (1 << j)] = cand;
        choice[mask | (1 << j)] = j;
      }
    }
  }
  MatchResult out;
  out.error = dp[full - 1];
  out.permutation.assign(R, -1);
  out.signs.assign(R, 1);
  int mask = full - 1;
  for (int i = R - 1; i >= 0; --i) {
    const int j = choice[mask];
    out.permutation[i] = j;
    out.signs[i] = sign(i, j);
    mask ^= 1 << j;
  }
  return out;
}

}  // namespace sta
