#pragma once

#include <optional>

#include "sta/ensembles.hpp"
#include "sta/linalg.hpp"
#include "sta/lp.hpp"
#include "sta/tensor.hpp"

namespace sta {

// Point cloud with a hidden d-dimensional subspace and ground truth labels.
struct RecoveryInstance {
  int n = 0, d = 0, m = 0;
  std::vector<VectorXd> points;
  std::vector<char> labels;  // 1 = inlier
  Subspace T;
  double rho = 0.0;
  double eps0 = 0.0;
};

struct RecoveryParams {
  int ell = 2;
  double delta = 0.3;
  double rho = 0.1;  // perturbation scale, used by the default threshold
  double tau = 0.0;  // 0 -> default rho^ell / (10 n^ell)
  int b = 0;         // 0 -> floor((1 - delta/3) * sym_dim(n, ell))

  int batch_size(int n) const {
    if (b > 0) return b;
    return static_cast<int>((1.0 - delta / 3.0) * static_cast<double>(sym_dim(n, ell)));
  }
  double threshold(int n) const {
    if (tau > 0.0) return tau;
    return std::pow(rho, ell) / (10.0 * std::pow(static_cast<double>(n), ell));
  }
};

struct RecoveryError : std::runtime_error {
  int selected;
  RecoveryError(const std::string& what, int selected_) : std::runtime_error(what), selected(selected_) {}
};

// Builds an instance per the input model: inliers drawn in T and perturbed
// inside T by N(0, rho^2/d), outliers in R^n perturbed by N(0, rho^2/n),
// base lengths in [1/2, 1]. The default adversary spends eps0 on noise
// orthogonal to T, split evenly across the inliers.
inline RecoveryInstance generate_instance(int n, int d, int m, double alpha, double rho,
                                          double eps0, std::uint64_t seed) {
  if (d >= n || alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("generate_instance: need d < n and 0 < alpha <= 1");
  Rng rng(seed);
  RecoveryInstance inst;
  inst.n = n;
  inst.d = d;
  inst.m = m;
  inst.rho = rho;
  inst.eps0 = eps0;

  MatrixXd basis_raw(n, d);
  for (Eigen::Index i = 0; i < basis_raw.size(); ++i) basis_raw(i) = rng.gaussian();
  inst.T = Subspace::span_of(basis_raw);

  const int inliers = static_cast<int>(std::ceil(alpha * m));
  inst.points.resize(m);
  inst.labels.assign(m, 0);
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  for (int i = m - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

  std::vector<int> inlier_idx;
  for (int slot = 0; slot < m; ++slot) {
    const int i = order[slot];
    const double len = 0.5 + 0.5 * rng.uniform();
    if (slot < inliers) {
      VectorXd coords = gaussian_vector(rng, d, 1.0);
      coords *= len / coords.norm();
      VectorXd pert = gaussian_vector(rng, d, rho / std::sqrt(static_cast<double>(d)));
      inst.points[i] = inst.T.basis * (coords + pert);
      inst.labels[i] = 1;
      inlier_idx.push_back(i);
    } else {
      VectorXd v = gaussian_vector(rng, n, 1.0);
      v *= len / v.norm();
      inst.points[i] = v + gaussian_vector(rng, n, rho / std::sqrt(static_cast<double>(n)));
    }
  }

  if (eps0 > 0.0 && !inlier_idx.empty()) {
    const double per_point = eps0 / std::sqrt(static_cast<double>(inlier_idx.size()));
    for (int i : inlier_idx) {
      VectorXd g = gaussian_vector(rng, n, 1.0);
      VectorXd ortho = g - inst.T.basis * (inst.T.basis.transpose() * g);
      if (ortho.norm() > 1e-12) inst.points[i] += per_point * ortho / ortho.norm();
    }
  }
  return inst;
}

// Optimal 1-bounded ell_1 representation of u by the other columns.
inline L1FitResult bounded_combo_residual(const VectorXd& u, const MatrixXd& others) {
  return bounded_l1_fit(u, others);
}

// Batch index windows. If b | m: the m/b disjoint blocks. Otherwise the
// cyclic windows of length m' (largest multiple of b below m) starting at
// each offset, each split into b-blocks; every point appears in some block.
inline std::vector<std::vector<int>> batch_plan(int m, int b) {
  if (b > m) throw std::invalid_argument("batch_plan: b > m");
  std::vector<std::vector<int>> blocks;
  if (m % b == 0) {
    for (int start = 0; start < m; start += b) {
      std::vector<int> blk(b);
      for (int i = 0; i < b; ++i) blk[i] = start + i;
      blocks.push_back(std::move(blk));
    }
    return blocks;
  }
  const int mprime = (m / b) * b;
  for (int j = 0; j < m; ++j) {
    for (int start = 0; start < mprime; start += b) {
      std::vector<int> blk(b);
      for (int i = 0; i < b; ++i) blk[i] = (j + start + i) % m;
      blocks.push_back(std::move(blk));
    }
  }
  return blocks;
}

struct RecoveryResult {
  Subspace T_hat;
  std::vector<int> selected;  // the collected index set C (truncated at 2d)
};

// Batched detection of inliers by 1-bounded ell_1 combinations of lifted
// points, then top-d SVD of the selected original points.
inline RecoveryResult recover(const std::vector<VectorXd>& points, const RecoveryParams& params,
                              int d) {
  const int m = static_cast<int>(points.size());
  const int n = m > 0 ? static_cast<int>(points[0].size()) : 0;
  const int b = params.batch_size(n);
  if (m < b) throw std::invalid_argument("recover: m >= batch size required");
  const double tau = params.threshold(n);

  std::vector<VectorXd> lifted(m);
  for (int i = 0; i < m; ++i) lifted[i] = outer_power(points[i], params.ell);
  const Eigen::Index lift_dim = lifted[0].size();

  std::vector<char> chosen(m, 0);
  std::vector<int> C;
  const auto blocks = batch_plan(m, b);
  for (const auto& blk : blocks) {
    if (static_cast<int>(C.size()) >= 2 * d) break;
    MatrixXd others(lift_dim, b - 1);
    for (size_t pos = 0; pos < blk.size(); ++pos) {
      const int u = blk[pos];
      if (chosen[u]) continue;
      Eigen::Index c = 0;
      for (size_t q = 0; q < blk.size(); ++q)
        if (q != pos) others.col(c++) = lifted[blk[q]];
      const auto fit = bounded_combo_residual(lifted[u], others);
      if (fit.residual <= tau / 2.0) {
        chosen[u] = 1;
        C.push_back(u);
      }
    }
  }
  std::sort(C.begin(), C.end());
  if (static_cast<int>(C.size()) < 2 * d)
    throw RecoveryError("insufficient inliers detected", static_cast<int>(C.size()));
  C.resize(2 * d);

  MatrixXd selected(n, 2 * d);
  for (int i = 0; i < 2 * d; ++i) selected.col(i) = points[C[i]];
  Eigen::JacobiSVD<MatrixXd> svd(selected, Eigen::ComputeThinU);
  RecoveryResult out;
  out.T_hat = Subspace(svd.matrixU().leftCols(d));
  out.selected = std::move(C);
  return out;
}

inline double evaluate(const Subspace& T, const Subspace& T_hat) { return sin_theta(T, T_hat); }

}  // namespace sta
