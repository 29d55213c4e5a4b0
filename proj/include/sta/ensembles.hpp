#pragma once

#include <string>

#include "sta/linalg.hpp"
#include "sta/monomial.hpp"
#include "sta/rng.hpp"
#include "sta/tensor.hpp"

namespace sta {

// rho-perturbation: independent N(0, rho^2/n) noise per coordinate.
struct PerturbationModel {
  double rho = 0.1;
  int n = 0;
  std::uint64_t seed = 0;
};

struct TrialReport {
  std::int64_t trial_id = 0;
  std::uint64_t seed = 0;
  std::string descriptor;      // instance parameters, free-form "k=v" list
  double sigma_observed = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline VectorXd gaussian_vector(Rng& rng, int n, double stddev) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = stddev * rng.gaussian();
  return v;
}

// a_i + g_i with fresh noise per vector from the seeded stream.
inline std::vector<VectorXd> perturb(const std::vector<VectorXd>& base,
                                     const PerturbationModel& model) {
  Rng rng(model.seed);
  const double stddev = model.rho / std::sqrt(static_cast<double>(model.n));
  std::vector<VectorXd> out;
  out.reserve(base.size());
  for (const auto& a : base) out.push_back(a + gaussian_vector(rng, model.n, stddev));
  return out;
}

// sigma_k of the column-polynomial matrix M_f on perturbed vectors, against
// threshold (c/sqrt(k)) (rho/n)^ell sigma_{k+delta*D}(U).
inline TrialReport trial_column_poly(const CoefficientMatrix& U, const std::vector<VectorXd>& base,
                                     const PerturbationModel& model, double c = 1e-3,
                                     double delta = 0.1) {
  const int k = static_cast<int>(base.size());
  const std::int64_t D = sym_dim(U.n, U.ell);
  if (k > D) throw std::invalid_argument("trial_column_poly: k exceeds sym_dim");
  const auto pts = perturb(base, model);
  const MatrixXd M = eval_poly_matrix(U, pts);
  TrialReport rep;
  rep.seed = model.seed;
  rep.sigma_observed = sigma_k(M, k);
  const int ref = std::min<int>(static_cast<int>(k + delta * D), std::min(U.rows(), (int)D));
  rep.threshold = (c / std::sqrt(static_cast<double>(k))) *
                  std::pow(model.rho / model.n, U.ell) * sigma_k(U.entries, ref);
  rep.pass = rep.sigma_observed >= rep.threshold;
  rep.descriptor = "kind=column_poly n=" + std::to_string(U.n) + " ell=" + std::to_string(U.ell) +
                   " k=" + std::to_string(k);
  return rep;
}

// Whether the Delta-condition sum_s Delta_s (n/ell)^{ell-s} <= c (n/ell)^ell
// held is recorded in the descriptor, not enforced.
inline TrialReport trial_monomial(const MonomialSpec& spec, const std::vector<VectorXd>& base,
                                  const PerturbationModel& model, double c_threshold = 1e-3,
                                  double c_condition = 0.5) {
  const auto pts = perturb(base, model);
  const MatrixXd M = monomial_matrix(pts, spec);
  const int R = static_cast<int>(spec.columns.size());
  TrialReport rep;
  rep.seed = model.seed;
  rep.sigma_observed = sigma_k(M, R);
  rep.threshold =
      c_threshold * std::pow(model.rho / model.n, spec.ell) / std::sqrt(static_cast<double>(R));
  rep.pass = rep.sigma_observed >= rep.threshold;

  const auto delta = delta_profile(spec);
  const double ratio = static_cast<double>(model.n) / spec.ell;
  double lhs = 0.0;
  for (int s = 1; s <= spec.ell; ++s) lhs += delta[s - 1] * std::pow(ratio, spec.ell - s);
  const bool cond = lhs <= c_condition * std::pow(ratio, spec.ell);
  rep.descriptor = "kind=monomial R=" + std::to_string(R) +
                   " delta_condition=" + (cond ? "1" : "0");
  for (size_t s = 0; s < delta.size(); ++s)
    rep.descriptor += " delta" + std::to_string(s + 1) + "=" + std::to_string(delta[s]);
  return rep;
}

// ||Pi_{S-perp} x~^{x ell}||_2 against c rho^ell / n^ell. S is a subspace of
// flattened order-ell tensors over R^n.
inline TrialReport trial_sym_projection(const VectorXd& x, const Subspace& S, int ell,
                                        const PerturbationModel& model, double c = 1e-2) {
  Rng rng(model.seed);
  const double stddev = model.rho / std::sqrt(static_cast<double>(model.n));
  const VectorXd xt = x + gaussian_vector(rng, model.n, stddev);
  const VectorXd lifted = outer_power(xt, ell);
  TrialReport rep;
  rep.seed = model.seed;
  rep.sigma_observed = proj_orth(lifted, S);
  rep.threshold = c * std::pow(model.rho / model.n, ell);
  rep.pass = rep.sigma_observed >= rep.threshold;
  rep.descriptor = "kind=sym_projection n=" + std::to_string(model.n) +
                   " ell=" + std::to_string(ell) + " dimS=" + std::to_string(S.dim());
  return rep;
}

// Monte-Carlo small-ball curve: for each epsilon in the grid, the empirical
// Pr[ ||g(u+z)||_2 < eps * eta * rho^ell / n^ell ].
struct SmallBallPoint {
  double eps = 0.0;
  double probability = 0.0;
  std::int64_t trials = 0;
};

inline std::vector<SmallBallPoint> small_ball_curve(const CoefficientMatrix& g, const VectorXd& u,
                                                    const PerturbationModel& model,
                                                    const std::vector<double>& eps_grid,
                                                    std::int64_t samples, double eta = 1.0) {
  for (size_t i = 1; i < eps_grid.size(); ++i)
    if (eps_grid[i] <= eps_grid[i - 1] || eps_grid[0] <= 0.0)
      throw std::invalid_argument("small_ball_curve: eps_grid must be positive ascending");
  Rng rng(model.seed);
  const double stddev = model.rho / std::sqrt(static_cast<double>(model.n));
  const double scale = eta * std::pow(model.rho / model.n, g.ell);
  std::vector<std::int64_t> hits(eps_grid.size(), 0);
  for (std::int64_t t = 0; t < samples; ++t) {
    const VectorXd z = u + gaussian_vector(rng, model.n, stddev);
    const double norm = (g.entries * monomial_vector(z, g.ell)).norm();
    for (size_t i = 0; i < eps_grid.size(); ++i)
      if (norm < eps_grid[i] * scale) ++hits[i];
  }
  std::vector<SmallBallPoint> out;
  for (size_t i = 0; i < eps_grid.size(); ++i)
    out.push_back({eps_grid[i], static_cast<double>(hits[i]) / samples, samples});
  return out;
}

// Rows indexed by (I in [n]^{ell-1}, j in [r]): the symmetrization of the
// 1-sparse basis tensor E_I x e_j, stored as coefficient rows over sorted
// multi-indices (so eval matches <sym(B_row), x^{x ell}>).
inline CoefficientMatrix counterexample_matrix(int n, int ell, int r) {
  if (r > n) throw std::invalid_argument("counterexample_matrix: r <= n required");
  CoefficientMatrix out;
  out.n = n;
  out.ell = ell;
  const std::int64_t rows = int_pow(n, ell - 1) * r;
  const auto idxs = sorted_multi_indices(n, ell);
  out.entries = MatrixXd::Zero(rows, static_cast<Eigen::Index>(idxs.size()));
  std::int64_t row = 0;
  MultiIndex tuple(ell);
  for (std::int64_t flatI = 0; flatI < int_pow(n, ell - 1); ++flatI) {
    std::int64_t rem = flatI;
    for (int i = ell - 2; i >= 0; --i) {
      tuple[i] = static_cast<int>(rem % n);
      rem /= n;
    }
    for (int j = 0; j < r; ++j, ++row) {
      tuple[ell - 1] = j;
      MultiIndex sorted = tuple;
      std::sort(sorted.begin(), sorted.end());
      // The symmetrization of e_tuple has value 1/mult(J) at each of the
      // mult(J) distinct permutations of J, so as a polynomial it is exactly
      // the monomial x_J: coefficient 1 in the unweighted convention.
      out.entries(row, sorted_index_rank(sorted, n)) = 1.0;
    }
  }
  return out;
}

// Expand coefficient rows back to dense symmetric tensors (n^ell columns);
// used for singular-value statements about the tensor representation.
inline MatrixXd dense_rows(const CoefficientMatrix& U) {
  const auto idxs = sorted_multi_indices(U.n, U.ell);
  MatrixXd out(U.entries.rows(), int_pow(U.n, U.ell));
  for (Eigen::Index row = 0; row < U.entries.rows(); ++row) {
    VectorXd coeffs(static_cast<Eigen::Index>(idxs.size()));
    for (size_t t = 0; t < idxs.size(); ++t)
      coeffs[static_cast<Eigen::Index>(t)] =
          U.entries(row, static_cast<Eigen::Index>(t)) /
          static_cast<double>(multiindex_multiplicity(idxs[t]));
    out.row(row) = SymTensor(U.n, U.ell, coeffs).expand().data.transpose();
  }
  return out;
}

// Enumerates the 2^{r-1} signed combinations x + z_1 +- z_2 ... +- z_r at
// ell = 2 and counts how many have ||Pi_{S-perp} (.)^{x 2}|| below threshold.
struct SignedComboReport {
  int low_patterns = 0;
  int patterns = 0;
  double threshold = 0.0;
};

inline SignedComboReport signed_combination_demo(const VectorXd& x, const Subspace& S,
                                                 const PerturbationModel& model, int r,
                                                 double threshold) {
  if (r < 1 || r > 12) throw std::invalid_argument("signed_combination_demo: r in [1, 12]");
  Rng rng(model.seed);
  const double stddev = model.rho / std::sqrt(static_cast<double>(r) * model.n);
  std::vector<VectorXd> z;
  for (int i = 0; i < r; ++i) z.push_back(gaussian_vector(rng, model.n, stddev));
  SignedComboReport rep;
  rep.patterns = 1 << (r - 1);
  rep.threshold = threshold;
  for (int mask = 0; mask < rep.patterns; ++mask) {
    VectorXd y = x + z[0];
    for (int i = 1; i < r; ++i) y += (((mask >> (i - 1)) & 1) ? 1.0 : -1.0) * z[i];
    if (proj_orth(outer_power(y, 2), S) < threshold) ++rep.low_patterns;
  }
  return rep;
}

}  // namespace sta
