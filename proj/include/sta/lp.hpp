#pragma once

#include <Eigen/Dense>

#include "sta/rng.hpp"
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sta {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct L1FitResult {
  double residual = 0.0;  // optimal ell_1 error
  VectorXd alpha;         // witness coefficients, |alpha_i| <= 1
};

// Solves  min ||u - V alpha||_1  subject to  |alpha_i| <= 1
// as a linear program in standard form via a dense revised simplex.
//
// Variables: alpha = ap - am with ap + am + s = 1 (componentwise),
// residual r = rp - rm with V ap - V am + rp - rm = u. All variables >= 0,
// objective 1'rp + 1'rm. The initial basis {rp or rm per residual row,
// s per bound row} is feasible, so no phase-1 is needed.
//
// Throws std::runtime_error if the solver stalls (numerically infeasible
// instance).
namespace detail {

inline L1FitResult bounded_l1_fit_once(const VectorXd& u, const MatrixXd& V) {
  const int p = static_cast<int>(u.size());
  const int k = static_cast<int>(V.cols());
  const int m = p + k;           // constraint rows
  const int nvars = 3 * k + 2 * p;  // ap, am, rp, rm, s

  // variable index layout
  const auto ap = [&](int j) { return j; };
  const auto am = [&](int j) { return k + j; };
  const auto rp = [&](int j) { return 2 * k + j; };
  const auto rm = [&](int j) { return 2 * k + p + j; };
  const auto sv = [&](int j) { return 2 * k + 2 * p + j; };

  VectorXd b(m);
  b.head(p) = u;
  b.tail(k).setOnes();

  // dense constraint column for a variable
  const auto column_of = [&](int var) {
    VectorXd col = VectorXd::Zero(m);
    if (var < k) {
      col.head(p) = V.col(var);
      col[p + var] = 1.0;
    } else if (var < 2 * k) {
      col.head(p) = -V.col(var - k);
      col[p + (var - k)] = 1.0;
    } else if (var < 2 * k + p) {
      col[var - 2 * k] = 1.0;
    } else if (var < 2 * k + 2 * p) {
      col[var - 2 * k - p] = -1.0;
    } else {
      col[p + (var - 2 * k - 2 * p)] = 1.0;
    }
    return col;
  };
  const auto cost_of = [&](int var) {
    return (var >= 2 * k && var < 2 * k + 2 * p) ? 1.0 : 0.0;
  };

  std::vector<int> basis(m);
  std::vector<char> in_basis(nvars, 0);
  MatrixXd Binv = MatrixXd::Identity(m, m);
  for (int j = 0; j < p; ++j) {
    basis[j] = (u[j] >= 0.0) ? rp(j) : rm(j);
    if (u[j] < 0.0) Binv(j, j) = -1.0;
    in_basis[basis[j]] = 1;
  }
  for (int j = 0; j < k; ++j) {
    basis[p + j] = sv(j);
    in_basis[sv(j)] = 1;
  }
  VectorXd xB = Binv * b;

  const double rc_tol = 1e-10;
  const double pivot_tol = 1e-9;
  const int max_iters = 200 * (m + nvars);
  int stall = 0;

  // rebuild Binv from the basis columns; product-form updates drift
  const auto refactorize = [&]() {
    MatrixXd B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = column_of(basis[i]);
    Binv = B.partialPivLu().inverse();
    if (!Binv.allFinite())
      throw std::runtime_error("bounded_l1_fit: singular basis (numerically infeasible)");
    xB = Binv * b;
  };

  // entering columns with no numerically usable pivot are skipped until the
  // next non-degenerate pivot; the vertex is kept feasible throughout
  std::vector<char> banned(nvars, 0);
  bool retried = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    if (iter > 0 && iter % 100 == 0 && !retried) refactorize();
    // y = Binv' c_B
    VectorXd cB(m);
    for (int i = 0; i < m; ++i) cB[i] = cost_of(basis[i]);
    VectorXd y = Binv.transpose() * cB;
    VectorXd Vty = V.transpose() * y.head(p);

    // reduced costs by variable block
    int enter = -1;
    double best = -rc_tol;
    const bool bland = stall > 32;
    const auto consider = [&](int var, double d) {
      if (in_basis[var] || banned[var] || !std::isfinite(d)) return;
      if (d >= (bland ? -rc_tol : best)) return;
      if (bland) {
        if (enter == -1 || var < enter) enter = var;
      } else {
        best = d;
        enter = var;
      }
    };
    for (int j = 0; j < k; ++j) {
      consider(ap(j), -Vty[j] - y[p + j]);
      consider(am(j), Vty[j] - y[p + j]);
      consider(sv(j), -y[p + j]);
    }
    for (int j = 0; j < p; ++j) {
      consider(rp(j), 1.0 - y[j]);
      consider(rm(j), 1.0 + y[j]);
    }
    if (enter < 0) break;  // optimal among usable columns

    VectorXd w = Binv * column_of(enter);
    if (!w.allFinite()) {
      if (!retried) {
        refactorize();
        retried = true;
        continue;
      }
      banned[enter] = 1;
      continue;
    }
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (w[i] > pivot_tol) {
        const double ratio = xB[i] / w[i];
        if (ratio < best_ratio) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave >= 0) {
      // among rows whose ratio ties the minimum, prefer the largest pivot
      // entry for stability (smallest basis index under Bland's rule)
      const double ratio_tol = 1e-9 * (1.0 + std::abs(best_ratio));
      for (int i = 0; i < m; ++i) {
        if (i == leave || w[i] <= pivot_tol) continue;
        if (xB[i] / w[i] > best_ratio + ratio_tol) continue;
        if (bland ? (basis[i] < basis[leave]) : (w[i] > w[leave])) leave = i;
      }
    }
    if (leave < 0) {
      // the entering column has no usable pivot entry; a refactorization can
      // recover it, otherwise the column is numerically parallel to the basis
      if (!retried) {
        refactorize();
        retried = true;
        continue;
      }
      banned[enter] = 1;
      continue;
    }
    retried = false;
    if (best_ratio < 1e-12) {
      ++stall;
    } else {
      stall = 0;
      std::fill(banned.begin(), banned.end(), 0);
    }

    // pivot: basis change + product-form update of Binv
    in_basis[basis[leave]] = 0;
    in_basis[enter] = 1;
    basis[leave] = enter;
    const double piv = w[leave];
    Binv.row(leave) /= piv;
    for (int i = 0; i < m; ++i)
      if (i != leave && std::abs(w[i]) > 0.0) Binv.row(i) -= w[i] * Binv.row(leave);
    if (!Binv.allFinite()) refactorize();
    xB = Binv * b;
    for (int i = 0; i < m; ++i)
      if (xB[i] < 0.0 && xB[i] > -1e-9) xB[i] = 0.0;
    if (iter + 1 == max_iters)
      throw std::runtime_error("bounded_l1_fit: iteration limit (numerically infeasible)");
  }

  L1FitResult out;
  out.alpha = VectorXd::Zero(k);
  double obj = 0.0;
  for (int i = 0; i < m; ++i) {
    const int var = basis[i];
    const double val = xB[i];
    if (var < k)
      out.alpha[var] += val;
    else if (var < 2 * k)
      out.alpha[var - k] -= val;
    else if (var < 2 * k + 2 * p)
      obj += val;
  }
  out.residual = obj;
  return out;
}

}  // namespace detail

inline L1FitResult bounded_l1_fit(const VectorXd& u, const MatrixXd& V) {
  if (V.cols() < 1) throw std::invalid_argument("bounded_l1_fit: others nonempty required");
  if (V.rows() != u.size()) throw std::invalid_argument("bounded_l1_fit: dimension mismatch");
  // Degenerate right-hand sides can stall the simplex on a singular basis;
  // a tiny deterministic perturbation of u breaks the degeneracy. The
  // returned residual is always evaluated against the exact u.
  const double scale = 1.0 + u.cwiseAbs().maxCoeff();
  for (int attempt = 0; attempt < 4; ++attempt) {
    VectorXd u_eff = u;
    if (attempt > 0) {
      Rng rng(Rng::derive(0x1f5u, static_cast<std::uint64_t>(attempt)));
      const double eps = scale * std::pow(10.0, -11 + attempt);
      for (Eigen::Index i = 0; i < u_eff.size(); ++i) u_eff[i] += eps * (rng.uniform() - 0.5);
    }
    try {
      L1FitResult out = detail::bounded_l1_fit_once(u_eff, V);
      out.alpha = out.alpha.cwiseMax(-1.0).cwiseMin(1.0);
      out.residual = (u - V * out.alpha).lpNorm<1>();
      return out;
    } catch (const std::runtime_error&) {
      if (attempt == 3) throw;
    }
  }
  throw std::runtime_error("bounded_l1_fit: unreachable");
}

}  // namespace sta
