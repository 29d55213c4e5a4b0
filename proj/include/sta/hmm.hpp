#pragma once

#include "sta/linalg.hpp"
#include "sta/monomial.hpp"
#include "sta/rng.hpp"
#include "sta/tensor.hpp"

namespace sta {

// Hidden Markov model with continuous observations: r states, row-stochastic
// transition matrix P (P_ij = Pr[next = j | current = i], at most d nonzeros
// per row and per column), observation means O (n x r, column per state),
// stationary distribution w, spherical observation noise sigma_obs.
struct HmmModel {
  int r = 0;
  int n = 0;
  int d = 0;
  MatrixXd P;
  MatrixXd O;
  VectorXd w;
  double sigma_obs = 0.1;
};

namespace detail {
// Strong connectivity of the support digraph, |entry| > tol counts as an edge.
inline bool strongly_connected(const MatrixXd& P, double tol = 1e-12) {
  const int r = static_cast<int>(P.rows());
  const auto reach = [&](bool transpose) {
    std::vector<char> seen(r, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < r; ++v) {
        const double e = transpose ? P(v, u) : P(u, v);
        if (!seen[v] && std::abs(e) > tol) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    for (char s : seen)
      if (!s) return false;
    return true;
  };
  return reach(false) && reach(true);
}
}  // namespace detail

// Unique probability vector with w' P = w', via the eigenproblem of P' at
// eigenvalue 1. Irreducibility is checked by graph reachability.
inline VectorXd stationary(const MatrixXd& P) {
  const int r = static_cast<int>(P.rows());
  if (P.cols() != r) throw std::invalid_argument("stationary: square matrix required");
  if (!detail::strongly_connected(P)) throw std::runtime_error("stationary: reducible chain");
  Eigen::EigenSolver<MatrixXd> eig(P.transpose());
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < r; ++i) {
    const double dist = std::abs(eig.eigenvalues()[i] - std::complex<double>(1.0, 0.0));
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  if (best_dist > 1e-8) throw std::runtime_error("stationary: no eigenvalue at 1");
  VectorXd w = eig.eigenvectors().col(best).real();
  if (w.sum() < 0.0) w = -w;
  w /= w.sum();
  return w;
}

// Random d-sparse row-stochastic P as a union of d random permutation
// supports (guarantees <= d nonzeros per row and column; the first
// permutation is a single cycle, so the chain is irreducible), weights
// uniform in [1/2, 3/2] before row normalization. Resampled until
// sigma_min(P) >= gamma1. Observation columns are random unit vectors plus
// entrywise N(0, rho^2/n) noise.
inline HmmModel gen_model(int r, int n, int d, double rho, std::uint64_t seed,
                          double gamma1 = 1e-2, int budget = 200) {
  if (d < 1 || d > r) throw std::invalid_argument("gen_model: 1 <= d <= r required");
  Rng rng(seed);
  HmmModel model;
  model.r = r;
  model.n = n;
  model.d = d;

  for (int attempt = 0;; ++attempt) {
    if (attempt >= budget) throw std::runtime_error("gen_model: resampling budget exhausted");
    MatrixXd P = MatrixXd::Zero(r, r);
    // single random cycle
    std::vector<int> order(r);
    for (int i = 0; i < r; ++i) order[i] = i;
    for (int i = r - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    for (int i = 0; i < r; ++i) P(order[i], order[(i + 1) % r]) = 0.5 + rng.uniform();
    // d - 1 further permutations
    for (int extra = 1; extra < d; ++extra) {
      for (int i = r - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
      for (int i = 0; i < r; ++i)
        if (P(i, order[i]) == 0.0) P(i, order[i]) = 0.5 + rng.uniform();
    }
    for (int i = 0; i < r; ++i) P.row(i) /= P.row(i).sum();
    if (sigma_min(P) < gamma1) continue;
    model.P = P;
    break;
  }
  model.w = stationary(model.P);

  model.O = MatrixXd(n, r);
  for (int j = 0; j < r; ++j) {
    VectorXd base(n);
    for (int i = 0; i < n; ++i) base[i] = rng.gaussian();
    base /= base.norm();
    for (int i = 0; i < n; ++i) base[i] += (rho / std::sqrt(static_cast<double>(n))) * rng.gaussian();
    model.O.col(j) = base;
  }
  return model;
}

// Conditional-expectation views around a center state j:
//   A_j = E[X_l x X_{l-1} x ... x X_1     | Z_{l+1} = j]   (past,   n^l x r)
//   B_j = E[X_{l+1}                       | Z_{l+1} = j]   (center, n x r)
//   C_j = E[X_{l+2} x ... x X_{2l+1}      | Z_{l+1} = j]   (future, n^l x r)
//   D_j = E[X_{l+2} x ... x X_{2l+2}      | Z_{l+1} = j]   (n^{l+1} x r)
// Kronecker factors are ordered nearest-to-center first (most significant).
// One forward step from j contributes O P', so C follows the recursion
// C(1) = O P', C(t) = (O kr C(t-1)) P'; A uses the reverse transition
// Prev_ji = w_i P_ij / w_j in place of P.
struct ViewMatrices {
  MatrixXd A, B, C, D;
};

inline ViewMatrices build_views(const HmmModel& model, int ell, bool with_D = true) {
  if (ell < 1) throw std::invalid_argument("build_views: ell >= 1 required");
  const MatrixXd Pt = model.P.transpose();
  MatrixXd Prev_t(model.r, model.r);  // Prev transposed: Prev_t(i, j) = w_i P_ij / w_j
  for (int i = 0; i < model.r; ++i)
    for (int j = 0; j < model.r; ++j) Prev_t(i, j) = model.w[i] * model.P(i, j) / model.w[j];

  const auto chain = [&](const MatrixXd& step, int len) {
    MatrixXd G = model.O * step;
    for (int t = 2; t <= len; ++t) G = khatri_rao(model.O, G) * step;
    return G;
  };
  ViewMatrices v;
  v.A = chain(Prev_t, ell);
  v.B = model.O;
  v.C = chain(Pt, ell);
  if (with_D) v.D = chain(Pt, ell + 1);
  return v;
}

// sum_j w_j A_j x B_j x C_j, shape (n^l, n, n^l).
inline DenseTensor exact_moment3(const HmmModel& model, int ell) {
  const auto v = build_views(model, ell, false);
  const Eigen::Index p = v.A.rows(), q = v.C.rows(), mid = v.B.rows();
  DenseTensor T = DenseTensor::zeros({static_cast<int>(p), static_cast<int>(mid), static_cast<int>(q)});
  for (int j = 0; j < model.r; ++j)
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index b = 0; b < mid; ++b)
        for (Eigen::Index k = 0; k < q; ++k)
          T.data[(i * mid + b) * q + k] += model.w[j] * v.A(i, j) * v.B(b, j) * v.C(k, j);
  return T;
}

// Pairwise past-future marginals: M13 = A diag(w) C', M13' = A diag(w) D'.
inline MatrixXd exact_m13(const HmmModel& model, int ell) {
  const auto v = build_views(model, ell, false);
  return v.A * model.w.asDiagonal() * v.C.transpose();
}

inline MatrixXd exact_m13_prime(const HmmModel& model, int ell) {
  const auto v = build_views(model, ell, true);
  return v.A * model.w.asDiagonal() * v.D.transpose();
}

// N sampled windows: states from the stationary chain, observations
// X_t = O_{Z_t} + N(0, sigma_obs^2 / n) per coordinate. Per-sequence seeds
// derived from the master seed, so the set is independent of iteration order.
struct SampleSet {
  int window = 0;
  std::vector<MatrixXd> obs;              // n x window each
  std::vector<std::vector<int>> states;   // window entries each
};

inline SampleSet sample_sequences(const HmmModel& model, int window, std::int64_t N,
                                  std::uint64_t seed) {
  if (window < 1) throw std::invalid_argument("sample_sequences: window >= 1 required");
  SampleSet out;
  out.window = window;
  out.obs.resize(N);
  out.states.resize(N);
  const double stddev = model.sigma_obs / std::sqrt(static_cast<double>(model.n));
  for (std::int64_t s = 0; s < N; ++s) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(s)));
    std::vector<int>& z = out.states[s];
    z.resize(window);
    {
      double u = rng.uniform(), acc = 0.0;
      z[0] = model.r - 1;
      for (int j = 0; j < model.r; ++j) {
        acc += model.w[j];
        if (u < acc) {
          z[0] = j;
          break;
        }
      }
    }
    for (int t = 1; t < window; ++t) {
      double u = rng.uniform(), acc = 0.0;
      z[t] = model.r - 1;
      for (int j = 0; j < model.r; ++j) {
        acc += model.P(z[t - 1], j);
        if (u < acc) {
          z[t] = j;
          break;
        }
      }
    }
    MatrixXd X(model.n, window);
    for (int t = 0; t < window; ++t)
      for (int i = 0; i < model.n; ++i) X(i, t) = model.O(i, z[t]) + stddev * rng.gaussian();
    out.obs[s] = std::move(X);
  }
  return out;
}

namespace detail {
// Kronecker product of observation columns first..last stepping toward the
// center, nearest-to-center factor most significant.
inline VectorXd window_block(const MatrixXd& X, int nearest, int farthest) {
  const int step = farthest >= nearest ? 1 : -1;
  VectorXd out = X.col(nearest);
  for (int t = nearest + step; step > 0 ? t <= farthest : t >= farthest; t += step) {
    VectorXd next(out.size() * X.rows());
    for (Eigen::Index i = 0; i < out.size(); ++i)
      next.segment(i * X.rows(), X.rows()) = out[i] * X.col(t);
    out = next;
  }
  return out;
}
}  // namespace detail

// Average of past x center x future over the samples, oriented exactly as
// exact_moment3 (0-based window columns: past = l-1 .. 0, center = l,
// future = l+1 .. 2l).
inline DenseTensor empirical_moment3(const SampleSet& samples, int ell) {
  if (samples.obs.empty()) throw std::invalid_argument("empirical_moment3: empty sample set");
  if (samples.window < 2 * ell + 1) throw std::invalid_argument("empirical_moment3: window too short");
  const int n = static_cast<int>(samples.obs[0].rows());
  const int p = static_cast<int>(int_pow(n, ell));
  DenseTensor T = DenseTensor::zeros({p, n, p});
  for (const auto& X : samples.obs) {
    const VectorXd past = detail::window_block(X, ell - 1, 0);
    const VectorXd future = detail::window_block(X, ell + 1, 2 * ell);
    for (int i = 0; i < p; ++i)
      for (int b = 0; b < n; ++b)
        for (int k = 0; k < p; ++k) T.data[(i * n + b) * p + k] += past[i] * X(b, ell) * future[k];
  }
  T.data /= static_cast<double>(samples.obs.size());
  return T;
}

inline MatrixXd empirical_m13(const SampleSet& samples, int ell, bool prime = false) {
  if (samples.obs.empty()) throw std::invalid_argument("empirical_m13: empty sample set");
  const int need = prime ? 2 * ell + 2 : 2 * ell + 1;
  if (samples.window < need) throw std::invalid_argument("empirical_m13: window too short");
  const int n = static_cast<int>(samples.obs[0].rows());
  const int p = static_cast<int>(int_pow(n, ell));
  const int q = prime ? p * n : p;
  MatrixXd M = MatrixXd::Zero(p, q);
  for (const auto& X : samples.obs)
    M += detail::window_block(X, ell - 1, 0) *
         detail::window_block(X, ell + 1, prime ? 2 * ell + 1 : 2 * ell).transpose();
  return M / static_cast<double>(samples.obs.size());
}

// Simultaneous diagonalization of T = sum_j lam_j A_j x B_j x C_j given the
// pairwise marginal M13 = sum_j w_j A_j C_j'. Two random middle-mode
// contractions S1, S2 are projected onto the top-r singular spaces of M13;
// eig(S1 S2^-1) recovers the projected A directions and the transposed
// problem the projected C directions, paired by eigenvalue. d_diag carries
// the per-component scale products w_j a_j c_j relative to the returned
// unit columns.
struct JennrichResult {
  MatrixXd A_hat;  // p x r, unit columns
  MatrixXd C_hat;  // q x r, unit columns
  VectorXd d_diag;
};

inline JennrichResult jennrich(const DenseTensor& T, const MatrixXd& M13, int r,
                               std::uint64_t seed, int retries = 20) {
  if (T.order() != 3) throw std::invalid_argument("jennrich: order-3 tensor required");
  const int p = T.shape[0], mid = T.shape[1], q = T.shape[2];
  if (M13.rows() != p || M13.cols() != q) throw std::invalid_argument("jennrich: M13 shape mismatch");
  if (r > std::min(p, q)) throw std::invalid_argument("jennrich: r too large");

  Eigen::JacobiSVD<MatrixXd> msvd(M13, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (msvd.singularValues()[r - 1] <= 1e-12 * msvd.singularValues()[0])
    throw std::runtime_error("jennrich: rank deficiency in pairwise marginal");
  const MatrixXd Ur = msvd.matrixU().leftCols(r);
  const MatrixXd Vr = msvd.matrixV().leftCols(r);

  const auto contract_mid = [&](const VectorXd& theta) {
    MatrixXd S = MatrixXd::Zero(p, q);
    for (int i = 0; i < p; ++i)
      for (int b = 0; b < mid; ++b)
        for (int k = 0; k < q; ++k) S(i, k) += theta[b] * T.data[(i * static_cast<std::int64_t>(mid) + b) * q + k];
    return S;
  };

  Rng rng(seed);
  for (int attempt = 0; attempt < retries; ++attempt) {
    VectorXd t1(mid), t2(mid);
    for (int b = 0; b < mid; ++b) t1[b] = rng.gaussian();
    for (int b = 0; b < mid; ++b) t2[b] = rng.gaussian();
    const MatrixXd S1 = Ur.transpose() * contract_mid(t1) * Vr;
    const MatrixXd S2 = Ur.transpose() * contract_mid(t2) * Vr;
    const Eigen::FullPivLU<MatrixXd> lu(S2);
    if (!lu.isInvertible()) continue;
    const MatrixXd W1 = S1 * lu.inverse();                  // eigvecs Ur' A_j
    const MatrixXd W2 = (lu.inverse() * S1).transpose();    // eigvecs Vr' C_j

    Eigen::EigenSolver<MatrixXd> e1(W1), e2(W2);
    const double scale = e1.eigenvalues().cwiseAbs().maxCoeff();
    if (e1.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-7 * scale ||
        e2.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-7 * scale)
      continue;
    std::vector<int> o1(r), o2(r);
    for (int i = 0; i < r; ++i) o1[i] = o2[i] = i;
    const VectorXd ev1 = e1.eigenvalues().real(), ev2 = e2.eigenvalues().real();
    std::sort(o1.begin(), o1.end(), [&](int a, int b) { return ev1[a] < ev1[b]; });
    std::sort(o2.begin(), o2.end(), [&](int a, int b) { return ev2[a] < ev2[b]; });
    bool collision = false;
    for (int i = 0; i + 1 < r; ++i)
      if (ev1[o1[i + 1]] - ev1[o1[i]] < 1e-7 * scale) collision = true;
    for (int i = 0; i < r; ++i)
      if (std::abs(ev1[o1[i]] - ev2[o2[i]]) > 1e-6 * scale) collision = true;
    if (collision) continue;

    JennrichResult out;
    out.A_hat = MatrixXd(p, r);
    out.C_hat = MatrixXd(q, r);
    for (int i = 0; i < r; ++i) {
      VectorXd a = Ur * e1.eigenvectors().col(o1[i]).real();
      VectorXd c = Vr * e2.eigenvectors().col(o2[i]).real();
      out.A_hat.col(i) = a / a.norm();
      out.C_hat.col(i) = c / c.norm();
    }
    out.d_diag = (pinv(out.A_hat) * M13 * pinv(out.C_hat).transpose()).diagonal();
    return out;
  }
  throw std::runtime_error("jennrich: eigenvalue collision, retries exhausted");
}

// O columns from the middle-mode unfolding: with G = pinv(A_hat kr C_hat) N
// each row is g_j' = w_j a_j c_j O_j', and d_diag holds the same scalars, so
// O_j = g_j / d_diag_j with the correct sign.
struct ObservationResult {
  MatrixXd O_hat;
  JennrichResult factors;
};

inline ObservationResult recover_observation(const DenseTensor& T3, const MatrixXd& M13, int r,
                                             std::uint64_t seed) {
  ObservationResult out;
  out.factors = jennrich(T3, M13, r, seed);
  const int p = T3.shape[0], mid = T3.shape[1], q = T3.shape[2];
  MatrixXd N(static_cast<Eigen::Index>(p) * q, mid);
  for (int i = 0; i < p; ++i)
    for (int b = 0; b < mid; ++b)
      for (int k = 0; k < q; ++k)
        N(static_cast<Eigen::Index>(i) * q + k, b) = T3.data[(i * static_cast<std::int64_t>(mid) + b) * q + k];
  const MatrixXd G = pinv(khatri_rao(out.factors.A_hat, out.factors.C_hat)) * N;
  out.O_hat = MatrixXd(mid, r);
  for (int j = 0; j < r; ++j) {
    if (std::abs(out.factors.d_diag[j]) < 1e-12)
      throw std::runtime_error("recover_observation: unresolvable scale");
    out.O_hat.col(j) = G.row(j).transpose() / out.factors.d_diag[j];
  }
  return out;
}

// Transition recovery. With Z1 = pinv(A_hat) M13 and Z2 = pinv(A_hat) M13',
// the columns of (O_hat kr Z1') are w_j s_j (O_j x C_j) while
// Z2' = (O kr C) P' diag(w s), so Q = pinv(O_hat kr Z1') Z2' equals
// diag(1/v) P' diag(v) with v = w o s. Row-stochasticity of P gives
// Q' v = v; v is read off as the eigenvector of Q' at eigenvalue 1, and
// P = diag(1/v) Q' diag(v), invariant under the scale of v.
inline MatrixXd recover_transition(const ObservationResult& obs, const MatrixXd& M13,
                                   const MatrixXd& M13_prime) {
  const int r = static_cast<int>(obs.O_hat.cols());
  const MatrixXd Apinv = pinv(obs.factors.A_hat);
  const MatrixXd Z1 = Apinv * M13;
  const MatrixXd Z2 = Apinv * M13_prime;
  const MatrixXd Q = pinv(khatri_rao(obs.O_hat, Z1.transpose())) * Z2.transpose();

  // The scaling vector is an eigenvector of Q' at eigenvalue 1. The
  // eigenvalue may be degenerate (e.g. for a permutation chain), so every
  // candidate eigenvector near 1 is tried and the conjugation producing the
  // least-negative row-stochastic matrix wins.
  Eigen::EigenSolver<MatrixXd> eig(Q.transpose());
  MatrixXd best_P;
  double best_neg = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < r; ++i) {
    if (std::abs(eig.eigenvalues()[i] - std::complex<double>(1.0, 0.0)) > 1e-6) continue;
    const VectorXd v = eig.eigenvectors().col(i).real();
    if (v.cwiseAbs().minCoeff() < 1e-9 * v.cwiseAbs().maxCoeff()) continue;
    MatrixXd P = v.cwiseInverse().asDiagonal() * Q.transpose() * v.asDiagonal();
    bool ok = true;
    for (int row = 0; row < r && ok; ++row) {
      const double s = P.row(row).sum();
      if (std::abs(s) < 1e-9) ok = false;
      else P.row(row) /= s;
    }
    if (!ok) continue;
    const double neg = P.minCoeff();
    if (neg > best_neg) {
      best_neg = neg;
      best_P = P;
    }
  }
  if (best_P.size() == 0 || best_neg < -1e-4)
    throw std::runtime_error("recover_transition: scale ambiguity unresolved");
  MatrixXd P = best_P.cwiseMax(0.0);
  for (int i = 0; i < r; ++i) P.row(i) /= P.row(i).sum();
  return P;
}

// End-to-end exact-moment recovery; component order follows the jennrich
// eigenvalue sort, consistent between O_hat columns and P_hat rows/columns.
struct HmmRecovery {
  MatrixXd O_hat;
  MatrixXd P_hat;
  VectorXd w_hat;
};

inline HmmRecovery recover_exact(const HmmModel& model, int ell, std::uint64_t seed) {
  const DenseTensor T3 = exact_moment3(model, ell);
  const MatrixXd M13 = exact_m13(model, ell);
  const MatrixXd M13p = exact_m13_prime(model, ell);
  const auto obs = recover_observation(T3, M13, model.r, seed);
  HmmRecovery out;
  out.O_hat = obs.O_hat;
  out.P_hat = recover_transition(obs, M13, M13p);
  out.w_hat = stationary(out.P_hat);
  return out;
}

// Summing the n1 row blocks of an n1*n2 x n3 matrix loses at most a sqrt(n1)
// factor of the smallest singular value: sigma_n3(A) >= sigma_n3(B)/sqrt(n1).
inline MatrixXd collapse_rows(const MatrixXd& A, int n1, int n2) {
  if (A.rows() != static_cast<Eigen::Index>(n1) * n2)
    throw std::invalid_argument("collapse_rows: rows != n1 * n2");
  MatrixXd B = MatrixXd::Zero(n2, A.cols());
  for (int b = 0; b < n1; ++b) B += A.middleRows(static_cast<Eigen::Index>(b) * n2, n2);
  return B;
}

// Aligns recovered components with a reference model: matches O columns by
// nearest distance (signs are meaningful, no flips), then permutes O_hat
// columns and P_hat rows/columns accordingly.
inline HmmRecovery align_to(const HmmRecovery& rec, const MatrixXd& O_ref) {
  const int r = static_cast<int>(O_ref.cols());
  std::vector<int> perm(r, -1);  // perm[j] = recovered column matching reference column j
  MatrixXd cost(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) cost(i, j) = (O_ref.col(i) - rec.O_hat.col(j)).norm();
  const int full = 1 << r;
  std::vector<double> dp(full, std::numeric_limits<double>::infinity());
  std::vector<int> choice(full, -1);
  dp[0] = 0.0;
  for (int mask = 0; mask < full - 1; ++mask) {
    if (!std::isfinite(dp[mask])) continue;
    const int i = __builtin_popcount(static_cast<unsigned>(mask));
    for (int j = 0; j < r; ++j) {
      if (mask & (1 << j)) continue;
      const double cand = dp[mask] + cost(i, j);
      if (cand < dp[mask | (1 << j)]) {
        dp[mask | (1 << j)] = cand;
        choice[mask | (1 << j)] = j;
      }
    }
  }
  int mask = full - 1;
  for (int i = r - 1; i >= 0; --i) {
    perm[i] = choice[mask];
    mask ^= 1 << perm[i];
  }
  HmmRecovery out;
  out.O_hat = MatrixXd(rec.O_hat.rows(), r);
  out.P_hat = MatrixXd(r, r);
  out.w_hat = VectorXd(r);
  for (int i = 0; i < r; ++i) {
    out.O_hat.col(i) = rec.O_hat.col(perm[i]);
    out.w_hat[i] = rec.w_hat[perm[i]];
    for (int j = 0; j < r; ++j) out.P_hat(i, j) = rec.P_hat(perm[i], perm[j]);
  }
  return out;
}

}  // namespace sta
