// End-to-end acceptance suite. Each numbered check prints exactly one
// PASS/FAIL line with its headline numbers; the process exits nonzero if any
// check fails. Tolerances and instance sizes are pinned here on purpose.

#include <chrono>
#include <cstdio>

#include "sta/experiment.hpp"

using namespace sta;

namespace {

int g_failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail) {
  std::printf("%s  criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, title, detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

VectorXd rand_vec(Rng& rng, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

SymTensor rand_sym(Rng& rng, int n, int ell) {
  VectorXd c(sym_dim(n, ell));
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = rng.gaussian();
  return SymTensor(n, ell, std::move(c));
}

MatrixXd rand_unit_cols(Rng& rng, int n, int R) {
  MatrixXd A(n, R);
  for (int j = 0; j < R; ++j) {
    const VectorXd v = rand_vec(rng, n);
    A.col(j) = v / v.norm();
  }
  return A;
}

// 1. Sign-sum decoupling: sum over sign patterns of <T, y^{x ell}> equals
//    2^{ell-1} ell! <T, (x+z_1) x z_2 x ... x z_ell>.
void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int ell = 2 + static_cast<int>(rng.uniform_int(3));
    const int n = 2 + static_cast<int>(rng.uniform_int(4));  // n <= 5
    const SymTensor T = rand_sym(rng, n, ell);
    const VectorXd x = rand_vec(rng, n);
    std::vector<VectorXd> z;
    for (int i = 0; i < ell; ++i) z.push_back(rand_vec(rng, n));
    double lhs = 0.0;
    const int patterns = 1 << (ell - 1);
    for (int mask = 0; mask < patterns; ++mask) {
      VectorXd y = x + z[0];
      double prod = 1.0;
      for (int i = 1; i < ell; ++i) {
        const double zeta = (mask >> (i - 1)) & 1 ? 1.0 : -1.0;
        y += zeta * z[i];
        prod *= zeta;
      }
      lhs += prod * decoupled_eval(T, std::vector<VectorXd>(ell, y));
    }
    double fact = 1.0;
    for (int i = 2; i <= ell; ++i) fact *= i;
    std::vector<VectorXd> decoupled{x + z[0]};
    for (int i = 1; i < ell; ++i) decoupled.push_back(z[i]);
    const double rhs = patterns * fact * decoupled_eval(T, decoupled);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  const double secs = seconds_since(t0);
  report(1, "sign-sum decoupling identity", worst <= 1e-8 && secs < 10.0,
         "max rel err " + format_double(worst) + ", " + std::to_string(secs) + " s");
}

// 2. Exhaustive sign expectation: E[(a0 + sum a_i s_i)^{m+1} prod s_i]
//    = (m+1)! a0 a1 ... am.
void criterion2() {
  Rng rng(1002);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_int(6));
    VectorXd alpha(m + 1);
    for (int i = 0; i <= m; ++i) alpha[i] = rng.gaussian();
    double expectation = 0.0;
    for (int mask = 0; mask < (1 << m); ++mask) {
      double s = alpha[0], prod = 1.0;
      for (int i = 0; i < m; ++i) {
        const double zeta = (mask >> i) & 1 ? 1.0 : -1.0;
        s += alpha[i + 1] * zeta;
        prod *= zeta;
      }
      expectation += std::pow(s, m + 1) * prod;
    }
    expectation /= static_cast<double>(1 << m);
    double fact = 1.0;
    for (int i = 2; i <= m + 1; ++i) fact *= i;
    const double target = fact * alpha.prod();
    worst = std::max(worst, std::abs(expectation - target) / std::max(1.0, std::abs(target)));
  }
  report(2, "exhaustive sign-moment identity", worst <= 1e-10,
         "max rel err " + format_double(worst));
}

// 3. Leave-one-out distance sandwiches sigma_min within sqrt(k).
void criterion3() {
  Rng rng(1003);
  bool ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 2 + static_cast<int>(rng.uniform_int(39));  // up to 40
    const int cols = 2 + static_cast<int>(rng.uniform_int(
                             static_cast<std::uint64_t>(std::min(rows, 20) - 1)));
    MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < M.size(); ++i) M(i) = rng.gaussian();
    const double l = leave_one_out(M);
    const double s = sigma_min(M);
    if (!(l / std::sqrt(static_cast<double>(cols)) <= s + 1e-9 && s <= l + 1e-9)) ok = false;
  }
  report(3, "leave-one-out sandwich on 200 matrices", ok, ok ? "all held" : "violated");
}

// 4. Smoothed symmetric powers of 30 identical base vectors keep sigma_30
//    macroscopic; 37 columns in a 36-dimensional space are always dependent.
void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = 8, ell = 2, k = 30;
  const auto D = sym_dim(n, ell);  // 36
  CoefficientMatrix U;
  U.n = n;
  U.ell = ell;
  U.entries = MatrixXd::Identity(D, D);
  const double eps = std::numeric_limits<double>::epsilon();
  int good = 0;
  double worst_dep = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(Rng::derive(1004, seed));
    const VectorXd shared = rand_vec(rng, n);
    const std::vector<VectorXd> base(k, shared);
    const auto pts = perturb(base, {0.1, n, Rng::derive(2004, seed)});
    const MatrixXd M = eval_poly_matrix(U, pts);
    const double tol = 1e3 * eps * static_cast<double>(std::max(M.rows(), M.cols())) * sigma_k(M, 1);
    if (sigma_k(M, k) > tol) ++good;

    if (seed < 10) {
      // 37 = D + 1 columns: the 37th singular value is structurally zero,
      // i.e. below the same rank tolerance that the full-rank check clears
      const std::vector<VectorXd> base37(D + 1, shared);
      const auto pts37 = perturb(base37, {0.1, n, Rng::derive(3004, seed)});
      const MatrixXd M37 = eval_poly_matrix(U, pts37);
      const MatrixXd G = M37.transpose() * M37;  // 37 x 37, rank <= 36
      const double tol37 = 1e3 * eps * static_cast<double>(G.rows()) * sigma_k(G, 1);
      worst_dep = std::max(worst_dep, sigma_k(G, D + 1) / tol37);
    }
  }
  const double secs = seconds_since(t0);
  report(4, "smoothed sigma_k at n=8 ell=2 k=30", good >= 95 && worst_dep < 1.0 && secs < 60.0,
         std::to_string(good) + "/100 trials, overfull sigma ratio " + format_double(worst_dep) +
             ", " +
             std::to_string(secs) + " s");
}

// 5. Counterexample family: small-ball exponent tracks r, yet the dense
//    matrix keeps ceil(r n / ell!) singular values above 1/sqrt(ell!).
void criterion5() {
  const int n = 4, ell = 2;
  bool ok = true;
  std::string detail;
  for (int r : {1, 2}) {
    const auto U = counterexample_matrix(n, ell, r);
    // spectral claim on the dense tensor rows
    const int idx = (r * n + 1) / 2;  // ceil(r n / ell!)
    const double sv = sigma_k(dense_rows(U), idx);
    if (sv < 1.0 / std::sqrt(2.0) - 1e-10) ok = false;

    // small-ball curve around a base point supported away from the first r
    // coordinates; eta re-centers the curve into the measurable band
    VectorXd u = VectorXd::Zero(n);
    u[2] = 2.0;
    u[3] = 2.0;
    const double eta = (r == 1 ? 40.0 : 400.0);
    std::vector<double> grid;
    for (int i = 0; i <= 4; ++i) grid.push_back(1e-3 * std::pow(10.0, 0.5 * i));
    const auto curve = small_ball_curve(U, u, {1.0, n, 1005 + static_cast<std::uint64_t>(r)},
                                        grid, 100000, eta);
    // log-log least squares over the measurable band
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int pts = 0;
    for (const auto& pt : curve) {
      if (pt.probability < 1e-4 || pt.probability > 0.5) continue;
      const double X = std::log(pt.eps), Y = std::log(pt.probability);
      sx += X;
      sy += Y;
      sxx += X * X;
      sxy += X * Y;
      ++pts;
    }
    const double slope = (pts * sxy - sx * sy) / (pts * sxx - sx * sx);
    if (pts < 3 || std::abs(slope - r) > 0.3 * r) ok = false;
    detail += "r=" + std::to_string(r) + " slope " + std::to_string(slope) + " sigma " +
              std::to_string(sv) + (r == 1 ? "; " : "");
  }
  report(5, "counterexample slope and spectrum", ok, detail);
}

// 6. Batched 1-bounded recovery beats the d/n barrier at alpha = 0.35.
void criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = 8, d = 4, m = 600;
  RecoveryParams params;
  params.ell = 2;
  params.rho = 0.1;
  int clean = 0, noisy = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    try {
      const auto inst = generate_instance(n, d, m, 0.35, 0.1, 0.0, Rng::derive(1006, seed));
      const auto res = recover(inst.points, params, d);
      bool pure = true;
      for (int idx : res.selected)
        if (!inst.labels[idx]) pure = false;
      if (pure && evaluate(inst.T, res.T_hat) <= 1e-6) ++clean;
    } catch (const RecoveryError&) {
    }
    try {
      const auto inst = generate_instance(n, d, m, 0.35, 0.1, 1e-9, Rng::derive(2006, seed));
      const auto res = recover(inst.points, params, d);
      if (evaluate(inst.T, res.T_hat) <= 1e-4) ++noisy;
    } catch (const RecoveryError&) {
    }
  }
  const double secs = seconds_since(t0);
  report(6, "subspace recovery below d/n", clean >= 18 && noisy >= 18 && secs < 300.0,
         "clean " + std::to_string(clean) + "/20, eps0=1e-9 " + std::to_string(noisy) + "/20, " +
             std::to_string(secs) + " s");
}

DenseTensor planted_tensor(const MatrixXd& A, int ell) {
  DenseTensor T = DenseTensor::zeros(std::vector<int>(2 * ell, static_cast<int>(A.rows())));
  for (Eigen::Index j = 0; j < A.cols(); ++j) T.data += outer_power(A.col(j), 2 * ell);
  return T;
}

double foobi_error(const MatrixXd& A, const DenseTensor& T, int R, std::uint64_t seed) {
  FoobiParams params;
  params.seed = seed;
  const auto comps = decompose(T, R, params);
  MatrixXd B(A.rows(), R);
  for (int j = 0; j < R; ++j) B.col(j) = comps[j];
  return match_components(A, B).error;
}

// 7. Noiseless rank-5 decomposition at n=4, ell=2, plus the exact null-space
//    dimension of H_phi.
void criterion7() {
  int good = 0;
  bool nulldim_ok = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(Rng::derive(1007, seed));
    const MatrixXd A = rand_unit_cols(rng, 4, 5);
    const DenseTensor T = planted_tensor(A, 2);
    try {
      if (foobi_error(A, T, 5, Rng::derive(2007, seed)) <= 1e-6) ++good;
    } catch (const FoobiError&) {
    }
    if (seed < 5) {
      const MatrixXd Tmat = Eigen::Map<const MatrixXd>(T.data.data(), 16, 16).transpose();
      const MatrixXd H = sqrt_factor(psd_project(Tmat), 5);
      const VectorXd sv = singular_values(build_H_phi(H, 4, 2));
      if (!(sv[sv.size() - 5] <= 1e-8 && sv[sv.size() - 6] > 1e-8)) nulldim_ok = false;
    }
  }
  report(7, "noiseless rank-5 order-4 decomposition", good >= 18 && nulldim_ok,
         std::to_string(good) + "/20, null dim exact: " + (nulldim_ok ? "yes" : "no"));
}

// 8. Robustness to 1e-8 dense noise, and a higher-order instance.
void criterion8() {
  int robust = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(Rng::derive(1008, seed));
    const MatrixXd A = rand_unit_cols(rng, 4, 5);
    DenseTensor T = planted_tensor(A, 2);
    VectorXd noise = rand_vec(rng, static_cast<int>(T.data.size()));
    T.data += (1e-8 / noise.norm()) * noise;
    try {
      if (foobi_error(A, T, 5, Rng::derive(2008, seed)) <= 1e-4) ++robust;
    } catch (const FoobiError&) {
    }
  }
  int high = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(Rng::derive(3008, seed));
    const MatrixXd A = rand_unit_cols(rng, 3, 4);
    try {
      if (foobi_error(A, planted_tensor(A, 3), 4, Rng::derive(4008, seed)) <= 1e-5) ++high;
    } catch (const FoobiError&) {
    }
  }
  report(8, "robust and higher-order decomposition", robust >= 18 && high >= 4,
         "noisy " + std::to_string(robust) + "/20, order-6 " + std::to_string(high) + "/5");
}

// 9. sigma_min of M_phi over smoothed factor sets.
void criterion9() {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(Rng::derive(1009, seed));
    MatrixXd A = rand_unit_cols(rng, 4, 5);
    for (Eigen::Index i = 0; i < A.size(); ++i) A(i) += (0.1 / 2.0) * rng.gaussian();
    if (sigma_min(build_M_phi(A, 2)) > 1e-6) ++good;
  }
  report(9, "smoothed M_phi conditioning", good >= 95, std::to_string(good) + "/100");
}

// 10. Exact-moment recovery in the undercomplete and overcomplete regimes,
//     plus the row-collapse inequality.
void criterion10() {
  const auto t0 = std::chrono::steady_clock::now();
  int under = 0, over = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    try {
      const HmmModel m = gen_model(4, 5, 4, 0.1, Rng::derive(1010, seed));
      const auto rec = align_to(recover_exact(m, 1, Rng::derive(2010, seed)), m.O);
      if ((rec.O_hat - m.O).norm() <= 1e-6 && (rec.P_hat - m.P).norm() <= 1e-6) ++under;
    } catch (const std::runtime_error&) {
    }
    try {
      const HmmModel m = gen_model(6, 4, 2, 0.1, Rng::derive(3010, seed));
      const auto rec = align_to(recover_exact(m, 2, Rng::derive(4010, seed)), m.O);
      if ((rec.O_hat - m.O).norm() <= 1e-4 && (rec.P_hat - m.P).norm() <= 1e-4) ++over;
    } catch (const std::runtime_error&) {
    }
  }
  bool collapse_ok = true;
  Rng rng(5010);
  for (int t = 0; t < 100; ++t) {
    const int n1 = 2 + static_cast<int>(rng.uniform_int(3));
    const int n2 = 2 + static_cast<int>(rng.uniform_int(4));
    const int n3 = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n2)));
    MatrixXd A(n1 * n2, n3);
    for (Eigen::Index i = 0; i < A.size(); ++i) A(i) = rng.gaussian();
    const MatrixXd B = collapse_rows(A, n1, n2);
    if (sigma_k(A, n3) < sigma_k(B, n3) / std::sqrt(static_cast<double>(n1)) - 1e-12)
      collapse_ok = false;
  }
  const double secs = seconds_since(t0);
  report(10, "exact-moment model recovery",
         under >= 18 && over >= 18 && collapse_ok && secs < 120.0,
         "under " + std::to_string(under) + "/20, over " + std::to_string(over) +
             "/20, collapse " + (collapse_ok ? "held" : "violated") + ", " +
             std::to_string(secs) + " s");
}

// 11. Byte-identical CSV under re-runs and different thread counts.
void criterion11() {
  bool ok = true;
  for (const char* kind : {"ensemble", "subspace", "foobi", "hmm"}) {
    Config cfg;
    if (std::string(kind) == "ensemble") {
      cfg.set("n", "5");
      cfg.set("k", "6");
    } else if (std::string(kind) == "subspace") {
      cfg.set("n", "6");
      cfg.set("d", "2");
      cfg.set("m", "60");
      cfg.set("alpha", "0.5");
    } else if (std::string(kind) == "hmm") {
      cfg.set("r", "3");
      cfg.set("n", "4");
      cfg.set("d", "3");
    }
    const auto a = run_experiment(kind, cfg, 4, 777, 1);
    const auto b = run_experiment(kind, cfg, 4, 777, 3);
    if (a.csv != b.csv || a.csv.empty()) ok = false;
  }
  report(11, "deterministic experiment CSV", ok, ok ? "byte-identical" : "differs");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  criterion11();
  std::printf("%d/11 criteria passed\n", 11 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
