#include <catch2/catch_amalgamated.hpp>

#include "sta/monomial.hpp"
#include "sta/rng.hpp"

using namespace sta;

namespace {
VectorXd random_vector(Rng& rng, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}
}  // namespace

TEST_CASE("eval_poly_matrix identity coefficients") {
  CoefficientMatrix U;
  U.n = 2;
  U.ell = 2;
  U.entries = MatrixXd::Identity(3, 3);
  VectorXd p(2);
  p << 1, 2;
  MatrixXd M = eval_poly_matrix(U, {p});
  REQUIRE(M.rows() == 3);
  CHECK(M(0, 0) == 1.0);
  CHECK(M(1, 0) == 2.0);
  CHECK(M(2, 0) == 4.0);
}

TEST_CASE("eval_poly_matrix single row of ones at ell=1 gives column sums") {
  CoefficientMatrix U;
  U.n = 3;
  U.ell = 1;
  U.entries = MatrixXd::Ones(1, 3);
  Rng rng(3);
  std::vector<VectorXd> pts{random_vector(rng, 3), random_vector(rng, 3)};
  MatrixXd M = eval_poly_matrix(U, pts);
  CHECK(M(0, 0) == Catch::Approx(pts[0].sum()));
  CHECK(M(0, 1) == Catch::Approx(pts[1].sum()));
}

TEST_CASE("eval_poly_matrix matches term-by-term summation oracle") {
  Rng rng(17);
  const int n = 3, ell = 2;
  const auto idxs = sorted_multi_indices(n, ell);
  CoefficientMatrix U;
  U.n = n;
  U.ell = ell;
  U.entries = MatrixXd(4, static_cast<Eigen::Index>(idxs.size()));
  for (Eigen::Index i = 0; i < U.entries.size(); ++i) U.entries(i) = rng.gaussian();
  std::vector<VectorXd> pts;
  for (int j = 0; j < 3; ++j) pts.push_back(random_vector(rng, n));

  MatrixXd M = eval_poly_matrix(U, pts);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) {
      double direct = 0.0;
      for (size_t t = 0; t < idxs.size(); ++t) {
        double mono = 1.0;
        for (int e : idxs[t]) mono *= pts[j][e];
        direct += U.entries(i, static_cast<Eigen::Index>(t)) * mono;
      }
      CHECK(M(i, j) == Catch::Approx(direct).epsilon(1e-10));
    }
}

TEST_CASE("khatri_rao basics and oracle") {
  MatrixXd I2 = MatrixXd::Identity(2, 2);
  MatrixXd K = khatri_rao(I2, I2);
  REQUIRE(K.rows() == 4);
  CHECK(K(0, 0) == 1.0);  // e1 x e1
  CHECK(K(3, 1) == 1.0);  // e2 x e2
  CHECK(K.sum() == 2.0);

  Rng rng(21);
  MatrixXd X(2, 3), Y(3, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = rng.gaussian();
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) = rng.gaussian();
  MatrixXd K2 = khatri_rao(X, Y);
  for (int c = 0; c < 3; ++c)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 3; ++b)
        CHECK(K2(a * 3 + b, c) == Catch::Approx(X(a, c) * Y(b, c)));

  CHECK_THROWS_AS(khatri_rao(MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("monomial_matrix columns equal Kronecker oracle") {
  Rng rng(31);
  const int n = 3;
  std::vector<VectorXd> vecs;
  for (int i = 0; i < 3; ++i) vecs.push_back(random_vector(rng, n));

  MonomialSpec spec;
  spec.k = 3;
  spec.ell = 2;
  spec.columns = {{0, 1}, {1, 2}, {2, 2}, {0, 0}};
  MatrixXd M = monomial_matrix(vecs, spec);
  REQUIRE(M.rows() == 9);
  for (size_t c = 0; c < spec.columns.size(); ++c) {
    const VectorXd& u = vecs[spec.columns[c][0]];
    const VectorXd& v = vecs[spec.columns[c][1]];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        CHECK(M(a * n + b, static_cast<Eigen::Index>(c)) == Catch::Approx(u[a] * v[b]));
  }

  // single-vector square column = outer_power
  MonomialSpec s1{1, 2, {{0, 0}}};
  MatrixXd M1 = monomial_matrix({vecs[0]}, s1);
  CHECK((M1.col(0) - outer_power(vecs[0], 2)).norm() < 1e-14);

  // out-of-range tuple entry
  MonomialSpec bad{2, 2, {{0, 5}}};
  CHECK_THROWS_AS(monomial_matrix({vecs[0], vecs[1]}, bad), std::out_of_range);
}

TEST_CASE("delta_profile hand enumeration and brute force") {
  MonomialSpec spec{2, 2, {{0, 0}, {0, 1}, {1, 1}}};
  auto d = delta_profile(spec);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == 2);
  CHECK(d[1] == 1);

  // all columns identical: every other column differs in 0 spots
  MonomialSpec same{2, 2, {{0, 1}, {0, 1}, {0, 1}, {0, 1}}};
  auto ds = delta_profile(same);
  CHECK(ds[0] == 0);
  CHECK(ds[1] == 0);

  // random spec vs pairwise Hamming oracle
  Rng rng(41);
  MonomialSpec rand_spec;
  rand_spec.k = 4;
  rand_spec.ell = 3;
  for (int c = 0; c < 20; ++c) {
    MultiIndex t(3);
    for (auto& e : t) e = static_cast<int>(rng.uniform_int(4));
    rand_spec.columns.push_back(t);
  }
  auto dr = delta_profile(rand_spec);
  for (int s = 1; s <= 3; ++s) {
    int expect = 0;
    for (int i = 0; i < 20; ++i) {
      int cnt = 0;
      for (int j = 0; j < 20; ++j) {
        if (i == j) continue;
        int ham = 0;
        for (int p = 0; p < 3; ++p)
          if (rand_spec.columns[i][p] != rand_spec.columns[j][p]) ++ham;
        if (ham == s) ++cnt;
      }
      expect = std::max(expect, cnt);
    }
    CHECK(dr[s - 1] == expect);
  }
}

TEST_CASE("monomial_matrix with disjoint independent tuples equals Khatri-Rao") {
  Rng rng(51);
  const int n = 3;
  std::vector<VectorXd> vecs;
  for (int i = 0; i < 4; ++i) vecs.push_back(random_vector(rng, n));
  // columns (0,2), (1,3): positions use disjoint vectors, so the matrix equals
  // the Khatri-Rao of the two factor matrices [v0 v1] and [v2 v3]
  MonomialSpec spec{4, 2, {{0, 2}, {1, 3}}};
  MatrixXd M = monomial_matrix(vecs, spec);
  MatrixXd X(n, 2), Y(n, 2);
  X.col(0) = vecs[0];
  X.col(1) = vecs[1];
  Y.col(0) = vecs[2];
  Y.col(1) = vecs[3];
  CHECK((M - khatri_rao(X, Y)).norm() < 1e-14);
}
