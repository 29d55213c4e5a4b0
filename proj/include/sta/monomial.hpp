#pragma once

#include "sta/tensor.hpp"

namespace sta {

// Index map for a tensor-monomial matrix: column c of the matrix is the
// flattened outer product a_{f(1)} x ... x a_{f(ell)} for the tuple
// f = columns[c], entries in [0, k).
struct MonomialSpec {
  int k = 0;
  int ell = 0;
  std::vector<MultiIndex> columns;

  void validate() const {
    for (const auto& tup : columns) {
      if (static_cast<int>(tup.size()) != ell)
        throw std::invalid_argument("MonomialSpec: tuple arity mismatch");
      for (int e : tup)
        if (e < 0 || e >= k) throw std::out_of_range("MonomialSpec: tuple entry out of range");
    }
  }
};

// m x sym_dim(n, ell) coefficient rows; row i holds the coefficients of the
// polynomial f_i over sorted multi-indices (no multinomial weights; any
// weighting convention is absorbed into the rows).
struct CoefficientMatrix {
  int n = 0;
  int ell = 0;
  MatrixXd entries;  // m x sym_dim(n, ell)

  int rows() const { return static_cast<int>(entries.rows()); }
};

// Entry (i, j) = f_i(points[j]) = <row i, monomial_vector(points[j], ell)>.
inline MatrixXd eval_poly_matrix(const CoefficientMatrix& U, const std::vector<VectorXd>& points) {
  if (U.entries.cols() != sym_dim(U.n, U.ell))
    throw std::invalid_argument("eval_poly_matrix: coefficient width mismatch");
  MatrixXd out(U.entries.rows(), static_cast<Eigen::Index>(points.size()));
  for (size_t j = 0; j < points.size(); ++j) {
    if (points[j].size() != U.n)
      throw std::invalid_argument("eval_poly_matrix: point dimension mismatch");
    out.col(static_cast<Eigen::Index>(j)) = U.entries * monomial_vector(points[j], U.ell);
  }
  return out;
}

// Column i = X_i tensor Y_i, flattened row-major (X index is most significant).
inline MatrixXd khatri_rao(const MatrixXd& X, const MatrixXd& Y) {
  if (X.cols() != Y.cols()) throw std::invalid_argument("khatri_rao: column-count mismatch");
  MatrixXd out(X.rows() * Y.rows(), X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c)
    for (Eigen::Index a = 0; a < X.rows(); ++a)
      out.col(c).segment(a * Y.rows(), Y.rows()) = X(a, c) * Y.col(c);
  return out;
}

// n^ell x R matrix of tensor monomials in the given vectors.
inline MatrixXd monomial_matrix(const std::vector<VectorXd>& vectors, const MonomialSpec& spec) {
  if (spec.k != static_cast<int>(vectors.size()))
    throw std::invalid_argument("monomial_matrix: spec.k must equal vector count");
  spec.validate();
  const int n = static_cast<int>(vectors.at(0).size());
  MatrixXd out(int_pow(n, spec.ell), static_cast<Eigen::Index>(spec.columns.size()));
  for (size_t c = 0; c < spec.columns.size(); ++c) {
    VectorXd col = vectors[spec.columns[c][0]];
    for (int pos = 1; pos < spec.ell; ++pos) {
      const VectorXd& v = vectors[spec.columns[c][pos]];
      VectorXd next(col.size() * v.size());
      for (Eigen::Index a = 0; a < col.size(); ++a)
        next.segment(a * v.size(), v.size()) = col[a] * v;
      col = std::move(next);
    }
    out.col(static_cast<Eigen::Index>(c)) = col;
  }
  return out;
}

// Delta_s = max over columns of the number of other columns whose tuple
// differs in exactly s positions, for s = 1..ell.
inline std::vector<int> delta_profile(const MonomialSpec& spec) {
  spec.validate();
  const int R = static_cast<int>(spec.columns.size());
  std::vector<int> delta(spec.ell + 1, 0);  // delta[s], s in 0..ell; delta[0] unused
  for (int i = 0; i < R; ++i) {
    std::vector<int> count(spec.ell + 1, 0);
    for (int j = 0; j < R; ++j) {
      if (j == i) continue;
      int s = 0;
      for (int pos = 0; pos < spec.ell; ++pos)
        if (spec.columns[i][pos] != spec.columns[j][pos]) ++s;
      ++count[s];
    }
    for (int s = 1; s <= spec.ell; ++s) delta[s] = std::max(delta[s], count[s]);
  }
  return std::vector<int>(delta.begin() + 1, delta.end());
}

}  // namespace sta
