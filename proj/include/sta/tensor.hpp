#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sta {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using MultiIndex = std::vector<int>;  // entries in [0, n)

// C(n+ell-1, ell), the dimension of the space of symmetric order-ell tensors.
// Throws on overflow of the count type.
inline std::int64_t sym_dim(int n, int ell) {
  if (n < 1 || ell < 1) throw std::invalid_argument("sym_dim: need n >= 1, ell >= 1");
  // C(n+ell-1, ell) computed incrementally.
  std::int64_t result = 1;
  for (int i = 1; i <= ell; ++i) {
    const std::int64_t numer = n - 1 + i;
    if (result > (INT64_MAX / numer)) throw std::overflow_error("sym_dim: instance too large");
    result = result * numer / i;
  }
  return result;
}

inline std::int64_t int_pow(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > INT64_MAX / base) throw std::overflow_error("int_pow overflow");
    r *= base;
  }
  return r;
}

// All nondecreasing ell-tuples over [0, n), in lexicographic order. This is
// the single multi-index convention used for symmetric-tensor coordinates
// and coefficient-matrix columns throughout.
inline std::vector<MultiIndex> sorted_multi_indices(int n, int ell) {
  std::vector<MultiIndex> out;
  out.reserve(static_cast<size_t>(sym_dim(n, ell)));
  MultiIndex idx(ell, 0);
  while (true) {
    out.push_back(idx);
    int pos = ell - 1;
    while (pos >= 0 && idx[pos] == n - 1) --pos;
    if (pos < 0) break;
    const int v = idx[pos] + 1;
    for (int i = pos; i < ell; ++i) idx[i] = v;
  }
  return out;
}

// Rank of a sorted multi-index within sorted_multi_indices(n, ell).
inline std::int64_t sorted_index_rank(const MultiIndex& sorted, int n) {
  const int ell = static_cast<int>(sorted.size());
  // Count tuples lexicographically smaller: standard combinatorial ranking
  // over nondecreasing sequences.
  std::int64_t rank = 0;
  int lo = 0;
  for (int pos = 0; pos < ell; ++pos) {
    const int remaining = ell - pos - 1;
    for (int v = lo; v < sorted[pos]; ++v) {
      // tuples with value v at pos and nondecreasing tail over [v, n)
      rank += (remaining == 0) ? 1 : sym_dim(n - v, remaining);
    }
    lo = sorted[pos];
  }
  return rank;
}

// Number of distinct permutations of a sorted multi-index.
inline std::int64_t multiindex_multiplicity(const MultiIndex& sorted) {
  const int ell = static_cast<int>(sorted.size());
  std::int64_t numer = 1;
  for (int i = 2; i <= ell; ++i) numer *= i;
  int run = 1;
  for (int i = 1; i < ell; ++i) {
    if (sorted[i] == sorted[i - 1]) {
      ++run;
      std::int64_t f = 1;
      for (int j = 2; j <= run; ++j) f *= j;
      if (i + 1 == ell || sorted[i + 1] != sorted[i]) numer /= f;
    } else {
      run = 1;
    }
  }
  return numer;
}

// Dense order-k tensor with row-major flattening. Row-major is the single
// wire convention: the first mode index is the most significant digit.
struct DenseTensor {
  std::vector<int> shape;
  VectorXd data;

  DenseTensor() = default;
  DenseTensor(std::vector<int> s, VectorXd d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != size_from_shape(shape))
      throw std::invalid_argument("DenseTensor: data length does not match shape");
  }
  static std::int64_t size_from_shape(const std::vector<int>& s) {
    std::int64_t sz = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("DenseTensor: nonpositive mode dimension");
      sz *= d;
    }
    return sz;
  }
  static DenseTensor zeros(std::vector<int> s) {
    const std::int64_t sz = size_from_shape(s);
    return DenseTensor(std::move(s), VectorXd::Zero(sz));
  }
  int order() const { return static_cast<int>(shape.size()); }
  bool cubic() const {
    return std::all_of(shape.begin(), shape.end(), [&](int d) { return d == shape[0]; });
  }
  std::int64_t flat_index(const MultiIndex& idx) const {
    std::int64_t f = 0;
    for (size_t i = 0; i < shape.size(); ++i) f = f * shape[i] + idx[i];
    return f;
  }
  double operator()(const MultiIndex& idx) const { return data[flat_index(idx)]; }
  double& operator()(const MultiIndex& idx) { return data[flat_index(idx)]; }

  DenseTensor reshape(std::vector<int> s) const {
    if (size_from_shape(s) != data.size()) throw std::invalid_argument("reshape: size mismatch");
    return DenseTensor(std::move(s), data);
  }
};

// Symmetric order-ell tensor stored by sorted multi-index coordinates.
struct SymTensor {
  int n = 0;
  int ell = 0;
  VectorXd coeffs;  // length sym_dim(n, ell), lexicographic sorted tuples

  SymTensor() = default;
  SymTensor(int n_, int ell_, VectorXd c) : n(n_), ell(ell_), coeffs(std::move(c)) {
    if (coeffs.size() != sym_dim(n, ell))
      throw std::invalid_argument("SymTensor: coefficient length mismatch");
  }
  static SymTensor zeros(int n, int ell) {
    return SymTensor(n, ell, VectorXd::Zero(sym_dim(n, ell)));
  }

  double at(MultiIndex idx) const {
    std::sort(idx.begin(), idx.end());
    return coeffs[sorted_index_rank(idx, n)];
  }

  DenseTensor expand() const {
    std::vector<int> shape(ell, n);
    DenseTensor out = DenseTensor::zeros(shape);
    MultiIndex idx(ell, 0);
    const std::int64_t total = out.data.size();
    for (std::int64_t f = 0; f < total; ++f) {
      std::int64_t rem = f;
      for (int i = ell - 1; i >= 0; --i) {
        idx[i] = static_cast<int>(rem % n);
        rem /= n;
      }
      out.data[f] = at(idx);
    }
    return out;
  }
};

// Flattened v^{otimes ell}, entry at (j_1,...,j_ell) = prod v_{j_i}.
inline VectorXd outer_power(const VectorXd& v, int ell) {
  if (ell < 1) throw std::invalid_argument("outer_power: ell >= 1 required");
  VectorXd out = v;
  for (int i = 1; i < ell; ++i) {
    VectorXd next(out.size() * v.size());
    for (Eigen::Index a = 0; a < out.size(); ++a)
      next.segment(a * v.size(), v.size()) = out[a] * v;
    out = std::move(next);
  }
  return out;
}

// Pure monomial values over sorted multi-indices, no multinomial weights.
inline VectorXd monomial_vector(const VectorXd& x, int ell) {
  const int n = static_cast<int>(x.size());
  const auto idxs = sorted_multi_indices(n, ell);
  VectorXd out(static_cast<Eigen::Index>(idxs.size()));
  for (size_t i = 0; i < idxs.size(); ++i) {
    double p = 1.0;
    for (int j : idxs[i]) p *= x[j];
    out[static_cast<Eigen::Index>(i)] = p;
  }
  return out;
}

// Orthogonal projection of a cubic dense tensor onto symmetric tensors:
// coefficient at sorted J = average of T over all permutations of J.
inline SymTensor symmetrize(const DenseTensor& T) {
  if (!T.cubic()) throw std::invalid_argument("symmetrize: non-cubic shape");
  const int n = T.shape[0];
  const int ell = T.order();
  const auto idxs = sorted_multi_indices(n, ell);
  VectorXd coeffs(static_cast<Eigen::Index>(idxs.size()));
  for (size_t i = 0; i < idxs.size(); ++i) {
    MultiIndex perm = idxs[i];
    double sum = 0.0;
    std::int64_t count = 0;
    do {
      sum += T(perm);
      ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    coeffs[static_cast<Eigen::Index>(i)] = sum / static_cast<double>(count);
  }
  return SymTensor(n, ell, std::move(coeffs));
}

// <T, u_1 x ... x u_ell>.
inline double decoupled_eval(const SymTensor& T, const std::vector<VectorXd>& factors) {
  if (static_cast<int>(factors.size()) != T.ell)
    throw std::invalid_argument("decoupled_eval: factor count must equal order");
  for (const auto& u : factors)
    if (u.size() != T.n) throw std::invalid_argument("decoupled_eval: dimension mismatch");
  const int n = T.n;
  const int ell = T.ell;
  double total = 0.0;
  MultiIndex idx(ell, 0);
  const std::int64_t size = int_pow(n, ell);
  for (std::int64_t f = 0; f < size; ++f) {
    std::int64_t rem = f;
    double prod = 1.0;
    for (int i = ell - 1; i >= 0; --i) {
      idx[i] = static_cast<int>(rem % n);
      rem /= n;
      prod *= factors[i][idx[i]];
    }
    if (prod != 0.0) total += T.at(idx) * prod;
  }
  return total;
}

}  // namespace sta
