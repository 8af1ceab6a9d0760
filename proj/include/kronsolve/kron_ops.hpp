#pragma once

// Kronecker-structured products that never form A1 kron ... kron AN.

#include <Eigen/Dense>

#include <algorithm>
#include <span>
#include <vector>

#include "kronsolve/errors.hpp"
#include "kronsolve/sketch.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

/// Ordered factors A^(1), ..., A^(N) of K = A^(1) kron ... kron A^(N).
class KroneckerFactors {
 public:
  explicit KroneckerFactors(std::vector<Eigen::MatrixXd> factors);

  std::size_t size() const noexcept { return factors_.size(); }
  const Eigen::MatrixXd& operator[](std::size_t n) const { return factors_[n]; }
  std::span<const Eigen::MatrixXd> span() const noexcept { return factors_; }
  auto begin() const noexcept { return factors_.begin(); }
  auto end() const noexcept { return factors_.end(); }

  /// (I_1, ..., I_N)
  const Shape& row_dims() const noexcept { return row_dims_; }
  /// (R_1, ..., R_N)
  const Shape& col_dims() const noexcept { return col_dims_; }
  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }

  KroneckerFactors transposed() const;
  /// The factors with position `n` removed; requires N >= 2.
  KroneckerFactors without(std::size_t n) const;

 private:
  std::vector<Eigen::MatrixXd> factors_;
  Shape row_dims_, col_dims_;
  Index rows_ = 1, cols_ = 1;
};

/// (A1 kron ... kron AN) * B, computed by peeling off the rightmost factor
/// first: each step multiplies one mode of the reshaped block, so the cost is
/// O(K sum_n J_1...J_n I_n...I_N) for B with K columns.
template <typename Scalar, typename Derived>
MatrixX<Scalar> kron_mat_mul(std::span<const MatrixX<Scalar>> factors, const Eigen::MatrixBase<Derived>& b) {
  if (factors.empty()) throw InvalidInput("kron_mat_mul needs at least one factor");
  Index in_total = 1;
  for (const auto& f : factors) in_total *= f.cols();
  if (b.rows() != in_total) {
    throw InvalidInput("kron_mat_mul: B has " + std::to_string(b.rows()) + " rows, expected " +
                       std::to_string(in_total));
  }
  const Index k = b.cols();
  const std::size_t n_factors = factors.size();

  // Layout (K, d_1, ..., d_N) row-major; the column-major J x K input already is.
  Shape dims(n_factors);
  for (std::size_t n = 0; n < n_factors; ++n) dims[n] = factors[n].cols();
  const MatrixX<Scalar> dense_b = b;
  VectorX<Scalar> cur = Eigen::Map<const VectorX<Scalar>>(dense_b.data(), dense_b.size());
  VectorX<Scalar> next;
  for (std::size_t n = n_factors; n-- > 0;) {
    Index left = k, right = 1;
    for (std::size_t j = 0; j < n; ++j) left *= dims[j];
    for (std::size_t j = n + 1; j < n_factors; ++j) right *= dims[j];
    next.resize(left * factors[n].rows() * right);
    detail::apply_mode(cur.data(), next.data(), left, dims[n], right, factors[n]);
    dims[n] = factors[n].rows();
    cur.swap(next);
  }
  const Index out_rows = cur.size() / std::max<Index>(k, 1);
  return Eigen::Map<const MatrixX<Scalar>>(cur.data(), out_rows, k);
}

template <typename Derived>
Eigen::MatrixXd kron_mat_mul(const KroneckerFactors& factors, const Eigen::MatrixBase<Derived>& b) {
  return kron_mat_mul<double>(factors.span(), b);
}

/// (A1 kron ... kron AN) c for square factors via the column-stacking
/// identity vec(B C A^T) = (A kron B) vec(C): each round multiplies one factor
/// against the reshaped vector and rotates the index order, O(R sum_n R_n).
template <typename Scalar, typename Derived>
VectorX<Scalar> kron_vec_square(std::span<const MatrixX<Scalar>> factors, const Eigen::MatrixBase<Derived>& c) {
  if (factors.empty()) throw InvalidInput("kron_vec_square needs at least one factor");
  Index total = 1;
  for (const auto& f : factors) {
    if (f.rows() != f.cols()) throw InvalidInput("kron_vec_square: factors must be square");
    total *= f.rows();
  }
  if (c.cols() != 1 || c.rows() != total) throw InvalidInput("kron_vec_square: vector length mismatch");
  VectorX<Scalar> cur = c;
  for (std::size_t n = factors.size(); n-- > 0;) {
    const Index rn = factors[n].rows();
    const Index rest = total / rn;
    Eigen::Map<const MatrixX<Scalar>> mat(cur.data(), rn, rest);
    const MatrixX<Scalar> product_t = (factors[n] * mat).transpose();
    cur = Eigen::Map<const VectorX<Scalar>>(product_t.data(), total);
  }
  return cur;
}

template <typename Derived>
Eigen::VectorXd kron_vec_square(const KroneckerFactors& factors, const Eigen::MatrixBase<Derived>& c) {
  return kron_vec_square<double>(factors.span(), c);
}

/// Row (i_1, ..., i_N) of the Kronecker product restricted to the factors in `group`.
Eigen::RowVectorXd kron_row(const KroneckerFactors& factors, std::span<const std::size_t> group,
                            std::span<const Index> row_index);
Eigen::RowVectorXd kron_row(const KroneckerFactors& factors, std::span<const Index> row_index);

/// Split of the factor positions into two groups.
struct FactorPartition {
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  Index left_product = 1;
  Index right_product = 1;

  Index objective() const noexcept { return std::max(left_product, right_product); }
};

inline constexpr std::size_t kMaxPartitionFactors = 30;

/// Exhaustive minimizer of max(prod_{T} R_n, prod_{not T} R_n). Ties go to the
/// smaller left product, then the lexicographically smaller index list.
FactorPartition balanced_partition(std::span<const Index> col_dims);

/// Precomputed S K structure for a fixed sparse diagonal S: both applications
/// run over the partition reshape and only touch sampled rows.
class SketchedKronecker {
 public:
  SketchedKronecker(const KroneckerFactors& factors, SparseDiagonal diag);

  /// S K c, one value per nonzero of S.
  Eigen::VectorXd apply(const Eigen::VectorXd& c) const;
  /// K^T S v, where v is aligned with the nonzeros of S.
  Eigen::VectorXd transpose_apply(const Eigen::VectorXd& v) const;
  /// K^T S^2 K x.
  Eigen::VectorXd normal_apply(const Eigen::VectorXd& x) const { return transpose_apply(apply(x)); }

  const SparseDiagonal& diagonal() const noexcept { return diag_; }
  const FactorPartition& partition() const noexcept { return partition_; }
  bool uses_dense_fallback() const noexcept { return dense_fallback_; }

 private:
  KroneckerFactors factors_;
  SparseDiagonal diag_;
  FactorPartition partition_;
  bool dense_fallback_ = false;
  Index cols_ = 0;

  // Compact ids of each nonzero's left/right row groups.
  std::vector<Index> left_id_, right_id_;
  Eigen::MatrixXd left_rows_;   // |S1| x R_L
  Eigen::MatrixXd right_rows_;  // |S2| x R_R
  // Column offsets of a (r_L, r_R) pair in the original column order.
  std::vector<Index> left_offset_, right_offset_;
};

/// K^T S b where b_values(t) is the entry of b at diag.indices()[t].
Eigen::VectorXd sketched_kron_transpose_apply(const KroneckerFactors& factors, const SparseDiagonal& diag,
                                              const Eigen::VectorXd& b_values);

/// Entries of S K c at the nonzeros of S.
Eigen::VectorXd sketched_kron_apply(const KroneckerFactors& factors, const SparseDiagonal& diag,
                                    const Eigen::VectorXd& c);

/// Dense s x R matrix S K: row t is weight_t times the Kronecker row of sample t.
Eigen::MatrixXd sketch_rows_of_kron(const KroneckerFactors& factors, const RowSketch& sketch);

}  // namespace kronsolve
