#include "kronsolve/kron_ops.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace kronsolve {

KroneckerFactors::KroneckerFactors(std::vector<Eigen::MatrixXd> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw InvalidInput("KroneckerFactors needs at least one factor");
  for (std::size_t n = 0; n < factors_.size(); ++n) {
    const auto& f = factors_[n];
    if (f.rows() == 0 || f.cols() == 0) throw InvalidInput("factor " + std::to_string(n) + " is empty");
    if (!f.allFinite()) throw InvalidInput("factor " + std::to_string(n) + " has non-finite entries");
    row_dims_.push_back(f.rows());
    col_dims_.push_back(f.cols());
  }
  rows_ = checked_product(row_dims_);
  cols_ = checked_product(col_dims_);
}

KroneckerFactors KroneckerFactors::transposed() const {
  std::vector<Eigen::MatrixXd> t;
  t.reserve(factors_.size());
  for (const auto& f : factors_) t.emplace_back(f.transpose());
  return KroneckerFactors(std::move(t));
}

KroneckerFactors KroneckerFactors::without(std::size_t n) const {
  if (factors_.size() < 2) throw InvalidInput("cannot drop the only factor");
  if (n >= factors_.size()) throw InvalidInput("factor position out of range");
  std::vector<Eigen::MatrixXd> rest;
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    if (k != n) rest.push_back(factors_[k]);
  }
  return KroneckerFactors(std::move(rest));
}

Eigen::RowVectorXd kron_row(const KroneckerFactors& factors, std::span<const std::size_t> group,
                            std::span<const Index> row_index) {
  if (row_index.size() != factors.size()) throw InvalidInput("kron_row: multi-index has wrong order");
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(1);
  for (std::size_t k : group) {
    const auto& f = factors[k];
    const Index i = row_index[k];
    if (i < 0 || i >= f.rows()) throw InvalidInput("kron_row: row index out of range");
    Eigen::RowVectorXd next(row.size() * f.cols());
    for (Index a = 0; a < row.size(); ++a) next.segment(a * f.cols(), f.cols()) = row(a) * f.row(i);
    row.swap(next);
  }
  return row;
}

Eigen::RowVectorXd kron_row(const KroneckerFactors& factors, std::span<const Index> row_index) {
  std::vector<std::size_t> all(factors.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return kron_row(factors, all, row_index);
}

FactorPartition balanced_partition(std::span<const Index> col_dims) {
  const std::size_t n = col_dims.size();
  if (n == 0) throw InvalidInput("balanced_partition needs at least one dimension");
  if (n > kMaxPartitionFactors) {
    throw SizeGuardExceeded("balanced_partition: " + std::to_string(n) + " factors exceeds the exhaustive-search limit of " +
                            std::to_string(kMaxPartitionFactors));
  }
  for (Index d : col_dims) {
    if (d <= 0) throw InvalidInput("balanced_partition: dimensions must be positive");
  }
  const Index total = checked_product(col_dims);

  FactorPartition best;
  bool have = false;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    FactorPartition cand;
    for (std::size_t k = 0; k < n; ++k) {
      if (mask >> k & 1U) {
        cand.left.push_back(k);
        cand.left_product *= col_dims[k];
      } else {
        cand.right.push_back(k);
      }
    }
    cand.right_product = total / cand.left_product;
    if (!have) {
      best = std::move(cand);
      have = true;
      continue;
    }
    if (cand.objective() != best.objective()) {
      if (cand.objective() < best.objective()) best = std::move(cand);
    } else if (cand.left_product != best.left_product) {
      if (cand.left_product < best.left_product) best = std::move(cand);
    } else if (cand.left < best.left) {
      best = std::move(cand);
    }
  }
  return best;
}

namespace {

struct GroupRows {
  std::vector<Index> id;       // per nonzero
  std::vector<Index> first;    // a representative nonzero per group
};

// Assigns compact ids to the distinct restrictions of the row multi-indices to `group`.
GroupRows group_rows(const std::vector<Index>& flat_rows, const Shape& row_dims, const std::vector<std::size_t>& group) {
  const std::size_t nnz = flat_rows.size();
  std::vector<Index> key(nnz);
  Shape idx(row_dims.size());
  for (std::size_t t = 0; t < nnz; ++t) {
    unravel_index(flat_rows[t], row_dims, idx);
    Index k = 0;
    for (std::size_t g : group) k = k * row_dims[g] + idx[g];
    key[t] = k;
  }
  std::vector<std::size_t> order(nnz);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });

  GroupRows out;
  out.id.resize(nnz);
  for (std::size_t p = 0; p < nnz; ++p) {
    const std::size_t t = order[p];
    if (p == 0 || key[t] != key[order[p - 1]]) out.first.push_back(static_cast<Index>(t));
    out.id[t] = static_cast<Index>(out.first.size()) - 1;
  }
  return out;
}

// Column offset, in the full column order, of each flat column index over `group`.
std::vector<Index> column_offsets(const Shape& col_dims, const std::vector<std::size_t>& group) {
  const Shape strides = row_major_strides(col_dims);
  std::vector<Index> offsets{0};
  for (std::size_t g : group) {
    std::vector<Index> next;
    next.reserve(offsets.size() * static_cast<std::size_t>(col_dims[g]));
    for (Index base : offsets) {
      for (Index j = 0; j < col_dims[g]; ++j) next.push_back(base + j * strides[g]);
    }
    offsets.swap(next);
  }
  return offsets;
}

}  // namespace

SketchedKronecker::SketchedKronecker(const KroneckerFactors& factors, SparseDiagonal diag)
    : factors_(factors), diag_(std::move(diag)), partition_(balanced_partition(factors.col_dims())),
      cols_(factors.cols()) {
  const auto& idx = diag_.indices();
  if (!idx.empty() && idx.back() >= factors_.rows()) {
    throw InvalidInput("sketch index " + std::to_string(idx.back()) + " out of range for " +
                       std::to_string(factors_.rows()) + " rows");
  }
  dense_fallback_ = diag_.nnz() > factors_.rows() / 2;
  if (dense_fallback_) return;

  const auto left = group_rows(idx, factors_.row_dims(), partition_.left);
  const auto right = group_rows(idx, factors_.row_dims(), partition_.right);
  left_id_ = left.id;
  right_id_ = right.id;

  Shape multi(factors_.size());
  left_rows_.resize(static_cast<Index>(left.first.size()), partition_.left_product);
  for (std::size_t g = 0; g < left.first.size(); ++g) {
    unravel_index(idx[static_cast<std::size_t>(left.first[g])], factors_.row_dims(), multi);
    left_rows_.row(static_cast<Index>(g)) = kron_row(factors_, partition_.left, multi);
  }
  right_rows_.resize(static_cast<Index>(right.first.size()), partition_.right_product);
  for (std::size_t g = 0; g < right.first.size(); ++g) {
    unravel_index(idx[static_cast<std::size_t>(right.first[g])], factors_.row_dims(), multi);
    right_rows_.row(static_cast<Index>(g)) = kron_row(factors_, partition_.right, multi);
  }
  left_offset_ = column_offsets(factors_.col_dims(), partition_.left);
  right_offset_ = column_offsets(factors_.col_dims(), partition_.right);
}

Eigen::VectorXd SketchedKronecker::apply(const Eigen::VectorXd& c) const {
  if (c.size() != cols_) throw InvalidInput("sketched apply: vector length mismatch");
  const auto& w = diag_.values();
  const Index nnz = diag_.nnz();
  Eigen::VectorXd out(nnz);
  if (dense_fallback_) {
    const Eigen::VectorXd full = kron_mat_mul(factors_, c);
    for (Index t = 0; t < nnz; ++t) out(t) = w(t) * full(diag_.indices()[static_cast<std::size_t>(t)]);
    return out;
  }
  if (nnz == 0) return out;
  const Index rl = partition_.left_product, rr = partition_.right_product;
  Eigen::MatrixXd gathered(rr, rl);
  for (Index cl = 0; cl < rl; ++cl) {
    const Index base = left_offset_[static_cast<std::size_t>(cl)];
    for (Index cr = 0; cr < rr; ++cr) gathered(cr, cl) = c(base + right_offset_[static_cast<std::size_t>(cr)]);
  }
  const Eigen::MatrixXd partial = right_rows_ * gathered;  // |S2| x R_L
  for (Index t = 0; t < nnz; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    out(t) = w(t) * partial.row(right_id_[ut]).dot(left_rows_.row(left_id_[ut]));
  }
  return out;
}

Eigen::VectorXd SketchedKronecker::transpose_apply(const Eigen::VectorXd& v) const {
  const Index nnz = diag_.nnz();
  if (v.size() != nnz) throw InvalidInput("sketched transpose apply: expected one value per nonzero");
  const auto& w = diag_.values();
  if (dense_fallback_) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(factors_.rows());
    for (Index t = 0; t < nnz; ++t) full(diag_.indices()[static_cast<std::size_t>(t)]) = w(t) * v(t);
    return kron_mat_mul(factors_.transposed(), full);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols_);
  if (nnz == 0) return out;
  const Index rl = partition_.left_product, rr = partition_.right_product;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rr, left_rows_.rows());
  for (Index t = 0; t < nnz; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    acc.col(left_id_[ut]) += (w(t) * v(t)) * right_rows_.row(right_id_[ut]).transpose();
  }
  const Eigen::MatrixXd full = acc * left_rows_;  // R_R x R_L
  for (Index cl = 0; cl < rl; ++cl) {
    const Index base = left_offset_[static_cast<std::size_t>(cl)];
    for (Index cr = 0; cr < rr; ++cr) out(base + right_offset_[static_cast<std::size_t>(cr)]) = full(cr, cl);
  }
  return out;
}

Eigen::VectorXd sketched_kron_transpose_apply(const KroneckerFactors& factors, const SparseDiagonal& diag,
                                              const Eigen::VectorXd& b_values) {
  return SketchedKronecker(factors, diag).transpose_apply(b_values);
}

Eigen::VectorXd sketched_kron_apply(const KroneckerFactors& factors, const SparseDiagonal& diag,
                                    const Eigen::VectorXd& c) {
  return SketchedKronecker(factors, diag).apply(c);
}

Eigen::MatrixXd sketch_rows_of_kron(const KroneckerFactors& factors, const RowSketch& sketch) {
  const auto s = static_cast<Index>(sketch.rows.size());
  if (sketch.weights.size() != s) throw InvalidInput("sketch_rows_of_kron: rows/weights mismatch");
  Eigen::MatrixXd out(s, factors.cols());
  Shape multi(factors.size());
  for (Index t = 0; t < s; ++t) {
    const Index r = sketch.rows[static_cast<std::size_t>(t)];
    if (r < 0 || r >= factors.rows()) throw InvalidInput("sketch_rows_of_kron: row index out of range");
    unravel_index(r, factors.row_dims(), multi);
    out.row(t) = sketch.weights(t) * kron_row(factors, multi);
  }
  return out;
}

}  // namespace kronsolve
