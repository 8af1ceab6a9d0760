#pragma once

#include <Eigen/Dense>

#include <vector>

#include "kronsolve/tensor.hpp"

namespace kronsolve {

/// The row-sampling matrix S of SampleRows, stored sparsely: sample t picks
/// row `rows[t]` (flat, row-major over the factor row dimensions) with weight
/// `weights(t)` = 1 / sqrt(p_row * s).
struct RowSketch {
  Index sample_count = 0;
  std::vector<Index> rows;
  Eigen::VectorXd weights;

  /// The sketch S = I over `n` rows (every row once, unit weight).
  static RowSketch identity(Index n);
};

/// A diagonal matrix given by its nonzeros; indices strictly increasing.
class SparseDiagonal {
 public:
  SparseDiagonal() = default;
  SparseDiagonal(std::vector<Index> indices, Eigen::VectorXd values);

  /// The diagonal D with D^2 = S^T S: duplicate samples of a row merge into
  /// one entry sqrt(sum of squared weights).
  static SparseDiagonal from_sketch(const RowSketch& sketch);

  /// All-ones diagonal over `n` rows.
  static SparseDiagonal identity(Index n);

  Index nnz() const noexcept { return static_cast<Index>(indices_.size()); }
  const std::vector<Index>& indices() const noexcept { return indices_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }

 private:
  std::vector<Index> indices_;
  Eigen::VectorXd values_;
};

/// Merges repeated rows of a sketch; the merged sketch has the same S^T S.
RowSketch compress(const RowSketch& sketch);

}  // namespace kronsolve
