#include "kronsolve/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kronsolve/errors.hpp"

namespace kronsolve {

RowSketch RowSketch::identity(Index n) {
  RowSketch s;
  s.sample_count = n;
  s.rows.resize(static_cast<std::size_t>(n));
  std::iota(s.rows.begin(), s.rows.end(), Index{0});
  s.weights = Eigen::VectorXd::Ones(n);
  return s;
}

SparseDiagonal::SparseDiagonal(std::vector<Index> indices, Eigen::VectorXd values)
    : indices_(std::move(indices)), values_(std::move(values)) {
  if (static_cast<Index>(indices_.size()) != values_.size()) {
    throw InvalidInput("SparseDiagonal: index and value counts differ");
  }
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] < 0) throw InvalidInput("SparseDiagonal: negative index");
    if (k > 0 && indices_[k] <= indices_[k - 1]) {
      throw InvalidInput("SparseDiagonal: indices must be strictly increasing");
    }
  }
  if (!values_.allFinite()) throw InvalidInput("SparseDiagonal: non-finite value");
}

SparseDiagonal SparseDiagonal::from_sketch(const RowSketch& sketch) {
  const RowSketch merged = compress(sketch);
  return SparseDiagonal(merged.rows, merged.weights);
}

SparseDiagonal SparseDiagonal::identity(Index n) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  return SparseDiagonal(std::move(idx), Eigen::VectorXd::Ones(n));
}

RowSketch compress(const RowSketch& sketch) {
  const std::size_t s = sketch.rows.size();
  if (static_cast<Index>(s) != sketch.weights.size()) throw InvalidInput("RowSketch: rows/weights mismatch");
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sketch.rows[a] < sketch.rows[b]; });

  RowSketch out;
  out.sample_count = sketch.sample_count;
  std::vector<double> w;
  for (std::size_t k = 0; k < s; ++k) {
    const Index row = sketch.rows[order[k]];
    const double sq = sketch.weights(static_cast<Index>(order[k])) * sketch.weights(static_cast<Index>(order[k]));
    if (!out.rows.empty() && out.rows.back() == row) {
      w.back() += sq;
    } else {
      out.rows.push_back(row);
      w.push_back(sq);
    }
  }
  out.weights.resize(static_cast<Index>(w.size()));
  for (std::size_t k = 0; k < w.size(); ++k) out.weights(static_cast<Index>(k)) = std::sqrt(w[k]);
  return out;
}

}  // namespace kronsolve
