#pragma once

// Dense order-N tensors and the multilinear primitives built on them.
//
// Storage convention: entries are stored row-major lexicographically by
// (i_1, ..., i_N), i.e. the last index varies fastest. With this ordering
//
//   vectorize(G x_1 A1 x_2 A2 ... x_N AN) == (A1 kron A2 kron ... kron AN) * vectorize(G)
//
// holds with the factors in their natural order, and the mode-n unfolding
// satisfies X_(n) = A_n G_(n) (kron_{k != n} A_k)^T.
//
// Modes are 0-based throughout the API.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kronsolve/errors.hpp"

namespace kronsolve {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Product of the entries of `dims`; throws on overflow of Index.
inline Index checked_product(std::span<const Index> dims) {
  Index p = 1;
  for (Index d : dims) {
    if (d < 0) throw InvalidInput("negative dimension");
    if (d != 0 && p > std::numeric_limits<Index>::max() / d) {
      throw SizeGuardExceeded("dimension product overflows");
    }
    p *= d;
  }
  return p;
}

inline std::string shape_string(std::span<const Index> dims) {
  std::string s = "(";
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(dims[k]);
  }
  return s + ")";
}

/// Row-major strides: stride[k] = prod_{j > k} dims[j].
inline Shape row_major_strides(std::span<const Index> dims) {
  Shape strides(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) strides[k - 1] = strides[k] * dims[k];
  return strides;
}

/// Splits a flat row-major index into its multi-index.
inline void unravel_index(Index flat, std::span<const Index> dims, std::span<Index> out) {
  for (std::size_t k = dims.size(); k-- > 0;) {
    out[k] = flat % dims[k];
    flat /= dims[k];
  }
}

inline Index ravel_index(std::span<const Index> idx, std::span<const Index> dims) {
  Index flat = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) flat = flat * dims[k] + idx[k];
  return flat;
}

template <typename Scalar>
class DenseTensor {
 public:
  using Vector = VectorX<Scalar>;

  DenseTensor() : shape_{1}, data_(Vector::Zero(1)) {}

  /// Zero tensor of the given shape.
  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_ = Vector::Zero(checked_product(shape_));
  }

  DenseTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != checked_product(shape_)) {
      throw InvalidInput("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
    }
    if (!data_.allFinite()) throw InvalidInput("tensor entries must be finite");
  }

  const Shape& shape() const noexcept { return shape_; }
  Index order() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index mode) const { return shape_.at(static_cast<std::size_t>(mode)); }
  Index size() const noexcept { return data_.size(); }
  const Vector& data() const noexcept { return data_; }

  Scalar operator()(std::span<const Index> idx) const { return data_(ravel_index(idx, shape_)); }
  Scalar operator()(std::initializer_list<Index> idx) const {
    return (*this)(std::span<const Index>(idx.begin(), idx.size()));
  }

  Scalar squared_norm() const { return data_.squaredNorm(); }

  bool operator==(const DenseTensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw InvalidInput("tensor order must be at least 1");
    for (Index d : shape_) {
      if (d <= 0) throw InvalidInput("tensor dimensions must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  Vector data_;
};

using Tensor = DenseTensor<double>;

namespace detail {

inline void check_mode(Index mode, Index order) {
  if (mode < 0 || mode >= order) {
    throw InvalidInput("mode " + std::to_string(mode) + " out of range for order " + std::to_string(order));
  }
}

inline std::pair<Index, Index> outer_extents(std::span<const Index> shape, Index mode) {
  Index left = 1, right = 1;
  for (Index k = 0; k < static_cast<Index>(shape.size()); ++k) {
    if (k < mode) left *= shape[static_cast<std::size_t>(k)];
    if (k > mode) right *= shape[static_cast<std::size_t>(k)];
  }
  return {left, right};
}

/// Multiplies every mode fiber of a row-major block layout (left, in_dim, right)
/// by `a` (out_dim x in_dim), writing the (left, out_dim, right) result.
template <typename Scalar, typename Derived>
void apply_mode(const Scalar* in, Scalar* out, Index left, Index in_dim, Index right,
                const Eigen::MatrixBase<Derived>& a) {
  const Index out_dim = a.rows();
  using ConstMap = Eigen::Map<const MatrixX<Scalar>>;
  using MutMap = Eigen::Map<MatrixX<Scalar>>;
  for (Index l = 0; l < left; ++l) {
    // A row-major in_dim x right slab is a column-major right x in_dim matrix.
    ConstMap slab(in + l * in_dim * right, right, in_dim);
    MutMap dest(out + l * out_dim * right, right, out_dim);
    dest.noalias() = slab * a.transpose();
  }
}

}  // namespace detail

/// Mode-`mode` unfolding: an I_mode x (prod_{k != mode} I_k) matrix whose columns
/// are the mode fibers, ordered lexicographically by the remaining indices.
template <typename Scalar>
MatrixX<Scalar> unfold(const DenseTensor<Scalar>& x, Index mode) {
  detail::check_mode(mode, x.order());
  const Index n = x.dim(mode);
  const auto [left, right] = detail::outer_extents(x.shape(), mode);
  MatrixX<Scalar> m(n, left * right);
  const Scalar* src = x.data().data();
  for (Index l = 0; l < left; ++l) {
    for (Index i = 0; i < n; ++i) {
      m.row(i).segment(l * right, right) =
          Eigen::Map<const VectorX<Scalar>>(src + (l * n + i) * right, right).transpose();
    }
  }
  return m;
}

/// Inverse of unfold.
template <typename Derived>
DenseTensor<typename Derived::Scalar> fold(const Eigen::MatrixBase<Derived>& m, Shape shape, Index mode) {
  using Scalar = typename Derived::Scalar;
  detail::check_mode(mode, static_cast<Index>(shape.size()));
  const Index n = shape[static_cast<std::size_t>(mode)];
  const auto [left, right] = detail::outer_extents(shape, mode);
  if (m.rows() != n || m.cols() != left * right) {
    throw InvalidInput("cannot fold a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       " matrix into shape " + shape_string(shape) + " along mode " + std::to_string(mode));
  }
  VectorX<Scalar> data(n * left * right);
  for (Index l = 0; l < left; ++l) {
    for (Index i = 0; i < n; ++i) {
      data.segment((l * n + i) * right, right) = m.row(i).segment(l * right, right).transpose();
    }
  }
  return DenseTensor<Scalar>(std::move(shape), std::move(data));
}

template <typename Scalar>
const VectorX<Scalar>& vectorize(const DenseTensor<Scalar>& x) {
  return x.data();
}

template <typename Derived>
DenseTensor<typename Derived::Scalar> devectorize(const Eigen::MatrixBase<Derived>& v, Shape shape) {
  if (v.cols() != 1) throw InvalidInput("devectorize expects a column vector");
  return DenseTensor<typename Derived::Scalar>(std::move(shape), v);
}

/// Y = X x_mode A: every mode fiber of X is multiplied by A (J x I_mode).
template <typename Scalar, typename Derived>
DenseTensor<Scalar> n_mode_product(const DenseTensor<Scalar>& x, const Eigen::MatrixBase<Derived>& a, Index mode) {
  detail::check_mode(mode, x.order());
  if (a.cols() != x.dim(mode)) {
    throw InvalidInput("n_mode_product: matrix has " + std::to_string(a.cols()) + " columns but mode " +
                       std::to_string(mode) + " has size " + std::to_string(x.dim(mode)));
  }
  const auto [left, right] = detail::outer_extents(x.shape(), mode);
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(mode)] = a.rows();
  VectorX<Scalar> out(left * a.rows() * right);
  const MatrixX<Scalar> dense_a = a;
  detail::apply_mode(x.data().data(), out.data(), left, x.dim(mode), right, dense_a);
  return DenseTensor<Scalar>(std::move(out_shape), std::move(out));
}

/// Column-stacking reshape: the p x q matrix C with vec(C) == v, where vec stacks
/// columns. This is the convention of the identity vec(B C A^T) = (A kron B) vec(C)
/// and is distinct from the tensor ordering above.
template <typename Derived>
MatrixX<typename Derived::Scalar> reshape_columns(const Eigen::MatrixBase<Derived>& v, Index rows, Index cols) {
  if (v.cols() != 1 || v.rows() != rows * cols) {
    throw InvalidInput("reshape_columns: length " + std::to_string(v.size()) + " != " + std::to_string(rows) +
                       "x" + std::to_string(cols));
  }
  const VectorX<typename Derived::Scalar> dense = v;
  return Eigen::Map<const MatrixX<typename Derived::Scalar>>(dense.data(), rows, cols);
}

/// Column-stacking vec of a matrix.
template <typename Derived>
VectorX<typename Derived::Scalar> vec_columns(const Eigen::MatrixBase<Derived>& m) {
  const MatrixX<typename Derived::Scalar> dense = m;
  return Eigen::Map<const VectorX<typename Derived::Scalar>>(dense.data(), dense.size());
}

/// Default guard on the number of entries explicit_kron may materialize.
inline constexpr Index kExplicitKronGuard = 10'000'000;

/// Dense A1 kron ... kron AN. Only meant for oracles and small problems.
template <typename Scalar>
MatrixX<Scalar> explicit_kron(std::span<const MatrixX<Scalar>> factors, Index max_entries = kExplicitKronGuard) {
  if (factors.empty()) throw InvalidInput("explicit_kron needs at least one factor");
  Index rows = 1, cols = 1;
  for (const auto& f : factors) {
    rows *= f.rows();
    cols *= f.cols();
    if (rows > max_entries || cols > max_entries || rows * cols > max_entries) {
      throw SizeGuardExceeded("explicit_kron would exceed " + std::to_string(max_entries) + " entries");
    }
  }
  MatrixX<Scalar> k = factors[0];
  for (std::size_t n = 1; n < factors.size(); ++n) {
    const auto& b = factors[n];
    MatrixX<Scalar> next(k.rows() * b.rows(), k.cols() * b.cols());
    for (Index i = 0; i < k.rows(); ++i) {
      for (Index j = 0; j < k.cols(); ++j) {
        next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = k(i, j) * b;
      }
    }
    k = std::move(next);
  }
  return k;
}

template <typename Scalar>
MatrixX<Scalar> explicit_kron(const std::vector<MatrixX<Scalar>>& factors, Index max_entries = kExplicitKronGuard) {
  return explicit_kron(std::span<const MatrixX<Scalar>>(factors), max_entries);
}

}  // namespace kronsolve
