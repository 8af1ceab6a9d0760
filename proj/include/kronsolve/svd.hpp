#pragma once

// Compact SVD by one-sided (Hestenes) Jacobi rotations, the pseudoinverse built
// on it, and a symmetric eigendecomposition helper for Gram matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "kronsolve/errors.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr int kMaxJacobiSweeps = 100;

/// A = u * diag(sigma) * v^T with u (n x r) and v (d x r) orthonormal and
/// sigma strictly positive, non-increasing.
template <typename Scalar>
struct CompactSvd {
  MatrixX<Scalar> u;
  VectorX<Scalar> sigma;
  MatrixX<Scalar> v;
  Scalar rank_tol = Scalar(kDefaultRankTol);

  Index rank() const noexcept { return sigma.size(); }
  MatrixX<Scalar> reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

namespace detail {

/// One-sided Jacobi on a tall (rows >= cols) matrix. Returns the rotated
/// columns in `w` and the accumulated rotations in `v`.
template <typename Scalar>
void hestenes_jacobi(MatrixX<Scalar>& w, MatrixX<Scalar>& v, int max_sweeps) {
  const Index n = w.cols();
  v.setIdentity(n, n);
  const Scalar frob = w.norm();
  if (frob == Scalar(0) || n < 2) return;
  const Scalar orth_tol = std::sqrt(Scalar(w.rows())) * std::numeric_limits<Scalar>::epsilon();
  // Columns below this norm are numerically zero relative to sigma_max and
  // are discarded by any rank_tol >= 1e-12.
  const Scalar zero_tol = Scalar(1e-12) * frob;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Scalar alpha = w.col(p).squaredNorm();
        const Scalar beta = w.col(q).squaredNorm();
        const Scalar gamma = w.col(p).dot(w.col(q));
        if (std::sqrt(alpha) <= zero_tol || std::sqrt(beta) <= zero_tol) continue;
        if (std::abs(gamma) <= orth_tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t = std::copysign(Scalar(1), zeta) / (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar s = c * t;
        for (Index i = 0; i < w.rows(); ++i) {
          const Scalar wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (Index i = 0; i < n; ++i) {
          const Scalar vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
  throw NumericalFailure("one-sided Jacobi SVD did not converge", max_sweeps);
}

}  // namespace detail

/// Compact SVD; singular values <= rank_tol * sigma_max are discarded.
template <typename Derived>
CompactSvd<typename Derived::Scalar> compact_svd(const Eigen::MatrixBase<Derived>& a,
                                                 typename Derived::Scalar rank_tol = kDefaultRankTol,
                                                 int max_sweeps = kMaxJacobiSweeps) {
  using Scalar = typename Derived::Scalar;
  if (!(rank_tol >= Scalar(0) && rank_tol < Scalar(1))) throw InvalidInput("rank_tol must lie in [0, 1)");
  if (!a.allFinite()) throw InvalidInput("compact_svd: input has non-finite entries");

  const bool wide = a.rows() < a.cols();
  MatrixX<Scalar> w = wide ? MatrixX<Scalar>(a.transpose()) : MatrixX<Scalar>(a);
  MatrixX<Scalar> rot;
  if (w.rows() > 2 * w.cols()) {
    // Rotate the small triangular factor of w = Q R, then map back through Q.
    const Eigen::HouseholderQR<MatrixX<Scalar>> qr(w);
    MatrixX<Scalar> r = qr.matrixQR().topRows(w.cols()).template triangularView<Eigen::Upper>();
    detail::hestenes_jacobi(r, rot, max_sweeps);
    const MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(w.rows(), w.cols());
    w = q * r;
  } else {
    detail::hestenes_jacobi(w, rot, max_sweeps);
  }

  const Index n = w.cols();
  VectorX<Scalar> norms(n);
  for (Index j = 0; j < n; ++j) norms(j) = w.col(j).norm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return norms(x) > norms(y); });

  const Scalar sigma_max = n > 0 ? norms(order.front()) : Scalar(0);
  Index rank = 0;
  for (Index j : order) {
    if (norms(j) > Scalar(0) && norms(j) > rank_tol * sigma_max) ++rank;
  }

  CompactSvd<Scalar> out;
  out.rank_tol = rank_tol;
  out.sigma.resize(rank);
  MatrixX<Scalar> left(w.rows(), rank), right(n, rank);
  for (Index k = 0; k < rank; ++k) {
    const Index j = order[static_cast<std::size_t>(k)];
    out.sigma(k) = norms(j);
    left.col(k) = w.col(j) / norms(j);
    right.col(k) = rot.col(j);
  }
  if (wide) {
    out.u = std::move(right);
    out.v = std::move(left);
  } else {
    out.u = std::move(left);
    out.v = std::move(right);
  }
  return out;
}

/// Moore-Penrose pseudoinverse V diag(1/sigma) U^T.
template <typename Derived>
MatrixX<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& a,
                                                 typename Derived::Scalar rank_tol = kDefaultRankTol) {
  const auto svd = compact_svd(a, rank_tol);
  return svd.v * svd.sigma.cwiseInverse().asDiagonal() * svd.u.transpose();
}

/// Full eigendecomposition of a symmetric PSD matrix: gram = vectors * diag(values) * vectors^T,
/// values non-increasing and clipped at zero. Unlike the compact SVD, `vectors` is square.
struct GramSpectrum {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

inline GramSpectrum gram_spectrum(const Eigen::MatrixXd& gram) {
  if (gram.rows() != gram.cols()) throw InvalidInput("gram_spectrum expects a square matrix");
  if (!gram.allFinite()) throw InvalidInput("gram_spectrum: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) throw NumericalFailure("symmetric eigensolver failed", 0);
  const Index n = gram.rows();
  GramSpectrum out{Eigen::MatrixXd(n, n), Eigen::VectorXd(n)};
  // Eigen returns ascending eigenvalues.
  for (Index k = 0; k < n; ++k) {
    out.values(k) = std::max(0.0, es.eigenvalues()(n - 1 - k));
    out.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  return out;
}

}  // namespace kronsolve
