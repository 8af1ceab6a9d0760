#pragma once

// Kronecker ridge regression: min_x ||K x - b||^2 + lambda ||x||^2 with
// K = A1 kron ... kron AN, solved exactly or by sketched Richardson iteration.

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kronsolve/kron_ops.hpp"
#include "kronsolve/leverage.hpp"
#include "kronsolve/svd.hpp"

namespace kronsolve {

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Exact solvers refuse larger problems unless forced.
inline constexpr Index kExactRowGuard = 100'000'000;
inline constexpr Index kExactGramGuard = 100'000'000;

/// M^+ = (V1 kron ... kron VN) diag(d) (V1 kron ... kron VN)^T.
struct KronPreconditioner {
  std::vector<Eigen::MatrixXd> v_factors;
  Eigen::VectorXd d_diag;
  double lambda = 0.0;

  /// d = (sigma_1^2 kron ... kron sigma_N^2 + lambda)^+ from per-factor Gram spectra.
  static KronPreconditioner from_spectra(std::span<const GramSpectrum> spectra, double lambda);

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

enum class SampleMode { theoretical, practical };

struct RegressionConfig {
  double eps = 0.1;
  double delta = 0.01;
  double lambda = 1e-3;
  /// Sample-count scale; only used in practical mode.
  double alpha = 1.0;
  SampleMode mode = SampleMode::theoretical;
  /// 0 selects 8 ceil(ln(1/eps)).
  int max_richardson_iters = 0;
  double residual_tol = 1e-9;
  std::uint64_t seed = 0;
  /// Solve exactly when the sketch would be at least as tall as K.
  bool exact_shortcut = true;
  JlConfig jl{};

  void validate() const;
  double effective_alpha() const { return mode == SampleMode::practical ? alpha : 1.0; }
  int richardson_iters() const;
};

struct SolveReport {
  Eigen::VectorXd solution;
  double loss = 0.0;
  int iterations = 0;
  Index sample_count = 0;
  std::chrono::duration<double> wall_time{0.0};
  bool exact_shortcut = false;
};

struct RichardsonOptions {
  double damping = 1.0;
  int max_iters = 100;
  /// Stop once the preconditioned residual falls below this fraction of its initial norm.
  double residual_tol = 1e-9;
  /// Starting point; zero when empty.
  Eigen::VectorXd x0;
  /// Called with (k, x^(k)) for k = 0 and after every update.
  std::function<void(int, const Eigen::VectorXd&)> observer;
};

struct RichardsonResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;
};

/// x <- x + damping * M^+ (rhs - normal(x)).
RichardsonResult richardson_solve(const LinearOperator& apply_normal, const LinearOperator& apply_precond,
                                  const Eigen::VectorXd& rhs, const RichardsonOptions& options = {});

/// Sketched solver: leverage-score sketch of K and preconditioned Richardson.
SolveReport fast_kronecker_regression(const KroneckerFactors& factors, const Eigen::VectorXd& b,
                                      const RegressionConfig& config);

/// Same, reusing exact Gram spectra of the factors (A_n^T A_n = V diag(values) V^T)
/// for both the preconditioner and the sampling distribution.
SolveReport fast_kronecker_regression(const KroneckerFactors& factors, const Eigen::VectorXd& b,
                                      const RegressionConfig& config, std::span<const GramSpectrum> spectra);

/// (K^T K + lambda I)^+ K^T b with K^T K = kron of the factor Grams.
SolveReport naive_normal_solve(const KroneckerFactors& factors, const Eigen::VectorXd& b, double lambda,
                               bool force = false);

/// (V kron ...) diag(sigma / (sigma^2 + lambda)) (U kron ...)^T b from factor SVDs.
SolveReport kronmatmul_svd_solve(const KroneckerFactors& factors, const Eigen::VectorXd& b, double lambda,
                                 bool force = false);

/// Sketch-and-solve ridge with exact product leverage scores; s from the
/// approximate-regression bound.
SolveReport sketch_and_solve_ridge(const KroneckerFactors& factors, const Eigen::VectorXd& b,
                                   const RegressionConfig& config);
/// Sketch-and-solve with a caller-supplied sketch.
SolveReport sketch_and_solve_ridge(const KroneckerFactors& factors, const Eigen::VectorXd& b, double lambda,
                                   const RowSketch& sketch);

/// ||K x - b||^2 + lambda ||x||^2
double ridge_loss(const KroneckerFactors& factors, const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                  double lambda);

/// Pseudoinverse of a symmetric PSD matrix through its eigendecomposition.
Eigen::MatrixXd symmetric_pseudo_inverse(const Eigen::MatrixXd& m, double rank_tol = 1e-12);

}  // namespace kronsolve
