#pragma once

// L2-regularized Tucker decomposition by alternating least squares, with exact
// and sketched core and factor updates.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kronsolve/kron_ops.hpp"
#include "kronsolve/solvers.hpp"
#include "kronsolve/svd.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

class TuckerModel {
 public:
  TuckerModel(Tensor core, std::vector<Eigen::MatrixXd> factors, double lambda);

  const Tensor& core() const noexcept { return core_; }
  const std::vector<Eigen::MatrixXd>& factors() const noexcept { return factors_; }
  const Eigen::MatrixXd& factor(std::size_t n) const { return factors_.at(n); }
  double lambda() const noexcept { return lambda_; }
  std::size_t order() const noexcept { return factors_.size(); }
  /// (I_1, ..., I_N)
  Shape shape() const;
  /// (R_1, ..., R_N)
  const Shape& core_shape() const noexcept { return core_.shape(); }

  void set_core(Tensor core);
  void set_factor(std::size_t n, Eigen::MatrixXd a);

 private:
  Tensor core_;
  std::vector<Eigen::MatrixXd> factors_;
  double lambda_;
};

enum class SolverMode { exact, fast };

struct TuckerConfig {
  double eps = 0.25;
  double delta = 0.05;
  /// Sample-count scale in (0, 1]; 1 is the theoretical count.
  double alpha = 1.0;
  int max_richardson_iters = 0;
  double residual_tol = 1e-9;
  std::uint64_t seed = 0;
  /// Draw one sketch per factor update instead of one per row.
  bool share_row_sketch = false;
  /// Stop early when the relative loss change of a sweep drops below this; 0 disables.
  double stop_rel_change = 0.0;

  RegressionConfig core_config(std::uint64_t seed) const;
};

/// Preprocessed operators for the sketched update of factor n.
struct FactorUpdateWorkspace {
  std::size_t mode = 0;
  double lambda = 0.0;
  double eps = 0.0;
  /// G = G_(n), R_n x R_{!=n}
  Eigen::MatrixXd g;
  /// (G^T)^+, R_n x R_{!=n}
  Eigen::MatrixXd gn_pinv;
  /// rank of G_(n)
  Index g_rank = 0;
  /// w
  double penalty_weight = 0.0;
  /// The power-iteration estimate of ||[K; sqrt(lambda) (G^T)^+] N^+||_2^2.
  double penalty_norm_sq = 0.0;
  /// (I + (lambda (G^T)^+ - w G) (K^T K + w I)^-1 G^+)^-1
  Eigen::MatrixXd woodbury_core_inverse;
  /// Gram spectra of A^(k), k != n, in factor order.
  std::vector<GramSpectrum> gram_svds;
  /// Factors A^(k), k != n, and their Grams.
  std::vector<Eigen::MatrixXd> other_factors;
  std::vector<Eigen::MatrixXd> other_grams;

  Index cols() const noexcept { return g.cols(); }
  /// N = I - G^T (G^T)^+ as a dense matrix.
  Eigen::MatrixXd constraint_projector() const;
  /// N z without forming N.
  Eigen::VectorXd apply_projector(const Eigen::VectorXd& z) const;
  /// (K^T K + w I)^-1 z
  Eigen::VectorXd apply_shifted_inverse(const Eigen::VectorXd& z) const;
  /// M^+ z through the Woodbury identity.
  Eigen::VectorXd apply_m_pinv(const Eigen::VectorXd& z) const;
  /// M z = (K^T K + lambda G^+ (G^T)^+ + w N^T N) z.
  Eigen::VectorXd apply_m(const Eigen::VectorXd& z) const;

  // B^-1 G^+ and lambda (G^T)^+ - w G, cached for apply_m_pinv.
  Eigen::MatrixXd binv_u;
  Eigen::MatrixXd v_term;
};

inline constexpr int kPowerIterations = 100;
inline constexpr double kPowerTolerance = 1e-6;
inline constexpr double kPenaltySafety = 1.05;

/// `spectra` holds the Gram spectra of all N factors; empty means compute them.
FactorUpdateWorkspace build_factor_workspace(const TuckerModel& model, std::size_t n, double eps, double lambda,
                                             std::uint64_t seed = 0, std::span<const GramSpectrum> spectra = {});

/// Exact per-row ridge solutions for factor n.
Eigen::MatrixXd naive_factor_update(const TuckerModel& model, const Tensor& x, std::size_t n);

/// Sketched, preconditioned update of factor n.
Eigen::MatrixXd fast_factor_matrix_update(const TuckerModel& model, const Tensor& x, std::size_t n,
                                          const TuckerConfig& config, std::span<const GramSpectrum> spectra = {});
/// Same with a prebuilt workspace.
Eigen::MatrixXd fast_factor_matrix_update(const TuckerModel& model, const Tensor& x, const FactorUpdateWorkspace& ws,
                                          const TuckerConfig& config);

/// Ridge-optimal core for fixed factors.
Tensor core_update(const TuckerModel& model, const Tensor& x, SolverMode mode, const TuckerConfig& config,
                   std::span<const GramSpectrum> spectra = {});

Tensor reconstruct(const TuckerModel& model);
/// ||X_hat - X||_F^2 / ||X||_F^2
double relative_error(const TuckerModel& model, const Tensor& x);
/// ||X_hat - X||_F^2 + lambda (||G||_F^2 + sum_n ||A^(n)||_F^2)
double regularized_loss(const TuckerModel& model, const Tensor& x);

struct AlsReport {
  /// Regularized loss after the initial core solve and after every block update.
  std::vector<double> step_losses;
  std::vector<std::string> step_labels;
  /// Loss at the end of each sweep.
  std::vector<double> sweep_losses;
  std::vector<double> sweep_seconds;
  /// Relative reconstruction error at the end of each sweep.
  std::vector<double> sweep_rre;
  double rre = 0.0;
  int sweeps = 0;
};

struct AlsResult {
  TuckerModel model;
  AlsReport report;
};

/// Column-orthonormalized Gaussian factors and a zero core.
TuckerModel initial_model(const Shape& shape, const Shape& core_shape, double lambda, std::uint64_t seed);

AlsResult tucker_als(const Tensor& x, const Shape& core_shape, double lambda, int sweeps, SolverMode mode,
                     const TuckerConfig& config = {});

}  // namespace kronsolve
