#pragma once

// Ridge leverage scores, JL-approximated scores, row-sampling sketches and the
// product distribution over rows of a Kronecker product.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "kronsolve/random.hpp"
#include "kronsolve/sketch.hpp"
#include "kronsolve/svd.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

/// Constant of the spectral-approximation sample bound s > 144 d ln(2d/delta) / (beta eps^2).
inline constexpr double kSpectralSampleConstant = 144.0;
/// Constant of the approximate-regression sample bound s >= 1680 d ln(40 d) / (beta eps).
inline constexpr double kRegressionSampleConstant = 1680.0;

struct LeverageScores {
  Eigen::VectorXd scores;
  double lambda = 0.0;
  /// Multiplicative accuracy of the scores; 1 for exact scores.
  double approx_factor = 1.0;

  /// beta of the normalized distribution as an overestimate of the true one.
  double beta() const noexcept { return 1.0 / (approx_factor * approx_factor); }
  Eigen::VectorXd distribution() const;
};

/// l_i = sum_k sigma_k^2 / (sigma_k^2 + lambda) * u_ik^2.
LeverageScores ridge_leverage_scores(const CompactSvd<double>& svd, double lambda = 0.0);
LeverageScores ridge_leverage_scores(const Eigen::MatrixXd& a, double lambda = 0.0);

/// Statistical leverage scores of A from the spectrum of A^T A: the rows of
/// A V sigma^-1 over the numerically nonzero part of the spectrum.
Eigen::VectorXd leverage_from_gram_spectrum(const Eigen::MatrixXd& a, const GramSpectrum& spectrum);

/// Ridge leverage scores of every row of A1 kron ... kron AN from the factor
/// SVDs alone. For lambda = 0 this is the product of the factor scores.
Eigen::VectorXd kron_ridge_leverage_scores(std::span<const CompactSvd<double>> svds, double lambda);

/// Row count of the Gaussian projection.
struct JlConfig {
  enum class Policy {
    /// r = ceil(c ln n)
    log_scaled,
    /// r large enough that all n norms are preserved to 1 +- eps/20 with
    /// probability 1 - failure_prob.
    distortion_bound,
  };
  Policy policy = Policy::log_scaled;
  double c = 8.0;
  double failure_prob = 0.01;

  Index rows(Index n, double eps) const;
};

/// Approximate leverage scores of A from a spectral approximation a_tilde of A
/// and its Gram matrix. Scores carry approx_factor 1 + eps/2.
LeverageScores approx_leverage_scores_jl(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_tilde,
                                         const Eigen::MatrixXd& gram_tilde, double eps, std::uint64_t seed,
                                         const JlConfig& config = {});

/// ceil(alpha * 144 d ln(2d/delta) / (beta eps^2))
Index spectral_sample_count(Index d, double eps, double delta, double beta = 1.0, double alpha = 1.0);
/// ceil(alpha * 1680 d ln(40 d) ln(1/delta) / (beta eps)); delta = 0 drops the log(1/delta) factor.
Index regression_sample_count(Index d, double eps, double delta, double beta = 1.0, double alpha = 1.0);

/// Finite distribution with inverse-CDF sampling.
class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(const Eigen::VectorXd& weights);

  Index size() const noexcept { return probabilities_.size(); }
  const Eigen::VectorXd& probabilities() const noexcept { return probabilities_; }
  const Eigen::VectorXd& cdf() const noexcept { return cdf_; }
  Index sample(Rng& rng) const;

 private:
  Eigen::VectorXd probabilities_;
  Eigen::VectorXd cdf_;
};

/// Joint distribution over multi-indices (i_1, ..., i_N) with P = prod_n p^(n)_{i_n}.
class ProductSampler {
 public:
  explicit ProductSampler(std::vector<DiscreteDistribution> factors);

  std::size_t order() const noexcept { return factors_.size(); }
  const DiscreteDistribution& factor(std::size_t n) const { return factors_[n]; }
  const Shape& dims() const noexcept { return dims_; }
  Index rows() const noexcept { return rows_; }

  double probability(std::span<const Index> multi) const;
  double probability(Index flat) const;
  /// A flat (row-major) multi-index.
  Index sample(Rng& rng) const;

 private:
  std::vector<DiscreteDistribution> factors_;
  Shape dims_;
  Index rows_ = 1;
};

ProductSampler build_product_sampler(std::span<const LeverageScores> per_factor);
ProductSampler build_product_sampler(const std::vector<Eigen::VectorXd>& per_factor);

/// SampleRows: s i.i.d. draws, sample j weighted 1 / sqrt(p_j s).
RowSketch sample_rows(const ProductSampler& sampler, Index s, std::uint64_t seed);
RowSketch sample_rows(const DiscreteDistribution& dist, Index s, std::uint64_t seed);

/// S A for the leverage-score sketch of the spectral-approximation bound, with
/// repeated rows merged. Returns A itself when the bound asks for at least as
/// many samples as A has rows and `allow_exact` is set.
struct SpectralApprox {
  Eigen::MatrixXd matrix;
  Index sample_count = 0;
  bool exact = false;
};
SpectralApprox spectral_approx(const Eigen::MatrixXd& a, double eps, double delta, std::uint64_t seed,
                               double alpha = 1.0, bool allow_exact = false);

inline Eigen::MatrixXd spectral_approx_rows(const Eigen::MatrixXd& a, double eps, double delta, std::uint64_t seed,
                                            double alpha = 1.0) {
  return spectral_approx(a, eps, delta, seed, alpha).matrix;
}

}  // namespace kronsolve
