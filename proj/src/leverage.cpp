#include "kronsolve/leverage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kronsolve/errors.hpp"
#include "kronsolve/kron_ops.hpp"

namespace kronsolve {

Eigen::VectorXd LeverageScores::distribution() const {
  const double total = scores.sum();
  if (!(total > 0.0)) throw InvalidInput("leverage scores sum to zero");
  return scores / total;
}

LeverageScores ridge_leverage_scores(const CompactSvd<double>& svd, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be a finite non-negative number");
  Eigen::VectorXd weight(svd.rank());
  for (Index k = 0; k < svd.rank(); ++k) {
    const double s2 = svd.sigma(k) * svd.sigma(k);
    weight(k) = s2 / (s2 + lambda);
  }
  LeverageScores out;
  out.scores = svd.u.cwiseAbs2() * weight;
  out.lambda = lambda;
  return out;
}

LeverageScores ridge_leverage_scores(const Eigen::MatrixXd& a, double lambda) {
  return ridge_leverage_scores(compact_svd(a), lambda);
}

Eigen::VectorXd leverage_from_gram_spectrum(const Eigen::MatrixXd& a, const GramSpectrum& spectrum) {
  if (spectrum.vectors.rows() != a.cols()) throw InvalidInput("spectrum does not match the matrix");
  const double top = spectrum.values.size() ? spectrum.values(0) : 0.0;
  if (!(top > 0.0)) throw InvalidInput("leverage scores of a zero matrix");
  Index rank = 0;
  while (rank < spectrum.values.size() && spectrum.values(rank) > 1e-12 * top) ++rank;
  const Eigen::MatrixXd u = a * spectrum.vectors.leftCols(rank) *
                            spectrum.values.head(rank).cwiseSqrt().cwiseInverse().asDiagonal();
  return u.rowwise().squaredNorm();
}

Eigen::VectorXd kron_ridge_leverage_scores(std::span<const CompactSvd<double>> svds, double lambda) {
  if (svds.empty()) throw InvalidInput("kron_ridge_leverage_scores needs at least one factor");
  if (!(lambda >= 0.0)) throw InvalidInput("lambda must be non-negative");
  std::vector<Eigen::MatrixXd> squares;
  std::vector<Eigen::VectorXd> sigma2;
  for (const auto& svd : svds) {
    squares.emplace_back(svd.u.cwiseAbs2());
    sigma2.emplace_back(svd.sigma.cwiseAbs2());
  }
  // Product of squared singular values over every rank multi-index t.
  Eigen::VectorXd prod = Eigen::VectorXd::Ones(1);
  for (const auto& s2 : sigma2) {
    Eigen::VectorXd next(prod.size() * s2.size());
    for (Index a = 0; a < prod.size(); ++a) next.segment(a * s2.size(), s2.size()) = prod(a) * s2;
    prod.swap(next);
  }
  const Eigen::VectorXd weight = prod.array() / (prod.array() + lambda);
  return kron_mat_mul<double>(std::span<const Eigen::MatrixXd>(squares), weight);
}

Index JlConfig::rows(Index n, double eps) const {
  const double nn = static_cast<double>(std::max<Index>(n, 2));
  switch (policy) {
    case Policy::log_scaled:
      if (!(c > 0.0)) throw InvalidInput("JL constant must be positive");
      return std::max<Index>(1, static_cast<Index>(std::ceil(c * std::log(nn))));
    case Policy::distortion_bound: {
      if (!(failure_prob > 0.0 && failure_prob < 1.0)) throw InvalidInput("JL failure probability must lie in (0, 1)");
      const double e = eps / 20.0;
      return static_cast<Index>(std::ceil(4.0 * std::log(2.0 * nn / failure_prob) / (e * e - e * e * e)));
    }
  }
  return 1;
}

LeverageScores approx_leverage_scores_jl(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_tilde,
                                         const Eigen::MatrixXd& gram_tilde, double eps, std::uint64_t seed,
                                         const JlConfig& config) {
  if (!(eps > 0.0 && eps <= 0.25)) throw InvalidInput("approx_leverage_scores_jl: eps must lie in (0, 1/4]");
  const Index d = a.cols();
  if (a_tilde.cols() != d || gram_tilde.rows() != d || gram_tilde.cols() != d) {
    throw InvalidInput("approx_leverage_scores_jl: dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_tilde);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigensolver failed on the approximate Gram matrix", 0);
  const auto& ev = es.eigenvalues();
  if (!(ev(0) > 1e-12 * std::max(ev(d - 1), 0.0)) || !(ev(d - 1) > 0.0)) {
    throw NumericalFailure("approximate Gram matrix is singular", 0);
  }
  const Eigen::MatrixXd m =
      (1.0 + eps / 4.0) * es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

  // G a_tilde with G (r x k) Gaussian equals G' R in distribution for a_tilde = Q R,
  // G' (r x d) Gaussian, so only the triangular factor is projected.
  const Index r = config.rows(a.rows(), eps);
  const Eigen::MatrixXd tri = Eigen::HouseholderQR<Eigen::MatrixXd>(a_tilde).matrixQR().topRows(
      std::min(d, a_tilde.rows())).triangularView<Eigen::Upper>();
  Rng rng(seed);
  Eigen::MatrixXd g(r, tri.rows());
  for (Index j = 0; j < g.cols(); ++j) {
    for (Index i = 0; i < r; ++i) g(i, j) = rng.normal();
  }
  const Eigen::MatrixXd proj = (g / std::sqrt(static_cast<double>(r))) * tri * m;  // r x d
  LeverageScores out;
  // ||proj a_i||^2 = a_i^T (proj^T proj) a_i, O(n d^2) instead of O(n d r).
  const Eigen::MatrixXd quad = proj.transpose() * proj;
  out.scores = ((a * quad).cwiseProduct(a)).rowwise().sum() / ((1.0 + eps / 4.0) * (1.0 - eps / 20.0));
  out.scores = out.scores.cwiseMax(0.0);
  out.approx_factor = 1.0 + eps / 2.0;
  return out;
}

namespace {

Index ceil_count(double x) {
  if (!std::isfinite(x) || x > 9.0e18) throw SizeGuardExceeded("sample count overflows");
  return std::max<Index>(1, static_cast<Index>(std::ceil(x)));
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
}

}  // namespace

Index spectral_sample_count(Index d, double eps, double delta, double beta, double alpha) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidInput("eps must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0, 1)");
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidInput("beta must lie in (0, 1]");
  check_alpha(alpha);
  const double dd = static_cast<double>(d);
  return ceil_count(alpha * kSpectralSampleConstant * dd * std::log(2.0 * dd / delta) / (beta * eps * eps));
}

Index regression_sample_count(Index d, double eps, double delta, double beta, double alpha) {
  if (!(eps > 0.0)) throw InvalidInput("eps must be positive");
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in [0, 1)");
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidInput("beta must lie in (0, 1]");
  check_alpha(alpha);
  const double dd = static_cast<double>(d);
  const double log_delta = delta > 0.0 ? std::log(1.0 / delta) : 1.0;
  return ceil_count(alpha * kRegressionSampleConstant * dd * std::log(40.0 * dd) * log_delta / (beta * eps));
}

DiscreteDistribution::DiscreteDistribution(const Eigen::VectorXd& weights) {
  if (weights.size() == 0) throw InvalidInput("distribution over zero outcomes");
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw InvalidInput("distribution weights must be finite and non-negative");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw InvalidInput("distribution weights are all zero");
  probabilities_ = weights / total;
  cdf_.resize(weights.size());
  double acc = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    acc += probabilities_(i);
    cdf_(i) = acc;
  }
  cdf_ /= acc;
  cdf_(cdf_.size() - 1) = 1.0;
}

Index DiscreteDistribution::sample(Rng& rng) const {
  const double u = rng.uniform();
  const double* begin = cdf_.data();
  const double* end = begin + cdf_.size();
  const auto idx = static_cast<Index>(std::upper_bound(begin, end, u) - begin);
  return std::min(idx, cdf_.size() - 1);
}

ProductSampler::ProductSampler(std::vector<DiscreteDistribution> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw InvalidInput("product sampler needs at least one factor");
  for (const auto& f : factors_) dims_.push_back(f.size());
  rows_ = checked_product(dims_);
}

double ProductSampler::probability(std::span<const Index> multi) const {
  if (multi.size() != factors_.size()) throw InvalidInput("multi-index has wrong order");
  double p = 1.0;
  for (std::size_t n = 0; n < factors_.size(); ++n) p *= factors_[n].probabilities()(multi[n]);
  return p;
}

double ProductSampler::probability(Index flat) const {
  Shape multi(dims_.size());
  unravel_index(flat, dims_, multi);
  return probability(multi);
}

Index ProductSampler::sample(Rng& rng) const {
  Index flat = 0;
  for (const auto& f : factors_) flat = flat * f.size() + f.sample(rng);
  return flat;
}

ProductSampler build_product_sampler(std::span<const LeverageScores> per_factor) {
  std::vector<DiscreteDistribution> dists;
  for (const auto& s : per_factor) dists.emplace_back(s.scores);
  return ProductSampler(std::move(dists));
}

ProductSampler build_product_sampler(const std::vector<Eigen::VectorXd>& per_factor) {
  std::vector<DiscreteDistribution> dists;
  for (const auto& s : per_factor) dists.emplace_back(s);
  return ProductSampler(std::move(dists));
}

namespace {

template <typename Draw, typename Prob>
RowSketch draw_sketch(Index s, std::uint64_t seed, Draw draw, Prob prob) {
  if (s < 1) throw InvalidInput("sample count must be at least 1");
  Rng rng(seed);
  RowSketch out;
  out.sample_count = s;
  out.rows.resize(static_cast<std::size_t>(s));
  out.weights.resize(s);
  for (Index t = 0; t < s; ++t) {
    const Index row = draw(rng);
    out.rows[static_cast<std::size_t>(t)] = row;
    out.weights(t) = 1.0 / std::sqrt(prob(row) * static_cast<double>(s));
  }
  return out;
}

}  // namespace

RowSketch sample_rows(const ProductSampler& sampler, Index s, std::uint64_t seed) {
  return draw_sketch(
      s, seed, [&](Rng& rng) { return sampler.sample(rng); }, [&](Index row) { return sampler.probability(row); });
}

RowSketch sample_rows(const DiscreteDistribution& dist, Index s, std::uint64_t seed) {
  return draw_sketch(
      s, seed, [&](Rng& rng) { return dist.sample(rng); }, [&](Index row) { return dist.probabilities()(row); });
}

SpectralApprox spectral_approx(const Eigen::MatrixXd& a, double eps, double delta, std::uint64_t seed, double alpha,
                               bool allow_exact) {
  const auto svd = compact_svd(a);
  if (svd.rank() == 0) throw InvalidInput("spectral approximation of a zero matrix");
  const Index s = spectral_sample_count(a.cols(), eps, delta, 1.0, alpha);
  SpectralApprox out;
  out.sample_count = s;
  if (allow_exact && s >= a.rows()) {
    out.matrix = a;
    out.exact = true;
    return out;
  }
  const DiscreteDistribution dist(ridge_leverage_scores(svd).scores);
  const RowSketch sketch = compress(sample_rows(dist, s, seed));
  out.matrix.resize(static_cast<Index>(sketch.rows.size()), a.cols());
  for (std::size_t t = 0; t < sketch.rows.size(); ++t) {
    out.matrix.row(static_cast<Index>(t)) = sketch.weights(static_cast<Index>(t)) * a.row(sketch.rows[t]);
  }
  return out;
}

}  // namespace kronsolve
