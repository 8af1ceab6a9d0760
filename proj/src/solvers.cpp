#include "kronsolve/solvers.hpp"

#include <cmath>
#include <string>

#include "kronsolve/errors.hpp"
#include "kronsolve/random.hpp"

namespace kronsolve {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kStreamSpectral = 1;
constexpr std::uint64_t kStreamJl = 101;
constexpr std::uint64_t kStreamSketch = 1001;

// `full` scans all of b; the sketched paths check only the entries they read.
void check_rhs(const KroneckerFactors& factors, const Eigen::VectorXd& b, bool full = true) {
  if (b.size() != factors.rows()) {
    throw InvalidInput("b has length " + std::to_string(b.size()) + ", expected " + std::to_string(factors.rows()));
  }
  if (full && !b.allFinite()) throw InvalidInput("b has non-finite entries");
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be a finite non-negative number");
}

void check_exact_size(const KroneckerFactors& factors, bool gram, bool force) {
  if (force) return;
  if (factors.rows() > kExactRowGuard) {
    throw SizeGuardExceeded("exact solver refuses " + std::to_string(factors.rows()) + " rows (limit " +
                            std::to_string(kExactRowGuard) + "); pass force to override");
  }
  if (gram && factors.cols() > kExactGramGuard / factors.cols()) {
    throw SizeGuardExceeded("exact solver refuses a " + std::to_string(factors.cols()) +
                            "^2 normal matrix; pass force to override");
  }
}

// Elementwise Kronecker product of vectors v1 kron ... kron vN.
Eigen::VectorXd kron_vectors(std::span<const Eigen::VectorXd> vs) {
  Eigen::VectorXd out = Eigen::VectorXd::Ones(1);
  for (const auto& v : vs) {
    Eigen::VectorXd next(out.size() * v.size());
    for (Index a = 0; a < out.size(); ++a) next.segment(a * v.size(), v.size()) = out(a) * v;
    out.swap(next);
  }
  return out;
}

std::vector<Eigen::MatrixXd> transposes(std::span<const Eigen::MatrixXd> ms) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.emplace_back(m.transpose());
  return out;
}

SolveReport finish(const KroneckerFactors& factors, const Eigen::VectorXd& b, double lambda, Eigen::VectorXd x,
                   Clock::time_point start) {
  SolveReport r;
  // The clock stops before the O(rows) loss evaluation.
  r.wall_time = Clock::now() - start;
  r.loss = ridge_loss(factors, x, b, lambda);
  r.solution = std::move(x);
  return r;
}

// Sketch, Richardson and loss once the spectra and sampling distribution are fixed.
SolveReport sketched_richardson(const KroneckerFactors& factors, const Eigen::VectorXd& b,
                                const RegressionConfig& config, std::span<const GramSpectrum> spectra,
                                const ProductSampler& sampler, Clock::time_point start) {
  const Index s = regression_sample_count(factors.cols(), config.eps, config.delta, 1.0, config.effective_alpha());
  if (config.exact_shortcut && s >= factors.rows()) {
    const auto solve_start = Clock::now();
    SolveReport r = kronmatmul_svd_solve(factors, b, config.lambda, true);
    r.sample_count = factors.rows();
    r.exact_shortcut = true;
    r.wall_time += solve_start - start;
    return r;
  }

  const auto precond = KronPreconditioner::from_spectra(spectra, config.lambda);
  const SparseDiagonal diag =
      SparseDiagonal::from_sketch(sample_rows(sampler, s, derive_seed(config.seed, kStreamSketch)));
  const SketchedKronecker sk(factors, diag);

  Eigen::VectorXd sb(diag.nnz());
  for (Index t = 0; t < diag.nnz(); ++t) sb(t) = diag.values()(t) * b(diag.indices()[static_cast<std::size_t>(t)]);
  if (!sb.allFinite()) throw InvalidInput("b has non-finite entries");
  const Eigen::VectorXd rhs = sk.transpose_apply(sb);

  const double lambda = config.lambda;
  RichardsonOptions opts;
  opts.damping = 1.0 - std::sqrt(config.eps);
  opts.max_iters = config.richardson_iters();
  opts.residual_tol = config.residual_tol;
  const auto result = richardson_solve(
      [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return sk.normal_apply(x) + lambda * x; },
      [&](const Eigen::VectorXd& x) { return precond.apply(x); }, rhs, opts);

  SolveReport r = finish(factors, b, lambda, result.x, start);
  r.iterations = result.iterations;
  r.sample_count = s;
  return r;
}

}  // namespace

KronPreconditioner KronPreconditioner::from_spectra(std::span<const GramSpectrum> spectra, double lambda) {
  check_lambda(lambda);
  if (spectra.empty()) throw InvalidInput("preconditioner needs at least one spectrum");
  KronPreconditioner p;
  p.lambda = lambda;
  std::vector<Eigen::VectorXd> values;
  for (const auto& sp : spectra) {
    p.v_factors.push_back(sp.vectors);
    values.push_back(sp.values);
  }
  const Eigen::VectorXd prod = kron_vectors(values);
  p.d_diag.resize(prod.size());
  for (Index i = 0; i < prod.size(); ++i) {
    const double denom = prod(i) + lambda;
    p.d_diag(i) = denom > 0.0 ? 1.0 / denom : 0.0;
  }
  return p;
}

Eigen::VectorXd KronPreconditioner::apply(const Eigen::VectorXd& x) const {
  const auto vt = transposes(v_factors);
  const Eigen::VectorXd rotated = kron_vec_square<double>(std::span<const Eigen::MatrixXd>(vt), x);
  return kron_vec_square<double>(std::span<const Eigen::MatrixXd>(v_factors), d_diag.cwiseProduct(rotated));
}

void RegressionConfig::validate() const {
  if (!(eps > 0.0 && eps <= 0.25)) throw InvalidInput("eps must lie in (0, 1/4]");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0, 1)");
  check_lambda(lambda);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  if (max_richardson_iters < 0) throw InvalidInput("max_richardson_iters must be non-negative");
  if (!(residual_tol >= 0.0)) throw InvalidInput("residual_tol must be non-negative");
}

int RegressionConfig::richardson_iters() const {
  if (max_richardson_iters > 0) return max_richardson_iters;
  return 8 * static_cast<int>(std::ceil(std::log(1.0 / eps)));
}

RichardsonResult richardson_solve(const LinearOperator& apply_normal, const LinearOperator& apply_precond,
                                  const Eigen::VectorXd& rhs, const RichardsonOptions& options) {
  if (options.max_iters < 0) throw InvalidInput("max_iters must be non-negative");
  RichardsonResult out;
  out.x = options.x0.size() == 0 ? Eigen::VectorXd::Zero(rhs.size()) : options.x0;
  if (out.x.size() != rhs.size()) throw InvalidInput("richardson_solve: starting point has the wrong length");
  if (options.observer) options.observer(0, out.x);

  Eigen::VectorXd step = apply_precond(rhs - apply_normal(out.x));
  if (step.size() != rhs.size()) throw InvalidInput("richardson_solve: operator dimensions are inconsistent");
  const double initial = step.norm();
  out.residual = initial;
  if (initial == 0.0) return out;

  std::vector<double> history{initial};
  for (int k = 1; k <= options.max_iters; ++k) {
    out.x += options.damping * step;
    out.iterations = k;
    if (options.observer) options.observer(k, out.x);
    step = apply_precond(rhs - apply_normal(out.x));
    out.residual = step.norm();
    if (!std::isfinite(out.residual)) throw NumericalFailure("Richardson iteration produced a non-finite residual", k);
    history.push_back(out.residual);
    if (out.residual <= options.residual_tol * initial) break;
    if (history.size() > 5) {
      const std::size_t last = history.size() - 1;
      bool rising = true;
      for (std::size_t j = last - 4; j <= last; ++j) rising = rising && history[j] > history[j - 1];
      if (rising && history[last] > 10.0 * history[last - 5]) {
        throw NumericalFailure("Richardson iteration diverged: residual " + std::to_string(history[last - 5]) +
                                   " -> " + std::to_string(history[last]),
                               k);
      }
    }
  }
  return out;
}

SolveReport fast_kronecker_regression(const KroneckerFactors& factors, const Eigen::VectorXd& b,
                                      const RegressionConfig& config) {
  const auto start = Clock::now();
  config.validate();
  check_rhs(factors, b, false);
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (factors[n].squaredNorm() == 0.0) throw InvalidInput("factor " + std::to_string(n) + " is the zero matrix");
  }

  const double order = static_cast<double>(factors.size());
  const double eps_n = std::log1p(config.eps / 4.0) / order;
  // Two-sided accuracy whose rescaling gives A^T A <= At^T At <= (1 + eps_n) A^T A.
  const double eps_two = eps_n / (2.0 + eps_n);
  const double eps_jl = std::min(0.25, 4.0 * eps_n);

  std::vector<GramSpectrum> spectra;
  std::vector<LeverageScores> scores;
  for (std::size_t n = 0; n < factors.size(); ++n) {
    const auto& a = factors[n];
    auto approx = spectral_approx(a, eps_two, config.delta, derive_seed(config.seed, kStreamSpectral + n),
                                  config.effective_alpha(), true);
    if (!approx.exact) approx.matrix /= std::sqrt(1.0 - eps_two);
    const Eigen::MatrixXd gram = approx.matrix.transpose() * approx.matrix;
    spectra.push_back(gram_spectrum(gram));
    scores.push_back(
        approx_leverage_scores_jl(a, approx.matrix, gram, eps_jl, derive_seed(config.seed, kStreamJl + n), config.jl));
  }
  const ProductSampler sampler = build_product_sampler(scores);
  return sketched_richardson(factors, b, config, spectra, sampler, start);
}

SolveReport fast_kronecker_regression(const KroneckerFactors& factors, const Eigen::VectorXd& b,
                                      const RegressionConfig& config, std::span<const GramSpectrum> spectra) {
  const auto start = Clock::now();
  config.validate();
  check_rhs(factors, b, false);
  if (spectra.size() != factors.size()) throw InvalidInput("one cached spectrum per factor required");

  std::vector<Eigen::VectorXd> scores;
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (spectra[n].vectors.rows() != factors[n].cols()) throw InvalidInput("cached spectrum does not match its factor");
    scores.push_back(leverage_from_gram_spectrum(factors[n], spectra[n]));
  }
  const ProductSampler sampler = build_product_sampler(scores);
  return sketched_richardson(factors, b, config, spectra, sampler, start);
}

SolveReport naive_normal_solve(const KroneckerFactors& factors, const Eigen::VectorXd& b, double lambda, bool force) {
  const auto start = Clock::now();
  check_lambda(lambda);
  check_rhs(factors, b);
  check_exact_size(factors, true, force);
  std::vector<Eigen::MatrixXd> grams;
  for (const auto& a : factors) grams.emplace_back(a.transpose() * a);
  Eigen::MatrixXd normal = explicit_kron<double>(grams, std::numeric_limits<Index>::max());
  normal.diagonal().array() += lambda;
  const Eigen::VectorXd ktb = kron_mat_mul(factors.transposed(), b);
  Eigen::VectorXd x = symmetric_pseudo_inverse(normal) * ktb;
  return finish(factors, b, lambda, std::move(x), start);
}

SolveReport kronmatmul_svd_solve(const KroneckerFactors& factors, const Eigen::VectorXd& b, double lambda,
                                 bool force) {
  const auto start = Clock::now();
  check_lambda(lambda);
  check_rhs(factors, b);
  check_exact_size(factors, false, force);
  std::vector<Eigen::MatrixXd> ut, v;
  std::vector<Eigen::VectorXd> sigma;
  for (const auto& a : factors) {
    auto svd = compact_svd(a);
    if (svd.rank() == 0) {
      // K = 0: the minimizer is x = 0.
      return finish(factors, b, lambda, Eigen::VectorXd::Zero(factors.cols()), start);
    }
    ut.emplace_back(svd.u.transpose());
    v.push_back(std::move(svd.v));
    sigma.push_back(std::move(svd.sigma));
  }
  const Eigen::VectorXd s = kron_vectors(sigma);
  Eigen::VectorXd scale(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    const double denom = s(i) * s(i) + lambda;
    scale(i) = denom > 0.0 ? s(i) / denom : 0.0;
  }
  const Eigen::VectorXd projected = kron_mat_mul<double>(std::span<const Eigen::MatrixXd>(ut), b);
  Eigen::VectorXd x = kron_mat_mul<double>(std::span<const Eigen::MatrixXd>(v), scale.cwiseProduct(projected));
  return finish(factors, b, lambda, std::move(x), start);
}

SolveReport sketch_and_solve_ridge(const KroneckerFactors& factors, const Eigen::VectorXd& b, double lambda,
                                   const RowSketch& sketch) {
  const auto start = Clock::now();
  check_lambda(lambda);
  check_rhs(factors, b, false);
  check_exact_size(factors, true, false);
  const RowSketch merged = compress(sketch);
  const Eigen::MatrixXd sk = sketch_rows_of_kron(factors, merged);
  Eigen::VectorXd sb(sk.rows());
  for (Index t = 0; t < sk.rows(); ++t) sb(t) = merged.weights(t) * b(merged.rows[static_cast<std::size_t>(t)]);
  if (!sb.allFinite()) throw InvalidInput("b has non-finite entries");
  Eigen::MatrixXd normal = sk.transpose() * sk;
  normal.diagonal().array() += lambda;
  Eigen::VectorXd x = symmetric_pseudo_inverse(normal) * (sk.transpose() * sb);
  SolveReport r = finish(factors, b, lambda, std::move(x), start);
  r.sample_count = sketch.sample_count;
  return r;
}

SolveReport sketch_and_solve_ridge(const KroneckerFactors& factors, const Eigen::VectorXd& b,
                                   const RegressionConfig& config) {
  const auto start = Clock::now();
  config.validate();
  check_rhs(factors, b, false);
  std::vector<LeverageScores> scores;
  for (const auto& a : factors) scores.push_back(ridge_leverage_scores(a));
  const ProductSampler sampler = build_product_sampler(scores);
  const Index s = regression_sample_count(factors.cols(), config.eps, 0.0, 1.0, config.effective_alpha());
  const bool exact = config.exact_shortcut && s >= factors.rows();
  const RowSketch sketch =
      exact ? RowSketch::identity(factors.rows()) : sample_rows(sampler, s, derive_seed(config.seed, kStreamSketch));
  const auto solve_start = Clock::now();
  SolveReport r = sketch_and_solve_ridge(factors, b, config.lambda, sketch);
  r.exact_shortcut = exact;
  r.wall_time += solve_start - start;
  return r;
}

double ridge_loss(const KroneckerFactors& factors, const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                  double lambda) {
  if (x.size() != factors.cols()) throw InvalidInput("ridge_loss: x has the wrong length");
  if (b.size() != factors.rows()) throw InvalidInput("ridge_loss: b has the wrong length");
  const Eigen::VectorXd kx = kron_mat_mul(factors, x);
  return (kx - b).squaredNorm() + lambda * x.squaredNorm();
}

Eigen::MatrixXd symmetric_pseudo_inverse(const Eigen::MatrixXd& m, double rank_tol) {
  const GramSpectrum sp = gram_spectrum(0.5 * (m + m.transpose()));
  const double top = sp.values.size() ? sp.values(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sp.values.size());
  for (Index i = 0; i < sp.values.size(); ++i) {
    if (sp.values(i) > rank_tol * top && sp.values(i) > 0.0) inv(i) = 1.0 / sp.values(i);
  }
  return sp.vectors * inv.asDiagonal() * sp.vectors.transpose();
}

}  // namespace kronsolve
