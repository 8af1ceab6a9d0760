#include "kronsolve/tucker.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "kronsolve/errors.hpp"
#include "kronsolve/leverage.hpp"
#include "kronsolve/parallel.hpp"
#include "kronsolve/random.hpp"

namespace kronsolve {

namespace {

constexpr std::uint64_t kStreamInit = 0x5EED;
constexpr std::uint64_t kStreamWorkspace = 0x3A11;

void check_model_tensor(const TuckerModel& model, const Tensor& x) {
  if (model.shape() != x.shape()) {
    throw InvalidInput("model shape " + shape_string(model.shape()) + " does not match tensor shape " +
                       shape_string(x.shape()));
  }
}

std::vector<GramSpectrum> factor_spectra(const TuckerModel& model) {
  std::vector<GramSpectrum> out;
  for (const auto& a : model.factors()) out.push_back(gram_spectrum(a.transpose() * a));
  return out;
}

// x multiplied along every mode k != n by A^(k)^T.
Tensor project_other_modes(const Tensor& x, const TuckerModel& model, std::size_t n) {
  Tensor z = x;
  for (std::size_t k = 0; k < model.order(); ++k) {
    if (k != n) z = n_mode_product(z, model.factor(k).transpose(), static_cast<Index>(k));
  }
  return z;
}

}  // namespace

TuckerModel::TuckerModel(Tensor core, std::vector<Eigen::MatrixXd> factors, double lambda)
    : core_(std::move(core)), factors_(std::move(factors)), lambda_(lambda) {
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) throw InvalidInput("lambda must be a finite non-negative number");
  if (static_cast<Index>(factors_.size()) != core_.order()) {
    throw InvalidInput("core order " + std::to_string(core_.order()) + " does not match " +
                       std::to_string(factors_.size()) + " factors");
  }
  for (std::size_t n = 0; n < factors_.size(); ++n) {
    const auto& a = factors_[n];
    if (a.cols() != core_.dim(static_cast<Index>(n))) {
      throw InvalidInput("factor " + std::to_string(n) + " has " + std::to_string(a.cols()) +
                         " columns but the core has " + std::to_string(core_.dim(static_cast<Index>(n))));
    }
    if (a.cols() > a.rows()) throw InvalidInput("factor " + std::to_string(n) + " has more columns than rows");
    if (!a.allFinite()) throw InvalidInput("factor " + std::to_string(n) + " has non-finite entries");
  }
}

Shape TuckerModel::shape() const {
  Shape s;
  for (const auto& a : factors_) s.push_back(a.rows());
  return s;
}

void TuckerModel::set_core(Tensor core) {
  if (core.shape() != core_.shape()) throw InvalidInput("core shape cannot change");
  core_ = std::move(core);
}

void TuckerModel::set_factor(std::size_t n, Eigen::MatrixXd a) {
  const auto& old = factors_.at(n);
  if (a.rows() != old.rows() || a.cols() != old.cols()) throw InvalidInput("factor shape cannot change");
  if (!a.allFinite()) throw InvalidInput("factor has non-finite entries");
  factors_[n] = std::move(a);
}

RegressionConfig TuckerConfig::core_config(std::uint64_t stream_seed) const {
  RegressionConfig c;
  c.eps = std::min(eps, 0.25);
  c.delta = delta;
  c.alpha = alpha;
  c.mode = alpha < 1.0 ? SampleMode::practical : SampleMode::theoretical;
  c.max_richardson_iters = max_richardson_iters;
  c.residual_tol = residual_tol;
  c.seed = stream_seed;
  return c;
}

Eigen::MatrixXd FactorUpdateWorkspace::constraint_projector() const {
  Eigen::MatrixXd n = -g.transpose() * gn_pinv;
  n.diagonal().array() += 1.0;
  return n;
}

Eigen::VectorXd FactorUpdateWorkspace::apply_projector(const Eigen::VectorXd& z) const {
  return z - g.transpose() * (gn_pinv * z);
}

Eigen::VectorXd FactorUpdateWorkspace::apply_shifted_inverse(const Eigen::VectorXd& z) const {
  std::vector<Eigen::MatrixXd> v, vt;
  std::vector<Eigen::VectorXd> values;
  for (const auto& sp : gram_svds) {
    v.push_back(sp.vectors);
    vt.emplace_back(sp.vectors.transpose());
    values.push_back(sp.values);
  }
  Eigen::VectorXd rotated = kron_vec_square<double>(std::span<const Eigen::MatrixXd>(vt), z);
  // Walk the Kronecker product of eigenvalues in the same row-major order.
  Shape dims;
  for (const auto& vals : values) dims.push_back(vals.size());
  Shape idx(dims.size());
  for (Index i = 0; i < rotated.size(); ++i) {
    unravel_index(i, dims, idx);
    double prod = 1.0;
    for (std::size_t k = 0; k < dims.size(); ++k) prod *= values[k](idx[k]);
    rotated(i) /= prod + penalty_weight;
  }
  return kron_vec_square<double>(std::span<const Eigen::MatrixXd>(v), rotated);
}

Eigen::VectorXd FactorUpdateWorkspace::apply_m_pinv(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd bz = apply_shifted_inverse(z);
  return bz - binv_u * (woodbury_core_inverse * (v_term * bz));
}

Eigen::VectorXd FactorUpdateWorkspace::apply_m(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd ktk = kron_vec_square<double>(std::span<const Eigen::MatrixXd>(other_grams), z);
  const Eigen::VectorXd nz = apply_projector(z);
  return ktk + lambda * (gn_pinv.transpose() * (gn_pinv * z)) + penalty_weight * apply_projector(nz);
}

FactorUpdateWorkspace build_factor_workspace(const TuckerModel& model, std::size_t n, double eps, double lambda,
                                             std::uint64_t seed, std::span<const GramSpectrum> spectra) {
  if (model.order() < 2) throw InvalidInput("factor updates need a tensor of order at least 2");
  if (n >= model.order()) throw InvalidInput("mode " + std::to_string(n) + " out of range");
  if (!(eps > 0.0 && eps < 1.0 / 3.0)) throw InvalidInput("factor update eps must lie in (0, 1/3)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be a finite non-negative number");

  FactorUpdateWorkspace ws;
  ws.mode = n;
  ws.lambda = lambda;
  ws.eps = eps;
  ws.g = unfold(model.core(), static_cast<Index>(n));
  if (ws.g.squaredNorm() == 0.0) throw InvalidInput("core unfolding is zero");
  const auto gt_svd = compact_svd(Eigen::MatrixXd(ws.g.transpose()));
  ws.g_rank = gt_svd.rank();
  ws.gn_pinv = gt_svd.v * gt_svd.sigma.cwiseInverse().asDiagonal() * gt_svd.u.transpose();

  std::vector<GramSpectrum> computed;
  if (spectra.empty()) {
    computed = factor_spectra(model);
    spectra = computed;
  }
  if (spectra.size() != model.order()) throw InvalidInput("one cached spectrum per factor required");
  for (std::size_t k = 0; k < model.order(); ++k) {
    if (k == n) continue;
    ws.gram_svds.push_back(spectra[k]);
    ws.other_factors.push_back(model.factor(k));
    ws.other_grams.emplace_back(model.factor(k).transpose() * model.factor(k));
  }

  // Power iteration for the top eigenvalue of N (K^T K + lambda G^+ (G^T)^+) N.
  const Index r = ws.cols();
  double estimate = 0.0;
  if (ws.g_rank < r) {
    const auto op = [&](const Eigen::VectorXd& v) {
      const Eigen::VectorXd nv = ws.apply_projector(v);
      const Eigen::VectorXd inner = kron_vec_square<double>(std::span<const Eigen::MatrixXd>(ws.other_grams), nv) +
                                    lambda * (ws.gn_pinv.transpose() * (ws.gn_pinv * nv));
      return Eigen::VectorXd(ws.apply_projector(inner));
    };
    Rng rng(seed);
    Eigen::VectorXd v(r);
    for (Index i = 0; i < r; ++i) v(i) = rng.normal();
    v = ws.apply_projector(v);
    double norm = v.norm();
    if (norm > 0.0) {
      v /= norm;
      for (int it = 1; it <= kPowerIterations; ++it) {
        const Eigen::VectorXd y = op(v);
        const double next = v.dot(y);
        if (!std::isfinite(next)) throw NumericalFailure("power iteration broke down", it);
        const double change = std::abs(next - estimate);
        estimate = next;
        norm = y.norm();
        if (norm == 0.0) break;
        v = y / norm;
        if (change <= kPowerTolerance * std::abs(estimate)) break;
      }
    }
  }
  ws.penalty_norm_sq = std::max(0.0, estimate);
  ws.penalty_weight = (1.0 + 12.0 / eps) * ws.penalty_norm_sq * kPenaltySafety;
  // Any w works when the constraint is vacuous; w > 0 keeps K^T K + w I invertible.
  if (!(ws.penalty_weight > 0.0)) ws.penalty_weight = 1.0;

  const Eigen::MatrixXd u = ws.gn_pinv.transpose();  // G^+
  ws.binv_u.resize(r, u.cols());
  for (Index j = 0; j < u.cols(); ++j) ws.binv_u.col(j) = ws.apply_shifted_inverse(u.col(j));
  ws.v_term = lambda * ws.gn_pinv - ws.penalty_weight * ws.g;
  Eigen::MatrixXd core = ws.v_term * ws.binv_u;
  core.diagonal().array() += 1.0;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(core);
  if (!(lu.rcond() > 1e-13)) throw NumericalFailure("Woodbury core matrix is singular", 0);
  ws.woodbury_core_inverse = lu.inverse();
  return ws;
}

Eigen::MatrixXd naive_factor_update(const TuckerModel& model, const Tensor& x, std::size_t n) {
  check_model_tensor(model, x);
  if (n >= model.order()) throw InvalidInput("mode " + std::to_string(n) + " out of range");
  const Eigen::MatrixXd g = unfold(model.core(), static_cast<Index>(n));
  std::vector<Eigen::MatrixXd> grams;
  Index r_other = 1;
  for (std::size_t k = 0; k < model.order(); ++k) {
    if (k == n) continue;
    grams.emplace_back(model.factor(k).transpose() * model.factor(k));
    r_other *= model.factor(k).cols();
  }
  if (r_other > kExactGramGuard / std::max<Index>(r_other, 1)) {
    throw SizeGuardExceeded("naive factor update refuses R_{!=n} = " + std::to_string(r_other));
  }
  // K K^T = G (kron of Grams) G^T, and X_(n) K^T = (X x_{k!=n} A_k^T)_(n) G^T.
  Eigen::MatrixXd kkt = g * kron_mat_mul<double>(std::span<const Eigen::MatrixXd>(grams), g.transpose());
  kkt.diagonal().array() += model.lambda();
  const Eigen::MatrixXd xkt = unfold(project_other_modes(x, model, n), static_cast<Index>(n)) * g.transpose();
  return xkt * symmetric_pseudo_inverse(kkt);
}

Eigen::MatrixXd fast_factor_matrix_update(const TuckerModel& model, const Tensor& x, const FactorUpdateWorkspace& ws,
                                          const TuckerConfig& config) {
  check_model_tensor(model, x);
  if (!(config.eps > 0.0 && config.eps < 1.0 / 3.0)) throw InvalidInput("factor update eps must lie in (0, 1/3)");
  if (!(config.delta > 0.0 && config.delta < 1.0)) throw InvalidInput("delta must lie in (0, 1)");
  const std::size_t n = ws.mode;
  const Index rows = model.factor(n).rows();
  const Eigen::MatrixXd b = unfold(x, static_cast<Index>(n));
  const KroneckerFactors k(ws.other_factors);
  const double lambda = ws.lambda;
  const double w = ws.penalty_weight;

  const Index s = regression_sample_count(k.cols(), config.eps, config.delta / static_cast<double>(rows), 1.0,
                                          config.alpha);
  const bool exact = s >= k.rows();
  std::vector<Eigen::VectorXd> scores;
  if (!exact) {
    for (std::size_t j = 0; j < ws.other_factors.size(); ++j) {
      scores.push_back(leverage_from_gram_spectrum(ws.other_factors[j], ws.gram_svds[j]));
    }
  }
  const auto sampler = exact ? std::optional<ProductSampler>{} : std::optional<ProductSampler>(build_product_sampler(scores));
  const auto draw = [&](std::uint64_t stream) {
    if (exact) return SparseDiagonal::identity(k.rows());
    return SparseDiagonal::from_sketch(sample_rows(*sampler, s, derive_seed(config.seed, stream)));
  };
  std::optional<SketchedKronecker> shared;
  if (config.share_row_sketch || exact) shared.emplace(k, draw(0));

  RichardsonOptions opts;
  opts.damping = 1.0 - std::sqrt(config.eps);
  opts.max_iters = config.max_richardson_iters > 0 ? config.max_richardson_iters
                                                   : 8 * static_cast<int>(std::ceil(std::log(1.0 / config.eps)));
  opts.residual_tol = config.residual_tol;

  const auto project = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(v - ws.apply_projector(v)); };
  Eigen::MatrixXd out(rows, ws.g.rows());
  parallel_for(static_cast<std::size_t>(rows), [&](std::size_t i) {
    std::optional<SketchedKronecker> own;
    if (!shared) own.emplace(k, draw(static_cast<std::uint64_t>(i) + 1));
    const SketchedKronecker& sk = shared ? *shared : *own;
    const auto& diag = sk.diagonal();
    Eigen::VectorXd sb(diag.nnz());
    for (Index t = 0; t < diag.nnz(); ++t) {
      sb(t) = diag.values()(t) * b(static_cast<Index>(i), diag.indices()[static_cast<std::size_t>(t)]);
    }
    const Eigen::VectorXd rhs = sk.transpose_apply(sb);
    const auto normal = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
      return sk.normal_apply(z) + w * z + lambda * (ws.gn_pinv.transpose() * (ws.gn_pinv * z)) -
             w * (ws.gn_pinv.transpose() * (ws.g * z));
    };
    // Restricting the preconditioned step to range(G^T) keeps N z = 0 at every iterate.
    const auto precond = [&](const Eigen::VectorXd& r) { return project(ws.apply_m_pinv(project(r))); };
    const auto result = richardson_solve(normal, precond, rhs, opts);
    out.row(static_cast<Index>(i)) = (ws.gn_pinv * result.x).transpose();
  });
  return out;
}

Eigen::MatrixXd fast_factor_matrix_update(const TuckerModel& model, const Tensor& x, std::size_t n,
                                          const TuckerConfig& config, std::span<const GramSpectrum> spectra) {
  const auto ws = build_factor_workspace(model, n, config.eps, model.lambda(),
                                         derive_seed(config.seed, kStreamWorkspace), spectra);
  return fast_factor_matrix_update(model, x, ws, config);
}

Tensor core_update(const TuckerModel& model, const Tensor& x, SolverMode mode, const TuckerConfig& config,
                   std::span<const GramSpectrum> spectra) {
  check_model_tensor(model, x);
  const KroneckerFactors k(model.factors());
  SolveReport report;
  if (mode == SolverMode::exact) {
    report = kronmatmul_svd_solve(k, vectorize(x), model.lambda());
  } else {
    std::vector<GramSpectrum> computed;
    if (spectra.empty()) {
      computed = factor_spectra(model);
      spectra = computed;
    }
    report = fast_kronecker_regression(k, vectorize(x), config.core_config(config.seed), spectra);
  }
  return Tensor(model.core_shape(), std::move(report.solution));
}

Tensor reconstruct(const TuckerModel& model) {
  Tensor out = model.core();
  for (std::size_t n = 0; n < model.order(); ++n) out = n_mode_product(out, model.factor(n), static_cast<Index>(n));
  return out;
}

double relative_error(const TuckerModel& model, const Tensor& x) {
  check_model_tensor(model, x);
  const double denom = x.squared_norm();
  if (denom == 0.0) throw InvalidInput("relative error of a zero tensor");
  return (vectorize(reconstruct(model)) - vectorize(x)).squaredNorm() / denom;
}

double regularized_loss(const TuckerModel& model, const Tensor& x) {
  check_model_tensor(model, x);
  double penalty = model.core().squared_norm();
  for (const auto& a : model.factors()) penalty += a.squaredNorm();
  return (vectorize(reconstruct(model)) - vectorize(x)).squaredNorm() + model.lambda() * penalty;
}

TuckerModel initial_model(const Shape& shape, const Shape& core_shape, double lambda, std::uint64_t seed) {
  if (shape.size() != core_shape.size()) throw InvalidInput("core order must match the tensor order");
  Rng rng(seed);
  std::vector<Eigen::MatrixXd> factors;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    if (core_shape[n] < 1 || core_shape[n] > shape[n]) {
      throw InvalidInput("core shape " + shape_string(core_shape) + " must be componentwise within [1, " +
                         shape_string(shape) + "]");
    }
    Eigen::MatrixXd g(shape[n], core_shape[n]);
    for (Index j = 0; j < g.cols(); ++j) {
      for (Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    factors.emplace_back(qr.householderQ() * Eigen::MatrixXd::Identity(shape[n], core_shape[n]));
  }
  return TuckerModel(Tensor(core_shape), std::move(factors), lambda);
}

AlsResult tucker_als(const Tensor& x, const Shape& core_shape, double lambda, int sweeps, SolverMode mode,
                     const TuckerConfig& config) {
  if (sweeps < 1) throw InvalidInput("sweeps must be at least 1");
  if (x.order() < 2) throw InvalidInput("Tucker ALS needs a tensor of order at least 2");
  AlsResult res{initial_model(x.shape(), core_shape, lambda, derive_seed(config.seed, kStreamInit)), {}};
  TuckerModel& model = res.model;
  AlsReport& report = res.report;
  const auto record = [&](std::string label) {
    report.step_losses.push_back(regularized_loss(model, x));
    report.step_labels.push_back(std::move(label));
  };

  model.set_core(core_update(model, x, SolverMode::exact, config));
  record("init-core");
  std::vector<GramSpectrum> spectra = factor_spectra(model);

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t n = 0; n < model.order(); ++n) {
      Eigen::MatrixXd a;
      if (mode == SolverMode::exact) {
        a = naive_factor_update(model, x, n);
      } else {
        TuckerConfig step = config;
        step.seed = derive_seed(config.seed, (static_cast<std::uint64_t>(sweep) << 16) + 2 * n + 1);
        a = fast_factor_matrix_update(model, x, n, step, spectra);
      }
      model.set_factor(n, std::move(a));
      spectra[n] = gram_spectrum(model.factor(n).transpose() * model.factor(n));
      record("factor " + std::to_string(n));
    }
    TuckerConfig step = config;
    step.seed = derive_seed(config.seed, (static_cast<std::uint64_t>(sweep) << 16) + 0xFFFF);
    model.set_core(core_update(model, x, mode, step, spectra));
    record("core");
    report.sweep_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    report.sweep_losses.push_back(report.step_losses.back());
    report.sweep_rre.push_back(relative_error(model, x));
    report.sweeps = sweep + 1;
    if (config.stop_rel_change > 0.0 && report.sweep_losses.size() >= 2) {
      const double prev = report.sweep_losses[report.sweep_losses.size() - 2];
      const double cur = report.sweep_losses.back();
      if (std::abs(prev - cur) <= config.stop_rel_change * std::abs(prev)) break;
    }
  }
  report.rre = report.sweep_rre.back();
  return res;
}

}  // namespace kronsolve
