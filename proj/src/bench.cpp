#include "kronsolve/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "kronsolve/errors.hpp"
#include "kronsolve/parallel.hpp"
#include "kronsolve/random.hpp"
#include "kronsolve/solvers.hpp"
#include "kronsolve/tensor_io.hpp"

namespace kronsolve {

namespace {

Eigen::MatrixXd gaussian(Index rows, Index cols, Rng& rng, double mean = 0.0, double stddev = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal(mean, stddev);
  }
  return m;
}

SolveReport run_solver(SolverKind kind, const SynthRegression& inst, const ExperimentSpec& spec, std::uint64_t seed) {
  RegressionConfig cfg;
  cfg.eps = spec.eps;
  cfg.delta = spec.delta;
  cfg.lambda = spec.lambda;
  cfg.alpha = spec.alpha;
  cfg.mode = spec.alpha < 1.0 ? SampleMode::practical : SampleMode::theoretical;
  cfg.seed = seed;
  switch (kind) {
    case SolverKind::naive:
      return naive_normal_solve(inst.factors, inst.b, spec.lambda, spec.force);
    case SolverKind::kronmatmul:
      return kronmatmul_svd_solve(inst.factors, inst.b, spec.lambda, spec.force);
    case SolverKind::sketch_solve:
      return sketch_and_solve_ridge(inst.factors, inst.b, cfg);
    case SolverKind::fast:
      return fast_kronecker_regression(inst.factors, inst.b, cfg);
  }
  throw InvalidInput("unknown solver");
}

}  // namespace

SynthRegression generate_synth_regression(Index n, Index d, Index order, std::uint64_t seed) {
  if (d < 1 || n < d) throw InvalidInput("synthetic regression needs n >= d >= 1");
  if (order < 1) throw InvalidInput("synthetic regression needs at least one factor");
  std::vector<Eigen::MatrixXd> factors;
  for (Index k = 0; k < order; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    factors.push_back(gaussian(n, d, rng, 1.0, std::sqrt(0.001)));
  }
  KroneckerFactors kf(std::move(factors));
  Eigen::VectorXd b = Eigen::VectorXd::Ones(kf.rows());
  return {std::move(kf), std::move(b)};
}

Tensor generate_low_rank_tensor(const Shape& shape, const Shape& rank, double noise, std::uint64_t seed) {
  if (shape.size() != rank.size()) throw InvalidInput("rank order must match the tensor order");
  if (!(noise >= 0.0)) throw InvalidInput("noise level must be non-negative");
  Rng rng(seed);
  Eigen::VectorXd core(checked_product(rank));
  for (Index i = 0; i < core.size(); ++i) core(i) = rng.normal();
  Tensor x(rank, core);
  for (std::size_t n = 0; n < shape.size(); ++n) {
    if (rank[n] < 1 || rank[n] > shape[n]) throw InvalidInput("rank must lie in [1, dimension]");
    x = n_mode_product(x, gaussian(shape[n], rank[n], rng), static_cast<Index>(n));
  }
  if (noise == 0.0) return x;
  Eigen::VectorXd e(x.size());
  for (Index i = 0; i < e.size(); ++i) e(i) = rng.normal();
  const double scale = noise * std::sqrt(x.squared_norm()) / e.norm();
  return Tensor(x.shape(), x.data() + scale * e);
}

std::string solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::naive:
      return "naive";
    case SolverKind::kronmatmul:
      return "kronmatmul";
    case SolverKind::sketch_solve:
      return "sketch-solve";
    case SolverKind::fast:
      return "fast";
  }
  return "?";
}

SolverKind parse_solver(const std::string& name) {
  for (auto k : {SolverKind::naive, SolverKind::kronmatmul, SolverKind::sketch_solve, SolverKind::fast}) {
    if (solver_name(k) == name) return k;
  }
  throw InvalidInput("unknown solver '" + name + "' (expected naive, kronmatmul, sketch-solve or fast)");
}

void ExperimentSpec::validate() const {
  if (d < 1 || n < d) throw InvalidInput("need n >= d >= 1");
  if (order < 1) throw InvalidInput("order must be at least 1");
  if (!(lambda >= 0.0)) throw InvalidInput("lambda must be non-negative");
  if (!(eps > 0.0 && eps <= 0.25)) throw InvalidInput("eps must lie in (0, 1/4]");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  if (seeds.empty()) throw InvalidInput("at least one seed is required");
  if (solvers.empty()) throw InvalidInput("at least one solver is required");
  if (repetitions < 1) throw InvalidInput("repetitions must be at least 1");
}

std::vector<ResultRow> run_regression_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::size_t n_seeds = spec.seeds.size();
  std::vector<SynthRegression> instances;
  for (auto seed : spec.seeds) instances.push_back(generate_synth_regression(spec.n, spec.d, spec.order, seed));

  // Exact optimum per seed, outside the timed region.
  std::vector<double> opt(n_seeds, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n_seeds; ++i) {
    try {
      opt[i] = kronmatmul_svd_solve(instances[i].factors, instances[i].b, spec.lambda, spec.force).loss;
    } catch (const Error&) {
    }
  }

  const std::size_t cells = n_seeds * spec.solvers.size();
  std::vector<ResultRow> rows(cells);
  const auto run_cell = [&](std::size_t c) {
    const std::size_t si = c / spec.solvers.size();
    const SolverKind kind = spec.solvers[c % spec.solvers.size()];
    ResultRow& row = rows[c];
    row.solver = solver_name(kind);
    row.n = spec.n;
    row.d = spec.d;
    row.seed = spec.seeds[si];
    row.ratio = std::numeric_limits<double>::quiet_NaN();
    row.loss = std::numeric_limits<double>::quiet_NaN();
    row.wall_seconds = std::numeric_limits<double>::quiet_NaN();
    try {
      std::vector<double> times;
      SolveReport report;
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        report = run_solver(kind, instances[si], spec, spec.seeds[si]);
        times.push_back(report.wall_time.count());
      }
      std::nth_element(times.begin(), times.begin() + static_cast<long>(times.size() / 2), times.end());
      row.wall_seconds = times[times.size() / 2];
      row.loss = report.loss;
      row.rows_sampled = report.sample_count;
      if (kind == SolverKind::naive || kind == SolverKind::kronmatmul) row.rows_sampled = instances[si].factors.rows();
      if (std::isfinite(opt[si]) && opt[si] > 0.0) row.ratio = report.loss / opt[si];
    } catch (const Error& e) {
      row.error = e.what();
    }
  };
  if (spec.parallel) {
    parallel_for(cells, run_cell);
  } else {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  }
  return rows;
}

void write_regression_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    table.push_back({r.solver, std::to_string(r.n), std::to_string(r.d), std::to_string(r.seed), format_number(r.loss),
                     format_number(r.ratio), std::to_string(r.rows_sampled), format_number(r.wall_seconds), error});
  }
  write_results_csv(out, {"solver", "n", "d", "seed", "loss", "ratio", "rows_sampled", "wall_seconds", "error"},
                    table);
}

AlsResult run_tucker_experiment(const TuckerExperimentSpec& spec) {
  const Tensor x = spec.input.empty()
                       ? generate_low_rank_tensor(spec.synth_shape, spec.synth_rank, spec.synth_noise, spec.config.seed)
                       : read_tensor(std::filesystem::path(spec.input));
  const Shape core = spec.core.empty() ? spec.synth_rank : spec.core;
  return tucker_als(x, core, spec.lambda, spec.sweeps, spec.mode, spec.config);
}

void write_tucker_csv(std::ostream& out, const AlsReport& report) {
  std::vector<std::vector<std::string>> table;
  double total = 0.0;
  for (std::size_t s = 0; s < report.sweep_losses.size(); ++s) {
    total += report.sweep_seconds[s];
    table.push_back({std::to_string(s + 1), format_number(report.sweep_losses[s]), format_number(report.sweep_rre[s]),
                     format_number(report.sweep_seconds[s]), format_number(total / static_cast<double>(s + 1))});
  }
  write_results_csv(out, {"sweep", "regularized_loss", "rre", "sweep_seconds", "mean_sweep_seconds"}, table);
}

}  // namespace kronsolve
