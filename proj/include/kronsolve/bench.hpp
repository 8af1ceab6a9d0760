#pragma once

// Synthetic experiments and their CSV reports.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kronsolve/kron_ops.hpp"
#include "kronsolve/tucker.hpp"

namespace kronsolve {

struct SynthRegression {
  KroneckerFactors factors;
  Eigen::VectorXd b;
};

/// `order` factors of shape n x d with entries N(1, 0.001) (variance), and b = 1.
SynthRegression generate_synth_regression(Index n, Index d, Index order, std::uint64_t seed);

/// Random Tucker tensor with Gaussian core and factors of the given multilinear
/// rank, plus Gaussian noise of relative Frobenius norm `noise`.
Tensor generate_low_rank_tensor(const Shape& shape, const Shape& rank, double noise, std::uint64_t seed);

enum class SolverKind { naive, kronmatmul, sketch_solve, fast };

std::string solver_name(SolverKind kind);
SolverKind parse_solver(const std::string& name);

struct ExperimentSpec {
  Index n = 128;
  Index d = 8;
  Index order = 2;
  double lambda = 1e-3;
  double eps = 0.1;
  double delta = 0.01;
  double alpha = 1e-5;
  std::vector<std::uint64_t> seeds{0};
  std::vector<SolverKind> solvers{SolverKind::naive, SolverKind::kronmatmul, SolverKind::sketch_solve,
                                  SolverKind::fast};
  int repetitions = 3;
  bool parallel = false;
  bool force = false;

  void validate() const;
};

struct ResultRow {
  std::string solver;
  Index n = 0;
  Index d = 0;
  std::uint64_t seed = 0;
  double loss = 0.0;
  /// NaN when no exact optimum is available.
  double ratio = 0.0;
  Index rows_sampled = 0;
  double wall_seconds = 0.0;
  /// Empty unless the solver failed.
  std::string error;
};

std::vector<ResultRow> run_regression_experiment(const ExperimentSpec& spec);
void write_regression_csv(std::ostream& out, const std::vector<ResultRow>& rows);

struct TuckerExperimentSpec {
  /// KTN1 input; a synthetic tensor is generated when empty.
  std::string input;
  Shape synth_shape{20, 20, 20};
  Shape synth_rank{4, 4, 4};
  double synth_noise = 0.01;
  Shape core;
  double lambda = 1e-3;
  int sweeps = 5;
  SolverMode mode = SolverMode::exact;
  TuckerConfig config{};
};

AlsResult run_tucker_experiment(const TuckerExperimentSpec& spec);
/// One row per sweep: sweep, regularized_loss, rre, sweep_seconds, mean_sweep_seconds.
void write_tucker_csv(std::ostream& out, const AlsReport& report);

}  // namespace kronsolve
