// kronsolve: synthetic Kronecker regression and Tucker ALS experiments.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "kronsolve/bench.hpp"
#include "kronsolve/checks.hpp"
#include "kronsolve/errors.hpp"
#include "kronsolve/tensor_io.hpp"

namespace {

using namespace kronsolve;

// Writes to `path`, or stdout for "-".
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TensorIoError(TensorIoError::Code::open_failed, "cannot open " + path + " for writing");
  write(out);
  if (!out) throw TensorIoError(TensorIoError::Code::write_failed, "failed writing " + path);
}

SolverMode parse_mode(const std::string& s) {
  if (s == "exact") return SolverMode::exact;
  if (s == "fast") return SolverMode::fast;
  throw InvalidInput("mode must be exact or fast");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subquadratic Kronecker ridge regression and Tucker ALS"};
  app.require_subcommand(1);
  bool parallel = false;
  app.add_flag("--parallel", parallel, "Run independent (solver, seed) cells concurrently");

  ExperimentSpec reg;
  std::vector<std::string> solver_names{"naive", "kronmatmul", "sketch-solve", "fast"};
  std::string reg_out = "-";
  auto* synth = app.add_subcommand("synth-regression", "Compare solvers on N(1, 0.001) Kronecker factors");
  synth->add_option("--n", reg.n, "Rows per factor")->capture_default_str();
  synth->add_option("--d", reg.d, "Columns per factor")->capture_default_str();
  synth->add_option("--order", reg.order, "Number of factors")->capture_default_str();
  synth->add_option("--eps", reg.eps)->capture_default_str();
  synth->add_option("--delta", reg.delta)->capture_default_str();
  synth->add_option("--lambda", reg.lambda)->capture_default_str();
  synth->add_option("--alpha", reg.alpha, "Row-count reduction for the practical sampler")->capture_default_str();
  synth->add_option("--seeds", reg.seeds)->delimiter(',')->capture_default_str();
  synth->add_option("--solvers", solver_names)->delimiter(',')->capture_default_str();
  synth->add_option("--repetitions", reg.repetitions, "Timed runs per cell (median reported)")->capture_default_str();
  synth->add_flag("--force", reg.force, "Lift the exact-solver size guards");
  synth->add_option("--out", reg_out, "CSV path, '-' for stdout")->capture_default_str();

  TuckerExperimentSpec tk;
  std::string mode_name = "exact";
  std::string tk_out = "-";
  auto* tucker = app.add_subcommand("tucker", "Ridge-regularized Tucker ALS");
  tucker->add_option("--input", tk.input, "KTN1 tensor; a synthetic tensor is used when omitted");
  tucker->add_option("--core", tk.core, "Core shape R1,R2,...")->delimiter(',');
  tucker->add_option("--synth-shape", tk.synth_shape)->delimiter(',')->capture_default_str();
  tucker->add_option("--synth-rank", tk.synth_rank)->delimiter(',')->capture_default_str();
  tucker->add_option("--synth-noise", tk.synth_noise)->capture_default_str();
  tucker->add_option("--lambda", tk.lambda)->capture_default_str();
  tucker->add_option("--eps", tk.config.eps)->capture_default_str();
  tucker->add_option("--delta", tk.config.delta)->capture_default_str();
  tucker->add_option("--alpha", tk.config.alpha)->capture_default_str();
  tucker->add_option("--seed", tk.config.seed)->capture_default_str();
  tucker->add_option("--mode", mode_name)->check(CLI::IsMember({"exact", "fast"}))->capture_default_str();
  tucker->add_option("--sweeps", tk.sweeps)->capture_default_str();
  tucker->add_option("--out", tk_out, "CSV path, '-' for stdout")->capture_default_str();

  std::uint64_t check_seed = 0;
  int check_instances = 25;
  auto* check = app.add_subcommand("check", "Run the oracle-equivalence suite");
  check->add_option("--seed", check_seed)->capture_default_str();
  check->add_option("--instances", check_instances)->capture_default_str();

  Shape mk_shape{20, 20, 20};
  Shape mk_rank{4, 4, 4};
  double mk_noise = 0.01;
  std::uint64_t mk_seed = 0;
  std::string mk_out;
  auto* make = app.add_subcommand("make-tensor", "Write a synthetic low-rank KTN1 tensor");
  make->add_option("--shape", mk_shape)->delimiter(',')->capture_default_str();
  make->add_option("--rank", mk_rank)->delimiter(',')->capture_default_str();
  make->add_option("--noise", mk_noise)->capture_default_str();
  make->add_option("--seed", mk_seed)->capture_default_str();
  make->add_option("--out", mk_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      reg.solvers.clear();
      for (const auto& s : solver_names) reg.solvers.push_back(parse_solver(s));
      reg.parallel = parallel;
      const auto rows = run_regression_experiment(reg);
      emit(reg_out, [&](std::ostream& os) { write_regression_csv(os, rows); });
      for (const auto& r : rows) {
        if (!r.error.empty()) std::cerr << "warning: " << r.solver << " seed " << r.seed << ": " << r.error << '\n';
      }
    } else if (*tucker) {
      tk.mode = parse_mode(mode_name);
      const auto result = run_tucker_experiment(tk);
      emit(tk_out, [&](std::ostream& os) { write_tucker_csv(os, result.report); });
      std::cerr << "rre " << format_number(result.report.rre) << '\n';
    } else if (*check) {
      int failures = 0;
      for (const auto& r : run_oracle_checks(check_seed, check_instances)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " max_error=" << r.max_error
                  << " tol=" << r.tolerance;
        if (!r.detail.empty()) std::cout << " (" << r.detail << ')';
        std::cout << '\n';
        failures += r.passed ? 0 : 1;
      }
      return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
    } else if (*make) {
      write_tensor(std::filesystem::path(mk_out), generate_low_rank_tensor(mk_shape, mk_rank, mk_noise, mk_seed));
    }
  } catch (const kronsolve::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return EXIT_SUCCESS;
}
