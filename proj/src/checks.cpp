#include "kronsolve/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "kronsolve/kron_ops.hpp"
#include "kronsolve/leverage.hpp"
#include "kronsolve/random.hpp"
#include "kronsolve/solvers.hpp"
#include "kronsolve/svd.hpp"
#include "kronsolve/tensor_io.hpp"

namespace kronsolve {

namespace {

Eigen::MatrixXd gaussian(Index rows, Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

Index uniform_int(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng.engine());
}

KroneckerFactors random_factors(Rng& rng, Index max_rows, Index max_cols, bool square = false) {
  const Index order = uniform_int(rng, 1, 3);
  std::vector<Eigen::MatrixXd> f;
  for (Index k = 0; k < order; ++k) {
    const Index r = uniform_int(rng, 1, max_rows);
    const Index c = square ? r : uniform_int(rng, 1, max_cols);
    f.push_back(gaussian(r, c, rng));
  }
  return KroneckerFactors(std::move(f));
}

SparseDiagonal random_diagonal(Rng& rng, Index rows) {
  std::vector<Index> idx;
  for (Index i = 0; i < rows; ++i) {
    if (rng.uniform() < 0.3) idx.push_back(i);
  }
  Eigen::VectorXd w(static_cast<Index>(idx.size()));
  for (Index t = 0; t < w.size(); ++t) w(t) = 0.5 + rng.uniform();
  return SparseDiagonal(std::move(idx), std::move(w));
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

CheckResult run_check(const std::string& name, double tol, int instances, std::uint64_t seed,
                      const std::function<double(Rng&)>& trial) {
  CheckResult r{name, true, 0.0, tol, {}};
  try {
    for (int i = 0; i < instances; ++i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      r.max_error = std::max(r.max_error, trial(rng));
    }
    r.passed = r.max_error <= tol;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = e.what();
  }
  return r;
}

}  // namespace

std::vector<CheckResult> run_oracle_checks(std::uint64_t seed, int instances) {
  std::vector<CheckResult> out;

  out.push_back(run_check("kron_mat_mul", 1e-10, instances, derive_seed(seed, 1), [](Rng& rng) {
    const auto f = random_factors(rng, 6, 5);
    const Eigen::MatrixXd b = gaussian(f.cols(), uniform_int(rng, 1, 3), rng);
    return rel_diff(kron_mat_mul(f, b), explicit_kron<double>(f.span()) * b);
  }));

  out.push_back(run_check("kron_vec_square", 1e-10, instances, derive_seed(seed, 2), [](Rng& rng) {
    const auto f = random_factors(rng, 6, 6, true);
    const Eigen::VectorXd c = gaussian(f.cols(), 1, rng);
    return rel_diff(kron_vec_square(f, c), explicit_kron<double>(f.span()) * c);
  }));

  out.push_back(run_check("sketched_kron_apply", 1e-10, instances, derive_seed(seed, 3), [](Rng& rng) {
    const auto f = random_factors(rng, 7, 4);
    const auto diag = random_diagonal(rng, f.rows());
    const Eigen::VectorXd c = gaussian(f.cols(), 1, rng);
    const Eigen::VectorXd full = explicit_kron<double>(f.span()) * c;
    Eigen::VectorXd expect(diag.nnz());
    for (Index t = 0; t < diag.nnz(); ++t) expect(t) = diag.values()(t) * full(diag.indices()[t]);
    return rel_diff(sketched_kron_apply(f, diag, c), expect);
  }));

  out.push_back(run_check("sketched_kron_transpose_apply", 1e-10, instances, derive_seed(seed, 4), [](Rng& rng) {
    const auto f = random_factors(rng, 7, 4);
    const auto diag = random_diagonal(rng, f.rows());
    const Eigen::VectorXd v = gaussian(diag.nnz(), 1, rng);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(f.rows());
    for (Index t = 0; t < diag.nnz(); ++t) full(diag.indices()[t]) = diag.values()(t) * v(t);
    return rel_diff(sketched_kron_transpose_apply(f, diag, v), explicit_kron<double>(f.span()).transpose() * full);
  }));

  out.push_back(run_check("kron_leverage_product", 1e-9, instances, derive_seed(seed, 5), [](Rng& rng) {
    const auto f = random_factors(rng, 6, 3);
    const Eigen::MatrixXd k = explicit_kron<double>(f.span());
    Eigen::VectorXd direct = ridge_leverage_scores(k).scores;
    std::vector<CompactSvd<double>> svds;
    for (const auto& a : f) svds.push_back(compact_svd(a));
    const Eigen::VectorXd fast = kron_ridge_leverage_scores(svds, 0.0);
    return (fast - direct).cwiseAbs().maxCoeff();
  }));

  out.push_back(run_check("exact_solvers_agree", 1e-8, instances, derive_seed(seed, 6), [](Rng& rng) {
    const auto f = random_factors(rng, 7, 3);
    const Eigen::VectorXd b = gaussian(f.rows(), 1, rng);
    const double lambda = std::array{0.0, 1e-3, 1.0}[static_cast<std::size_t>(uniform_int(rng, 0, 2))];
    const auto naive = naive_normal_solve(f, b, lambda);
    const auto svd = kronmatmul_svd_solve(f, b, lambda);
    return std::abs(naive.loss - svd.loss) / std::max(1.0, svd.loss);
  }));

  out.push_back(run_check("tensor_roundtrip", 0.0, instances, derive_seed(seed, 7), [](Rng& rng) {
    const Index order = uniform_int(rng, 1, 4);
    Shape shape;
    for (Index k = 0; k < order; ++k) shape.push_back(uniform_int(rng, 1, 5));
    const Tensor x(shape, gaussian(checked_product(shape), 1, rng));
    std::stringstream buf;
    write_tensor(buf, x);
    return read_tensor(buf) == x ? 0.0 : 1.0;
  }));

  return out;
}

}  // namespace kronsolve
