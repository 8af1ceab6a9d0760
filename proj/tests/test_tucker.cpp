#include <gtest/gtest.h>

#include <cmath>

#include "kronsolve/kron_ops.hpp"
#include "kronsolve/solvers.hpp"
#include "kronsolve/tucker.hpp"
#include "oracles.hpp"

using namespace kronsolve;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& gen) {
  return Tensor(shape, oracle::randn(checked_product(shape), 1, gen));
}

TuckerModel random_model(const Shape& shape, const Shape& rank, double lambda, std::mt19937_64& gen) {
  std::vector<MatrixXd> f;
  for (std::size_t n = 0; n < shape.size(); ++n) f.push_back(oracle::randn(shape[n], rank[n], gen));
  return TuckerModel(random_tensor(rank, gen), std::move(f), lambda);
}

// Dense design for the mode-n row problems: X_(n) ~ A G_(n) (kron_{k!=n} A_k)^T.
MatrixXd other_kron(const TuckerModel& m, std::size_t n) {
  std::vector<MatrixXd> others;
  for (std::size_t k = 0; k < m.order(); ++k) {
    if (k != n) others.push_back(m.factor(k));
  }
  return oracle::kron(others);
}

}  // namespace

TEST(TuckerModel, Validation) {
  EXPECT_THROW(TuckerModel(Tensor(Shape{3, 2}), {MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 2)}, 0.0), InvalidInput);
  EXPECT_THROW(TuckerModel(Tensor(Shape{2, 2}), {MatrixXd::Zero(2, 2)}, 0.0), InvalidInput);
  EXPECT_THROW(TuckerModel(Tensor(Shape{2, 2}), {MatrixXd::Zero(3, 2), MatrixXd::Zero(3, 2)}, -1.0), InvalidInput);
  TuckerModel m(Tensor(Shape{1, 1}), {MatrixXd::Zero(3, 1), MatrixXd::Zero(4, 1)}, 0.0);
  EXPECT_EQ(m.shape(), (Shape{3, 4}));
  EXPECT_THROW(m.set_factor(0, MatrixXd::Zero(2, 1)), InvalidInput);
}

TEST(Reconstruct, ZeroCoreAndSelfError) {
  std::mt19937_64 gen(1);
  const Tensor x = random_tensor({3, 4, 2}, gen);
  TuckerModel zero(Tensor(Shape{2, 2, 1}), {oracle::randn(3, 2, gen), oracle::randn(4, 2, gen), oracle::randn(2, 1, gen)},
                   0.0);
  EXPECT_EQ(reconstruct(zero).squared_norm(), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(zero, x), 1.0);
  const auto m = random_model({3, 4, 2}, {2, 2, 1}, 0.0, gen);
  EXPECT_EQ(relative_error(m, reconstruct(m)), 0.0);
}

TEST(Reconstruct, OuterProductAndDirectSummation) {
  std::mt19937_64 gen(2);
  const VectorXd u = oracle::randn(2, 1, gen), v = oracle::randn(2, 1, gen), w = oracle::randn(2, 1, gen);
  VectorXd e = VectorXd::Zero(8);
  e(0) = 1.0;
  const TuckerModel m(Tensor(Shape{2, 2, 2}, e),
                      {MatrixXd(u.replicate(1, 2)), MatrixXd(v.replicate(1, 2)), MatrixXd(w.replicate(1, 2))}, 0.0);
  const Tensor xh = reconstruct(m);
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 2; ++j) {
      for (Index k = 0; k < 2; ++k) EXPECT_NEAR(xh({i, j, k}), u(i) * v(j) * w(k), 1e-15);
    }
  }
  const auto r = random_model({3, 2, 4}, {2, 2, 3}, 0.0, gen);
  const Tensor y = reconstruct(r);
  for (Index flat = 0; flat < y.size(); ++flat) {
    std::vector<Index> idx{flat / 8, (flat / 4) % 2, flat % 4};
    EXPECT_NEAR(y.data()(flat), oracle::tucker_entry(r.core(), r.factors(), idx), 1e-12);
  }
}

TEST(RegularizedLoss, Terms) {
  std::mt19937_64 gen(3);
  const Tensor x = random_tensor({3, 3, 3}, gen);
  auto m = random_model({3, 3, 3}, {2, 2, 2}, 0.0, gen);
  const double fit = (reconstruct(m).data() - x.data()).squaredNorm();
  EXPECT_NEAR(regularized_loss(m, x), fit, 1e-12);
  const TuckerModel with_l(m.core(), m.factors(), 0.4);
  double penalty = m.core().data().squaredNorm();
  for (const auto& a : m.factors()) penalty += a.array().square().sum();
  EXPECT_NEAR(regularized_loss(with_l, x), fit + 0.4 * penalty, 1e-10);
  const TuckerModel zero(Tensor(Shape{2, 2, 2}), {MatrixXd::Zero(3, 2), MatrixXd::Zero(3, 2), MatrixXd::Zero(3, 2)},
                         1.0);
  EXPECT_NEAR(regularized_loss(zero, x), x.squared_norm(), 1e-12);
}

TEST(NaiveFactorUpdate, MatchesDenseRidgeRows) {
  std::mt19937_64 gen(4);
  for (double lambda : {0.0, 0.1}) {
    const Tensor x = random_tensor({5, 4}, gen);
    const auto m = random_model({5, 4}, {2, 3}, lambda, gen);
    for (std::size_t n = 0; n < 2; ++n) {
      const MatrixXd a = naive_factor_update(m, x, n);
      const MatrixXd design = other_kron(m, n) * unfold(m.core(), static_cast<Index>(n)).transpose();
      const MatrixXd xn = unfold(x, static_cast<Index>(n));
      for (Index i = 0; i < xn.rows(); ++i) {
        const VectorXd expect = oracle::ridge_solve(design, xn.row(i).transpose(), lambda);
        EXPECT_LE((a.row(i).transpose() - expect).norm(), 1e-8 * std::max(1.0, expect.norm()));
        // Normal equations residual.
        const MatrixXd kkt = design.transpose() * design + lambda * MatrixXd::Identity(design.cols(), design.cols());
        EXPECT_LE((kkt * a.row(i).transpose() - design.transpose() * xn.row(i).transpose()).norm(), 1e-8 * xn.norm());
      }
    }
  }
}

TEST(NaiveFactorUpdate, FixedPoint) {
  std::mt19937_64 gen(5);
  auto m = random_model({5, 4, 3}, {2, 2, 2}, 0.0, gen);
  const Tensor x = reconstruct(m);
  const double before = regularized_loss(m, x);
  m.set_factor(1, naive_factor_update(m, x, 1));
  EXPECT_LE(regularized_loss(m, x), before + 1e-10);
  EXPECT_NEAR(regularized_loss(m, x), 0.0, 1e-10);
}

TEST(FactorWorkspace, SquareCoreHasVacuousConstraint) {
  std::mt19937_64 gen(6);
  // G_(0) is 4 x 4 when the core is (4, 2, 2).
  const auto m = random_model({5, 3, 3}, {4, 2, 2}, 0.1, gen);
  const auto ws = build_factor_workspace(m, 0, 0.25, 0.1);
  EXPECT_EQ(ws.g_rank, 4);
  EXPECT_LE(ws.constraint_projector().norm(), 1e-10);
  EXPECT_EQ(ws.penalty_norm_sq, 0.0);
  EXPECT_EQ(ws.apply_m_pinv(VectorXd::Zero(4)), VectorXd(VectorXd::Zero(4)));
}

TEST(FactorWorkspace, ProjectorAlgebra) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_model({5, 4, 4}, {2, 3, 2}, 0.05, gen);
    const auto ws = build_factor_workspace(m, 0, 0.25, 0.05, static_cast<std::uint64_t>(trial));
    const MatrixXd n = ws.constraint_projector();
    EXPECT_LE((n * n - n).norm(), 1e-10);
    EXPECT_LE((n - n.transpose()).norm(), 1e-10);
    EXPECT_LE((n * ws.g.transpose()).norm(), 1e-10 * ws.g.norm());
    EXPECT_GE(ws.penalty_weight, 0.0);
  }
}

TEST(FactorWorkspace, WoodburyMatchesDensePseudoInverse) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_model({5, 4, 4}, {2, 3, 3}, 0.01, gen);
    const std::size_t mode = static_cast<std::size_t>(trial % 3);
    const auto ws = build_factor_workspace(m, mode, 0.25, 0.01, 1);
    const MatrixXd k = other_kron(m, mode);
    const MatrixXd gp = oracle::pinv(ws.g);                    // G^+
    const MatrixXd gtp = oracle::pinv(MatrixXd(ws.g.transpose()));  // (G^T)^+
    const Index r = ws.cols();
    const MatrixXd n = MatrixXd::Identity(r, r) - ws.g.transpose() * gtp;
    const MatrixXd dense = k.transpose() * k + 0.01 * gp * gtp + ws.penalty_weight * n.transpose() * n;
    const VectorXd z = oracle::randn(r, 1, gen);
    EXPECT_LE((ws.apply_m_pinv(z) - oracle::pinv(dense) * z).norm(), 1e-8 * std::max(1.0, (oracle::pinv(dense) * z).norm()));
    EXPECT_LE((ws.apply_m(z) - dense * z).norm(), 1e-8 * std::max(1.0, (dense * z).norm()));
    EXPECT_LE((ws.apply_m(ws.apply_m_pinv(dense * z)) - dense * z).norm(), 1e-8 * (dense * z).norm());
  }
}

TEST(FactorWorkspace, Validation) {
  std::mt19937_64 gen(9);
  const auto m = random_model({4, 4, 4}, {2, 2, 2}, 0.0, gen);
  EXPECT_THROW(build_factor_workspace(m, 0, 0.34, 0.0), InvalidInput);
  EXPECT_THROW(build_factor_workspace(m, 3, 0.2, 0.0), InvalidInput);
  const TuckerModel zero(Tensor(Shape{2, 2, 2}), m.factors(), 0.0);
  EXPECT_THROW(build_factor_workspace(zero, 0, 0.2, 0.0), InvalidInput);
}

TEST(FastFactorUpdate, ExactSketchMatchesNaive) {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = random_tensor({6, 5, 4}, gen);
    const auto m = random_model({6, 5, 4}, {2, 3, 2}, 0.0, gen);
    TuckerConfig cfg;
    cfg.residual_tol = 1e-13;
    cfg.max_richardson_iters = 200;
    for (std::size_t n = 0; n < 3; ++n) {
      const MatrixXd naive = naive_factor_update(m, x, n);
      const MatrixXd fast = fast_factor_matrix_update(m, x, n, cfg);
      for (Index i = 0; i < naive.rows(); ++i) {
        EXPECT_LE((fast.row(i) - naive.row(i)).norm(), 1e-6 * std::max(1.0, naive.row(i).norm()));
      }
    }
  }
}

TEST(FastFactorUpdate, ZeroTargetRowGivesZero) {
  std::mt19937_64 gen(11);
  const auto m = random_model({4, 4, 4}, {2, 2, 2}, 0.5, gen);
  VectorXd data = oracle::randn(64, 1, gen);
  data.head(16).setZero();  // row 0 of the mode-0 unfolding
  const Tensor x(Shape{4, 4, 4}, data);
  const MatrixXd a = fast_factor_matrix_update(m, x, 0, TuckerConfig{});
  EXPECT_LE(a.row(0).norm(), 1e-12);
}

TEST(FastFactorUpdate, SampledRowsAreNearOptimal) {
  std::mt19937_64 gen(12);
  int ok = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor x = random_tensor({12, 12, 12}, gen);
    const auto m = random_model({12, 12, 12}, {2, 2, 2}, 1e-3, gen);
    TuckerConfig cfg;
    cfg.eps = 0.25;
    cfg.alpha = 1.5e-4;
    cfg.seed = seed;
    const MatrixXd fast = fast_factor_matrix_update(m, x, 0, cfg);
    const MatrixXd naive = naive_factor_update(m, x, 0);
    const MatrixXd design = other_kron(m, 0) * unfold(m.core(), 0).transpose();
    const MatrixXd x0 = unfold(x, 0);
    for (Index i = 0; i < 12; ++i) {
      const VectorXd b = x0.row(i).transpose();
      const double f = oracle::ridge_objective(design, fast.row(i).transpose(), b, 1e-3);
      const double o = oracle::ridge_objective(design, naive.row(i).transpose(), b, 1e-3);
      ok += f <= 1.25 * o;
      ++total;
    }
  }
  EXPECT_GE(ok, static_cast<int>(0.95 * total));
}

TEST(CoreUpdate, OrthonormalFactorsProject) {
  std::mt19937_64 gen(13);
  const Tensor x = random_tensor({4, 3, 5}, gen);
  std::vector<MatrixXd> q;
  for (Index d : {4, 3, 5}) q.emplace_back(Eigen::HouseholderQR<MatrixXd>(oracle::randn(d, d, gen)).householderQ());
  const TuckerModel m(Tensor(Shape{4, 3, 5}), q, 0.0);
  Tensor expect = x;
  for (Index k = 0; k < 3; ++k) expect = n_mode_product(expect, q[k].transpose(), k);
  EXPECT_LE((core_update(m, x, SolverMode::exact, {}).data() - expect.data()).norm(), 1e-10);
}

TEST(CoreUpdate, LargeLambdaShrinks) {
  std::mt19937_64 gen(14);
  const Tensor x = random_tensor({4, 4, 4}, gen);
  const auto base = random_model({4, 4, 4}, {2, 2, 2}, 0.0, gen);
  const TuckerModel big(base.core(), base.factors(), 1e12);
  const double free_norm = core_update(base, x, SolverMode::exact, {}).data().norm();
  EXPECT_LE(core_update(big, x, SolverMode::exact, {}).data().norm(), 1e-9 * free_norm);
}

TEST(CoreUpdate, FastWithinFactorOfExact) {
  std::mt19937_64 gen(15);
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = random_tensor({12, 12, 12}, gen);
    auto m = random_model({12, 12, 12}, {3, 3, 3}, 1e-3, gen);
    TuckerConfig cfg;
    cfg.seed = seed;
    cfg.alpha = 2e-4;
    m.set_core(core_update(m, x, SolverMode::exact, cfg));
    const double exact = regularized_loss(m, x);
    m.set_core(core_update(m, x, SolverMode::fast, cfg));
    ok += regularized_loss(m, x) <= 1.25 * exact;
  }
  EXPECT_GE(ok, 19);
}

TEST(TuckerAls, FullRankCoreInterpolates) {
  std::mt19937_64 gen(16);
  const Tensor x = random_tensor({4, 3, 5}, gen);
  const auto r = tucker_als(x, x.shape(), 0.0, 1, SolverMode::exact);
  EXPECT_LE(r.report.rre, 1e-8);
}

TEST(TuckerAls, RankOneRecovery) {
  std::mt19937_64 gen(17);
  const VectorXd u = oracle::randn(5, 1, gen), v = oracle::randn(4, 1, gen), w = oracle::randn(6, 1, gen);
  const TuckerModel truth(Tensor(Shape{1, 1, 1}, VectorXd::Ones(1)), {MatrixXd(u), MatrixXd(v), MatrixXd(w)}, 0.0);
  const Tensor x = reconstruct(truth);
  const auto r = tucker_als(x, {1, 1, 1}, 0.0, 5, SolverMode::exact);
  EXPECT_LE(r.report.rre, 1e-6);
}

TEST(TuckerAls, ExactModeIsMonotone) {
  std::mt19937_64 gen(18);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor x = random_tensor({8, 8, 8}, gen);
    TuckerConfig cfg;
    cfg.seed = seed;
    const auto r = tucker_als(x, {3, 3, 3}, 1e-2, 4, SolverMode::exact, cfg);
    ASSERT_EQ(r.report.step_losses.size(), 1u + 4u * 4u);
    for (std::size_t k = 1; k < r.report.step_losses.size(); ++k) {
      EXPECT_LE(r.report.step_losses[k], r.report.step_losses[k - 1] + 1e-10) << r.report.step_labels[k];
    }
    EXPECT_EQ(r.report.sweep_losses.size(), 4u);
    EXPECT_EQ(r.report.sweep_rre.size(), 4u);
    EXPECT_EQ(r.report.rre, r.report.sweep_rre.back());
  }
}

TEST(TuckerAls, EarlyStopAndValidation) {
  std::mt19937_64 gen(19);
  const Tensor x = random_tensor({4, 4, 4}, gen);
  TuckerConfig cfg;
  cfg.stop_rel_change = 0.5;
  EXPECT_LT(tucker_als(x, {2, 2, 2}, 0.0, 10, SolverMode::exact, cfg).report.sweeps, 10);
  EXPECT_THROW(tucker_als(x, {5, 2, 2}, 0.0, 1, SolverMode::exact), InvalidInput);
  EXPECT_THROW(tucker_als(x, {2, 2, 2}, 0.0, 0, SolverMode::exact), InvalidInput);
}

TEST(InitialModel, OrthonormalFactorsZeroCore) {
  const auto m = initial_model({6, 5}, {3, 2}, 0.1, 4);
  for (const auto& a : m.factors()) {
    EXPECT_TRUE((a.transpose() * a).isApprox(MatrixXd::Identity(a.cols(), a.cols()), 1e-12));
  }
  EXPECT_EQ(m.core().squared_norm(), 0.0);
}

TEST(FactorWorkspace, PenalizedRelaxationIsNearConstrainedOptimum) {
  std::mt19937_64 gen(20);
  for (double eps : {0.1, 0.3}) {
    for (int trial = 0; trial < 15; ++trial) {
      const auto m = random_model({4, 4, 4}, {2, 3, 2}, 0.05, gen);
      const std::size_t n = static_cast<std::size_t>(trial % 3);
      const auto ws = build_factor_workspace(m, n, eps, 0.05, static_cast<std::uint64_t>(trial));
      const MatrixXd k = other_kron(m, n);
      const VectorXd x = oracle::randn(k.rows(), 1, gen);
      const MatrixXd design = k * ws.g.transpose();
      const double opt = oracle::ridge_objective(design, oracle::ridge_solve(design, x, 0.05), x, 0.05);
      VectorXd z = ws.apply_m_pinv(k.transpose() * x);
      z -= ws.apply_projector(z);
      const double got = (k * z - x).squaredNorm() + 0.05 * (ws.gn_pinv * z).squaredNorm();
      EXPECT_LE(got, (1.0 + eps) * opt + 1e-12);
      EXPECT_GE(got, opt * (1.0 - 1e-9));
    }
  }
}
