#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "pssqp/qp_solver.hpp"

using namespace pssqp;

namespace {

StackedQp make_stacked(const MatrixXd& H, const VectorXd& f, const MatrixXd& Aeq,
                       const VectorXd& beq, const MatrixXd& Aineq, const VectorXd& bineq) {
  StackedQp qp;
  qp.H = H.sparseView();
  qp.f = f;
  qp.Aeq = Aeq.sparseView();
  qp.beq = beq;
  qp.Aineq = Aineq.sparseView();
  qp.bineq = bineq;
  qp.H.makeCompressed();
  qp.Aeq.makeCompressed();
  qp.Aineq.makeCompressed();
  return qp;
}

struct OracleResult {
  bool feasible = false;
  VectorXd dz, lambda, mu;
  double obj = std::numeric_limits<double>::infinity();
};

// exhaustive active-set search: for every subset of inequality rows solve the
// equality-constrained KKT system and keep the best primal-dual feasible one
OracleResult oracle_solve(const StackedQp& qp) {
  const int p = static_cast<int>(qp.H.rows());
  const int me = static_cast<int>(qp.Aeq.rows());
  const int mi = static_cast<int>(qp.Aineq.rows());
  const MatrixXd H(qp.H), Aeq(qp.Aeq), Aineq(qp.Aineq);
  constexpr double tol = 1e-9;

  OracleResult best;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int ma = static_cast<int>(act.size());

    MatrixXd K = MatrixXd::Zero(p + me + ma, p + me + ma);
    K.topLeftCorner(p, p) = H;
    VectorXd rhs(p + me + ma);
    rhs.head(p) = -qp.f;
    if (me > 0) {
      K.block(p, 0, me, p) = Aeq;
      K.block(0, p, p, me) = Aeq.transpose();
      rhs.segment(p, me) = qp.beq;
    }
    for (int j = 0; j < ma; ++j) {
      K.block(p + me + j, 0, 1, p) = Aineq.row(act[j]);
      K.block(0, p + me + j, p, 1) = Aineq.row(act[j]).transpose();
      rhs(p + me + j) = qp.bineq(act[j]);
    }

    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const VectorXd sol = lu.solve(rhs);
    const VectorXd dz = sol.head(p);

    if (me > 0 && (Aeq * dz - qp.beq).lpNorm<Eigen::Infinity>() > tol) continue;
    if (mi > 0 && ((Aineq * dz - qp.bineq).array() > tol).any()) continue;
    bool dual_ok = true;
    for (int j = 0; j < ma; ++j)
      if (sol(p + me + j) < -tol) dual_ok = false;
    if (!dual_ok) continue;

    const double obj = 0.5 * dz.dot(H * dz) + qp.f.dot(dz);
    if (obj < best.obj - 1e-12) {
      best.feasible = true;
      best.obj = obj;
      best.dz = dz;
      best.mu = sol.segment(p, me);
      best.lambda = VectorXd::Zero(mi);
      for (int j = 0; j < ma; ++j) best.lambda(act[j]) = std::max(0.0, sol(p + me + j));
    }
  }
  return best;
}

struct RandomQp {
  StackedQp qp;
  int p = 0;
};

RandomQp random_qp(std::mt19937_64& rng, bool with_eq) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int p = 2 + static_cast<int>(rng() % 11);  // up to 12 variables
  const int me = with_eq ? static_cast<int>(rng() % std::min(3, p - 1)) : 0;
  const int mi = 1 + static_cast<int>(rng() % 6);

  MatrixXd L(p, p);
  for (int i = 0; i < p * p; ++i) L(i / p, i % p) = unif(rng);
  MatrixXd H = L * L.transpose() + 0.1 * MatrixXd::Identity(p, p);
  VectorXd f(p);
  for (int i = 0; i < p; ++i) f(i) = unif(rng);

  MatrixXd Aeq(me, p);
  for (int i = 0; i < me * p; ++i) Aeq(i / p, i % p) = unif(rng);
  MatrixXd Aineq(mi, p);
  for (int i = 0; i < mi * p; ++i) Aineq(i / p, i % p) = unif(rng);

  VectorXd z0(p);
  for (int i = 0; i < p; ++i) z0(i) = unif(rng);
  VectorXd beq = Aeq * z0;
  VectorXd margin(mi);
  std::uniform_real_distribution<double> mdist(0.0, 1.0);
  for (int i = 0; i < mi; ++i) margin(i) = mdist(rng);
  VectorXd bineq = Aineq * z0 + margin;  // z0 certifies feasibility

  return {make_stacked(H, f, Aeq, beq, Aineq, bineq), p};
}

}  // namespace

TEST_CASE("equality-pinned scalar gives the textbook multiplier") {
  MatrixXd H = MatrixXd::Identity(1, 1);
  VectorXd f = VectorXd::Zero(1);
  MatrixXd Aeq = MatrixXd::Identity(1, 1);
  VectorXd beq = VectorXd::Constant(1, 3.0);
  StackedQp qp = make_stacked(H, f, Aeq, beq, MatrixXd::Zero(0, 1), VectorXd::Zero(0));

  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.dz(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(sol.mu(0) == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(qp_kkt_residual(qp, sol) < 1e-10);
}

TEST_CASE("active bound produces a positive multiplier") {
  MatrixXd H = MatrixXd::Identity(1, 1);
  VectorXd f = VectorXd::Constant(1, 1.0);
  MatrixXd Aineq = MatrixXd::Identity(1, 1);
  VectorXd bineq = VectorXd::Constant(1, -2.0);  // dz <= -2, unconstrained opt -1
  StackedQp qp = make_stacked(H, f, MatrixXd::Zero(0, 1), VectorXd::Zero(0), Aineq, bineq);

  QpSolution sol = solve_qp(qp);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.dz(0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(sol.lambda(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(qp_kkt_residual(qp, sol) < 1e-10);
}

TEST_CASE("random strictly convex qps match the exhaustive active-set search") {
  std::mt19937_64 rng(2024);
  int optimal = 0;
  for (int trial = 0; trial < 50; ++trial) {
    RandomQp r = random_qp(rng, trial % 2 == 0);
    OracleResult expect = oracle_solve(r.qp);
    REQUIRE(expect.feasible);

    QpSolution sol = solve_qp(r.qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    ++optimal;
    CHECK((sol.dz - expect.dz).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((sol.lambda - expect.lambda).lpNorm<Eigen::Infinity>() < 1e-6);
    if (expect.mu.size() > 0) CHECK((sol.mu - expect.mu).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(qp_kkt_residual(r.qp, sol) < 1e-7);
  }
  CHECK(optimal == 50);
}

TEST_CASE("warm starting an identical qp needs no extra pivots") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    RandomQp r = random_qp(rng, true);
    QpSolver solver;
    QpSolution cold = solver.solve(r.qp);
    REQUIRE(cold.status == QpStatus::Optimal);
    QpSolution rewarmed = solver.solve(r.qp, cold);
    REQUIRE(rewarmed.status == QpStatus::Optimal);
    CHECK((rewarmed.dz - cold.dz).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((rewarmed.lambda - cold.lambda).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(rewarmed.iterations <= cold.iterations);
  }
}

TEST_CASE("warm starting tracks a slightly shifted objective") {
  std::mt19937_64 rng(99);
  RandomQp r = random_qp(rng, true);
  QpSolver solver;
  QpSolution first = solver.solve(r.qp);
  REQUIRE(first.status == QpStatus::Optimal);

  StackedQp shifted = r.qp;
  shifted.f.array() += 1e-3;
  QpSolution tracked = solver.solve(shifted, first);
  REQUIRE(tracked.status == QpStatus::Optimal);
  OracleResult expect = oracle_solve(shifted);
  CHECK((tracked.dz - expect.dz).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("dense and sparse kkt backends agree") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    RandomQp r = random_qp(rng, trial % 2 == 0);
    QpSolver::Options dense_opts;
    dense_opts.dense_kkt = true;
    QpSolution sparse_sol = solve_qp(r.qp);
    QpSolution dense_sol = solve_qp(r.qp, nullptr, dense_opts);
    REQUIRE(sparse_sol.status == QpStatus::Optimal);
    REQUIRE(dense_sol.status == QpStatus::Optimal);
    CHECK((sparse_sol.dz - dense_sol.dz).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((sparse_sol.lambda - dense_sol.lambda).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("contradictory bounds are reported infeasible") {
  MatrixXd H = MatrixXd::Identity(1, 1);
  VectorXd f = VectorXd::Zero(1);
  MatrixXd Aineq(2, 1);
  Aineq << 1.0, -1.0;
  VectorXd bineq(2);
  bineq << -1.0, -1.0;  // dz <= -1 and dz >= 1
  StackedQp qp = make_stacked(H, f, MatrixXd::Zero(0, 1), VectorXd::Zero(0), Aineq, bineq);
  CHECK(solve_qp(qp).status == QpStatus::Infeasible);

  MatrixXd Aeq = MatrixXd::Identity(1, 1);
  VectorXd beq = VectorXd::Zero(1);
  MatrixXd one_row = Aineq.topRows(1);
  VectorXd one_b = bineq.head(1);
  StackedQp qp2 = make_stacked(H, f, Aeq, beq, one_row, one_b);
  CHECK(solve_qp(qp2).status == QpStatus::Infeasible);
}

TEST_CASE("a singular kkt system stops with the iteration-limit status") {
  MatrixXd H = MatrixXd::Zero(2, 2);
  H(0, 0) = 1.0;  // flat in the second coordinate, objective unbounded below
  VectorXd f(2);
  f << 0.0, 1.0;
  StackedQp qp = make_stacked(H, f, MatrixXd::Zero(0, 2), VectorXd::Zero(0), MatrixXd::Zero(0, 2),
                              VectorXd::Zero(0));
  QpSolver::Options dense_opts;
  dense_opts.dense_kkt = true;
  CHECK(solve_qp(qp, nullptr, dense_opts).status == QpStatus::IterLimit);
  CHECK(solve_qp(qp).status == QpStatus::IterLimit);
}
