#include "pssqp/linearize.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace pssqp {

int QpData::ineq_rows() const {
  int total = 0;
  for (const auto& si : s) total += static_cast<int>(si.size());
  return total;
}

int QpData::alg_rows() const {
  int total = 0;
  for (const auto& ci : alg_c) total += static_cast<int>(ci.size());
  return total;
}

int QpData::eq_rows() const { return (dims.N + 1) * dims.n + alg_rows(); }

MatrixXd regularize_hessian(const MatrixXd& Q) {
  MatrixXd sym = 0.5 * (Q + Q.transpose());
  constexpr double floor = 1e-8;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  if (lo >= floor) return sym;
  double rho = 1e-8;
  while (lo + rho < floor) rho *= 10.0;
  sym.diagonal().array() += rho;
  return sym;
}

namespace {

[[noreturn]] void rethrow_at_stage(const char* what, int stage) {
  try {
    throw;
  } catch (const std::exception& e) {
    throw DynamicsEvalError(std::string("build_qp: ") + what + " failed at stage " +
                            std::to_string(stage) + ": " + e.what());
  }
}

void check_finite(const char* what, int stage, const VectorXd& v, const MatrixXd& m) {
  if (!v.allFinite() || !m.allFinite())
    throw DynamicsEvalError(std::string("build_qp: non-finite ") + what + " at stage " +
                            std::to_string(stage));
}

}  // namespace

QpData build_qp(const NlpProblem& problem, const Trajectory& guess, const VectorXd& x_now) {
  const Dims& d = problem.dims;
  if (!(guess.dims() == d)) throw std::invalid_argument("build_qp: trajectory dims mismatch");
  if (x_now.size() != d.n) throw std::invalid_argument("build_qp: x_now size");

  QpData qp;
  qp.dims = d;
  qp.Q.resize(d.N + 1);
  qp.F.resize(d.N + 1);
  qp.M.resize(d.N + 1);
  qp.s.resize(d.N + 1);
  qp.A.resize(d.N);
  const bool has_alg = static_cast<bool>(problem.stage_alg_eq);
  if (has_alg) {
    qp.alg_C.resize(d.N);
    qp.alg_c.resize(d.N);
  }

  std::vector<VectorXd> h_vals(d.N);
  for (int i = 0; i < d.N; ++i) {
    const VectorXd z = guess.stage(i);
    try {
      VectorXd grad;
      MatrixXd hess;
      problem.stage_cost_grad_hess(i, z, grad, hess);
      check_finite("stage cost", i, grad, hess);
      qp.Q[i] = regularize_hessian(hess);
      qp.F[i] = grad;
    } catch (const DynamicsEvalError&) {
      throw;
    } catch (...) {
      rethrow_at_stage("stage cost", i);
    }
    try {
      VectorXd g;
      MatrixXd jac;
      problem.stage_ineq(i, z, g, jac);
      check_finite("stage inequality", i, g, jac);
      qp.s[i] = g;
      qp.M[i] = jac;
    } catch (const DynamicsEvalError&) {
      throw;
    } catch (...) {
      rethrow_at_stage("stage inequality", i);
    }
    try {
      h_vals[i] = eval_dynamics(problem, z);
      qp.A[i] = problem.dynamics_jac(z);
      if (!qp.A[i].allFinite()) throw DynamicsEvalError("non-finite dynamics Jacobian");
    } catch (const std::exception& e) {
      throw DynamicsEvalError("build_qp: dynamics failed at stage " + std::to_string(i) + ": " +
                              e.what());
    }
    if (has_alg) {
      try {
        VectorXd c;
        MatrixXd jac;
        problem.stage_alg_eq(i, z, c, jac);
        check_finite("algebraic rows", i, c, jac);
        qp.alg_c[i] = c;
        qp.alg_C[i] = jac;
      } catch (const DynamicsEvalError&) {
        throw;
      } catch (...) {
        rethrow_at_stage("algebraic rows", i);
      }
    }
  }

  const VectorXd zN = guess.stage(d.N);
  try {
    VectorXd grad;
    MatrixXd hess;
    problem.terminal_cost_grad_hess(zN, grad, hess);
    check_finite("terminal cost", d.N, grad, hess);
    qp.Q[d.N] = regularize_hessian(hess);
    qp.F[d.N] = grad;
    VectorXd g;
    MatrixXd jac;
    if (problem.terminal_ineq) {
      problem.terminal_ineq(zN, g, jac);
      check_finite("terminal inequality", d.N, g, jac);
    } else {
      g.resize(0);
      jac.resize(0, d.n);
    }
    qp.s[d.N] = g;
    qp.M[d.N] = jac;
  } catch (const DynamicsEvalError&) {
    throw;
  } catch (...) {
    rethrow_at_stage("terminal block", d.N);
  }

  qp.r.resize(qp.eq_rows());
  qp.r.head(d.n) = x_now - guess.state(0);
  for (int i = 0; i < d.N; ++i)
    qp.r.segment((i + 1) * d.n, d.n) = h_vals[i] - guess.state(i + 1);
  if (has_alg) {
    int row = (d.N + 1) * d.n;
    for (int i = 0; i < d.N; ++i) {
      qp.r.segment(row, qp.alg_c[i].size()) = -qp.alg_c[i];
      row += static_cast<int>(qp.alg_c[i].size());
    }
  }
  return qp;
}

StackedQp stack(const QpData& qp) {
  const Dims& d = qp.dims;
  using T = Eigen::Triplet<double>;
  StackedQp out;

  std::vector<T> ht;
  for (int i = 0; i <= d.N; ++i) {
    const int off = d.stage_offset(i);
    const auto& Qi = qp.Q[i];
    for (int cc = 0; cc < Qi.cols(); ++cc)
      for (int rr = 0; rr < Qi.rows(); ++rr) ht.emplace_back(off + rr, off + cc, Qi(rr, cc));
  }
  out.H.resize(d.p, d.p);
  out.H.setFromTriplets(ht.begin(), ht.end());

  out.f.resize(d.p);
  for (int i = 0; i <= d.N; ++i) out.f.segment(d.stage_offset(i), d.stage_size(i)) = qp.F[i];

  // equality rows: E on the diagonal stage, -A_i below it, then algebraic rows
  std::vector<T> at;
  for (int c = 0; c < d.n; ++c) at.emplace_back(c, c, 1.0);
  for (int i = 0; i < d.N; ++i) {
    const int row = (i + 1) * d.n;
    const int off = d.stage_offset(i);
    const auto& Ai = qp.A[i];
    for (int cc = 0; cc < Ai.cols(); ++cc)
      for (int rr = 0; rr < Ai.rows(); ++rr) at.emplace_back(row + rr, off + cc, -Ai(rr, cc));
    for (int c = 0; c < d.n; ++c) at.emplace_back(row + c, d.stage_offset(i + 1) + c, 1.0);
  }
  int arow = (d.N + 1) * d.n;
  for (int i = 0; i < static_cast<int>(qp.alg_C.size()); ++i) {
    const auto& Ci = qp.alg_C[i];
    const int off = d.stage_offset(i);
    for (int cc = 0; cc < Ci.cols(); ++cc)
      for (int rr = 0; rr < Ci.rows(); ++rr) at.emplace_back(arow + rr, off + cc, Ci(rr, cc));
    arow += static_cast<int>(Ci.rows());
  }
  out.Aeq.resize(qp.eq_rows(), d.p);
  out.Aeq.setFromTriplets(at.begin(), at.end());
  out.beq = qp.r;

  std::vector<T> mt;
  int mrow = 0;
  out.bineq.resize(qp.ineq_rows());
  for (int i = 0; i <= d.N; ++i) {
    const auto& Mi = qp.M[i];
    const int off = d.stage_offset(i);
    for (int cc = 0; cc < Mi.cols(); ++cc)
      for (int rr = 0; rr < Mi.rows(); ++rr) mt.emplace_back(mrow + rr, off + cc, Mi(rr, cc));
    out.bineq.segment(mrow, qp.s[i].size()) = -qp.s[i];
    mrow += static_cast<int>(Mi.rows());
  }
  out.Aineq.resize(qp.ineq_rows(), d.p);
  out.Aineq.setFromTriplets(mt.begin(), mt.end());
  return out;
}

}  // namespace pssqp
