#pragma once

#include <Eigen/SparseCore>
#include <vector>

#include "pssqp/nlp_problem.hpp"

namespace pssqp {

// Stage-wise data of the QP obtained by linearizing an NlpProblem at a guess
// trajectory. Cost blocks are already regularized and symmetrized. The
// stacked equality residual r holds the N+1 dynamics blocks
//   r_0     = x_now - x_0
//   r_{i+1} = h(z_i) - E z_{i+1}
// followed by the negated algebraic values when the problem has algebraic
// rows, so that the linearized equalities read Aeq dz = r throughout.
struct QpData {
  Dims dims;
  std::vector<MatrixXd> Q;      // N+1 cost Hessian blocks
  std::vector<VectorXd> F;      // N+1 cost gradient blocks
  std::vector<MatrixXd> M;      // N+1 inequality Jacobian blocks (0 rows allowed)
  std::vector<VectorXd> s;      // N+1 inequality values at the guess
  std::vector<MatrixXd> A;      // N dynamics Jacobian blocks, n x (n+q)
  std::vector<MatrixXd> alg_C;  // algebraic Jacobians per stage; empty when absent
  std::vector<VectorXd> alg_c;  // algebraic values per stage
  VectorXd r;

  int ineq_rows() const;
  int alg_rows() const;
  int eq_rows() const;  // (N+1)*n + alg_rows()
};

QpData build_qp(const NlpProblem& problem, const Trajectory& guess, const VectorXd& x_now);

// Smallest rho from the ladder {0, 1e-8, 1e-7, 1e-6, ...} such that
// lambda_min(Q + rho I) >= 1e-8; input is symmetrized first.
MatrixXd regularize_hessian(const MatrixXd& Q);

// Stacked sparse form
//   min 1/2 dz' H dz + f' dz   s.t.  Aeq dz = beq,  Aineq dz <= bineq
// with beq = r and bineq = -s. Row order: dynamics blocks 0..N, then
// algebraic rows stage-major; inequality rows stage-major 0..N.
struct StackedQp {
  Eigen::SparseMatrix<double> H, Aeq, Aineq;
  VectorXd f, beq, bineq;
};

StackedQp stack(const QpData& qp);

}  // namespace pssqp
