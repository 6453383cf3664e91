#pragma once

#include <functional>

#include "pssqp/types.hpp"

namespace pssqp {

// Nonlinear program over a shooting trajectory:
//
//   min   sum_{i=0}^{N-1} f(i, z_i) + f_T(z_N)
//   s.t.  x_0 = x_now
//         h(z_i) = x_{i+1}          (discrete dynamics)
//         g(i, z_i) <= 0,  g_T(z_N) <= 0
//         c(i, z_i)  = 0            (optional stage-wise algebraic rows)
//
// with stage blocks z_i = [x_i; u_i] and a state-only terminal block z_N.
// Stage-wise callbacks take the stage index so costs and constraints may vary
// along the horizon (time-varying tariffs, demand forecasts); the dynamics map
// itself is stage-invariant. Inequality/algebraic row counts must not depend
// on the evaluation point.
struct NlpProblem {
  Dims dims;

  std::function<double(int, const VectorXd&)> stage_cost;
  std::function<void(int, const VectorXd&, VectorXd& grad, MatrixXd& hess)> stage_cost_grad_hess;
  std::function<double(const VectorXd&)> terminal_cost;
  std::function<void(const VectorXd&, VectorXd& grad, MatrixXd& hess)> terminal_cost_grad_hess;

  std::function<VectorXd(const VectorXd&)> dynamics;      // z_i -> x_{i+1}
  std::function<MatrixXd(const VectorXd&)> dynamics_jac;  // n x (n+q)

  std::function<void(int, const VectorXd&, VectorXd& g, MatrixXd& jac)> stage_ineq;
  std::function<void(const VectorXd&, VectorXd& g, MatrixXd& jac)> terminal_ineq;

  // optional; leave unset when the problem has no algebraic rows
  std::function<void(int, const VectorXd&, VectorXd& c, MatrixXd& jac)> stage_alg_eq;
};

// Evaluates the dynamics and rejects non-finite results.
VectorXd eval_dynamics(const NlpProblem& problem, const VectorXd& stage_block);

// Central-difference Jacobian of the dynamics at a stage block.
MatrixXd fd_jacobian(const NlpProblem& problem, const VectorXd& stage_block, double step = 1e-6);

// One-sample receding-horizon shift: stages move up by one, the last stage
// pairs the old terminal state with the repeated last input, and the terminal
// block is the dynamics applied to that pair.
Trajectory shift_warm_start(const NlpProblem& problem, const Trajectory& prev);

}  // namespace pssqp
