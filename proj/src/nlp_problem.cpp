#include "pssqp/nlp_problem.hpp"

#include <cmath>

namespace pssqp {

VectorXd eval_dynamics(const NlpProblem& problem, const VectorXd& stage_block) {
  if (!problem.dynamics) throw DynamicsEvalError("eval_dynamics: dynamics callback unset");
  if (stage_block.size() != problem.dims.n + problem.dims.q)
    throw DynamicsEvalError("eval_dynamics: stage block size " + std::to_string(stage_block.size()));
  VectorXd x_next = problem.dynamics(stage_block);
  if (x_next.size() != problem.dims.n)
    throw DynamicsEvalError("eval_dynamics: dynamics returned size " + std::to_string(x_next.size()));
  if (!x_next.allFinite()) throw DynamicsEvalError("eval_dynamics: non-finite state");
  return x_next;
}

MatrixXd fd_jacobian(const NlpProblem& problem, const VectorXd& stage_block, double step) {
  const int n = problem.dims.n;
  const int nz = problem.dims.n + problem.dims.q;
  MatrixXd jac(n, nz);
  VectorXd z = stage_block;
  for (int j = 0; j < nz; ++j) {
    const double zj = z(j);
    z(j) = zj + step;
    const VectorXd above = eval_dynamics(problem, z);
    z(j) = zj - step;
    const VectorXd below = eval_dynamics(problem, z);
    z(j) = zj;
    jac.col(j) = (above - below) / (2.0 * step);
  }
  return jac;
}

Trajectory shift_warm_start(const NlpProblem& problem, const Trajectory& prev) {
  const Dims& d = problem.dims;
  Trajectory out(d);
  for (int i = 0; i + 1 < d.N; ++i) out.stage(i) = prev.stage(i + 1);
  // last stage: old terminal state with the last input repeated
  out.state(d.N - 1) = prev.stage(d.N);
  if (d.q > 0) out.input(d.N - 1) = prev.input(d.N - 1);
  out.stage(d.N) = eval_dynamics(problem, out.stage(d.N - 1));
  return out;
}

}  // namespace pssqp
