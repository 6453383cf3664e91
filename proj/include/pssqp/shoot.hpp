#pragma once

#include <Eigen/QR>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pssqp/qp_solver.hpp"

namespace pssqp {

enum class TriggerMode { AnyIncrease, AllIncrease };
enum class ShotMethod { NullspaceNoise, InputRollout };

struct PsSqpConfig {
  int shots = 4;           // m parallel trajectories
  double delta = 1e-4;     // residual-error convergence tolerance
  double gamma = 1.0;      // weight of the equality residual inside the error
  int max_outer_iters = 100;
  ShotMethod shot_method = ShotMethod::NullspaceNoise;
  double shot_scale = 0.02;  // perturbation size relative to 1 + |base|_inf
  TriggerMode trigger_mode = TriggerMode::AnyIncrease;
  bool triggers_enabled = true;  // off: plain full-step SQP on every shot
  double eq_tol = 1e-6;    // trajectory near-equality trigger tolerance
  double cyc_tol = 1e-8;   // step-cycling trigger tolerance
  std::uint64_t seed = 0;
  int threads = 0;         // 0: min(shots, hardware)
  QpSolver::Options qp;

  void validate() const;
};

struct ShotState {
  Trajectory traj;     // current linearization point
  QpData qp;           // linearization at traj
  QpSolution sol;      // QP step from traj
  double error = std::numeric_limits<double>::infinity();
  bool failed = false; // QP did not reach Optimal this iteration
};

struct SolveReport {
  enum class Status { Converged, IterLimit, AllShotsFailed };

  // best shot's linearization point from the final iteration; on Converged it
  // is the trajectory whose residual the stopping test certified below delta
  Trajectory solution;
  Status status = Status::IterLimit;
  int outer_iters = 0;
  std::optional<int> phase2_entered_at;
  MatrixXd per_iter_errors;            // outer_iters x m; +inf marks failed shots
  std::vector<int> best_index_history; // argmin error per iteration, 0-based
};

const char* to_string(SolveReport::Status s);

// Kernel projector of the stacked equality Jacobian, built once per solve via
// a rank-revealing QR (no pseudo-inverse matrix is formed).
class NullspaceProjector {
 public:
  explicit NullspaceProjector(const QpData& qp);
  VectorXd project(const VectorXd& omega) const;  // (I - pinv(Aeq) Aeq) omega

 private:
  Eigen::ColPivHouseholderQR<MatrixXd> qr_;  // of Aeq'
  Eigen::Index rank_ = 0;
};

// base + (I - pinv(Aeq) Aeq) omega; the perturbation stays first-order
// feasible so the nonlinear residual it induces is second order.
Trajectory nullspace_shot(const Trajectory& base, const QpData& qp, const VectorXd& omega);

// Adds offsets to the base inputs and regenerates all states by forward
// iteration of the dynamics from x_now; the result has exactly zero residual.
Trajectory rollout_shot(const NlpProblem& problem, const Trajectory& base, const VectorXd& x_now,
                        const MatrixXd& input_offsets);

// || [Q dz; lambda o s; gamma r] ||_2 with s and r from the linearization point.
double residual_error(const QpData& qp, const QpSolution& sol, double gamma);

// max of |Q dz|, |Aeq dz|, |lambda o (Aineq dz)| infinity norms: the step-form
// optimality proxy that vanishes as the step and residuals vanish.
double check_step_kkt(const QpData& qp, const QpSolution& sol);

// Decides entry into the step-size phase. Fires when (a) shot errors grew
// between consecutive iterations, (b) all trajectories are nearly equal, or
// (c) steps cycle (dz_t = -dz_{t-1}). Failed shots, and shots without a valid
// previous iterate, are excluded.
bool phase2_trigger(const std::vector<ShotState>& prev, const std::vector<ShotState>& cur,
                    const PsSqpConfig& cfg, int t);

// Lowest-index argmin of error over non-failed shots; -1 if all failed.
int select_best(const std::vector<ShotState>& shots);

// m trajectories best + (j/m) dz for j = 1..m.
std::vector<Trajectory> distribute_steps(const Trajectory& best, const VectorXd& dz, int m);

// Parallel-shooting SQP: m trajectories iterate full steps independently
// until a trigger switches to distributing scaled steps of the best shot;
// stops when the smallest shot error drops below delta.
SolveReport ps_sqp_solve(const NlpProblem& problem, const VectorXd& x_now, const Trajectory& init,
                         const PsSqpConfig& cfg,
                         const std::function<void(int, const std::vector<ShotState>&)>& observer = {});

}  // namespace pssqp
