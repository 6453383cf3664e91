#include "pssqp/shoot.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <thread>

namespace pssqp {

const char* to_string(SolveReport::Status s) {
  switch (s) {
    case SolveReport::Status::Converged: return "Converged";
    case SolveReport::Status::IterLimit: return "IterLimit";
    case SolveReport::Status::AllShotsFailed: return "AllShotsFailed";
  }
  return "?";
}

void PsSqpConfig::validate() const {
  if (shots < 1) throw ConfigError("PsSqpConfig: shots >= 1 required");
  if (!(delta > 0.0)) throw ConfigError("PsSqpConfig: delta > 0 required");
  if (!(gamma > 0.0)) throw ConfigError("PsSqpConfig: gamma > 0 required");
  if (max_outer_iters < 1) throw ConfigError("PsSqpConfig: max_outer_iters >= 1 required");
  if (!(shot_scale > 0.0)) throw ConfigError("PsSqpConfig: shot_scale > 0 required");
  if (!(eq_tol > 0.0) || !(cyc_tol > 0.0)) throw ConfigError("PsSqpConfig: trigger tolerances > 0");
  if (!(qp.tol > 0.0) || qp.max_iters < 1) throw ConfigError("PsSqpConfig: bad qp options");
  if (threads < 0) throw ConfigError("PsSqpConfig: threads >= 0 required");
}

namespace {

MatrixXd dense_equality_jacobian(const QpData& qp) {
  const Dims& d = qp.dims;
  MatrixXd A = MatrixXd::Zero(qp.eq_rows(), d.p);
  A.topLeftCorner(d.n, d.n).setIdentity();
  for (int i = 0; i < d.N; ++i) {
    A.block((i + 1) * d.n, d.stage_offset(i), d.n, d.n + d.q) = -qp.A[i];
    A.block((i + 1) * d.n, d.stage_offset(i + 1), d.n, d.n).setIdentity();
  }
  int row = (d.N + 1) * d.n;
  for (int i = 0; i < static_cast<int>(qp.alg_C.size()); ++i) {
    A.block(row, d.stage_offset(i), qp.alg_C[i].rows(), d.n + d.q) = qp.alg_C[i];
    row += static_cast<int>(qp.alg_C[i].rows());
  }
  return A;
}

}  // namespace

NullspaceProjector::NullspaceProjector(const QpData& qp) {
  const MatrixXd At = dense_equality_jacobian(qp).transpose();
  qr_.compute(At);
  rank_ = qr_.rank();
}

VectorXd NullspaceProjector::project(const VectorXd& omega) const {
  if (omega.size() != qr_.rows()) throw ShotGenError("NullspaceProjector: omega size mismatch");
  VectorXd y = qr_.householderQ().adjoint() * omega;
  y.head(rank_).setZero();
  return qr_.householderQ() * y;
}

Trajectory nullspace_shot(const Trajectory& base, const QpData& qp, const VectorXd& omega) {
  if (!(base.dims() == qp.dims)) throw ShotGenError("nullspace_shot: dims mismatch");
  NullspaceProjector proj(qp);
  const VectorXd eps = proj.project(omega);
  if (!eps.allFinite()) throw ShotGenError("nullspace_shot: non-finite perturbation");
  return Trajectory(base.dims(), base.data() + eps);
}

Trajectory rollout_shot(const NlpProblem& problem, const Trajectory& base, const VectorXd& x_now,
                        const MatrixXd& input_offsets) {
  const Dims& d = problem.dims;
  if (!(base.dims() == d)) throw ShotGenError("rollout_shot: dims mismatch");
  if (input_offsets.rows() != d.q || input_offsets.cols() != d.N)
    throw ShotGenError("rollout_shot: offsets must be q x N");
  Trajectory out(d);
  out.state(0) = x_now;
  for (int i = 0; i < d.N; ++i) {
    if (d.q > 0) out.input(i) = base.input(i) + input_offsets.col(i);
    out.stage(i + 1).head(d.n) = eval_dynamics(problem, out.stage(i));
  }
  return out;
}

double residual_error(const QpData& qp, const QpSolution& sol, double gamma) {
  const Dims& d = qp.dims;
  double sq = 0.0;
  for (int i = 0; i <= d.N; ++i) {
    const auto dz_i = sol.dz.segment(d.stage_offset(i), d.stage_size(i));
    sq += (qp.Q[i] * dz_i).squaredNorm();
  }
  int row = 0;
  for (int i = 0; i <= d.N; ++i) {
    const int k = static_cast<int>(qp.s[i].size());
    if (k > 0)
      sq += (sol.lambda.segment(row, k).array() * qp.s[i].array()).matrix().squaredNorm();
    row += k;
  }
  sq += gamma * gamma * qp.r.squaredNorm();
  return std::sqrt(sq);
}

double check_step_kkt(const QpData& qp, const QpSolution& sol) {
  const Dims& d = qp.dims;
  double worst = 0.0;
  for (int i = 0; i <= d.N; ++i) {
    const auto dz_i = sol.dz.segment(d.stage_offset(i), d.stage_size(i));
    worst = std::max(worst, (qp.Q[i] * dz_i).lpNorm<Eigen::Infinity>());
  }
  worst = std::max(worst,
                   (dense_equality_jacobian(qp) * sol.dz).lpNorm<Eigen::Infinity>());
  int row = 0;
  for (int i = 0; i <= d.N; ++i) {
    const int k = static_cast<int>(qp.M[i].rows());
    if (k > 0) {
      const auto dz_i = sol.dz.segment(d.stage_offset(i), d.stage_size(i));
      const VectorXd mdz = qp.M[i] * dz_i;
      worst = std::max(worst,
                       (sol.lambda.segment(row, k).array() * mdz.array()).abs().maxCoeff());
    }
    row += k;
  }
  return worst;
}

int select_best(const std::vector<ShotState>& shots) {
  int best = -1;
  double lo = std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(shots.size()); ++j)
    if (!shots[j].failed && shots[j].error < lo) {
      lo = shots[j].error;
      best = j;
    }
  return best;
}

std::vector<Trajectory> distribute_steps(const Trajectory& best, const VectorXd& dz, int m) {
  if (dz.size() != best.dims().p) throw std::invalid_argument("distribute_steps: dz size");
  std::vector<Trajectory> out;
  out.reserve(m);
  for (int j = 1; j <= m; ++j)
    out.emplace_back(best.dims(), best.data() + (static_cast<double>(j) / m) * dz);
  return out;
}

bool phase2_trigger(const std::vector<ShotState>& prev, const std::vector<ShotState>& cur,
                    const PsSqpConfig& cfg, int t) {
  const int m = static_cast<int>(cur.size());
  const bool have_prev = t >= 1 && static_cast<int>(prev.size()) == m;

  // (a) shot errors grew between consecutive iterations
  if (have_prev) {
    bool any = false, all = true, seen = false;
    for (int j = 0; j < m; ++j) {
      if (cur[j].failed || prev[j].failed) continue;
      seen = true;
      const bool grew = cur[j].error - prev[j].error > 0.0;
      any = any || grew;
      all = all && grew;
    }
    if (seen && (cfg.trigger_mode == TriggerMode::AnyIncrease ? any : all)) return true;
  }

  // (b) all trajectories nearly equal
  {
    double ref = -1.0, spread = 0.0;
    for (int j = 0; j < m; ++j) {
      if (cur[j].failed) continue;
      if (ref < 0.0) ref = cur[j].traj.data().lpNorm<Eigen::Infinity>();
      for (int j2 = j + 1; j2 < m; ++j2) {
        if (cur[j2].failed) continue;
        spread = std::max(spread,
                          (cur[j].traj.data() - cur[j2].traj.data()).lpNorm<Eigen::Infinity>());
      }
    }
    if (ref >= 0.0 && spread <= cfg.eq_tol * (1.0 + ref)) return true;
  }

  // (c) steps cycle: dz_t = -dz_{t-1} on every shot
  if (have_prev) {
    bool seen = false, all = true;
    for (int j = 0; j < m; ++j) {
      if (cur[j].failed || prev[j].failed) continue;
      seen = true;
      if ((prev[j].sol.dz + cur[j].sol.dz).lpNorm<Eigen::Infinity>() > cfg.cyc_tol) all = false;
    }
    if (seen && all) return true;
  }
  return false;
}

namespace {

// Deterministic draws happen only in serial sections; workers never touch RNG.
VectorXd uniform_vec(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = dist(rng);
  return v;
}

Trajectory make_rollout_shot(const NlpProblem& problem, const Trajectory& base,
                             const VectorXd& x_now, double scale, std::mt19937_64& rng) {
  const Dims& d = problem.dims;
  const double size = scale * (1.0 + base.data().lpNorm<Eigen::Infinity>());
  MatrixXd offsets(d.q, d.N);
  for (int i = 0; i < d.N; ++i) offsets.col(i) = size * uniform_vec(rng, d.q);
  return rollout_shot(problem, base, x_now, offsets);
}

void run_chunked(int m, int threads, const std::function<void(int)>& work) {
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  int w = threads > 0 ? threads : (hw > 0 ? hw : 1);
  w = std::min(w, m);
  if (w <= 1) {
    for (int j = 0; j < m; ++j) work(j);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (int c = 0; c < w; ++c)
    pool.emplace_back([&, c]() {
      for (int j = c; j < m; j += w) work(j);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

SolveReport ps_sqp_solve(const NlpProblem& problem, const VectorXd& x_now, const Trajectory& init,
                         const PsSqpConfig& cfg,
                         const std::function<void(int, const std::vector<ShotState>&)>& observer) {
  cfg.validate();
  const Dims& d = problem.dims;
  if (!(init.dims() == d)) throw std::invalid_argument("ps_sqp_solve: init dims mismatch");
  if (x_now.size() != d.n) throw std::invalid_argument("ps_sqp_solve: x_now size");

  const int m = cfg.shots;
  std::mt19937_64 rng(cfg.seed);

  std::vector<ShotState> shots(m);
  shots[0].traj = init;

  // perturbed companions around the caller's trajectory; a trajectory that
  // cannot even be linearized leaves the companions at the base point, and the
  // main loop reports the failure instead of throwing here
  if (m > 1) {
    for (int j = 1; j < m; ++j) shots[j].traj = init;
    try {
      const QpData qp0 = build_qp(problem, init, x_now);
      const double target = cfg.shot_scale * (1.0 + init.data().lpNorm<Eigen::Infinity>());
      std::unique_ptr<NullspaceProjector> proj;
      if (cfg.shot_method == ShotMethod::NullspaceNoise)
        proj = std::make_unique<NullspaceProjector>(qp0);
      for (int j = 1; j < m; ++j) {
        if (cfg.shot_method == ShotMethod::NullspaceNoise) {
          VectorXd eps;
          double norm = 0.0;
          for (int tries = 0; tries < 8 && norm < 1e-12; ++tries) {
            eps = proj->project(uniform_vec(rng, d.p));
            norm = eps.lpNorm<Eigen::Infinity>();
          }
          if (norm < 1e-12) throw ShotGenError("ps_sqp_solve: degenerate kernel perturbation");
          shots[j].traj = Trajectory(d, init.data() + (target / norm) * eps);
        } else {
          shots[j].traj = make_rollout_shot(problem, init, x_now, cfg.shot_scale, rng);
        }
      }
    } catch (const std::exception&) {
      for (int j = 1; j < m; ++j) shots[j].traj = init;
    }
  }

  std::vector<std::unique_ptr<QpSolver>> solvers;
  solvers.reserve(m);
  for (int j = 0; j < m; ++j) solvers.push_back(std::make_unique<QpSolver>(cfg.qp));
  std::vector<QpSolution> warm(m);
  std::vector<bool> have_warm(m, false);

  SolveReport report;
  report.solution = init;
  std::vector<ShotState> prev_shots;
  std::vector<VectorXd> error_rows;
  VectorXd last_errors = VectorXd::Constant(m, 2.0 * cfg.delta);
  bool phase2 = false;
  int t = 0;

  while (true) {
    if (last_errors.minCoeff() < cfg.delta) {
      report.status = SolveReport::Status::Converged;
      break;
    }
    if (t >= cfg.max_outer_iters) {
      report.status = SolveReport::Status::IterLimit;
      break;
    }

    // failed shots get a fresh rollout companion while still exploring
    if (!phase2 && t > 0) {
      for (int j = 0; j < m; ++j) {
        if (!shots[j].failed) continue;
        try {
          shots[j].traj = make_rollout_shot(problem, report.solution, x_now, cfg.shot_scale, rng);
          have_warm[j] = false;
        } catch (const std::exception&) {
          // keep the stale trajectory; the shot will be reported failed again
        }
      }
    }

    run_chunked(m, cfg.threads, [&](int j) {
      ShotState& sh = shots[j];
      try {
        sh.qp = build_qp(problem, sh.traj, x_now);
        const StackedQp stacked = stack(sh.qp);
        sh.sol = have_warm[j] ? solvers[j]->solve(stacked, warm[j]) : solvers[j]->solve(stacked);
        if (sh.sol.status == QpStatus::Optimal) {
          sh.failed = false;
          sh.error = residual_error(sh.qp, sh.sol, cfg.gamma);
          warm[j] = sh.sol;
          have_warm[j] = true;
        } else {
          sh.failed = true;
          sh.error = std::numeric_limits<double>::infinity();
        }
      } catch (...) {
        // evaluation blow-ups count as a failed shot, never as a thrown solve
        sh.failed = true;
        sh.error = std::numeric_limits<double>::infinity();
      }
    });

    for (int j = 0; j < m; ++j) last_errors(j) = shots[j].error;
    error_rows.push_back(last_errors);

    if (observer) observer(t, shots);

    if (cfg.triggers_enabled && !phase2 && phase2_trigger(prev_shots, shots, cfg, t)) {
      phase2 = true;
      report.phase2_entered_at = t;
    }

    const int best = select_best(shots);
    report.best_index_history.push_back(best);
    if (best < 0) {
      report.status = SolveReport::Status::AllShotsFailed;
      ++t;
      break;
    }

    // the reported solution is the linearization point whose residual is
    // certified by the stopping test, not the still-unchecked updated iterate
    report.solution = shots[best].traj;

    prev_shots = shots;
    if (!phase2) {
      for (int j = 0; j < m; ++j)
        if (!shots[j].failed)
          shots[j].traj = Trajectory(d, shots[j].traj.data() + shots[j].sol.dz);
    } else {
      auto trajs = distribute_steps(shots[best].traj, shots[best].sol.dz, m);
      for (int j = 0; j < m; ++j) {
        shots[j].traj = std::move(trajs[j]);
        shots[j].failed = false;
      }
    }
    ++t;
  }

  report.outer_iters = t;
  report.per_iter_errors.resize(error_rows.size(), m);
  for (size_t row = 0; row < error_rows.size(); ++row)
    report.per_iter_errors.row(static_cast<Eigen::Index>(row)) = error_rows[row].transpose();
  return report;
}

}  // namespace pssqp
