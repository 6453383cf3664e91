#pragma once

#include <Eigen/SparseLU>
#include <limits>
#include <memory>
#include <vector>

#include "pssqp/linearize.hpp"

namespace pssqp {

enum class QpStatus { Optimal, Infeasible, IterLimit };

const char* to_string(QpStatus s);

struct QpSolution {
  VectorXd dz;      // primal step
  VectorXd lambda;  // inequality multipliers, >= 0, one per Aineq row
  VectorXd mu;      // equality multipliers
  QpStatus status = QpStatus::IterLimit;
  double kkt_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Active-set solver for strictly convex QPs in stacked form. Inequality rows
// are pivoted in and out dual-feasibly (Goldfarb/Idnani style), each
// subproblem being the equality-constrained KKT system
//   [H Aeq'; Aeq 0]
// factorized once per solve; active rows enter through a small dense Schur
// complement. Multipliers are exact on Optimal. A dense KKT backend exists as
// a reference path for tests.
class QpSolver {
 public:
  struct Options {
    double tol = 1e-8;
    int max_iters = 200;
    bool dense_kkt = false;
  };

  QpSolver() = default;
  explicit QpSolver(const Options& opts) : opts_(opts) {}

  // Cold start, or warm start from a previous solution's active set.
  QpSolution solve(const StackedQp& qp);
  QpSolution solve(const StackedQp& qp, const QpSolution& warm);

  const Options& options() const { return opts_; }
  Options& options() { return opts_; }

 private:
  QpSolution solve_impl(const StackedQp& qp, const QpSolution* warm);

  Options opts_;
  // cached sparse pattern so repeated solves skip symbolic analysis
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  std::vector<int> pattern_sig_;
  bool analyzed_ = false;
};

QpSolution solve_qp(const StackedQp& qp, const QpSolution* warm = nullptr,
                    const QpSolver::Options& opts = {});

// max of stationarity, equality violation, inequality violation and
// complementarity infinity norms.
double qp_kkt_residual(const StackedQp& qp, const QpSolution& sol);

}  // namespace pssqp
