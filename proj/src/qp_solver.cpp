#include "pssqp/qp_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace pssqp {

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

namespace {

Eigen::SparseMatrix<double> assemble_kkt(const StackedQp& qp) {
  const int p = static_cast<int>(qp.H.rows());
  const int meq = static_cast<int>(qp.Aeq.rows());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(qp.H.nonZeros() + 2 * qp.Aeq.nonZeros());
  for (int c = 0; c < qp.H.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.H, c); it; ++it)
      t.emplace_back(static_cast<int>(it.row()), c, it.value());
  for (int c = 0; c < qp.Aeq.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.Aeq, c); it; ++it) {
      t.emplace_back(p + static_cast<int>(it.row()), c, it.value());
      t.emplace_back(c, p + static_cast<int>(it.row()), it.value());
    }
  Eigen::SparseMatrix<double> K(p + meq, p + meq);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

struct SparseKkt {
  Eigen::SparseLU<Eigen::SparseMatrix<double>>* lu;
  std::vector<int>* pattern_sig;
  bool* analyzed;
  bool ok = false;

  void factor(const StackedQp& qp) {
    Eigen::SparseMatrix<double> K = assemble_kkt(qp);
    K.makeCompressed();
    std::vector<int> sig;
    sig.reserve(K.outerSize() + K.nonZeros() + 2);
    sig.push_back(static_cast<int>(K.rows()));
    sig.push_back(static_cast<int>(K.nonZeros()));
    sig.insert(sig.end(), K.outerIndexPtr(), K.outerIndexPtr() + K.outerSize() + 1);
    sig.insert(sig.end(), K.innerIndexPtr(), K.innerIndexPtr() + K.nonZeros());
    if (!*analyzed || sig != *pattern_sig) {
      lu->analyzePattern(K);
      *pattern_sig = std::move(sig);
      *analyzed = true;
    }
    lu->factorize(K);
    ok = lu->info() == Eigen::Success;
  }
  VectorXd solve(const VectorXd& rhs) const { return lu->solve(rhs); }
};

struct DenseKkt {
  Eigen::FullPivLU<MatrixXd> lu;
  bool ok = false;

  void factor(const StackedQp& qp) {
    const int p = static_cast<int>(qp.H.rows());
    const int meq = static_cast<int>(qp.Aeq.rows());
    MatrixXd K = MatrixXd::Zero(p + meq, p + meq);
    K.topLeftCorner(p, p) = MatrixXd(qp.H);
    K.bottomLeftCorner(meq, p) = MatrixXd(qp.Aeq);
    K.topRightCorner(p, meq) = K.bottomLeftCorner(meq, p).transpose();
    lu.compute(K);
    ok = lu.isInvertible();
  }
  VectorXd solve(const VectorXd& rhs) const { return lu.solve(rhs); }
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dual-feasible active-set iteration over a factorized equality KKT system.
// The working set enters through the dense Schur complement S = Mw K^-1 Mw';
// every solve against the extended system reuses cached columns K^-1 [m_j; 0].
template <class Kkt>
QpSolution run_active_set(const StackedQp& qp, const QpSolution* warm,
                          const QpSolver::Options& opts, Kkt& kkt) {
  const int p = static_cast<int>(qp.H.rows());
  const int meq = static_cast<int>(qp.Aeq.rows());
  const int mi = static_cast<int>(qp.Aineq.rows());

  QpSolution out;
  out.dz = VectorXd::Zero(p);
  out.lambda = VectorXd::Zero(mi);
  out.mu = VectorXd::Zero(meq);
  out.iterations = 0;

  kkt.factor(qp);
  if (!kkt.ok) return out;  // singular equality KKT: numerical failure

  const MatrixXd Mi = MatrixXd(qp.Aineq);

  std::vector<int> W;
  std::vector<double> lamW;
  std::vector<VectorXd> Ycols;  // K^-1 [m_j; 0] per active row
  MatrixXd S(0, 0);
  Eigen::LDLT<MatrixXd> S_ldlt;

  auto cache_col = [&](int row) {
    VectorXd rhs = VectorXd::Zero(p + meq);
    rhs.head(p) = Mi.row(row).transpose();
    return kkt.solve(rhs);
  };
  auto rebuild_schur = [&]() {
    const int k = static_cast<int>(W.size());
    S.resize(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) S(a, b) = Mi.row(W[a]).dot(Ycols[b].head(p));
    S = 0.5 * (S + S.transpose()).eval();
    if (k > 0) S_ldlt.compute(S);
  };
  // solves the KKT system extended by the working set
  auto solve_ws = [&](const VectorXd& rhs, const VectorXd& rhsW, VectorXd& v, VectorXd& dlam) {
    VectorXd g = kkt.solve(rhs);
    const int k = static_cast<int>(W.size());
    if (k == 0) {
      v = g;
      dlam.resize(0);
      return;
    }
    VectorXd h(k);
    for (int a = 0; a < k; ++a) h(a) = Mi.row(W[a]).dot(g.head(p)) - rhsW(a);
    dlam = S_ldlt.solve(h);
    v = g;
    for (int a = 0; a < k; ++a) v -= dlam(a) * Ycols[a];
  };
  auto drop_row = [&](int idx) {
    W.erase(W.begin() + idx);
    lamW.erase(lamW.begin() + idx);
    Ycols.erase(Ycols.begin() + idx);
    rebuild_schur();
  };
  auto finish = [&](QpStatus status, const VectorXd& x, const VectorXd& mu) {
    out.dz = x;
    out.mu = mu;
    out.lambda.setZero();
    for (size_t a = 0; a < W.size(); ++a) out.lambda(W[a]) = std::max(0.0, lamW[a]);
    out.status = status;
    out.kkt_norm = qp_kkt_residual(qp, out);
    return out;
  };

  if (warm && warm->lambda.size() == mi) {
    for (int i = 0; i < mi; ++i)
      if (warm->lambda(i) > 0.0) W.push_back(i);
    lamW.assign(W.size(), 0.0);
    Ycols.clear();
    for (int w : W) Ycols.push_back(cache_col(w));
    rebuild_schur();
  }

  VectorXd rhs0(p + meq);
  rhs0.head(p) = -qp.f;
  rhs0.tail(meq) = qp.beq;
  auto initial_solve = [&](VectorXd& x, VectorXd& mu) {
    VectorXd bW(W.size());
    for (size_t a = 0; a < W.size(); ++a) bW(a) = qp.bineq(W[a]);
    VectorXd v, dlam;
    solve_ws(rhs0, bW, v, dlam);
    ++out.iterations;
    x = v.head(p);
    mu = v.tail(meq);
    for (size_t a = 0; a < W.size(); ++a) lamW[a] = dlam(a);
  };

  VectorXd x, mu;
  initial_solve(x, mu);
  if (!x.allFinite()) return finish(QpStatus::IterLimit, x, mu);

  // a warm working set may carry wrong-signed multipliers; shed them first
  while (!W.empty()) {
    int worst = -1;
    double lo = -1e-12;
    for (size_t a = 0; a < W.size(); ++a)
      if (lamW[a] < lo) {
        lo = lamW[a];
        worst = static_cast<int>(a);
      }
    if (worst < 0) break;
    if (out.iterations >= opts.max_iters) return finish(QpStatus::IterLimit, x, mu);
    drop_row(worst);
    initial_solve(x, mu);
    if (!x.allFinite()) return finish(QpStatus::IterLimit, x, mu);
  }

  while (true) {
    // most violated inactive row
    int v = -1;
    double viol = opts.tol;
    for (int i = 0; i < mi; ++i) {
      if (std::find(W.begin(), W.end(), i) != W.end()) continue;
      const double si = Mi.row(i).dot(x) - qp.bineq(i);
      if (si > viol) {
        viol = si;
        v = i;
      }
    }
    if (v < 0) return finish(QpStatus::Optimal, x, mu);

    double lam_pending = 0.0;
    while (true) {
      if (out.iterations >= opts.max_iters) return finish(QpStatus::IterLimit, x, mu);
      VectorXd rhs = VectorXd::Zero(p + meq);
      rhs.head(p) = -Mi.row(v).transpose();
      VectorXd dv, dlam;
      solve_ws(rhs, VectorXd::Zero(W.size()), dv, dlam);
      ++out.iterations;
      const VectorXd dx = dv.head(p);
      if (!dx.allFinite()) return finish(QpStatus::IterLimit, x, mu);

      const double descent = -Mi.row(v).dot(dx);  // = dx' H dx >= 0
      const double t2 = descent > 1e-13 * (1.0 + viol) ? viol / descent : kInf;
      double t1 = kInf;
      int blocker = -1;
      for (size_t a = 0; a < W.size(); ++a)
        if (dlam(a) < -1e-13) {
          const double ratio = lamW[a] / (-dlam(a));
          if (ratio < t1) {
            t1 = ratio;
            blocker = static_cast<int>(a);
          }
        }
      const double t = std::min(t1, t2);
      if (t == kInf) return finish(QpStatus::Infeasible, x, mu);

      x += t * dx;
      mu += t * dv.tail(meq);
      for (size_t a = 0; a < W.size(); ++a) lamW[a] += t * dlam(a);
      lam_pending += t;
      viol -= t * descent;

      if (t == t2) {  // v reaches its bound: activate it
        W.push_back(v);
        lamW.push_back(lam_pending);
        Ycols.push_back(cache_col(v));
        rebuild_schur();
        break;
      }
      drop_row(blocker);
    }
  }
}

}  // namespace

QpSolution QpSolver::solve(const StackedQp& qp) { return solve_impl(qp, nullptr); }

QpSolution QpSolver::solve(const StackedQp& qp, const QpSolution& warm) {
  return solve_impl(qp, &warm);
}

QpSolution QpSolver::solve_impl(const StackedQp& qp, const QpSolution* warm) {
  if (qp.H.rows() != qp.H.cols() || qp.Aeq.cols() != qp.H.cols() ||
      qp.Aineq.cols() != qp.H.cols() || qp.f.size() != qp.H.cols() ||
      qp.beq.size() != qp.Aeq.rows() || qp.bineq.size() != qp.Aineq.rows())
    throw std::invalid_argument("QpSolver: inconsistent stacked dimensions");
  if (opts_.dense_kkt) {
    DenseKkt kkt;
    return run_active_set(qp, warm, opts_, kkt);
  }
  SparseKkt kkt{&lu_, &pattern_sig_, &analyzed_};
  return run_active_set(qp, warm, opts_, kkt);
}

QpSolution solve_qp(const StackedQp& qp, const QpSolution* warm, const QpSolver::Options& opts) {
  QpSolver solver(opts);
  return warm ? solver.solve(qp, *warm) : solver.solve(qp);
}

double qp_kkt_residual(const StackedQp& qp, const QpSolution& sol) {
  VectorXd stat = qp.H * sol.dz + qp.f;
  if (qp.Aineq.rows() > 0) stat += qp.Aineq.transpose() * sol.lambda;
  if (qp.Aeq.rows() > 0) stat += qp.Aeq.transpose() * sol.mu;
  double worst = stat.lpNorm<Eigen::Infinity>();
  if (qp.Aeq.rows() > 0)
    worst = std::max(worst, (qp.Aeq * sol.dz - qp.beq).lpNorm<Eigen::Infinity>());
  if (qp.Aineq.rows() > 0) {
    const VectorXd slack = qp.Aineq * sol.dz - qp.bineq;
    worst = std::max(worst, slack.cwiseMax(0.0).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (sol.lambda.array() * slack.array()).abs().maxCoeff());
  }
  return worst;
}

}  // namespace pssqp
