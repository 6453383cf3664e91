#include "pssqp/models/pendulum.hpp"

#include <Eigen/LU>
#include <boost/numeric/odeint.hpp>
#include <array>
#include <cmath>

namespace pssqp::models {

VectorXd pendulum_ode(const PendulumParams& p, const VectorXd& x, double u) {
  const double s = std::sin(x(0)), c = std::cos(x(0));
  const double w = x(1);
  const double d1 = p.pole_mass * p.pole_length * c * c - (p.cart_mass + p.pole_mass) * p.pole_length;
  const double d2 = p.cart_mass + p.pole_mass - p.pole_mass * c * c;
  VectorXd dx(4);
  dx(0) = w;
  dx(1) = (u * c - (p.cart_mass + p.pole_mass) * p.gravity * s +
           p.pole_mass * p.pole_length * c * s * w * w) /
          d1;
  dx(2) = x(3);
  dx(3) = (u + p.pole_mass * p.pole_length * s * w * w - p.pole_mass * p.gravity * c * s) / d2;
  return dx;
}

MatrixXd pendulum_ode_jac(const PendulumParams& p, const VectorXd& x, double u) {
  const double s = std::sin(x(0)), c = std::cos(x(0));
  const double w = x(1);
  const double M = p.cart_mass, m = p.pole_mass, l = p.pole_length, g = p.gravity;
  const double d1 = m * l * c * c - (M + m) * l;
  const double d1p = -2.0 * m * l * c * s;
  const double n1 = u * c - (M + m) * g * s + m * l * c * s * w * w;
  const double n1_x1 = -u * s - (M + m) * g * c + m * l * (c * c - s * s) * w * w;
  const double d2 = M + m - m * c * c;
  const double d2p = 2.0 * m * c * s;
  const double n2 = u + m * l * s * w * w - m * g * c * s;
  const double n2_x1 = m * l * c * w * w - m * g * (c * c - s * s);

  MatrixXd jac = MatrixXd::Zero(4, 5);
  jac(0, 1) = 1.0;
  jac(1, 0) = (n1_x1 * d1 - n1 * d1p) / (d1 * d1);
  jac(1, 1) = 2.0 * m * l * c * s * w / d1;
  jac(1, 4) = c / d1;
  jac(2, 3) = 1.0;
  jac(3, 0) = (n2_x1 * d2 - n2 * d2p) / (d2 * d2);
  jac(3, 1) = 2.0 * m * l * s * w / d2;
  jac(3, 4) = 1.0 / d2;
  return jac;
}

VectorXd pendulum_discrete(const PendulumParams& p, const VectorXd& x, double u) {
  // Newton on y - x - Ts*ode(y, u) = 0, explicit-Euler predictor
  VectorXd y = x + p.Ts * pendulum_ode(p, x, u);
  VectorXd res = y - x - p.Ts * pendulum_ode(p, y, u);
  for (int it = 0; it < 25; ++it) {
    if (res.lpNorm<Eigen::Infinity>() <= 1e-12) return y;
    const MatrixXd jx = pendulum_ode_jac(p, y, u).leftCols(4);
    const Eigen::Matrix4d jg = Eigen::Matrix4d::Identity() - p.Ts * jx;
    const VectorXd step = jg.partialPivLu().solve(-res);
    double alpha = 1.0;
    for (int half = 0; half < 12; ++half) {
      const VectorXd y_try = y + alpha * step;
      const VectorXd res_try = y_try - x - p.Ts * pendulum_ode(p, y_try, u);
      if (res_try.lpNorm<Eigen::Infinity>() < res.lpNorm<Eigen::Infinity>() || alpha < 1e-3) {
        y = y_try;
        res = res_try;
        break;
      }
      alpha *= 0.5;
    }
  }
  if (res.lpNorm<Eigen::Infinity>() <= 1e-12) return y;
  throw DynamicsEvalError("pendulum_discrete: Newton failed to reach 1e-12");
}

MatrixXd pendulum_discrete_jac(const PendulumParams& p, const VectorXd& x, double u) {
  const VectorXd y = pendulum_discrete(p, x, u);
  const MatrixXd jode = pendulum_ode_jac(p, y, u);
  const Eigen::Matrix4d lhs = Eigen::Matrix4d::Identity() - p.Ts * jode.leftCols(4);
  MatrixXd rhs(4, 5);
  rhs.leftCols(4) = Eigen::Matrix4d::Identity();
  rhs.col(4) = p.Ts * jode.col(4);
  return lhs.partialPivLu().solve(rhs);
}

VectorXd integrate_plant(const PendulumParams& p, const VectorXd& x, double u, double dt,
                         double abs_tol, double rel_tol) {
  namespace ode = boost::numeric::odeint;
  if (!(dt > 0.0)) throw IntegrationError("integrate_plant: dt must be positive");
  if (x.size() != 4 || !x.allFinite() || !std::isfinite(u))
    throw IntegrationError("integrate_plant: bad state or input");
  using state_t = std::array<double, 4>;
  state_t y{x(0), x(1), x(2), x(3)};
  auto sys = [&p, u](const state_t& s, state_t& dsdt, double) {
    const VectorXd dx = pendulum_ode(p, Eigen::Vector4d(s[0], s[1], s[2], s[3]), u);
    for (int i = 0; i < 4; ++i) dsdt[i] = dx(i);
  };
  try {
    auto stepper = ode::make_controlled(abs_tol, rel_tol, ode::runge_kutta_dopri5<state_t>());
    ode::integrate_adaptive(stepper, sys, y, 0.0, dt, dt / 100.0);
  } catch (const std::exception& e) {
    throw IntegrationError(std::string("integrate_plant: ") + e.what());
  }
  Eigen::Vector4d out(y[0], y[1], y[2], y[3]);
  if (!out.allFinite()) throw IntegrationError("integrate_plant: non-finite state");
  return out;
}

NlpProblem build_pendulum_problem(const PendulumParams& p, const PendulumNmpcSpec& spec,
                                  const Eigen::Vector4d& reference) {
  NlpProblem prob;
  prob.dims = Dims(4, 1, spec.horizon);

  Eigen::Matrix<double, 5, 1> stage_w;
  stage_w << spec.state_weights, spec.input_weight;
  Eigen::Matrix<double, 5, 1> stage_ref;
  stage_ref << reference, 0.0;
  const Eigen::Vector4d term_w = spec.terminal_weights;
  const Eigen::Vector4d term_ref = reference;

  prob.stage_cost = [stage_w, stage_ref](int, const VectorXd& z) {
    return 0.5 * (stage_w.array() * (z - stage_ref).array().square()).sum();
  };
  prob.stage_cost_grad_hess = [stage_w, stage_ref](int, const VectorXd& z, VectorXd& grad,
                                                   MatrixXd& hess) {
    grad = stage_w.asDiagonal() * (z - stage_ref);
    hess = stage_w.asDiagonal();
  };
  prob.terminal_cost = [term_w, term_ref](const VectorXd& z) {
    return 0.5 * (term_w.array() * (z - term_ref).array().square()).sum();
  };
  prob.terminal_cost_grad_hess = [term_w, term_ref](const VectorXd& z, VectorXd& grad,
                                                    MatrixXd& hess) {
    grad = term_w.asDiagonal() * (z - term_ref);
    hess = term_w.asDiagonal();
  };

  prob.dynamics = [p](const VectorXd& z) { return pendulum_discrete(p, z.head(4), z(4)); };
  prob.dynamics_jac = [p](const VectorXd& z) { return pendulum_discrete_jac(p, z.head(4), z(4)); };

  const double pb = spec.position_bound, ub = spec.input_bound;
  prob.stage_ineq = [pb, ub](int, const VectorXd& z, VectorXd& g, MatrixXd& jac) {
    g.resize(4);
    g << z(2) - pb, -z(2) - pb, z(4) - ub, -z(4) - ub;
    jac = MatrixXd::Zero(4, 5);
    jac(0, 2) = 1.0;
    jac(1, 2) = -1.0;
    jac(2, 4) = 1.0;
    jac(3, 4) = -1.0;
  };
  prob.terminal_ineq = [pb](const VectorXd& z, VectorXd& g, MatrixXd& jac) {
    g.resize(2);
    g << z(2) - pb, -z(2) - pb;
    jac = MatrixXd::Zero(2, 4);
    jac(0, 2) = 1.0;
    jac(1, 2) = -1.0;
  };
  return prob;
}

}  // namespace pssqp::models
