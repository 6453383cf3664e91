#pragma once

#include "pssqp/nlp_problem.hpp"

namespace pssqp::models {

// Inverted pendulum on a cart. State x = [angle; angular rate; cart position;
// cart velocity], angle 0 upright, input u the horizontal force on the cart.
struct PendulumParams {
  double cart_mass = 2.4;
  double pole_mass = 0.23;
  double pole_length = 0.36;
  double gravity = 9.81;
  double Ts = 0.02;
};

VectorXd pendulum_ode(const PendulumParams& p, const VectorXd& x, double u);

// 4 x 5 Jacobian of the ode w.r.t. [x; u].
MatrixXd pendulum_ode_jac(const PendulumParams& p, const VectorXd& x, double u);

// Backward-Euler step x+ = x + Ts*ode(x+, u), damped Newton to 1e-12.
VectorXd pendulum_discrete(const PendulumParams& p, const VectorXd& x, double u);

// 4 x 5 Jacobian of the backward-Euler map via the implicit function theorem:
// (I - Ts J_x(x+))^{-1} [I, Ts J_u(x+)].
MatrixXd pendulum_discrete_jac(const PendulumParams& p, const VectorXd& x, double u);

// Plant-side integration over dt with zero-order-hold input; adaptive
// Dormand-Prince 5(4) with absolute/relative tolerance 1e-8.
VectorXd integrate_plant(const PendulumParams& p, const VectorXd& x, double u, double dt,
                         double abs_tol = 1e-8, double rel_tol = 1e-8);

struct PendulumNmpcSpec {
  int horizon = 40;
  Eigen::Vector4d state_weights{100.0, 0.1, 500.0, 0.1};
  Eigen::Vector4d terminal_weights{1000.0, 10.0, 500.0, 10.0};
  double input_weight = 1e-3;
  double position_bound = 10.0;  // |cart position| bound
  double input_bound = 500.0;    // |force| bound
};

// Tracking NMPC for the pendulum: quadratic costs 1/2 (z - z_ref)' W (z - z_ref)
// around the reference state, position and input bounds as inequality rows,
// backward-Euler dynamics.
NlpProblem build_pendulum_problem(const PendulumParams& p, const PendulumNmpcSpec& spec,
                                  const Eigen::Vector4d& reference);

}  // namespace pssqp::models
