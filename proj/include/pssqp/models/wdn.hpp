#pragma once

#include "pssqp/nlp_problem.hpp"

namespace pssqp::models {

// Pumped water-distribution network with three tanks, two pumps, four pipes,
// three junctions and two demand nodes:
//
//   reservoir T1 --P1--> J2 --q1--> tank T5
//                        J2 --P2--> tank T6 --q2--> J4 --q3--> J3 --q4--> T5
//                                          demand d1 at J4, demand d2 at J3
//
// States are the tank heads [h1; h5; h6]. Stage inputs collect the pump flows
// u (2), the signed pipe flows q (4) and the junction heads [h2; h3; h4].
// Tank dynamics are linear in (q, u); flow balance and quadratic head-loss
// rows phi(q) = c o q o |q| enter as stage-wise algebraic equalities.
struct WdnSpec {
  int horizon = 24;
  double Ts = 1.0;  // hours
  double start_hour = 0.0;

  Eigen::Vector3d tank_area{500.0, 40.0, 40.0};
  Eigen::Vector3d level_min{10.0, 75.0, 80.0};
  Eigen::Vector3d level_max{60.0, 85.0, 90.0};
  Eigen::Vector3d level_ref{50.0, 80.0, 85.0};
  Eigen::Vector3d level_weight{0.5, 5.0, 5.0};

  Eigen::Vector4d pipe_coeff{0.6, 0.8, 0.7, 0.9};
  Eigen::Vector2d pump_flow_max{6.0, 6.0};
  Eigen::Vector2d pump_head_max{45.0, 45.0};

  // normalized price units; the pump cost scales with the squared tariff, so
  // these are sized to keep it comparable to the level-tracking weights
  double tariff_offpeak = 0.002;
  double tariff_peak = 0.006;
  double peak_start = 7.0;  // hours of day
  double peak_end = 22.0;

  Eigen::Vector2d demand_base{1.2, 1.0};
  double demand_amp = 0.35;
  Eigen::Vector2d demand_phase{0.0, 3.0};

  double flow_reg = 0.05;  // small quadratic pull on pipe flows / junction heads

  void validate() const;
};

double wdn_tariff(const WdnSpec& spec, double t_hours);
Eigen::Vector2d wdn_demand(const WdnSpec& spec, double t_hours);

// Quadratic head loss and its diagonal Jacobian.
Eigen::Vector4d wdn_head_loss(const WdnSpec& spec, const Eigen::Vector4d& q);
Eigen::Vector4d wdn_head_loss_jac(const WdnSpec& spec, const Eigen::Vector4d& q);

// Electricity cost of both pumps at tariff eps:
//   (rho g eps / 850)^2 * sum_p ((dh_p)^2 + 3 (dh_max_p)^2) u_p^2,
// dh_p the pump head gain; convex wherever |dh_p| <= dh_max_p.
double wdn_pump_cost(const WdnSpec& spec, double eps, const Eigen::Vector2d& dh,
                     const Eigen::Vector2d& u);

// Economic NMPC instance over spec.horizon stages starting at spec.start_hour.
NlpProblem build_wdn_problem(const WdnSpec& spec);

// Plant-side algebraic solve: pipe flows and junction heads consistent with
// tank heads, pump flows and demands (Newton to 1e-12).
struct WdnFlowState {
  Eigen::Vector4d q;
  Eigen::Vector3d junction_heads;  // [h2; h3; h4]
};
WdnFlowState wdn_solve_flows(const WdnSpec& spec, const Eigen::Vector3d& tank_heads,
                             const Eigen::Vector2d& u, const Eigen::Vector2d& d);

// One plant step: solve the network, then update tank heads.
Eigen::Vector3d wdn_plant_step(const WdnSpec& spec, const Eigen::Vector3d& tank_heads,
                               const Eigen::Vector2d& u, const Eigen::Vector2d& d,
                               WdnFlowState* flows = nullptr);

}  // namespace pssqp::models
