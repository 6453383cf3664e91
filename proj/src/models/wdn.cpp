#include "pssqp/models/wdn.hpp"

#include <cmath>

namespace pssqp::models {

// stage block layout: [h1 h5 h6 | u1 u2 q1 q2 q3 q4 h2 h3 h4]
namespace {
constexpr int kH1 = 0, kH5 = 1, kH6 = 2;
constexpr int kU1 = 3, kU2 = 4;
constexpr int kQ1 = 5, kQ2 = 6, kQ3 = 7, kQ4 = 8;
constexpr int kJ2 = 9, kJ3 = 10, kJ4 = 11;
constexpr int kNz = 12;

double pump_prefactor(double eps) {
  const double v = 1000.0 * 9.81 * eps / 850.0;
  return v * v;
}
}  // namespace

void WdnSpec::validate() const {
  if (horizon < 1) throw ConfigError("WdnSpec: horizon >= 1 required");
  if (!(Ts > 0.0)) throw ConfigError("WdnSpec: Ts > 0 required");
  if ((tank_area.array() <= 0.0).any()) throw ConfigError("WdnSpec: tank areas must be positive");
  if ((level_min.array() >= level_max.array()).any())
    throw ConfigError("WdnSpec: level_min < level_max required");
  if ((pipe_coeff.array() <= 0.0).any()) throw ConfigError("WdnSpec: pipe coefficients positive");
  if ((pump_flow_max.array() <= 0.0).any() || (pump_head_max.array() <= 0.0).any())
    throw ConfigError("WdnSpec: pump limits must be positive");
  if (!(demand_amp >= 0.0 && demand_amp < 1.0)) throw ConfigError("WdnSpec: demand_amp in [0,1)");
  if (!(flow_reg > 0.0)) throw ConfigError("WdnSpec: flow_reg > 0 required");
  if (!(tariff_offpeak > 0.0) || !(tariff_peak > 0.0))
    throw ConfigError("WdnSpec: tariffs must be positive");
}

double wdn_tariff(const WdnSpec& spec, double t_hours) {
  const double tod = t_hours - 24.0 * std::floor(t_hours / 24.0);
  return (tod >= spec.peak_start && tod < spec.peak_end) ? spec.tariff_peak : spec.tariff_offpeak;
}

Eigen::Vector2d wdn_demand(const WdnSpec& spec, double t_hours) {
  Eigen::Vector2d d;
  for (int i = 0; i < 2; ++i) {
    const double phase = 2.0 * M_PI * (t_hours + spec.demand_phase(i)) / 24.0;
    d(i) = spec.demand_base(i) * (1.0 + spec.demand_amp * std::sin(phase));
    d(i) = std::max(d(i), 0.05 * spec.demand_base(i));
  }
  return d;
}

Eigen::Vector4d wdn_head_loss(const WdnSpec& spec, const Eigen::Vector4d& q) {
  return spec.pipe_coeff.array() * q.array() * q.array().abs();
}

Eigen::Vector4d wdn_head_loss_jac(const WdnSpec& spec, const Eigen::Vector4d& q) {
  return 2.0 * spec.pipe_coeff.array() * q.array().abs();
}

double wdn_pump_cost(const WdnSpec& spec, double eps, const Eigen::Vector2d& dh,
                     const Eigen::Vector2d& u) {
  const double kappa = pump_prefactor(eps);
  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double dmax = spec.pump_head_max(i);
    total += kappa * (dh(i) * dh(i) + 3.0 * dmax * dmax) * u(i) * u(i);
  }
  return total;
}

NlpProblem build_wdn_problem(const WdnSpec& spec) {
  spec.validate();
  NlpProblem prob;
  prob.dims = Dims(3, 9, spec.horizon);

  const double k1 = spec.Ts / spec.tank_area(0);
  const double k5 = spec.Ts / spec.tank_area(1);
  const double k6 = spec.Ts / spec.tank_area(2);
  const double hj_center = 0.5 * (spec.level_ref(1) + spec.level_ref(2));

  prob.dynamics = [k1, k5, k6](const VectorXd& z) {
    Eigen::Vector3d h;
    h << z(kH1) - k1 * z(kU1),                 //
        z(kH5) + k5 * (z(kQ1) + z(kQ4)),       //
        z(kH6) + k6 * (z(kU2) - z(kQ2));
    return VectorXd(h);
  };
  prob.dynamics_jac = [k1, k5, k6](const VectorXd&) {
    MatrixXd jac = MatrixXd::Zero(3, kNz);
    jac(0, kH1) = 1.0;
    jac(0, kU1) = -k1;
    jac(1, kH5) = 1.0;
    jac(1, kQ1) = k5;
    jac(1, kQ4) = k5;
    jac(2, kH6) = 1.0;
    jac(2, kU2) = k6;
    jac(2, kQ2) = -k6;
    return jac;
  };

  prob.stage_alg_eq = [spec](int i, const VectorXd& z, VectorXd& c, MatrixXd& jac) {
    const Eigen::Vector2d d = wdn_demand(spec, spec.start_hour + i * spec.Ts);
    const Eigen::Vector4d q(z(kQ1), z(kQ2), z(kQ3), z(kQ4));
    const Eigen::Vector4d phi = wdn_head_loss(spec, q);
    const Eigen::Vector4d dphi = wdn_head_loss_jac(spec, q);
    c.resize(7);
    c(0) = z(kU1) - z(kU2) - z(kQ1);           // junction J2 balance
    c(1) = z(kQ2) - z(kQ3) - d(0);             // junction J4 balance
    c(2) = z(kQ3) - z(kQ4) - d(1);             // junction J3 balance
    c(3) = z(kH5) - z(kJ2) + phi(0);           // J2 -> T5
    c(4) = z(kJ4) - z(kH6) + phi(1);           // T6 -> J4
    c(5) = z(kJ3) - z(kJ4) + phi(2);           // J4 -> J3
    c(6) = z(kH5) - z(kJ3) + phi(3);           // J3 -> T5
    jac = MatrixXd::Zero(7, kNz);
    jac(0, kU1) = 1.0;
    jac(0, kU2) = -1.0;
    jac(0, kQ1) = -1.0;
    jac(1, kQ2) = 1.0;
    jac(1, kQ3) = -1.0;
    jac(2, kQ3) = 1.0;
    jac(2, kQ4) = -1.0;
    jac(3, kH5) = 1.0;
    jac(3, kJ2) = -1.0;
    jac(3, kQ1) = dphi(0);
    jac(4, kJ4) = 1.0;
    jac(4, kH6) = -1.0;
    jac(4, kQ2) = dphi(1);
    jac(5, kJ3) = 1.0;
    jac(5, kJ4) = -1.0;
    jac(5, kQ3) = dphi(2);
    jac(6, kH5) = 1.0;
    jac(6, kJ3) = -1.0;
    jac(6, kQ4) = dphi(3);
  };

  prob.stage_cost = [spec, hj_center](int i, const VectorXd& z) {
    const double eps = wdn_tariff(spec, spec.start_hour + i * spec.Ts);
    const Eigen::Vector2d dh(z(kJ2) - z(kH1), z(kH6) - z(kJ2));
    const Eigen::Vector2d u(z(kU1), z(kU2));
    double cost = wdn_pump_cost(spec, eps, dh, u);
    for (int k = 0; k < 3; ++k) {
      const double dev = z(k) - spec.level_ref(k);
      cost += spec.level_weight(k) * dev * dev;
    }
    for (int k = kQ1; k <= kQ4; ++k) cost += spec.flow_reg * z(k) * z(k);
    for (int k = kJ2; k <= kJ4; ++k) {
      const double dev = z(k) - hj_center;
      cost += spec.flow_reg * dev * dev;
    }
    return cost;
  };

  prob.stage_cost_grad_hess = [spec, hj_center](int i, const VectorXd& z, VectorXd& grad,
                                                MatrixXd& hess) {
    const double eps = wdn_tariff(spec, spec.start_hour + i * spec.Ts);
    const double kappa = pump_prefactor(eps);
    grad = VectorXd::Zero(kNz);
    hess = MatrixXd::Zero(kNz, kNz);

    // pump 1: dh = h2 - h1, flow u1
    {
      const double dh = z(kJ2) - z(kH1), u = z(kU1), dmax = spec.pump_head_max(0);
      const double su = kappa * u * u;
      const double sd = kappa * (dh * dh + 3.0 * dmax * dmax);
      grad(kJ2) += 2.0 * su * dh;
      grad(kH1) -= 2.0 * su * dh;
      grad(kU1) += 2.0 * sd * u;
      hess(kJ2, kJ2) += 2.0 * su;
      hess(kH1, kH1) += 2.0 * su;
      hess(kJ2, kH1) -= 2.0 * su;
      hess(kH1, kJ2) -= 2.0 * su;
      hess(kU1, kU1) += 2.0 * sd;
      const double cross = 4.0 * kappa * dh * u;
      hess(kJ2, kU1) += cross;
      hess(kU1, kJ2) += cross;
      hess(kH1, kU1) -= cross;
      hess(kU1, kH1) -= cross;
    }
    // pump 2: dh = h6 - h2, flow u2
    {
      const double dh = z(kH6) - z(kJ2), u = z(kU2), dmax = spec.pump_head_max(1);
      const double su = kappa * u * u;
      const double sd = kappa * (dh * dh + 3.0 * dmax * dmax);
      grad(kH6) += 2.0 * su * dh;
      grad(kJ2) -= 2.0 * su * dh;
      grad(kU2) += 2.0 * sd * u;
      hess(kH6, kH6) += 2.0 * su;
      hess(kJ2, kJ2) += 2.0 * su;
      hess(kH6, kJ2) -= 2.0 * su;
      hess(kJ2, kH6) -= 2.0 * su;
      hess(kU2, kU2) += 2.0 * sd;
      const double cross = 4.0 * kappa * dh * u;
      hess(kH6, kU2) += cross;
      hess(kU2, kH6) += cross;
      hess(kJ2, kU2) -= cross;
      hess(kU2, kJ2) -= cross;
    }

    for (int k = 0; k < 3; ++k) {
      grad(k) += 2.0 * spec.level_weight(k) * (z(k) - spec.level_ref(k));
      hess(k, k) += 2.0 * spec.level_weight(k);
    }
    for (int k = kQ1; k <= kQ4; ++k) {
      grad(k) += 2.0 * spec.flow_reg * z(k);
      hess(k, k) += 2.0 * spec.flow_reg;
    }
    for (int k = kJ2; k <= kJ4; ++k) {
      grad(k) += 2.0 * spec.flow_reg * (z(k) - hj_center);
      hess(k, k) += 2.0 * spec.flow_reg;
    }
  };

  prob.terminal_cost = [spec](const VectorXd& z) {
    double cost = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double dev = z(k) - spec.level_ref(k);
      cost += 2.0 * spec.level_weight(k) * dev * dev;
    }
    return cost;
  };
  prob.terminal_cost_grad_hess = [spec](const VectorXd& z, VectorXd& grad, MatrixXd& hess) {
    grad = VectorXd::Zero(3);
    hess = MatrixXd::Zero(3, 3);
    for (int k = 0; k < 3; ++k) {
      grad(k) = 4.0 * spec.level_weight(k) * (z(k) - spec.level_ref(k));
      hess(k, k) = 4.0 * spec.level_weight(k);
    }
  };

  prob.stage_ineq = [spec](int, const VectorXd& z, VectorXd& g, MatrixXd& jac) {
    g.resize(14);
    jac = MatrixXd::Zero(14, kNz);
    int row = 0;
    for (int k = 0; k < 3; ++k) {  // level bounds
      g(row) = z(k) - spec.level_max(k);
      jac(row, k) = 1.0;
      ++row;
      g(row) = spec.level_min(k) - z(k);
      jac(row, k) = -1.0;
      ++row;
    }
    for (int k = 0; k < 2; ++k) {  // pump flow bounds
      g(row) = z(kU1 + k) - spec.pump_flow_max(k);
      jac(row, kU1 + k) = 1.0;
      ++row;
      g(row) = -z(kU1 + k);
      jac(row, kU1 + k) = -1.0;
      ++row;
    }
    // pump head range |dh| <= dh_max (keeps the pump cost convex)
    g(row) = (z(kJ2) - z(kH1)) - spec.pump_head_max(0);
    jac(row, kJ2) = 1.0;
    jac(row, kH1) = -1.0;
    ++row;
    g(row) = -(z(kJ2) - z(kH1)) - spec.pump_head_max(0);
    jac(row, kJ2) = -1.0;
    jac(row, kH1) = 1.0;
    ++row;
    g(row) = (z(kH6) - z(kJ2)) - spec.pump_head_max(1);
    jac(row, kH6) = 1.0;
    jac(row, kJ2) = -1.0;
    ++row;
    g(row) = -(z(kH6) - z(kJ2)) - spec.pump_head_max(1);
    jac(row, kH6) = -1.0;
    jac(row, kJ2) = 1.0;
  };

  prob.terminal_ineq = [spec](const VectorXd& z, VectorXd& g, MatrixXd& jac) {
    g.resize(6);
    jac = MatrixXd::Zero(6, 3);
    int row = 0;
    for (int k = 0; k < 3; ++k) {
      g(row) = z(k) - spec.level_max(k);
      jac(row, k) = 1.0;
      ++row;
      g(row) = spec.level_min(k) - z(k);
      jac(row, k) = -1.0;
      ++row;
    }
  };
  return prob;
}

WdnFlowState wdn_solve_flows(const WdnSpec& spec, const Eigen::Vector3d& tank_heads,
                             const Eigen::Vector2d& u, const Eigen::Vector2d& d) {
  // q1 follows from the J2 balance; the T6 -> J4 -> J3 -> T5 chain collapses
  // to one monotone scalar equation in q4:
  //   c2 q2|q2| + c3 q3|q3| + c4 q4|q4| = h6 - h5,  q3 = q4 + d2, q2 = q3 + d1
  const double h5 = tank_heads(1), h6 = tank_heads(2);
  const auto& c = spec.pipe_coeff;
  const double drop = h6 - h5;
  auto chain = [&](double q4) {
    const double q3 = q4 + d(1);
    const double q2 = q3 + d(0);
    return c(1) * q2 * std::abs(q2) + c(2) * q3 * std::abs(q3) + c(3) * q4 * std::abs(q4) - drop;
  };
  double lo = -8.0, hi = 8.0;
  for (int tries = 0; chain(lo) > 0.0 || chain(hi) < 0.0; ++tries) {
    if (tries > 24) throw DynamicsEvalError("wdn_solve_flows: cannot bracket pipe flow");
    lo *= 2.0;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi) + std::abs(lo));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    (chain(mid) <= 0.0 ? lo : hi) = mid;
  }
  const double q4 = 0.5 * (lo + hi);
  const double q3 = q4 + d(1);
  const double q2 = q3 + d(0);
  const double q1 = u(0) - u(1);

  WdnFlowState fs;
  fs.q << q1, q2, q3, q4;
  const Eigen::Vector4d phi = wdn_head_loss(spec, fs.q);
  fs.junction_heads << h5 + phi(0),          // h2: J2 -> T5 loss
      h6 - phi(1) - phi(2),                  // h3 = h4 - phi3
      h6 - phi(1);                           // h4: T6 -> J4 loss
  return fs;
}

Eigen::Vector3d wdn_plant_step(const WdnSpec& spec, const Eigen::Vector3d& tank_heads,
                               const Eigen::Vector2d& u, const Eigen::Vector2d& d,
                               WdnFlowState* flows) {
  const WdnFlowState fs = wdn_solve_flows(spec, tank_heads, u, d);
  if (flows) *flows = fs;
  Eigen::Vector3d next;
  next << tank_heads(0) - (spec.Ts / spec.tank_area(0)) * u(0),
      tank_heads(1) + (spec.Ts / spec.tank_area(1)) * (fs.q(0) + fs.q(3)),
      tank_heads(2) + (spec.Ts / spec.tank_area(2)) * (u(1) - fs.q(1));
  return next;
}

}  // namespace pssqp::models
