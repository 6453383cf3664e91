#include "pssqp/bench/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace pssqp::bench {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config: trailing junk for " + key + ": '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) throw ConfigError("config: " + key + " must be an integer");
  return i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: " + key + " must be true/false");
}

template <typename Vec>
void to_vec(const std::string& key, const std::string& v, Vec& out) {
  std::stringstream ss(v);
  std::string item;
  int idx = 0;
  while (std::getline(ss, item, ',')) {
    if (idx >= out.size()) throw ConfigError("config: too many entries for " + key);
    out(idx++) = to_double(key, trim(item));
  }
  if (idx != out.size())
    throw ConfigError("config: " + key + " needs " + std::to_string(out.size()) + " entries");
}

std::uint64_t mix_seed(std::uint64_t base, int k) {
  return base + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k + 1);
}

}  // namespace

void apply_config_line(SimConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model") {
    if (value != "pendulum" && value != "wdn")
      throw ConfigError("config: model must be pendulum or wdn");
    cfg.model = value;
  } else if (key == "sim_duration") {
    cfg.sim_duration = to_double(key, value);
  } else if (key == "baseline") {
    cfg.baseline = to_bool(key, value);
  } else if (key == "output_path") {
    cfg.output_path = value;
  } else if (key == "log_level") {
    cfg.log_level = to_int(key, value);
  } else if (key == "setpoint_amplitude") {
    cfg.setpoint_amplitude = to_double(key, value);
  } else if (key == "setpoint_interval") {
    cfg.setpoint_interval = to_double(key, value);
  } else if (key == "demand_mismatch") {
    cfg.demand_mismatch = to_double(key, value);
  } else if (key == "solver.shots") {
    cfg.solver.shots = to_int(key, value);
  } else if (key == "solver.delta") {
    cfg.solver.delta = to_double(key, value);
  } else if (key == "solver.gamma") {
    cfg.solver.gamma = to_double(key, value);
  } else if (key == "solver.max_outer_iters") {
    cfg.solver.max_outer_iters = to_int(key, value);
  } else if (key == "solver.shot_method") {
    if (value == "nullspace")
      cfg.solver.shot_method = ShotMethod::NullspaceNoise;
    else if (value == "rollout")
      cfg.solver.shot_method = ShotMethod::InputRollout;
    else
      throw ConfigError("config: shot_method must be nullspace or rollout");
  } else if (key == "solver.shot_scale") {
    cfg.solver.shot_scale = to_double(key, value);
  } else if (key == "solver.trigger_mode") {
    if (value == "any")
      cfg.solver.trigger_mode = TriggerMode::AnyIncrease;
    else if (value == "all")
      cfg.solver.trigger_mode = TriggerMode::AllIncrease;
    else
      throw ConfigError("config: trigger_mode must be any or all");
  } else if (key == "solver.triggers_enabled") {
    cfg.solver.triggers_enabled = to_bool(key, value);
  } else if (key == "solver.eq_tol") {
    cfg.solver.eq_tol = to_double(key, value);
  } else if (key == "solver.cyc_tol") {
    cfg.solver.cyc_tol = to_double(key, value);
  } else if (key == "solver.seed") {
    cfg.solver.seed = static_cast<std::uint64_t>(to_double(key, value));
  } else if (key == "solver.threads") {
    cfg.solver.threads = to_int(key, value);
  } else if (key == "solver.qp.tol") {
    cfg.solver.qp.tol = to_double(key, value);
  } else if (key == "solver.qp.max_iters") {
    cfg.solver.qp.max_iters = to_int(key, value);
  } else if (key == "solver.qp.dense") {
    cfg.solver.qp.dense_kkt = to_bool(key, value);
  } else if (key == "pendulum.cart_mass") {
    cfg.pendulum.cart_mass = to_double(key, value);
  } else if (key == "pendulum.pole_mass") {
    cfg.pendulum.pole_mass = to_double(key, value);
  } else if (key == "pendulum.pole_length") {
    cfg.pendulum.pole_length = to_double(key, value);
  } else if (key == "pendulum.gravity") {
    cfg.pendulum.gravity = to_double(key, value);
  } else if (key == "pendulum.Ts") {
    cfg.pendulum.Ts = to_double(key, value);
  } else if (key == "pendulum.horizon") {
    cfg.pendulum_nmpc.horizon = to_int(key, value);
  } else if (key == "pendulum.state_weights") {
    to_vec(key, value, cfg.pendulum_nmpc.state_weights);
  } else if (key == "pendulum.terminal_weights") {
    to_vec(key, value, cfg.pendulum_nmpc.terminal_weights);
  } else if (key == "pendulum.input_weight") {
    cfg.pendulum_nmpc.input_weight = to_double(key, value);
  } else if (key == "pendulum.position_bound") {
    cfg.pendulum_nmpc.position_bound = to_double(key, value);
  } else if (key == "pendulum.input_bound") {
    cfg.pendulum_nmpc.input_bound = to_double(key, value);
  } else if (key == "wdn.horizon") {
    cfg.wdn.horizon = to_int(key, value);
  } else if (key == "wdn.Ts") {
    cfg.wdn.Ts = to_double(key, value);
  } else if (key == "wdn.start_hour") {
    cfg.wdn.start_hour = to_double(key, value);
  } else if (key == "wdn.tank_area") {
    to_vec(key, value, cfg.wdn.tank_area);
  } else if (key == "wdn.level_min") {
    to_vec(key, value, cfg.wdn.level_min);
  } else if (key == "wdn.level_max") {
    to_vec(key, value, cfg.wdn.level_max);
  } else if (key == "wdn.level_ref") {
    to_vec(key, value, cfg.wdn.level_ref);
  } else if (key == "wdn.level_weight") {
    to_vec(key, value, cfg.wdn.level_weight);
  } else if (key == "wdn.pipe_coeff") {
    to_vec(key, value, cfg.wdn.pipe_coeff);
  } else if (key == "wdn.pump_flow_max") {
    to_vec(key, value, cfg.wdn.pump_flow_max);
  } else if (key == "wdn.pump_head_max") {
    to_vec(key, value, cfg.wdn.pump_head_max);
  } else if (key == "wdn.tariff_offpeak") {
    cfg.wdn.tariff_offpeak = to_double(key, value);
  } else if (key == "wdn.tariff_peak") {
    cfg.wdn.tariff_peak = to_double(key, value);
  } else if (key == "wdn.peak_start") {
    cfg.wdn.peak_start = to_double(key, value);
  } else if (key == "wdn.peak_end") {
    cfg.wdn.peak_end = to_double(key, value);
  } else if (key == "wdn.demand_base") {
    to_vec(key, value, cfg.wdn.demand_base);
  } else if (key == "wdn.demand_amp") {
    cfg.wdn.demand_amp = to_double(key, value);
  } else if (key == "wdn.demand_phase") {
    to_vec(key, value, cfg.wdn.demand_phase);
  } else if (key == "wdn.flow_reg") {
    cfg.wdn.flow_reg = to_double(key, value);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void finalize_config(SimConfig& cfg) {
  if (std::isnan(cfg.solver.delta)) cfg.solver.delta = (cfg.model == "wdn") ? 1e-4 : 0.5;
  cfg.solver.validate();
}

SimConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  SimConfig cfg;
  cfg.solver.delta = std::numeric_limits<double>::quiet_NaN();  // model default unless set
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
    apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  finalize_config(cfg);
  return cfg;
}

double setpoint_at(const SimConfig& cfg, double t) {
  const long k = static_cast<long>(std::floor(t / cfg.setpoint_interval + 1e-12));
  return (k % 2 == 0) ? cfg.setpoint_amplitude : -cfg.setpoint_amplitude;
}

double reference_deviation(const SimConfig& cfg, const StepRecord& rec) {
  if (cfg.model == "wdn") return (rec.x - cfg.wdn.level_ref).lpNorm<Eigen::Infinity>();
  return std::abs(rec.x(2) - setpoint_at(cfg, rec.t));
}

namespace {

PsSqpConfig sample_solver_config(const SimConfig& cfg, int k) {
  PsSqpConfig s = cfg.solver;
  if (cfg.baseline) {
    s.shots = 1;
    s.triggers_enabled = false;
  }
  s.seed = mix_seed(cfg.solver.seed, k);
  return s;
}

void log_sample(const SimConfig& cfg, const StepRecord& rec, int total) {
  if (cfg.log_level >= 2) {
    std::fprintf(stderr, "[%s] sample %d/%d iters=%d phase2=%d conv=%d\n", cfg.model.c_str(),
                 rec.k + 1, total, rec.sqp_iters, rec.phase2, rec.converged);
  } else if (cfg.log_level == 1 && ((rec.k + 1) % 100 == 0 || rec.k + 1 == total)) {
    std::fprintf(stderr, "[%s] sample %d/%d\n", cfg.model.c_str(), rec.k + 1, total);
  }
}

RunResult run_pendulum(const SimConfig& cfg) {
  const auto& par = cfg.pendulum;
  const auto& nmpc = cfg.pendulum_nmpc;
  const int samples = static_cast<int>(std::llround(cfg.sim_duration / par.Ts));
  if (samples < 1) throw ConfigError("config: sim_duration shorter than one sample");

  VectorXd x(4);
  x << M_PI, 0.0, 0.0, 0.0;  // hanging straight down

  const Dims dims(4, 1, nmpc.horizon);
  auto coast_rollout = [&](const NlpProblem& prob, const VectorXd& from) {
    Trajectory traj(dims);
    traj.state(0) = from;
    for (int i = 0; i < dims.N; ++i) {
      traj.input(i).setZero();
      traj.state(i + 1) = eval_dynamics(prob, traj.stage(i));
    }
    return traj;
  };
  Trajectory warm;
  {
    Eigen::Vector4d ref(0.0, 0.0, setpoint_at(cfg, 0.0), 0.0);
    warm = coast_rollout(models::build_pendulum_problem(par, nmpc, ref), x);
  }

  RunResult out;
  out.records.reserve(samples);
  for (int k = 0; k < samples; ++k) {
    const double t = k * par.Ts;
    Eigen::Vector4d ref(0.0, 0.0, setpoint_at(cfg, t), 0.0);
    NlpProblem prob = models::build_pendulum_problem(par, nmpc, ref);

    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep = ps_sqp_solve(prob, x, warm, sample_solver_config(cfg, k));
    const auto t1 = std::chrono::steady_clock::now();

    StepRecord rec;
    rec.k = k;
    rec.t = t;
    rec.x = x;
    rec.u = rep.solution.input(0);
    rec.sqp_iters = rep.outer_iters;
    rec.phase2 = rep.phase2_entered_at.has_value() ? 1 : 0;
    rec.best_shot = rep.best_index_history.empty() ? 0 : rep.best_index_history.back() + 1;
    rec.wall_time = std::chrono::duration<double>(t1 - t0).count();
    rec.converged = rep.status == SolveReport::Status::Converged ? 1 : 0;
    if (!rec.converged) ++out.failed_samples;

    x = models::integrate_plant(par, x, rec.u(0), par.Ts);
    if (rep.status == SolveReport::Status::AllShotsFailed) {
      warm = coast_rollout(prob, x);  // returned trajectory is unusable
    } else {
      warm = shift_warm_start(prob, rep.solution);
    }
    log_sample(cfg, rec, samples);
    out.records.push_back(std::move(rec));
  }
  return out;
}

RunResult run_wdn(const SimConfig& cfg) {
  models::WdnSpec spec = cfg.wdn;
  const int samples = static_cast<int>(std::llround(cfg.sim_duration / spec.Ts));
  if (samples < 1) throw ConfigError("config: sim_duration shorter than one sample");

  Eigen::Vector3d h(50.0, 78.0, 83.0);

  std::mt19937_64 phase_rng(cfg.solver.seed ^ 0xD1B54A32D192ED03ULL);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);
  const Eigen::Vector2d mismatch_phase(unif(phase_rng), unif(phase_rng));

  const Dims dims(3, 9, spec.horizon);
  // constant-pumping forward rollout: every equality row holds at the guess
  auto pump_rollout = [&](double start_hour, const Eigen::Vector3d& from) {
    const double total = spec.demand_base.sum();
    const Eigen::Vector2d u0(0.85 * total, 0.75 * total);
    Trajectory traj(dims);
    Eigen::Vector3d hg = from;
    for (int i = 0; i < dims.N; ++i) {
      const Eigen::Vector2d d = models::wdn_demand(spec, start_hour + i * spec.Ts);
      models::WdnFlowState fs = models::wdn_solve_flows(spec, hg, u0, d);
      traj.state(i) = hg;
      traj.input(i) << u0, fs.q, fs.junction_heads;
      hg = models::wdn_plant_step(spec, hg, u0, d);
    }
    traj.state(dims.N) = hg;
    return traj;
  };
  Trajectory warm = pump_rollout(spec.start_hour, h);

  RunResult out;
  out.records.reserve(samples);
  for (int k = 0; k < samples; ++k) {
    const double t = spec.start_hour + k * spec.Ts;
    models::WdnSpec spec_k = spec;
    spec_k.start_hour = t;
    NlpProblem prob = models::build_wdn_problem(spec_k);

    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep = ps_sqp_solve(prob, h, warm, sample_solver_config(cfg, k));
    const auto t1 = std::chrono::steady_clock::now();

    StepRecord rec;
    rec.k = k;
    rec.t = t;
    rec.x = h;
    rec.u = rep.solution.input(0);
    rec.sqp_iters = rep.outer_iters;
    rec.phase2 = rep.phase2_entered_at.has_value() ? 1 : 0;
    rec.best_shot = rep.best_index_history.empty() ? 0 : rep.best_index_history.back() + 1;
    rec.wall_time = std::chrono::duration<double>(t1 - t0).count();
    rec.converged = rep.status == SolveReport::Status::Converged ? 1 : 0;
    if (!rec.converged) ++out.failed_samples;

    const Eigen::Vector2d u_cmd = rec.u.head(2);
    const Eigen::Vector2d d_pred = models::wdn_demand(spec, t);
    Eigen::Vector2d d_plant;
    for (int i = 0; i < 2; ++i) {
      d_plant(i) = d_pred(i) *
                   (1.0 + cfg.demand_mismatch * std::sin(2.0 * M_PI * k / 24.0 + mismatch_phase(i)));
    }
    h = models::wdn_plant_step(spec, h, u_cmd, d_plant);
    if (rep.status == SolveReport::Status::AllShotsFailed) {
      warm = pump_rollout(t + spec.Ts, h);
    } else {
      warm = shift_warm_start(prob, rep.solution);
    }
    log_sample(cfg, rec, samples);
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

RunResult run_closed_loop(const SimConfig& cfg) {
  if (std::isnan(cfg.solver.delta))
    throw ConfigError("config: solver.delta unset; call finalize_config");
  if (cfg.model == "pendulum") return run_pendulum(cfg);
  if (cfg.model == "wdn") return run_wdn(cfg);
  throw ConfigError("config: unknown model " + cfg.model);
}

void write_results(const std::string& path, const std::vector<StepRecord>& records) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("write_results: cannot open " + path);
  // no records: header only, with nothing to describe in the x/u ranges
  const int n = records.empty() ? 0 : static_cast<int>(records.front().x.size());
  const int q = records.empty() ? 0 : static_cast<int>(records.front().u.size());
  std::fprintf(f, "k,t");
  for (int i = 0; i < n; ++i) std::fprintf(f, ",x_%d", i);
  for (int i = 0; i < q; ++i) std::fprintf(f, ",u_%d", i);
  std::fprintf(f, ",sqp_iters,phase2,best_shot,wall_time,converged\n");
  for (const auto& r : records) {
    std::fprintf(f, "%d,%.12g", r.k, r.t);
    for (int i = 0; i < n; ++i) std::fprintf(f, ",%.12g", r.x(i));
    for (int i = 0; i < q; ++i) std::fprintf(f, ",%.12g", r.u(i));
    std::fprintf(f, ",%d,%d,%d,%.12g,%d\n", r.sqp_iters, r.phase2, r.best_shot, r.wall_time,
                 r.converged);
  }
  std::fclose(f);
}

std::vector<StepRecord> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("read_results: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("read_results: empty file " + path);
  int n = 0, q = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind("x_", 0) == 0) ++n;
      if (col.rfind("u_", 0) == 0) ++q;
    }
  }
  std::vector<StepRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (n == 0) throw ConfigError("read_results: no state columns in " + path);
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != 2 + n + q + 5)
      throw ConfigError("read_results: malformed row in " + path);
    StepRecord r;
    int c = 0;
    r.k = to_int("k", cells[c++]);
    r.t = to_double("t", cells[c++]);
    r.x.resize(n);
    for (int i = 0; i < n; ++i) r.x(i) = to_double("x", cells[c++]);
    r.u.resize(q);
    for (int i = 0; i < q; ++i) r.u(i) = to_double("u", cells[c++]);
    r.sqp_iters = to_int("sqp_iters", cells[c++]);
    r.phase2 = to_int("phase2", cells[c++]);
    r.best_shot = to_int("best_shot", cells[c++]);
    r.wall_time = to_double("wall_time", cells[c++]);
    r.converged = to_int("converged", cells[c++]);
    records.push_back(std::move(r));
  }
  return records;
}

CompareSummary compare_runs(const SimConfig& cfg, const std::vector<StepRecord>& a,
                            const std::vector<StepRecord>& b) {
  if (a.size() != b.size()) throw ConfigError("compare_runs: sample counts differ");
  if (a.empty()) throw ConfigError("compare_runs: empty runs");
  CompareSummary s;
  const int count = static_cast<int>(a.size());
  std::vector<double> dev_a(count), dev_b(count);
  double peak_a = 0.0, peak_b = 0.0;
  for (int i = 0; i < count; ++i) {
    s.total_iters_a += a[i].sqp_iters;
    s.total_iters_b += b[i].sqp_iters;
    s.iter_delta.push_back(a[i].sqp_iters - b[i].sqp_iters);
    dev_a[i] = reference_deviation(cfg, a[i]);
    dev_b[i] = reference_deviation(cfg, b[i]);
    peak_a = std::max(peak_a, dev_a[i]);
    peak_b = std::max(peak_b, dev_b[i]);
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (int i = 0; i < count; ++i) {
    if (dev_a[i] > 0.1 * peak_a || dev_b[i] > 0.1 * peak_b) {
      s.transient_window.push_back(i);
      sum_a += a[i].sqp_iters;
      sum_b += b[i].sqp_iters;
    }
  }
  if (!s.transient_window.empty()) {
    s.transient_mean_a = sum_a / s.transient_window.size();
    s.transient_mean_b = sum_b / s.transient_window.size();
  }
  return s;
}

std::string format_summary(const CompareSummary& s) {
  std::ostringstream os;
  os << "total iterations: a=" << s.total_iters_a << " b=" << s.total_iters_b
     << " (a-b=" << (s.total_iters_a - s.total_iters_b) << ")\n";
  os << "transient window: " << s.transient_window.size() << " of " << s.iter_delta.size()
     << " samples\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "transient mean iterations: a=%.3f b=%.3f\n", s.transient_mean_a,
                s.transient_mean_b);
  os << buf;
  return os.str();
}

}  // namespace pssqp::bench
