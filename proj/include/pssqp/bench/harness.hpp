#pragma once

#include <string>
#include <vector>

#include "pssqp/models/pendulum.hpp"
#include "pssqp/models/wdn.hpp"
#include "pssqp/shoot.hpp"

namespace pssqp::bench {

// Closed-loop benchmark configuration; parsed from key=value files.
struct SimConfig {
  std::string model = "pendulum";  // "pendulum" or "wdn"
  double sim_duration = 10.0;      // seconds (pendulum) or hours (wdn)
  bool baseline = false;           // m = 1, step-size phase disabled
  std::string output_path;
  int log_level = 1;  // 0 quiet, 1 progress, 2 per-sample detail

  PsSqpConfig solver;

  models::PendulumParams pendulum;
  models::PendulumNmpcSpec pendulum_nmpc;
  double setpoint_amplitude = 3.0;  // cart position toggles +/- this value
  double setpoint_interval = 5.0;   // seconds between toggles

  models::WdnSpec wdn;
  double demand_mismatch = 0.05;  // plant demand = forecast * (1 + this * sinusoid)
};

// Reads key=value lines ('#' comments, blank lines allowed); unknown keys are
// rejected. Model-specific keys use a "pendulum." / "wdn." prefix.
SimConfig parse_config(const std::string& path);
void apply_config_line(SimConfig& cfg, const std::string& key, const std::string& value);
// Fills model-dependent solver defaults (delta) when the file did not set them.
void finalize_config(SimConfig& cfg);

struct StepRecord {
  int k = 0;
  double t = 0.0;
  VectorXd x;  // plant state at the sample
  VectorXd u;  // applied stage input
  int sqp_iters = 0;
  int phase2 = 0;     // 1 if the solve entered the step-size phase
  int best_shot = 1;  // 1-based winning shot index
  double wall_time = 0.0;
  int converged = 0;
};

struct RunResult {
  std::vector<StepRecord> records;
  int failed_samples = 0;  // samples whose solve did not converge
};

RunResult run_closed_loop(const SimConfig& cfg);

// CSV with header k,t,x_0..x_{n-1},u_0..u_{q-1},sqp_iters,phase2,best_shot,
// wall_time,converged; decimals carry 12 significant digits.
void write_results(const std::string& path, const std::vector<StepRecord>& records);
std::vector<StepRecord> read_results(const std::string& path);

// Position reference the pendulum run tracks at time t.
double setpoint_at(const SimConfig& cfg, double t);
// Deviation used for the transient window of a record under this config.
double reference_deviation(const SimConfig& cfg, const StepRecord& rec);

struct CompareSummary {
  long total_iters_a = 0;
  long total_iters_b = 0;
  std::vector<int> iter_delta;        // per sample, a - b
  std::vector<int> transient_window;  // sample indices in the window
  double transient_mean_a = 0.0;
  double transient_mean_b = 0.0;
};

// Compares two runs of the same scenario. The transient window collects the
// samples where either run's reference deviation exceeds 10% of that run's
// peak deviation.
CompareSummary compare_runs(const SimConfig& cfg, const std::vector<StepRecord>& a,
                            const std::vector<StepRecord>& b);

std::string format_summary(const CompareSummary& s);

}  // namespace pssqp::bench
