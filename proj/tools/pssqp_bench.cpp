#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "pssqp/bench/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, bool baseline, int cores, long long seed,
            const std::string& out_path) {
  pssqp::bench::SimConfig cfg = pssqp::bench::parse_config(config_path);
  if (baseline) cfg.baseline = true;
  if (cores > 0) cfg.solver.shots = cores;
  if (seed >= 0) cfg.solver.seed = static_cast<std::uint64_t>(seed);
  if (!out_path.empty()) cfg.output_path = out_path;
  cfg.solver.validate();

  pssqp::bench::RunResult result = pssqp::bench::run_closed_loop(cfg);
  if (!cfg.output_path.empty()) pssqp::bench::write_results(cfg.output_path, result.records);

  long total_iters = 0;
  double total_wall = 0.0;
  for (const auto& r : result.records) {
    total_iters += r.sqp_iters;
    total_wall += r.wall_time;
  }
  std::printf("model=%s samples=%zu shots=%d baseline=%d\n", cfg.model.c_str(),
              result.records.size(), cfg.baseline ? 1 : cfg.solver.shots, cfg.baseline ? 1 : 0);
  std::printf("iterations total=%ld mean=%.3f\n", total_iters,
              static_cast<double>(total_iters) / result.records.size());
  std::printf("solver wall time total=%.3fs mean=%.4fs\n", total_wall,
              total_wall / result.records.size());
  std::printf("failed samples=%d\n", result.failed_samples);
  if (!cfg.output_path.empty()) std::printf("wrote %s\n", cfg.output_path.c_str());
  return result.failed_samples > 0 ? 2 : 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& config_path) {
  pssqp::bench::SimConfig cfg;
  if (!config_path.empty()) cfg = pssqp::bench::parse_config(config_path);
  const auto a = pssqp::bench::read_results(path_a);
  const auto b = pssqp::bench::read_results(path_b);
  const auto summary = pssqp::bench::compare_runs(cfg, a, b);
  std::printf("%s", pssqp::bench::format_summary(summary).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop NMPC benchmark for the parallel-shooting SQP solver"};
  app.require_subcommand(1);

  std::string config_path, out_path, cmp_a, cmp_b, cmp_config;
  bool baseline = false;
  int cores = 0;
  long long seed = -1;

  CLI::App* run = app.add_subcommand("run", "Run a closed-loop scenario");
  run->add_option("--config", config_path, "key=value scenario file")->required();
  run->add_flag("--baseline", baseline, "single-shot solver, step-size phase off");
  run->add_option("--cores", cores, "parallel shots m (one per core)");
  run->add_option("--seed", seed, "override the solver seed");
  run->add_option("--out", out_path, "CSV output path");

  CLI::App* cmp = app.add_subcommand("compare", "Compare two result CSVs");
  cmp->add_option("csv_a", cmp_a, "first result file")->required();
  cmp->add_option("csv_b", cmp_b, "second result file")->required();
  cmp->add_option("--config", cmp_config, "scenario file the runs used");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, baseline, cores, seed, out_path);
    return cmd_compare(cmp_a, cmp_b, cmp_config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
