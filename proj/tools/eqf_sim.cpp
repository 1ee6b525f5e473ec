// eqf_sim: single runs, Monte Carlo batches and the three-way comparison
// (unbiased cascade / biased input / all sensors at the gyro rate).
//
//   eqf_sim run     [--config f] [--seed n] [--emit-series] [-o dir] ...
//   eqf_sim batch   --runs 100 [--threads k] ...
//   eqf_sim compare --runs 100 ...
//
// Values are resolved as defaults < config file < --set key=value < flags.

#include "eqf/eqf.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::string> assignments;
  std::uint64_t seed = 0;
  std::size_t runs = 100;
  unsigned threads = 0;
  double gyro_rate = 0.0;
  double star_rate = 0.0;
  double vector_rate = 0.0;
  int iterations = 0;
  std::string mode;
  std::string out_dir = "eqf_out";
  bool emit_series = false;

  std::vector<std::pair<CLI::Option*, std::function<void(eqf::ScenarioConfig&)>>> overrides;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("-c,--config", f.config_path, "key=value config file")->check(CLI::ExistingFile);
  app->add_option("--set", f.assignments, "extra key=value overrides");
  const auto bind = [&](CLI::Option* opt, std::function<void(eqf::ScenarioConfig&)> apply) {
    f.overrides.emplace_back(opt, std::move(apply));
  };
  bind(app->add_option("-s,--seed", f.seed, "master seed"), [&f](auto& c) { c.seed = f.seed; });
  bind(app->add_option("--gyro-rate", f.gyro_rate, "gyro / prediction rate (Hz)"),
       [&f](auto& c) { c.gyro_rate = f.gyro_rate; });
  bind(app->add_option("--star-rate", f.star_rate, "star tracker rate (Hz)"),
       [&f](auto& c) { c.star_rate = f.star_rate; });
  bind(app->add_option("--vector-rate", f.vector_rate, "feature vector rate (Hz)"),
       [&f](auto& c) { c.vector_rate = f.vector_rate; });
  bind(app->add_option("-i,--iterations", f.iterations, "update iterations per measurement"),
       [&f](auto& c) { c.update_iterations = f.iterations; });
  bind(app->add_option("-m,--mode", f.mode, "stage-2 input")
           ->check(CLI::IsMember({"unbiased_cascade", "biased_passthrough"})),
       [&f](auto& c) { eqf::set_config_value(c, "input_mode", f.mode); });
  app->add_option("-o,--output-dir", f.out_dir, "directory for CSV output")->capture_default_str();
  app->add_flag("--emit-series", f.emit_series, "write per-run time-series CSV files");
}

eqf::ScenarioConfig resolve(const Flags& f) {
  eqf::ScenarioConfig cfg = f.config_path.empty() ? eqf::ScenarioConfig{} : eqf::read_config(f.config_path);
  for (const std::string& a : f.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw eqf::ConfigError("--set expects key=value, got '" + a + "'");
    eqf::set_config_value(cfg, a.substr(0, eq), a.substr(eq + 1));
  }
  for (const auto& [opt, apply] : f.overrides) {
    if (opt->count() > 0) apply(cfg);
  }
  cfg.validate();
  return cfg;
}

std::string fmt(double v, const char* format = "%.3f") {
  if (!std::isfinite(v)) return "never";
  char buf[32];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

void print_summary(const std::string& title, const eqf::BatchSummary& s) {
  const eqf::RunMetrics& m = s.mean;
  std::printf("== %s (%zu runs, %zu failed)\n", title.c_str(), s.runs, s.failures);
  if (m.failed) {
    std::printf("   no successful runs\n");
    return;
  }
  const auto att = [](const char* name, const eqf::AttitudeMetrics& a, const Eigen::Vector3i& never) {
    std::printf("   %-9s roll/pitch/yaw  t<1deg %s %s %s s   mean %s %s %s deg   min %s %s %s deg", name,
                fmt(a.time_to_threshold_s.x(), "%.2f").c_str(), fmt(a.time_to_threshold_s.y(), "%.2f").c_str(),
                fmt(a.time_to_threshold_s.z(), "%.2f").c_str(), fmt(a.mean_deg.x()).c_str(),
                fmt(a.mean_deg.y()).c_str(), fmt(a.mean_deg.z()).c_str(), fmt(a.min_deg.x(), "%.2e").c_str(),
                fmt(a.min_deg.y(), "%.2e").c_str(), fmt(a.min_deg.z(), "%.2e").c_str());
    if (never.sum() > 0) std::printf("   (never below: %d/%d/%d)", never.x(), never.y(), never.z());
    std::printf("\n");
  };
  const auto vec = [](const char* name, const eqf::VectorMetrics& v) {
    std::printf("   %-9s mean %s deg/s (%s %%)   min %s deg/s (%s %%)\n", name, fmt(v.mean_dps).c_str(),
                fmt(v.mean_pct, "%.2f").c_str(), fmt(v.min_dps).c_str(), fmt(v.min_pct, "%.2f").c_str());
  };
  att("chaser", m.chaser, s.never_reached_chaser);
  vec("bias", m.bias);
  att("relative", m.relative, s.never_reached_relative);
  vec("omega", m.omega);
}

void emit_series(const fs::path& dir, const std::string& prefix, const eqf::BatchSummary& s) {
  for (std::size_t i = 0; i < s.per_run.size(); ++i) {
    eqf::write_series_csv((dir / (prefix + "series_run" + std::to_string(i) + ".csv")).string(), s.per_run[i].series);
  }
}

eqf::BatchSummary execute(const eqf::ScenarioConfig& cfg, std::size_t runs, const Flags& f, const fs::path& dir,
                          const std::string& prefix) {
  eqf::BatchSummary s = eqf::run_batch(cfg, runs, f.threads, f.emit_series);
  eqf::write_summary_csv((dir / (prefix + "summary.csv")).string(), s);
  eqf::write_config((dir / (prefix + "config.txt")).string(), cfg);
  if (f.emit_series) emit_series(dir, prefix, s);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage equivariant filter cascade simulator"};
  app.require_subcommand(1);

  Flags run_flags, batch_flags, compare_flags;
  CLI::App* run = app.add_subcommand("run", "single scenario");
  add_common(run, run_flags);
  CLI::App* batch = app.add_subcommand("batch", "Monte Carlo batch");
  add_common(batch, batch_flags);
  batch->add_option("-n,--runs", batch_flags.runs, "number of runs")->check(CLI::PositiveNumber)->capture_default_str();
  batch->add_option("-j,--threads", batch_flags.threads, "worker threads (0 = all cores)");
  CLI::App* compare = app.add_subcommand("compare", "unbiased vs biased vs all-sensors-at-gyro-rate");
  add_common(compare, compare_flags);
  compare->add_option("-n,--runs", compare_flags.runs, "runs per variant")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  compare->add_option("-j,--threads", compare_flags.threads, "worker threads (0 = all cores)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const eqf::ScenarioConfig cfg = resolve(run_flags);
      const fs::path dir = run_flags.out_dir;
      fs::create_directories(dir);
      const eqf::BatchSummary s = eqf::summarize({eqf::run_single(cfg, run_flags.emit_series)});
      eqf::write_summary_csv((dir / "summary.csv").string(), s);
      eqf::write_config((dir / "config.txt").string(), cfg);
      if (run_flags.emit_series) eqf::write_series_csv((dir / "series.csv").string(), s.per_run.front().series);
      const eqf::RunMetrics& r = s.per_run.front();
      print_summary("run seed " + std::to_string(cfg.seed), s);
      std::printf("   |b| = %.3f deg/s, |omega_T| = %.3f deg/s, max |q_hat| = %.4f\n", r.true_bias_dps,
                  r.true_omega_dps, r.max_q_hat_norm);
      if (r.failed) std::printf("   FAILED: %s\n", r.failure_reason.c_str());
      return r.failed ? 2 : 0;
    }
    if (batch->parsed()) {
      const eqf::ScenarioConfig cfg = resolve(batch_flags);
      const fs::path dir = batch_flags.out_dir;
      fs::create_directories(dir);
      print_summary("batch", execute(cfg, batch_flags.runs, batch_flags, dir, ""));
      return 0;
    }
    const eqf::ScenarioConfig base = resolve(compare_flags);
    const fs::path dir = compare_flags.out_dir;
    fs::create_directories(dir);

    eqf::ScenarioConfig unbiased = base;
    unbiased.input_mode = eqf::Stage2InputMode::unbiased_cascade;
    eqf::ScenarioConfig biased = base;
    biased.input_mode = eqf::Stage2InputMode::biased_passthrough;
    eqf::ScenarioConfig fast = unbiased;
    fast.star_rate = fast.vector_rate = fast.gyro_rate;
    fast.update_iterations = 1;

    const auto a = execute(unbiased, compare_flags.runs, compare_flags, dir, "unbiased_");
    const auto b = execute(biased, compare_flags.runs, compare_flags, dir, "biased_");
    const auto c = execute(fast, compare_flags.runs, compare_flags, dir, "fast_");
    print_summary("unbiased input, " + fmt(base.star_rate, "%g") + " Hz / " + fmt(base.vector_rate, "%g") + " Hz", a);
    print_summary("biased input", b);
    print_summary("unbiased input, all sensors at " + fmt(base.gyro_rate, "%g") + " Hz, 1 iteration", c);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
