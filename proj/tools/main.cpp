#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rio/config.hpp"
#include "rio/io.hpp"
#include "rio/pipeline.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string matching;
  std::string ablation;
  std::optional<double> alpha;
  std::string plot;
  std::string plot_file;

  std::string out;
  std::string radar;
  std::string imu;
  std::string truth;
  std::string estimate;
  bool no_align = false;
  int samples = 200000;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

rio::RunConfig load(const Options& o) {
  rio::RunConfig c = o.config_path.empty() ? rio::RunConfig{} : rio::load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.runs) c.runs = *o.runs;
  if (!o.matching.empty()) c.matching = *rio::parse_matching_mode(o.matching);
  if (!o.ablation.empty()) c.ablation = *rio::parse_ablation_mode(o.ablation);
  if (o.alpha) c.alpha = *o.alpha;
  try {
    c.validate();
  } catch (const rio::ConfigError& e) {
    throw std::runtime_error(e.what());
  }
  return c;
}

/// Writes to --out when given, stdout otherwise.
void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw std::runtime_error(o.out + ": cannot open file for writing");
  f << text;
}

std::optional<fs::path> plot_path(const Options& o, const std::string& fallback) {
  if (o.plot.empty()) return std::nullopt;
  if (!o.plot_file.empty()) return fs::path(o.plot_file);
  if (!o.out.empty()) return fs::path(o.out).replace_extension(".svg");
  return fs::path(fallback);
}

rio::plot::Series xy_series(const std::string& name, const rio::Trajectory& t) {
  rio::plot::Series s{name, {}, {}, true};
  for (const auto& p : t) {
    s.x.push_back(p.position.x());
    s.y.push_back(p.position.y());
  }
  return s;
}

std::optional<rio::Dataset> dataset(const Options& o) {
  const int given = !o.radar.empty() + !o.imu.empty() + !o.truth.empty();
  if (given == 0) return std::nullopt;
  if (given != 3) throw std::runtime_error("--radar, --imu and --truth must be given together");
  return rio::Dataset{rio::read_radar_csv(o.radar), rio::read_imu_csv(o.imu),
                      rio::read_tum(o.truth)};
}

std::string metrics_columns() { return "ape_trans_m,ape_rot_deg,rpe_trans_m,rpe_rot_deg"; }

std::string metrics_fields(const rio::Metrics& m) {
  return fmt(m.ape.translation) + "," + fmt(m.ape.rotation) + "," + fmt(m.rpe.translation) + "," +
         fmt(m.rpe.rotation);
}

void cmd_simulate(const Options& o) {
  const rio::RunConfig c = load(o);
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error(o.out + ": cannot create directory");
  rio::Scenario s = c.scenario();
  const rio::Simulation sim = rio::simulate(s);
  rio::write_radar_csv(dir / "radar.csv", sim.streams.scans);
  rio::write_imu_csv(dir / "imu.csv", sim.streams.imu);
  rio::write_tum(dir / "groundtruth.tum", sim.truth.trajectory());
  std::size_t points = 0;
  for (const auto& scan : sim.streams.scans) points += scan.points.size();
  std::cout << "scans,points,imu_samples,empty_scans\n"
            << sim.streams.scans.size() << ',' << points << ',' << sim.streams.imu.size() << ','
            << sim.truth.empty_scans << '\n';
  if (!o.plot.empty()) {
    const fs::path p = o.plot_file.empty() ? dir / "groundtruth.svg" : fs::path(o.plot_file);
    rio::plot::write_svg(p, "ground truth", "x (m)", "y (m)",
                         {xy_series("ground truth", sim.truth.trajectory())});
  }
}

void cmd_run(const Options& o) {
  const rio::RunConfig c = load(o);
  const auto scans = rio::read_radar_csv(o.radar);
  const auto imu = rio::read_imu_csv(o.imu);
  const rio::RunResult r = rio::run_estimator(scans, imu, c.estimator());
  rio::write_tum(fs::path(o.estimate), r.trajectory);
  std::ostringstream s;
  s << "frame,timestamp,iterations,status,initial_cost,final_cost,points,matches,spawned,landmarks\n";
  for (const rio::FrameRecord& f : r.records) {
    s << f.frame << ',' << fmt(f.timestamp) << ',' << f.solver.iterations << ','
      << rio::to_string(f.solver.status) << ',' << fmt(f.solver.initial_cost) << ','
      << fmt(f.solver.final_cost) << ',' << f.points << ',' << f.matches << ',' << f.spawned << ','
      << f.landmarks << '\n';
  }
  emit(o, s.str());
  if (auto p = plot_path(o, "trajectory.svg")) {
    rio::plot::write_svg(*p, "estimated trajectory", "x (m)", "y (m)",
                         {xy_series("estimate", r.trajectory)});
  }
}

void cmd_eval(const Options& o) {
  const rio::RunConfig c = load(o);
  rio::EvalOptions eo = c.evaluation();
  if (o.no_align) eo.align = false;
  const rio::Metrics m = rio::evaluate(rio::read_tum(o.estimate), rio::read_tum(o.truth), eo);
  emit(o, metrics_columns() + "\n" + metrics_fields(m) + "\n");
}

void cmd_ablate(const Options& o) {
  const rio::RunConfig c = load(o);
  const auto rows = rio::ablation_table(c, dataset(o));
  std::string text = "mode," + metrics_columns() + "\n";
  rio::plot::Series ape{"APE trans (m)", {}, {}, false};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    text += rows[k].label + "," + metrics_fields(rows[k].metrics) + "\n";
    ape.x.push_back(static_cast<double>(k));
    ape.y.push_back(rows[k].metrics.ape.translation);
  }
  emit(o, text);
  if (auto p = plot_path(o, "ablate.svg")) {
    rio::plot::write_svg(*p, "ablation: none, no-range, no-angular, full", "mode index",
                         "APE translation RMSE (m)", {ape});
  }
}

void cmd_sweep_alpha(const Options& o) {
  const rio::RunConfig c = load(o);
  const auto rows = rio::alpha_sweep_table(c, dataset(o));
  std::vector<double> ape;
  for (const auto& r : rows) ape.push_back(r.metrics.ape.translation);
  const std::vector<double> norm = rio::normalize(ape);
  std::string text = "alpha," + metrics_columns() + ",normalized_ape_trans\n";
  rio::plot::Series series{"normalized APE", {}, norm, true};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    text += rows[k].label + "," + metrics_fields(rows[k].metrics) + "," + fmt(norm[k]) + "\n";
    series.x.push_back(std::stod(rows[k].label));
  }
  emit(o, text);
  if (auto p = plot_path(o, "sweep-alpha.svg")) {
    rio::plot::write_svg(*p, "covariance scale 2^alpha", "alpha", "normalized RMSE", {series});
  }
}

void cmd_mc_cov(const Options& o) {
  const rio::RunConfig c = load(o);
  if (o.samples < 2) throw std::runtime_error("--samples must be at least 2");
  const auto grid = rio::monte_carlo_grid(o.samples, c.seed);
  std::string text = "range_m,sigma_range_m,sigma_angle_rad,frobenius_rel_error\n";
  std::vector<rio::plot::Series> series;
  for (const auto& g : grid) {
    text += fmt(g.range) + "," + fmt(g.sigma_range) + "," + fmt(g.sigma_angle) + "," +
            fmt(g.frobenius_error) + "\n";
    const std::string name = "sr=" + fmt(g.sigma_range) + " sa=" + fmt(g.sigma_angle);
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const auto& s) { return s.name == name; });
    if (it == series.end()) {
      series.push_back({name, {}, {}, true});
      it = series.end() - 1;
    }
    it->x.push_back(g.range);
    it->y.push_back(g.frobenius_error);
  }
  emit(o, text);
  if (auto p = plot_path(o, "mc-cov.svg")) {
    rio::plot::write_svg(*p, "Monte-Carlo vs analytic point covariance", "range (m)",
                         "relative Frobenius error", series);
  }
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar-inertial odometry with polar measurement uncertainty"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "YAML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Seed override");
  app.add_option("--runs", o.runs, "Number of simulated seeds for ablate and sweep-alpha");
  app.add_option("--matching", o.matching, "Association mode")
      ->check(CLI::IsMember({"probability", "euclidean"}));
  app.add_option("--ablation", o.ablation, "Uncertainty-model ablation")
      ->check(CLI::IsMember({"full", "no-range", "no-angular", "none"}));
  app.add_option("--alpha", o.alpha, "Covariance scale exponent: covariances times 2^alpha");
  app.add_option("--plot", o.plot, "Also write a plot")->check(CLI::IsMember({"svg"}));
  app.add_option("--plot-file", o.plot_file, "Plot path (default derived from --out)");

  auto* simulate = app.add_subcommand("simulate", "Write radar.csv, imu.csv and groundtruth.tum");
  simulate->add_option("--out", o.out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Estimate a trajectory from radar and IMU CSV files");
  run->add_option("--radar", o.radar, "Radar CSV")->required()->check(CLI::ExistingFile);
  run->add_option("--imu", o.imu, "IMU CSV")->required()->check(CLI::ExistingFile);
  run->add_option("--trajectory", o.estimate, "Output TUM trajectory")->required();
  run->add_option("--out", o.out, "Per-frame report CSV (default stdout)");

  auto* eval = app.add_subcommand("eval", "APE and RPE of a TUM trajectory against a reference");
  eval->add_option("--est", o.estimate, "Estimated TUM trajectory")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", o.truth, "Reference TUM trajectory")->required()->check(CLI::ExistingFile);
  eval->add_flag("--no-align", o.no_align, "Disable rigid alignment for APE");
  eval->add_option("--out", o.out, "Output CSV (default stdout)");

  auto* ablate = app.add_subcommand("ablate", "APE/RPE table over the four uncertainty-model modes");
  auto* sweep = app.add_subcommand("sweep-alpha", "APE/RPE table over alpha = -3..3");
  for (auto* sub : {ablate, sweep}) {
    sub->add_option("--radar", o.radar, "Radar CSV (default: simulate)")->check(CLI::ExistingFile);
    sub->add_option("--imu", o.imu, "IMU CSV")->check(CLI::ExistingFile);
    sub->add_option("--truth", o.truth, "Reference TUM trajectory")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output CSV (default stdout)");
  }

  auto* mc = app.add_subcommand("mc-cov", "Monte-Carlo check of the point covariance over a grid");
  mc->add_option("--samples", o.samples, "Samples per grid cell");
  mc->add_option("--out", o.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*simulate) cmd_simulate(o);
    if (*run) cmd_run(o);
    if (*eval) cmd_eval(o);
    if (*ablate) cmd_ablate(o);
    if (*sweep) cmd_sweep_alpha(o);
    if (*mc) cmd_mc_cov(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
