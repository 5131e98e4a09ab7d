// Command-line front end: estimate genetic covariance between two outcome
// files, the case-control weighted variant, and the Monte Carlo coverage
// harness. Machine-readable output goes to stdout (or --out); diagnostics to
// stderr.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gencov/case_control.hpp"
#include "gencov/dataset.hpp"
#include "gencov/estimator.hpp"
#include "gencov/parallel.hpp"
#include "gencov/report_json.hpp"
#include "gencov/simulation.hpp"

namespace {

constexpr int kExitData = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;
constexpr int kExitIo = 74;

int exit_code_for(const gencov::Error& e) {
  switch (e.kind()) {
    case gencov::ErrorKind::convergence: return kExitConvergence;
    case gencov::ErrorKind::config: return kExitConfig;
    case gencov::ErrorKind::io: return kExitIo;
    default: return kExitData;
  }
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void emit(const gencov::ordered_json& doc, const std::string& out_path) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) gencov::fail(gencov::ErrorKind::io, "cannot write '" + out_path + "'");
  out << text;
  if (!out) gencov::fail(gencov::ErrorKind::io, "short write to '" + out_path + "'");
}

gencov::Family parse_family(const std::string& name) {
  if (name == "linear") return gencov::Family::linear;
  if (name == "logistic") return gencov::Family::logistic;
  gencov::fail(gencov::ErrorKind::config,
               "unknown family '" + name + "' (expected linear|logistic)");
}

struct FileArgs {
  std::string y_file, z_file;
  std::string id_col = "id";
  std::string y_col = "y";
  std::string z_col = "z";
};

void add_file_options(CLI::App* cmd, FileArgs& args) {
  cmd->add_option("--y-file", args.y_file, "CSV with the first outcome")
      ->required();
  cmd->add_option("--z-file", args.z_file, "CSV with the second outcome")
      ->required();
  cmd->add_option("--id-col", args.id_col, "sample id column name");
  cmd->add_option("--y-col", args.y_col, "outcome column in --y-file");
  cmd->add_option("--z-col", args.z_col, "outcome column in --z-file");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace gencov;

  CLI::App app{"genetic covariance estimation with debiased inference"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker cap for replicates (0 = hardware)");

  // --- estimate ---------------------------------------------------------
  auto* est = app.add_subcommand(
      "estimate", "debiased genetic covariance between two studies");
  FileArgs est_files;
  add_file_options(est, est_files);
  std::string family_y = "linear", family_z = "linear";
  double alpha = 0.05;
  std::uint64_t seed = 1;
  bool narrow_sense = false, cross_fit = false, standardized = false;
  std::string out_path;
  est->add_option("--family-y", family_y, "linear|logistic");
  est->add_option("--family-z", family_z, "linear|logistic");
  est->add_option("--alpha", alpha, "two-sided CI level (default 0.05)");
  est->add_option("--seed", seed, "seed for CV fold shuffles");
  est->add_flag("--narrow-sense", narrow_sense,
                "force linear working models (narrow-sense covariance)");
  est->add_flag("--cross-fit", cross_fit, "cross-fitted estimator");
  est->add_flag("--standardized", standardized,
                "divide estimate/se/CI by sqrt(Var(Y) Var(Z))");
  est->add_option("--out", out_path, "write the JSON report here");

  // --- case-control ------------------------------------------------------
  auto* cc = app.add_subcommand(
      "case-control",
      "weighted estimator for a case-control study versus a cohort study");
  FileArgs cc_files;
  add_file_options(cc, cc_files);
  double prevalence = 0.0;
  std::optional<double> case_fraction;
  std::string cc_family_z = "linear";
  double cc_alpha = 0.05;
  std::uint64_t cc_seed = 1;
  std::string cc_out;
  cc->add_option("--prevalence", prevalence,
                 "population prevalence P(y=1), externally supplied")
      ->required();
  double case_fraction_opt = -1.0;
  cc->add_option("--case-fraction", case_fraction_opt,
                 "case fraction of the sample (default: observed)");
  cc->add_option("--family-z", cc_family_z, "linear|logistic");
  cc->add_option("--alpha", cc_alpha, "two-sided CI level");
  cc->add_option("--seed", cc_seed, "seed for CV fold shuffles");
  cc->add_option("--out", cc_out, "write the JSON report here");

  // --- simulate -----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate",
                                 "Monte Carlo coverage study from a config");
  std::string config_path, sim_out_dir;
  sim->add_option("--config", config_path, "SimulationConfig JSON")->required();
  sim->add_option("--out", sim_out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  Timer timer;
  const std::string command_line = join_args(argc, argv);

  try {
    if (est->parsed()) {
      const Family fy = narrow_sense ? Family::linear : parse_family(family_y);
      const Family fz = narrow_sense ? Family::linear : parse_family(family_z);
      const Dataset ds_y = load_dataset(
          est_files.y_file, est_files.id_col, est_files.y_col,
          fy == Family::logistic ? OutcomeKind::binary : OutcomeKind::continuous);
      const Dataset ds_z = load_dataset(
          est_files.z_file, est_files.id_col, est_files.z_col,
          fz == Family::logistic ? OutcomeKind::binary : OutcomeKind::continuous);
      const AlignedData data = align_samples(ds_y, ds_z);

      FitConfig fit_config;
      CovarianceReport report;
      if (cross_fit) {
        report = run_cross_fitted(data, GlmFamily{fy}, GlmFamily{fz},
                                  fit_config, alpha, seed);
      } else {
        const EstimatorMode mode = narrow_sense ? EstimatorMode::narrow_sense
                                                : EstimatorMode::general;
        report = run_pipeline_aligned(data, GlmFamily{fy}, GlmFamily{fz},
                                      fit_config, alpha, seed, mode);
      }

      ordered_json doc = to_json(report);
      if (standardized) {
        const auto var_of = [](const Eigen::VectorXd& v) {
          return (v.array() - v.mean()).square().sum() / (v.size() - 1.0);
        };
        const double divisor = std::sqrt(var_of(data.y) * var_of(data.z));
        if (!(divisor > 0.0)) {
          fail(ErrorKind::degenerate, "standardized: zero outcome variance");
        }
        doc["estimate"] = report.estimate / divisor;
        doc["se"] = report.se / divisor;
        doc["ci_lower"] = report.ci_lower / divisor;
        doc["ci_upper"] = report.ci_upper / divisor;
        doc["standardizer"] = divisor;
      }

      RunManifest manifest;
      manifest.command_line = command_line;
      manifest.config_digest = hex_digest(command_line);
      manifest.seed = seed;
      manifest.wall_clock_seconds = timer.seconds();
      manifest.input_digests = {{est_files.y_file, file_digest(est_files.y_file)},
                                {est_files.z_file, file_digest(est_files.z_file)}};
      doc["manifest"] = to_json(manifest);
      emit(doc, out_path);
      return 0;
    }

    if (cc->parsed()) {
      const Dataset ds_y = load_dataset(cc_files.y_file, cc_files.id_col,
                                        cc_files.y_col, OutcomeKind::binary);
      const Dataset ds_z =
          load_dataset(cc_files.z_file, cc_files.id_col, cc_files.z_col,
                       parse_family(cc_family_z) == Family::logistic
                           ? OutcomeKind::binary
                           : OutcomeKind::continuous);
      const AlignedData data = align_samples(ds_y, ds_z);
      if (case_fraction_opt > 0.0) case_fraction = case_fraction_opt;

      const WeightedReport report = run_case_control(
          data, GlmFamily{parse_family(cc_family_z)}, FitConfig{}, prevalence,
          case_fraction, cc_alpha, cc_seed);

      ordered_json doc = to_json(report);
      RunManifest manifest;
      manifest.command_line = command_line;
      manifest.config_digest = hex_digest(command_line);
      manifest.seed = cc_seed;
      manifest.wall_clock_seconds = timer.seconds();
      manifest.input_digests = {{cc_files.y_file, file_digest(cc_files.y_file)},
                                {cc_files.z_file, file_digest(cc_files.z_file)}};
      doc["manifest"] = to_json(manifest);
      emit(doc, cc_out);
      return 0;
    }

    // simulate
    std::ifstream in(config_path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + config_path + "'");
    ordered_json config_doc;
    try {
      config_doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::config, std::string("config is not valid JSON: ") +
                                  e.what());
    }
    const SimulationConfig config = config_from_json(config_doc);

    const CoverageReport report = run_coverage_study(config, threads);

    std::error_code ec;
    std::filesystem::create_directories(sim_out_dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create '" + sim_out_dir + "'");

    ordered_json doc = to_json(report, config);
    RunManifest manifest;
    manifest.command_line = command_line;
    manifest.config_digest = file_digest(config_path);
    manifest.seed = config.seed;
    manifest.wall_clock_seconds = timer.seconds();
    manifest.input_digests = {{config_path, manifest.config_digest}};
    doc["manifest"] = to_json(manifest);

    emit(doc, sim_out_dir + "/report.json");
    write_replicates_csv(report, sim_out_dir + "/replicates.csv");
    std::printf("coverage=%.4f mean_se=%.6g\n", report.empirical_coverage,
                report.mean_se);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
