#include "histfun/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "histfun/error.hpp"
#include "histfun/io.hpp"
#include "histfun/parallel.hpp"

namespace histfun::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

enum class Verbosity { kQuiet = 0, kInfo = 1, kDebug = 2 };

Verbosity verbosity() {
  const char* env = std::getenv("HISTFUN_LOG");
  if (env == nullptr) return Verbosity::kQuiet;
  const std::string level(env);
  if (level == "debug") return Verbosity::kDebug;
  if (level == "info") return Verbosity::kInfo;
  return Verbosity::kQuiet;
}

void log(Verbosity level, const std::string& message) {
  if (verbosity() >= level) std::cerr << "[histfun] " << message << '\n';
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw InvalidConfig(std::string(flag) + ": cannot parse '" + token + "'");
    }
  }
  if (values.empty()) throw InvalidConfig(std::string(flag) + " is empty");
  return values;
}

void require_file(const std::string& path, const char* flag) {
  if (!fs::is_regular_file(path)) throw InvalidConfig(std::string(flag) + ": no such file '" + path + "'");
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw InvalidConfig("--out: cannot create directory '" + out + "'");
  return fs::path(out);
}

struct DataArgs {
  std::string in_x;
  std::string in_y;
  int subdivisions = 10;
  std::optional<double> horizon;
};

void add_data_args(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--in-x", a.in_x, "covariate curves CSV")->required();
  cmd->add_option("--in-y", a.in_y, "response curves CSV")->required();
  cmd->add_option("--M", a.subdivisions, "mesh subdivisions")->capture_default_str();
  cmd->add_option("--T", a.horizon, "time horizon (defaults to the last grid point)");
}

struct LoadedData {
  TriangularMesh mesh;
  PreparedData data;
};

LoadedData load(const DataArgs& a) {
  require_file(a.in_x, "--in-x");
  require_file(a.in_y, "--in-y");
  FunctionalSample x = io::read_sample_csv(a.in_x, CurveRole::kCovariate);
  FunctionalSample y = io::read_sample_csv(a.in_y, CurveRole::kResponse);
  if (x.num_curves() != y.num_curves()) {
    throw DataError("covariate and response files hold different numbers of curves");
  }
  const double horizon = a.horizon.value_or(x.horizon());
  if (std::abs(horizon - x.horizon()) > 1e-12 * std::max(1.0, horizon)) {
    throw InvalidConfig("--T does not match the last grid point of --in-x");
  }
  TriangularMesh mesh = build_mesh(a.subdivisions, horizon);
  PreparedData data = prepare(x, y, mesh);
  log(Verbosity::kInfo, "loaded " + std::to_string(x.num_curves()) + " curves, K=" +
                            std::to_string(mesh.num_nodes()));
  return {std::move(mesh), std::move(data)};
}

struct ModelArgs {
  double gamma = 0.5;
  std::string lag_convention = "index";
};

void add_model_args(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--gamma", a.gamma, "bridge exponent in (0, 1)")->capture_default_str();
  cmd->add_option("--lag-convention", a.lag_convention, "lag read-out: index (j T/M) or support ((j-1) T/M)")
      ->capture_default_str();
}

EstimatorOptions base_options(const ModelArgs& a) {
  EstimatorOptions options;
  options.bridge.gamma = a.gamma;
  options.lag_convention = io::lag_convention_from_string(a.lag_convention);
  return options;
}

void write_fit_outputs(const fs::path& out, const FitResult& fit) {
  io::write_json((out / "fit.json").string(), io::fit_to_json(fit));
  io::write_beta_grid((out / "beta_grid.csv").string(), fit.beta_hat);
  io::write_fit_log((out / "fit_log.jsonl").string(), fit.log);
  io::write_json((out / "mesh.json").string(), io::mesh_to_json(fit.beta_hat.mesh()));
}

TuningGrid make_grid(const std::optional<std::string>& lambdas, const std::optional<std::string>& omegas) {
  TuningGrid grid = TuningGrid::defaults();
  if (lambdas) grid.lambdas = parse_list(*lambdas, "--lambda-grid");
  if (omegas) {
    grid.omegas.clear();
    for (double w : parse_list(*omegas, "--omega-grid")) grid.omegas.push_back(SmoothnessWeights::tied(w));
  }
  return grid;
}

Scenario scenario_from_args(int id, double delta, double epsilon, std::uint64_t seed, double horizon) {
  return make_scenario(id, delta, epsilon, seed, HoleOptions{}, horizon);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Historical functional regression with nested group bridge lag selection", "histfun"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = default_threads();
  std::string out_dir = ".";
  app.add_option("--threads", threads, "worker threads for tune/bootstrap/report")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic scenario data set");
  int sim_scenario = 1, sim_n = 32, sim_points = 65;
  double sim_t = 1.0, sim_sigma = 0.5, sim_delta = 0.5, sim_eps = 0.05;
  std::uint64_t sim_seed = 0, sim_rep = 0;
  sim->add_option("--scenario", sim_scenario, "scenario id 1, 2 or 3")->capture_default_str();
  sim->add_option("--N", sim_n, "number of subjects")->capture_default_str();
  sim->add_option("--grid-points", sim_points, "points per curve")->capture_default_str();
  sim->add_option("--T", sim_t, "time horizon")->capture_default_str();
  sim->add_option("--sigma", sim_sigma, "noise standard deviation")->capture_default_str();
  sim->add_option("--delta", sim_delta, "true lag")->capture_default_str();
  sim->add_option("--epsilon", sim_eps, "ramp width / hole margin")->capture_default_str();
  sim->add_option("--seed", sim_seed, "random seed")->required();
  sim->add_option("--replication", sim_rep, "replication index")->capture_default_str();
  sim->add_option("--out", out_dir, "output directory")->capture_default_str();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit at fixed tuning parameters");
  DataArgs fit_data;
  ModelArgs fit_model_args;
  double fit_lambda = 1.0, fit_omega = 1e-3;
  add_data_args(fit_cmd, fit_data);
  add_model_args(fit_cmd, fit_model_args);
  fit_cmd->add_option("--lambda", fit_lambda, "bridge shrinkage (0 = smooth-only fit)")->capture_default_str();
  fit_cmd->add_option("--omega", fit_omega, "tied smoothness weight")->capture_default_str();
  fit_cmd->add_option("--out", out_dir, "output directory")->capture_default_str();

  // tune
  auto* tune = app.add_subcommand("tune", "select lambda and omega by BIC");
  DataArgs tune_data;
  ModelArgs tune_model;
  std::optional<std::string> lambda_grid, omega_grid;
  add_data_args(tune, tune_data);
  add_model_args(tune, tune_model);
  tune->add_option("--lambda-grid", lambda_grid, "comma-separated lambda values");
  tune->add_option("--omega-grid", omega_grid, "comma-separated tied omega values");
  tune->add_option("--out", out_dir, "output directory")->capture_default_str();

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "residual bootstrap interval for the lag");
  DataArgs boot_data;
  std::string boot_fit;
  int boot_b = 200;
  double boot_level = 0.95;
  std::uint64_t boot_seed = 0;
  add_data_args(boot, boot_data);
  boot->add_option("--fit", boot_fit, "fit.json from fit or tune")->required();
  boot->add_option("--B", boot_b, "bootstrap replications")->capture_default_str();
  boot->add_option("--level", boot_level, "confidence level")->capture_default_str();
  boot->add_option("--seed", boot_seed, "random seed")->required();
  boot->add_option("--out", out_dir, "output directory")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "simulation metrics from replicate fits or a fresh study");
  std::vector<std::string> report_fits;
  std::string report_truth;
  std::optional<std::string> study_scenarios, study_lambdas, study_omegas;
  int study_reps = 20, study_n = 32, study_m = 10, study_points = 65;
  double study_sigma = 0.5, study_delta = 0.5, study_eps = 0.05;
  std::optional<std::uint64_t> study_seed;
  ModelArgs study_model;
  report->add_option("--fits", report_fits, "replicate fit.json files");
  report->add_option("--truth", report_truth, "truth.json written by simulate");
  report->add_option("--scenarios", study_scenarios, "run a study over these scenario ids, e.g. 1,2,3");
  report->add_option("--reps", study_reps, "replications per scenario")->capture_default_str();
  report->add_option("--N", study_n, "subjects per replication")->capture_default_str();
  report->add_option("--M", study_m, "mesh subdivisions")->capture_default_str();
  report->add_option("--grid-points", study_points, "points per curve")->capture_default_str();
  report->add_option("--sigma", study_sigma, "noise standard deviation")->capture_default_str();
  report->add_option("--delta", study_delta, "true lag")->capture_default_str();
  report->add_option("--epsilon", study_eps, "ramp width / hole margin")->capture_default_str();
  report->add_option("--seed", study_seed, "random seed (study mode)");
  report->add_option("--lambda-grid", study_lambdas, "comma-separated lambda values");
  report->add_option("--omega-grid", study_omegas, "comma-separated tied omega values");
  add_model_args(report, study_model);
  report->add_option("--out", out_dir, "output directory")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }

  try {
    if (threads < 1) throw InvalidConfig("--threads must be at least 1");
    if (*sim) {
      const fs::path out = prepare_out(out_dir);
      Scenario sc = scenario_from_args(sim_scenario, sim_delta, sim_eps, sim_seed, sim_t);
      SimulationSetup setup;
      setup.subjects = sim_n;
      setup.grid_points = sim_points;
      setup.sigma = sim_sigma;
      SimulatedData d = simulate(sc, setup, sim_seed, sim_rep);
      io::write_sample_csv((out / "x.csv").string(), d.x);
      io::write_sample_csv((out / "y.csv").string(), d.y);
      json truth = io::scenario_to_json(sc);
      truth["sigma"] = sim_sigma;
      truth["N"] = sim_n;
      truth["grid_points"] = sim_points;
      truth["seed"] = sim_seed;
      truth["replication"] = sim_rep;
      io::write_json((out / "truth.json").string(), truth);
    } else if (*fit_cmd) {
      const fs::path out = prepare_out(out_dir);
      LoadedData loaded = load(fit_data);
      EstimatorOptions options = base_options(fit_model_args);
      options.bridge.lambda = fit_lambda;
      options.omega = SmoothnessWeights::tied(fit_omega);
      FitResult fit = fit_model(loaded.data, options);
      log(Verbosity::kInfo, "delta_hat = " + io::format_number(fit.lag.delta));
      write_fit_outputs(out, fit);
    } else if (*tune) {
      const fs::path out = prepare_out(out_dir);
      LoadedData loaded = load(tune_data);
      TuningOutcome best = grid_search(loaded.data, make_grid(lambda_grid, omega_grid), base_options(tune_model), threads);
      log(Verbosity::kInfo, "selected lambda = " + io::format_number(best.lambda) +
                                ", omega = " + io::format_number(best.omega.horizontal));
      io::write_tuning_csv((out / "tuning.csv").string(), best.grid);
      write_fit_outputs(out, best.fit);
    } else if (*boot) {
      require_file(boot_fit, "--fit");
      const io::FitSpec spec = io::fit_spec_from_json(io::read_json(boot_fit));
      DataArgs data_args = boot_data;
      data_args.subdivisions = spec.subdivisions;
      if (boot->count("--M") && boot_data.subdivisions != spec.subdivisions) {
        throw InvalidConfig("--M differs from the M recorded in --fit");
      }
      data_args.horizon = spec.horizon;
      const fs::path out = prepare_out(out_dir);
      LoadedData loaded = load(data_args);
      FitResult fit = fit_model(loaded.data, spec.options);
      if (fit.lag.delta != spec.delta_hat) {
        log(Verbosity::kInfo, "warning: refit lag differs from --fit; data files may not match");
      }
      BootstrapResult ci = bootstrap_delta_ci(fit, loaded.data, boot_b, boot_level, boot_seed, threads);
      io::write_json((out / "ci.json").string(), io::ci_to_json(ci, fit.lag.delta, boot_b, boot_seed));
      io::write_deltas_csv((out / "deltas.csv").string(), ci.deltas);
    } else if (*report) {
      const fs::path out = prepare_out(out_dir);
      std::vector<std::pair<int, MetricsReport>> reports;
      if (!report_fits.empty()) {
        if (report_truth.empty()) throw InvalidConfig("--fits requires --truth");
        require_file(report_truth, "--truth");
        for (const auto& f : report_fits) require_file(f, "--fits");
        const Scenario sc = io::scenario_from_json(io::read_json(report_truth));
        std::vector<ReplicationRecord> records;
        for (const auto& f : report_fits) {
          const io::FitSpec spec = io::fit_spec_from_json(io::read_json(f));
          CoefficientSurface surface(build_mesh(spec.subdivisions, spec.horizon), spec.b);
          records.push_back({spec.delta_hat, rise(surface, sc)});
        }
        reports.emplace_back(sc.id, evaluate(records, sc.delta));
      } else if (study_scenarios) {
        if (!study_seed) throw InvalidConfig("study mode requires --seed");
        const TuningGrid grid = make_grid(study_lambdas, study_omegas);
        const EstimatorOptions options = base_options(study_model);
        SimulationSetup setup;
        setup.subjects = study_n;
        setup.grid_points = study_points;
        setup.sigma = study_sigma;
        for (double id_value : parse_list(*study_scenarios, "--scenarios")) {
          const Scenario sc = scenario_from_args(static_cast<int>(id_value), study_delta, study_eps, *study_seed, 1.0);
          const TriangularMesh mesh = build_mesh(study_m, sc.horizon);
          std::vector<ReplicationRecord> records(static_cast<std::size_t>(study_reps));
          parallel_for(records.size(), threads, [&](std::size_t r) {
            SimulatedData d = simulate(sc, setup, *study_seed, r);
            TuningOutcome best = grid_search(prepare(d.x, d.y, mesh), grid, options, 1);
            records[r] = {best.fit.lag.delta, rise(best.fit.beta_hat, sc)};
          });
          log(Verbosity::kInfo, "scenario " + std::to_string(sc.id) + " done");
          reports.emplace_back(sc.id, evaluate(records, sc.delta));
        }
      } else {
        throw InvalidConfig("report needs either --fits with --truth, or --scenarios");
      }
      io::write_metrics_csv((out / "metrics.csv").string(), reports);
      json all = json::array();
      for (const auto& [id, m] : reports) {
        json entry = io::metrics_to_json(m);
        entry["scenario"] = id;
        all.push_back(entry);
      }
      io::write_json((out / "metrics.json").string(), all);
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"kind", e.kind()}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace histfun::cli
