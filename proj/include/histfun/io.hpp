#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "histfun/design.hpp"
#include "histfun/estimator.hpp"
#include "histfun/simulation.hpp"
#include "histfun/tuning.hpp"

namespace histfun::io {

using nlohmann::json;

/// CSV layout: first row is the grid, each following row one curve.
FunctionalSample read_sample_csv(const std::string& path, CurveRole role);
void write_sample_csv(const std::string& path, const FunctionalSample& sample);

/// Shortest round-trip decimal form used for every number written to disk.
std::string format_number(double v);

const char* to_string(LagConvention convention);
LagConvention lag_convention_from_string(const std::string& name);

json omega_to_json(const SmoothnessWeights& omega);
SmoothnessWeights omega_from_json(const json& j);

json mesh_to_json(const TriangularMesh& mesh);
json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const json& j);

/// Fit summary; `ci` is attached when a bootstrap interval is available.
json fit_to_json(const FitResult& fit, const std::optional<BootstrapResult>& ci = std::nullopt);

/// Parameters needed to reproduce a fit from its JSON summary.
struct FitSpec {
  int subdivisions = 0;
  double horizon = 0.0;
  EstimatorOptions options;
  double delta_hat = 0.0;
  Eigen::VectorXd b;
};
FitSpec fit_spec_from_json(const json& j);

json ci_to_json(const BootstrapResult& ci, double delta_hat, int replications, std::uint64_t seed);

/// Dense (s, t, value) grid with `points` values per axis; zero outside the domain.
void write_beta_grid(const std::string& path, const CoefficientSurface& surface, int points = 101);
void write_tuning_csv(const std::string& path, const TuningGrid& grid);
void write_fit_log(const std::string& path, const std::vector<IterationRecord>& log);
void write_deltas_csv(const std::string& path, const std::vector<double>& deltas);
void write_metrics_csv(const std::string& path, const std::vector<std::pair<int, MetricsReport>>& reports);
json metrics_to_json(const MetricsReport& report);

json read_json(const std::string& path);
void write_json(const std::string& path, const json& j);
void write_text(const std::string& path, const std::string& text);

}  // namespace histfun::io
