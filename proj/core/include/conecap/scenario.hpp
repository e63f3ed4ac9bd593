#pragma once

// Scenario configuration and the solve / verify / geometry / study / model pipelines
// behind the command line tool. Reports are JSON documents; profiles are CSV files
// with CRLF record separators.

#include <conecap/audit.hpp>
#include <conecap/geometry.hpp>
#include <conecap/solver.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace conecap {

struct SigmaSpec {
  std::string type = "sphere";  // sphere | cosine | csv
  double radius = 1.0;
  std::vector<double> coefficients;  // cosine: g = R (1 + sum_k delta_k cos(k pi theta / theta_max))
  std::string path;                  // csv: columns theta,g on a uniform grid
  double tolerance = 1e-3;           // csv: end-slope admissibility threshold
};

struct ScenarioConfig {
  std::string name = "scenario";
  ConeSpec cone = ConeSpec::circular(3, kPi / 2);
  SigmaSpec sigma;
  MeshSpec mesh;
  std::vector<double> r_out_list{8.0, 16.0, 32.0};
  SolverConfig solver;
  AuditTolerances audit;
  std::vector<int> levels{0, 1, 2};
  std::string output_dir = "out";
  std::filesystem::path base_dir;  // relative csv paths resolve against this
};

/// Parses a JSON scenario. Missing keys keep their defaults; every error is a ConfigError.
ScenarioConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

/// Builds the curve and checks cone, curve admissibility, radii, mesh and solver
/// settings. Throws ConfigError.
SigmaCurve validate_config(const ScenarioConfig& config);

struct ScenarioResult {
  TruncationStudy study;
  IdentityReport audit;
  double solve_seconds = 0;
  double audit_seconds = 0;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

/// report.json content. Timing lives only under the top-level "timing" key.
std::string report_json(const ScenarioConfig& config, const ScenarioResult& result);

/// Writes report.json, sigma_profile.csv, ray_profile.csv and pfunction.csv.
void write_scenario_artifacts(const ScenarioConfig& config, const ScenarioResult& result,
                              const std::filesystem::path& dir);

struct GeometryReport {
  double area = 0;
  double volume = 0;
  double omega = 0;
  double isoperimetric_deficit = 0;
  double heintze_karcher_deficit = 0;
  bool heintze_karcher_defined = true;
  SlopeResiduals slopes;
  double slope_tolerance = 0;
  CurvatureProfile curvature;
};

/// Geometry audits without a solve. Inadmissible curves raise ConfigError.
GeometryReport geometry_only(const ScenarioConfig& config);
std::string geometry_json(const ScenarioConfig& config, const GeometryReport& report);
/// Writes geometry.json and curvature.csv.
void write_geometry_artifacts(const ScenarioConfig& config, const GeometryReport& report,
                              const std::filesystem::path& dir);

struct SweepLevel {
  int level = 0;
  int n_theta = 0;
  std::vector<TruncationEntry> entries;
  double capacity = 0;  // extrapolated
  double capacity_error = 0;  // vs the closed form for spheres, else vs the finest level
  double surface_mismatch = 0;
  double pohozaev_mismatch = 0;
  double relative_std = 0;
};

struct SweepResult {
  std::vector<SweepLevel> levels;
  bool exact_reference = false;  // capacity errors measured against the closed form
  double capacity_order = 0;
  double surface_order = 0;
  double pohozaev_order = 0;
  bool capacity_monotone = true;
};

/// Repeats the scenario on 2^level refinements of the base mesh.
SweepResult sweep_study(const ScenarioConfig& config);
std::string sweep_json(const ScenarioConfig& config, const SweepResult& result);
/// Writes study.csv and study.json.
void write_sweep_artifacts(const ScenarioConfig& config, const SweepResult& result,
                           const std::filesystem::path& dir);

/// Radial oracle table for the configured cone, p and sphere radius: writes
/// model.csv (rho, Gamma_p, model u, truncated u) and model.json (closed forms).
void write_model_artifacts(const ScenarioConfig& config, const std::filesystem::path& dir,
                           int samples = 64);

/// Least-squares slope of log2(values) against -level; NaN when fewer than two
/// positive values exist.
double fitted_order(const std::vector<double>& values);

/// RFC-4180 field quoting.
std::string csv_field(std::string_view text);

}  // namespace conecap
