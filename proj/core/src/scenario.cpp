#include <conecap/scenario.hpp>

#include <conecap/error.hpp>
#include <conecap/reference.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace conecap {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- parsing helpers

void reject_unknown(const json& section, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw ConfigError("section '" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : section.items()) {
    if (!keys.count(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in section '" + where + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + std::string(key) + "' in section '" + where +
                      "' has the wrong type");
  }
}

Grading parse_grading(const std::string& name) {
  if (name == "nested") return Grading::Nested;
  if (name == "log") return Grading::Log;
  if (name == "uniform") return Grading::Uniform;
  throw ConfigError("mesh.grading must be one of nested, log, uniform (got '" + name + "')");
}

std::string grading_name(Grading g) {
  switch (g) {
    case Grading::Nested: return "nested";
    case Grading::Log: return "log";
    case Grading::Uniform: return "uniform";
  }
  return "unknown";
}

SigmaCurve read_curve_csv(const std::filesystem::path& path, double theta_max,
                          double tolerance) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sigma csv '" + path.string() + "'");
  std::vector<double> theta, g;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double t = 0, v = 0;
    if (!(fields >> t >> v)) {
      if (line_no == 1) continue;  // header
      throw ConfigError("malformed row " + std::to_string(line_no) + " in '" + path.string() + "'");
    }
    theta.push_back(t);
    g.push_back(v);
  }
  if (g.size() < 5) throw ConfigError("sigma csv needs at least five samples");
  const double h = theta_max / static_cast<double>(g.size() - 1);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (std::abs(theta[k] - k * h) > 1e-9 * std::max(1.0, theta_max)) {
      throw ConfigError("sigma csv must sample theta uniformly from 0 to the cone angle");
    }
  }
  try {
    return SigmaCurve::from_samples(std::move(g), theta_max, tolerance);
  } catch (const Error& e) {
    throw ConfigError(std::string("sigma csv: ") + e.what());
  }
}

// ---------------------------------------------------------------- output helpers

class CsvFile {
 public:
  explicit CsvFile(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write " + path.string());
    out_.precision(17);
  }
  template <typename... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ","), put(values), first = false), ...);
    out_ << "\r\n";
  }

 private:
  void put(const std::string& s) { out_ << csv_field(s); }
  void put(const char* s) { out_ << csv_field(s); }
  void put(double v) {
    if (std::isfinite(v)) out_ << v;
  }
  void put(int v) { out_ << v; }
  void put(std::size_t v) { out_ << v; }
  std::ofstream out_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text << '\n';
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json config_json(const ScenarioConfig& c) {
  json sigma = {{"type", c.sigma.type}, {"R", c.sigma.radius}};
  if (c.sigma.type == "cosine") sigma["coefficients"] = c.sigma.coefficients;
  if (c.sigma.type == "csv") {
    sigma["path"] = c.sigma.path;
    sigma["tolerance"] = c.sigma.tolerance;
  }
  return {
      {"cone", {{"n", c.cone.n}, {"half_angle", c.cone.half_angle}, {"full_space", c.cone.full_space}}},
      {"sigma", sigma},
      {"mesh",
       {{"n_theta", c.mesh.n_theta},
        {"n_rho", c.mesh.n_rho},
        {"grading", grading_name(c.mesh.options.grading)},
        {"cells_per_octave", c.mesh.options.cells_per_octave},
        {"quadrature_order", c.mesh.options.quadrature_order}}},
      {"truncation", {{"r_out_list", c.r_out_list}}},
      {"solver",
       {{"p", c.solver.p},
        {"eps_schedule", c.solver.eps_schedule},
        {"tol", c.solver.tolerance},
        {"max_iter", c.solver.max_iterations},
        {"armijo", c.solver.armijo},
        {"backtrack", c.solver.backtrack},
        {"deterministic", c.solver.deterministic}}},
      {"audit",
       {{"identity_tol", c.audit.identity},
        {"gamma_spread_tol", c.audit.gamma_spread},
        {"max_principle_slack", c.audit.max_principle_slack},
        {"far_field_noise", c.audit.far_field_noise},
        {"shell", {c.audit.shell_inner, c.audit.shell_outer}},
        {"excluded_layers", c.audit.excluded_layers}}},
  };
}

ScenarioConfig refined(const ScenarioConfig& base, int level) {
  ScenarioConfig c = base;
  const int factor = 1 << level;
  c.mesh.n_theta *= factor;
  c.mesh.n_rho *= factor;
  c.mesh.options.cells_per_octave *= factor;
  return c;
}

}  // namespace

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

double fitted_order(const std::vector<double>& values) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] > 0.0 && std::isfinite(values[k])) {
      x.push_back(static_cast<double>(k));
      y.push_back(std::log2(values[k]));
    }
  }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return -sxy / sxx;
}

// ---------------------------------------------------------------- config

ScenarioConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, "<root>",
                 {"name", "cone", "sigma", "mesh", "truncation", "solver", "audit", "study", "output"});

  ScenarioConfig c;
  c.base_dir = base_dir;
  c.mesh.options.grading = Grading::Nested;
  read(doc, "name", c.name, "<root>");

  if (doc.contains("cone")) {
    const json& s = doc["cone"];
    reject_unknown(s, "cone", {"n", "half_angle", "full_space"});
    read(s, "n", c.cone.n, "cone");
    read(s, "half_angle", c.cone.half_angle, "cone");
    read(s, "full_space", c.cone.full_space, "cone");
  }
  if (doc.contains("sigma")) {
    const json& s = doc["sigma"];
    reject_unknown(s, "sigma", {"type", "R", "coefficients", "path", "tolerance"});
    read(s, "type", c.sigma.type, "sigma");
    read(s, "R", c.sigma.radius, "sigma");
    read(s, "coefficients", c.sigma.coefficients, "sigma");
    read(s, "path", c.sigma.path, "sigma");
    read(s, "tolerance", c.sigma.tolerance, "sigma");
  }
  if (doc.contains("mesh")) {
    const json& s = doc["mesh"];
    reject_unknown(s, "mesh", {"n_theta", "n_rho", "grading", "cells_per_octave", "quadrature_order"});
    read(s, "n_theta", c.mesh.n_theta, "mesh");
    read(s, "n_rho", c.mesh.n_rho, "mesh");
    std::string grading = grading_name(c.mesh.options.grading);
    read(s, "grading", grading, "mesh");
    c.mesh.options.grading = parse_grading(grading);
    read(s, "cells_per_octave", c.mesh.options.cells_per_octave, "mesh");
    read(s, "quadrature_order", c.mesh.options.quadrature_order, "mesh");
  }
  if (doc.contains("truncation")) {
    const json& s = doc["truncation"];
    reject_unknown(s, "truncation", {"r_out_list"});
    read(s, "r_out_list", c.r_out_list, "truncation");
  }
  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    reject_unknown(s, "solver", {"p", "eps_schedule", "tol", "max_iter", "armijo", "backtrack",
                                 "deterministic", "threads"});
    read(s, "p", c.solver.p, "solver");
    read(s, "eps_schedule", c.solver.eps_schedule, "solver");
    read(s, "tol", c.solver.tolerance, "solver");
    read(s, "max_iter", c.solver.max_iterations, "solver");
    read(s, "armijo", c.solver.armijo, "solver");
    read(s, "backtrack", c.solver.backtrack, "solver");
    read(s, "deterministic", c.solver.deterministic, "solver");
    read(s, "threads", c.solver.threads, "solver");
  }
  if (doc.contains("audit")) {
    const json& s = doc["audit"];
    reject_unknown(s, "audit", {"identity_tol", "gamma_spread_tol", "max_principle_slack",
                                "far_field_noise", "shell", "excluded_layers"});
    read(s, "identity_tol", c.audit.identity, "audit");
    read(s, "gamma_spread_tol", c.audit.gamma_spread, "audit");
    read(s, "max_principle_slack", c.audit.max_principle_slack, "audit");
    read(s, "far_field_noise", c.audit.far_field_noise, "audit");
    read(s, "excluded_layers", c.audit.excluded_layers, "audit");
    if (s.contains("shell")) {
      std::vector<double> shell;
      read(s, "shell", shell, "audit");
      if (shell.size() != 2) throw ConfigError("audit.shell must be [inner, outer]");
      c.audit.shell_inner = shell[0];
      c.audit.shell_outer = shell[1];
    }
  }
  if (doc.contains("study")) {
    const json& s = doc["study"];
    reject_unknown(s, "study", {"levels"});
    read(s, "levels", c.levels, "study");
  }
  if (doc.contains("output")) {
    const json& s = doc["output"];
    reject_unknown(s, "output", {"dir"});
    read(s, "dir", c.output_dir, "output");
  }
  if (c.cone.full_space) c.cone.half_angle = kPi;
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

SigmaCurve validate_config(const ScenarioConfig& c) {
  try {
    c.cone.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("cone: ") + e.what());
  }
  const double theta_max = c.cone.theta_max();

  SigmaCurve curve = SigmaCurve::sphere(1.0, theta_max);
  try {
    if (c.sigma.type == "sphere") {
      curve = SigmaCurve::sphere(c.sigma.radius, theta_max);
    } else if (c.sigma.type == "cosine") {
      curve = SigmaCurve::cosine_series(c.sigma.radius, c.sigma.coefficients, theta_max);
    } else if (c.sigma.type == "csv") {
      if (c.sigma.path.empty()) throw ConfigError("sigma.path is required for csv curves");
      std::filesystem::path path = c.sigma.path;
      if (path.is_relative()) path = c.base_dir / path;
      curve = read_curve_csv(path, theta_max, c.sigma.tolerance);
    } else {
      throw ConfigError("sigma.type must be one of sphere, cosine, csv (got '" + c.sigma.type + "')");
    }
    curve.min_value();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("sigma: ") + e.what());
  }

  const SlopeResiduals slopes = orthogonality_residual(curve);
  if (!slopes.admissible) {
    std::ostringstream msg;
    msg << "inadmissible curve: Sigma must meet the axis and the cone wall orthogonally, "
        << "|g'(0)| = " << slopes.axis << ", |g'(theta_max)| = " << slopes.wall
        << ", tolerance " << curve.slope_tolerance();
    throw ConfigError(msg.str());
  }

  if (c.r_out_list.size() < 3) throw ConfigError("truncation.r_out_list needs at least three radii");
  for (std::size_t k = 0; k < c.r_out_list.size(); ++k) {
    if (k > 0 && !(c.r_out_list[k] > c.r_out_list[k - 1])) {
      throw ConfigError("truncation.r_out_list must be strictly increasing");
    }
    if (!(c.r_out_list[k] > 1.5 * curve.max_value())) {
      throw ConfigError("truncation radius " + std::to_string(c.r_out_list[k]) +
                        " must exceed 1.5 * max g");
    }
  }
  if (c.mesh.n_theta < 4 || c.mesh.n_rho < 4) throw ConfigError("mesh needs n_theta, n_rho >= 4");
  if (c.mesh.options.cells_per_octave < 1) throw ConfigError("mesh.cells_per_octave must be positive");
  if (c.mesh.options.quadrature_order < 1 || c.mesh.options.quadrature_order > 12) {
    throw ConfigError("mesh.quadrature_order must lie in [1, 12]");
  }
  try {
    c.solver.validate(c.cone.n);
    c.audit.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (c.levels.empty()) throw ConfigError("study.levels must not be empty");
  for (int level : c.levels) {
    if (level < 0 || level > 4) throw ConfigError("study levels must lie in [0, 4]");
  }
  return curve;
}

// ---------------------------------------------------------------- solve

ScenarioResult run_scenario(const ScenarioConfig& config) {
  const SigmaCurve curve = validate_config(config);
  ScenarioResult result;
  auto t0 = std::chrono::steady_clock::now();
  result.study = truncation_study(curve, config.cone, config.mesh, config.solver, config.r_out_list);
  auto t1 = std::chrono::steady_clock::now();
  result.audit = run_audit(result.study, config.audit);
  auto t2 = std::chrono::steady_clock::now();
  result.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
  result.audit_seconds = std::chrono::duration<double>(t2 - t1).count();
  return result;
}

std::string report_json(const ScenarioConfig& config, const ScenarioResult& result) {
  const TruncationStudy& st = result.study;
  const IdentityReport& a = result.audit;
  const MeridianMesh& mesh = *st.final_field.mesh;
  const SigmaCurve& curve = mesh.curve();
  const ConeSpec& cone = mesh.cone();

  json truncation = json::array();
  json timing_entries = json::array();
  for (const auto& e : st.entries) {
    json stages = json::array();
    for (const auto& s : e.report.stages) {
      stages.push_back({{"eps", s.eps},
                        {"iterations", s.iterations},
                        {"gradient_norm", s.gradient_norm},
                        {"energy", s.energy}});
    }
    truncation.push_back({{"r_out", e.r_out},
                          {"n_rho", e.n_rho},
                          {"capacity", e.capacity},
                          {"capacity_regularized", e.regularized},
                          {"probe_value", e.probe_value},
                          {"newton_iterations", e.report.total_iterations},
                          {"final_gradient_norm", e.report.final_gradient_norm},
                          {"energy_monotone", e.report.energy_monotone},
                          {"bounds_ok", e.report.bounds_ok},
                          {"stages", stages}});
    timing_entries.push_back({{"r_out", e.r_out}, {"wall_seconds", e.report.wall_seconds}});
  }

  json records = json::array();
  for (const auto& r : a.records) {
    records.push_back({{"name", r.name},
                       {"anchor", r.anchor},
                       {"measured", number(r.measured)},
                       {"predicted", number(r.predicted)},
                       {"relative_mismatch", number(r.relative_mismatch)},
                       {"tolerance", r.tolerance},
                       {"pass", r.pass},
                       {"gated", r.gated}});
  }

  json capacity = {{"extrapolated", a.capacity},
                   {"truncated", a.capacity_truncated},
                   {"formula", a.capacity_formula}};
  if (auto radius = curve.sphere_radius()) {
    const double model = reference::model_capacity(*radius, cone, config.solver.p);
    capacity["model"] = model;
    capacity["model_relative_error"] = std::abs(a.capacity - model) / model;
  }

  json gamma = {{"from_value", number(a.gamma.from_value)},
                {"from_gradient", number(a.gamma.from_gradient)},
                {"from_capacity", number(a.gamma.from_capacity)},
                {"spread", number(a.gamma.spread)},
                {"shell_variation", number(a.gamma.shell_variation)}};
  if (!a.gamma_error.empty()) gamma["error"] = a.gamma_error;

  const auto& pf = a.p_function;
  json doc = {
      {"scenario", config.name},
      {"config", config_json(config)},
      {"geometry",
       {{"area", sigma_area(curve, cone)},
        {"volume", enclosed_volume(curve, cone)},
        {"omega", cone_unit_ball_volume(cone)},
        {"isoperimetric_deficit", a.isoperimetric_deficit},
        {"heintze_karcher_deficit", number(a.heintze_karcher_deficit)},
        {"heintze_karcher_defined", a.heintze_karcher_defined},
        {"overdetermined_constant_formula", a.constant_formula}}},
      {"truncation",
       {{"entries", truncation},
        {"fit",
         {{"rate", st.fit.rate}, {"rate_fallback", st.fit.rate_fallback}, {"limit", st.fit.limit}}},
        {"probe", {{"rho", st.probe_rho}, {"theta", st.probe_theta}, {"monotone", st.probe_monotone}}}}},
      {"capacity", capacity},
      {"records", records},
      {"gamma", gamma},
      {"p_function",
       {{"interior_max", pf.interior_max},
        {"wall_max", pf.has_wall ? number(pf.wall_max) : json(nullptr)},
        {"sigma_max", pf.sigma_max},
        {"infinity_limit", pf.infinity_limit},
        {"max_location", to_string(pf.max_location)},
        {"maximum_on_sigma", pf.maximum_on_sigma},
        {"limit_below_sigma", pf.limit_below_sigma}}},
      {"overdetermined",
       {{"mean", a.deviation.mean},
        {"std", a.deviation.std},
        {"relative_std", a.deviation.relative_std}}},
      {"curvature",
       {{"bound", a.curvature.bound},
        {"max_abs_margin", a.curvature.max_abs_margin},
        {"min_margin", a.curvature.min_margin},
        {"measured_bound", a.curvature_measured.bound},
        {"measured_max_abs_margin", a.curvature_measured.max_abs_margin}}},
      {"sandwich",
       {{"lower", a.sandwich.lower},
        {"upper", a.sandwich.upper},
        {"min_ratio", a.sandwich.min_ratio},
        {"max_ratio", a.sandwich.max_ratio},
        {"nodes", a.sandwich.nodes},
        {"pass", a.sandwich.pass}}},
      {"pass", a.pass()},
      {"timing",
       {{"solve_seconds", result.solve_seconds},
        {"audit_seconds", result.audit_seconds},
        {"entries", timing_entries}}},
  };
  return doc.dump(2);
}

void write_scenario_artifacts(const ScenarioConfig& config, const ScenarioResult& result,
                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_json(config, result));

  const IdentityReport& a = result.audit;
  const MeridianMesh& mesh = *result.study.final_field.mesh;
  const SigmaCurve& curve = mesh.curve();
  {
    CsvFile csv(dir / "sigma_profile.csv");
    csv.row("theta", "g", "grad_norm", "grad_norm_truncated", "mean_curvature", "h_margin");
    for (std::size_t k = 0; k < a.sigma_gradient.theta.size(); ++k) {
      const double theta = a.sigma_gradient.theta[k];
      const double h = mean_curvature(curve, mesh.cone(), theta);
      csv.row(theta, curve(theta), a.sigma_gradient.grad_norm[k],
              a.sigma_gradient_truncated.grad_norm[k], h, h - a.curvature.bound);
    }
  }
  {
    CsvFile csv(dir / "ray_profile.csv");
    csv.row("ray", "theta", "rho", "u_truncated", "u_extrapolated");
    const auto& raw = result.study.final_field.u;
    const auto& ext = result.study.extrapolated_field.u;
    for (int j = 0; j <= mesh.n_theta(); ++j) {
      for (int i = 0; i <= mesh.n_rho(); ++i) {
        const int node = mesh.node_index(i, j);
        csv.row(j, mesh.node_theta(node), mesh.node_rho(node), raw[node], ext[node]);
      }
    }
  }
  {
    CsvFile csv(dir / "pfunction.csv");
    csv.row("rho", "theta", "region", "p_function");
    for (const auto& s : a.p_function.samples) csv.row(s.rho, s.theta, to_string(s.region), s.value);
  }
}

// ---------------------------------------------------------------- geometry

GeometryReport geometry_only(const ScenarioConfig& config) {
  const SigmaCurve curve = validate_config(config);
  const ConeSpec& cone = config.cone;
  GeometryReport g;
  g.area = sigma_area(curve, cone);
  g.volume = enclosed_volume(curve, cone);
  g.omega = cone_unit_ball_volume(cone);
  g.isoperimetric_deficit = isoperimetric_deficit(curve, cone);
  try {
    g.heintze_karcher_deficit = heintze_karcher_deficit(curve, cone);
  } catch (const NonPositiveCurvature&) {
    g.heintze_karcher_defined = false;
    g.heintze_karcher_deficit = std::numeric_limits<double>::quiet_NaN();
  }
  g.slopes = orthogonality_residual(curve);
  g.slope_tolerance = curve.slope_tolerance();
  g.curvature = mean_curvature_profile(curve, cone, 256);
  return g;
}

std::string geometry_json(const ScenarioConfig& config, const GeometryReport& g) {
  double h_min = std::numeric_limits<double>::infinity(), h_max = -h_min;
  for (double h : g.curvature.mean_curvature) {
    h_min = std::min(h_min, h);
    h_max = std::max(h_max, h);
  }
  json doc = {
      {"scenario", config.name},
      {"config", config_json(config)},
      {"area", g.area},
      {"volume", g.volume},
      {"omega", g.omega},
      {"isoperimetric_deficit", g.isoperimetric_deficit},
      {"heintze_karcher_deficit", number(g.heintze_karcher_deficit)},
      {"heintze_karcher_defined", g.heintze_karcher_defined},
      {"orthogonality",
       {{"axis", g.slopes.axis},
        {"wall", g.slopes.wall},
        {"tolerance", g.slope_tolerance},
        {"admissible", g.slopes.admissible}}},
      {"mean_curvature", {{"min", h_min}, {"max", h_max}}},
  };
  return doc.dump(2);
}

void write_geometry_artifacts(const ScenarioConfig& config, const GeometryReport& g,
                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "geometry.json", geometry_json(config, g));
  CsvFile csv(dir / "curvature.csv");
  csv.row("theta", "mean_curvature");
  for (std::size_t k = 0; k < g.curvature.theta.size(); ++k) {
    csv.row(g.curvature.theta[k], g.curvature.mean_curvature[k]);
  }
}

// ---------------------------------------------------------------- sweep

SweepResult sweep_study(const ScenarioConfig& config) {
  const SigmaCurve curve = validate_config(config);
  SweepResult out;
  std::vector<int> levels = config.levels;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  for (int level : levels) {
    const ScenarioConfig c = refined(config, level);
    const ScenarioResult r = run_scenario(c);
    SweepLevel row;
    row.level = level;
    row.n_theta = c.mesh.n_theta;
    row.entries = r.study.entries;
    row.capacity = r.audit.capacity;
    for (const auto& rec : r.audit.records) {
      if (rec.name == "surface_capacity_identity") row.surface_mismatch = rec.relative_mismatch;
      if (rec.name == "pohozaev_identity") row.pohozaev_mismatch = rec.relative_mismatch;
    }
    row.relative_std = r.audit.deviation.relative_std;
    for (std::size_t k = 1; k < row.entries.size(); ++k) {
      if (row.entries[k].capacity > row.entries[k - 1].capacity) out.capacity_monotone = false;
    }
    out.levels.push_back(std::move(row));
  }

  if (auto radius = curve.sphere_radius()) {
    out.exact_reference = true;
    const double exact = reference::model_capacity(*radius, config.cone, config.solver.p);
    for (auto& row : out.levels) row.capacity_error = std::abs(row.capacity - exact) / exact;
  } else {
    const double finest = out.levels.back().capacity;
    for (auto& row : out.levels) row.capacity_error = std::abs(row.capacity - finest) / finest;
  }

  std::vector<double> cap_err, surf, poho;
  const std::size_t usable = out.exact_reference ? out.levels.size() : out.levels.size() - 1;
  for (std::size_t k = 0; k < out.levels.size(); ++k) {
    if (k < usable) cap_err.push_back(out.levels[k].capacity_error);
    surf.push_back(out.levels[k].surface_mismatch);
    poho.push_back(out.levels[k].pohozaev_mismatch);
  }
  out.capacity_order = fitted_order(cap_err);
  out.surface_order = fitted_order(surf);
  out.pohozaev_order = fitted_order(poho);
  return out;
}

std::string sweep_json(const ScenarioConfig& config, const SweepResult& s) {
  json levels = json::array();
  for (const auto& row : s.levels) {
    json entries = json::array();
    for (const auto& e : row.entries) {
      entries.push_back({{"r_out", e.r_out}, {"n_rho", e.n_rho}, {"capacity", e.capacity}});
    }
    levels.push_back({{"level", row.level},
                      {"n_theta", row.n_theta},
                      {"capacity", row.capacity},
                      {"capacity_error", row.capacity_error},
                      {"surface_mismatch", row.surface_mismatch},
                      {"pohozaev_mismatch", row.pohozaev_mismatch},
                      {"relative_std", row.relative_std},
                      {"entries", entries}});
  }
  json doc = {{"scenario", config.name},
              {"config", config_json(config)},
              {"levels", levels},
              {"capacity_error_reference", s.exact_reference ? "closed_form" : "finest_level"},
              {"orders",
               {{"capacity", number(s.capacity_order)},
                {"surface_capacity_identity", number(s.surface_order)},
                {"pohozaev_identity", number(s.pohozaev_order)}}},
              {"capacity_monotone", s.capacity_monotone}};
  return doc.dump(2);
}

void write_sweep_artifacts(const ScenarioConfig& config, const SweepResult& s,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "study.json", sweep_json(config, s));
  CsvFile csv(dir / "study.csv");
  csv.row("level", "r_out", "n_rho", "capacity", "extrapolated_capacity", "capacity_error",
          "surface_mismatch", "pohozaev_mismatch", "relative_std");
  for (const auto& row : s.levels) {
    for (const auto& e : row.entries) {
      csv.row(row.level, e.r_out, e.n_rho, e.capacity, row.capacity, row.capacity_error,
              row.surface_mismatch, row.pohozaev_mismatch, row.relative_std);
    }
  }
}

// ---------------------------------------------------------------- model

void write_model_artifacts(const ScenarioConfig& config, const std::filesystem::path& dir,
                           int samples) {
  validate_config(config);
  if (config.sigma.type != "sphere") throw ConfigError("the model command needs a sphere sigma");
  const int n = config.cone.n;
  const double p = config.solver.p;
  const double radius = config.sigma.radius;
  const double r_out = config.r_out_list.back();
  const reference::TruncatedRadialSolution truncated(radius, r_out, n, p);

  std::filesystem::create_directories(dir);
  CsvFile csv(dir / "model.csv");
  csv.row("rho", "gamma_p", "model_u", "model_du", "truncated_u", "truncated_du");
  for (int k = 0; k <= samples; ++k) {
    const double rho = radius * std::pow(r_out / radius, static_cast<double>(k) / samples);
    const auto fund = reference::fundamental_solution(rho, n, p);
    const auto model = reference::radial_model(rho, radius, n, p);
    const auto trunc = truncated.at(std::min(rho, r_out));
    csv.row(rho, fund.value, model.value, model.derivative, trunc.value, trunc.derivative);
  }

  json doc = {{"scenario", config.name},
              {"n", n},
              {"p", p},
              {"R", radius},
              {"r_out", r_out},
              {"decay_exponent", reference::decay_exponent(n, p)},
              {"omega", reference::cone_unit_ball_volume_closed_form(config.cone)},
              {"model_capacity", reference::model_capacity(radius, config.cone, p)},
              {"truncated_capacity", truncated.capacity(config.cone)},
              {"boundary_gradient", reference::model_boundary_gradient(radius, n, p)}};
  write_text(dir / "model.json", doc.dump(2));
}

}  // namespace conecap
