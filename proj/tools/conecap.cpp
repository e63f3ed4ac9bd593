#include <conecap/error.hpp>
#include <conecap/scenario.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitAudit = 4;

struct Options {
  std::string config;
  std::string out;
  bool deterministic = false;
  int threads = 0;
  bool quiet = false;
};

conecap::ScenarioConfig load(const Options& opt) {
  conecap::ScenarioConfig cfg = conecap::load_config(opt.config);
  if (opt.deterministic) cfg.solver.deterministic = true;
  if (opt.threads > 0) cfg.solver.threads = opt.threads;
  if (!opt.out.empty()) cfg.output_dir = opt.out;
  return cfg;
}

void print_records(const conecap::IdentityReport& audit) {
  for (const auto& r : audit.records) {
    const char* status = !r.gated ? "diagnostic" : r.pass ? "ok" : "FAIL";
    std::printf("  %-28s measured %-14.8g predicted %-14.8g mismatch %-10.3e %s\n",
                r.name.c_str(), r.measured, r.predicted, r.relative_mismatch, status);
  }
}

int run_solve(const Options& opt, bool verify) {
  const conecap::ScenarioConfig cfg = load(opt);
  const conecap::ScenarioResult result = conecap::run_scenario(cfg);
  conecap::write_scenario_artifacts(cfg, result, cfg.output_dir);
  if (!opt.quiet) {
    std::printf("%s: capacity %.10g (truncated %.10g, rate %.4g%s)\n", cfg.name.c_str(),
                result.audit.capacity, result.audit.capacity_truncated, result.study.fit.rate,
                result.study.fit.rate_fallback ? ", fallback" : "");
    print_records(result.audit);
    std::printf("  artifacts in %s\n", cfg.output_dir.c_str());
  }
  if (verify && !result.audit.pass()) {
    std::fprintf(stderr, "audit failed beyond tolerances\n");
    return kExitAudit;
  }
  return kExitOk;
}

int run_geometry(const Options& opt) {
  const conecap::ScenarioConfig cfg = load(opt);
  const conecap::GeometryReport g = conecap::geometry_only(cfg);
  conecap::write_geometry_artifacts(cfg, g, cfg.output_dir);
  if (!opt.quiet) {
    std::printf("%s: area %.12g volume %.12g\n", cfg.name.c_str(), g.area, g.volume);
    std::printf("  isoperimetric deficit %.3e\n", g.isoperimetric_deficit);
    if (g.heintze_karcher_defined) {
      std::printf("  Heintze-Karcher deficit %.3e\n", g.heintze_karcher_deficit);
    } else {
      std::printf("  Heintze-Karcher deficit undefined (H <= 0 somewhere)\n");
    }
    std::printf("  slope residuals axis %.3e wall %.3e\n", g.slopes.axis, g.slopes.wall);
  }
  return kExitOk;
}

int run_study(const Options& opt) {
  const conecap::ScenarioConfig cfg = load(opt);
  const conecap::SweepResult s = conecap::sweep_study(cfg);
  conecap::write_sweep_artifacts(cfg, s, cfg.output_dir);
  if (!opt.quiet) {
    for (const auto& row : s.levels) {
      std::printf("  level %d: capacity %.10g error %.3e surface %.3e pohozaev %.3e rel_std %.3e\n",
                  row.level, row.capacity, row.capacity_error, row.surface_mismatch,
                  row.pohozaev_mismatch, row.relative_std);
    }
    std::printf("  orders: capacity %.3g surface %.3g pohozaev %.3g\n", s.capacity_order,
                s.surface_order, s.pohozaev_order);
  }
  return kExitOk;
}

int run_model(const Options& opt) {
  const conecap::ScenarioConfig cfg = load(opt);
  conecap::write_model_artifacts(cfg, cfg.output_dir);
  if (!opt.quiet) std::printf("model tables written to %s\n", cfg.output_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-capacitary potentials outside radial graphs in circular cones"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&opt](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "scenario JSON file")->required();
    cmd->add_option("--out", opt.out, "output directory (overrides output.dir)");
    cmd->add_flag("--deterministic", opt.deterministic, "fixed-order reductions");
    cmd->add_option("--threads", opt.threads, "assembly threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--quiet", opt.quiet, "suppress the summary");
  };
  CLI::App* solve = app.add_subcommand("solve", "truncation study, audit and artifacts");
  CLI::App* verify = app.add_subcommand("verify", "as solve; exit 4 if the audit fails");
  CLI::App* geometry = app.add_subcommand("geometry", "geometric deficits without a solve");
  CLI::App* study = app.add_subcommand("study", "mesh-refinement sweep");
  CLI::App* model = app.add_subcommand("model", "radial oracle tables");
  for (CLI::App* cmd : {solve, verify, geometry, study, model}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (solve->parsed()) return run_solve(opt, false);
    if (verify->parsed()) return run_solve(opt, true);
    if (geometry->parsed()) return run_geometry(opt);
    if (study->parsed()) return run_study(opt);
    if (model->parsed()) return run_model(opt);
  } catch (const conecap::ConfigError& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kExitConfig;
  } catch (const conecap::InvalidTruncation& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kExitConfig;
  } catch (const conecap::NonConvergence& e) {
    std::fprintf(stderr, "solver did not converge: %s\n", e.what());
    return kExitNonConvergence;
  } catch (const conecap::MonotonicityViolation& e) {
    std::fprintf(stderr, "truncation study failed: %s\n", e.what());
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
