// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <conecap/audit.hpp>
#include <conecap/error.hpp>
#include <conecap/reference.hpp>
#include <conecap/scenario.hpp>
#include <conecap/solver.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace conecap;

namespace {

const double kHalf = kPi / 2;
const double kThird = kPi / 3;
const std::vector<double> kRadii{8.0, 16.0, 32.0};

struct Case {
  std::string label;
  double p = 2;
  double alpha = kHalf;
  SigmaCurve curve = SigmaCurve::sphere(1.0, kHalf);
  ConeSpec cone = ConeSpec::circular(3, kHalf);
  bool sphere = true;
  TruncationStudy study;
  IdentityReport audit;
};

MeshSpec base_mesh() {
  MeshSpec spec;
  spec.n_theta = 16;
  spec.options.grading = Grading::Nested;
  spec.options.cells_per_octave = 16;
  return spec;
}

Case solve_case(const std::string& label, const SigmaCurve& curve, double alpha, double p,
                bool sphere) {
  Case c;
  c.label = label;
  c.p = p;
  c.alpha = alpha;
  c.curve = curve;
  c.cone = ConeSpec::circular(3, alpha);
  c.sphere = sphere;
  SolverConfig cfg;
  cfg.p = p;
  c.study = truncation_study(curve, c.cone, base_mesh(), cfg, kRadii);
  c.audit = run_audit(c.study);
  return c;
}

const IdentityRecord& record(const IdentityReport& rep, const std::string& name) {
  for (const auto& r : rep.records) {
    if (r.name == name) return r;
  }
  throw Error("missing audit record " + name);
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g%%", 100 * v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Criterion {
  int id;
  std::string title;
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

double order_over_two(const std::vector<double>& m) {
  return std::log2(m.front() / m.back()) / static_cast<double>(m.size() - 1);
}

ScenarioConfig sweep_config(const std::string& name, std::vector<double> coefficients) {
  ScenarioConfig c;
  c.name = name;
  c.cone = ConeSpec::circular(3, kHalf);
  c.sigma.type = coefficients.empty() ? "sphere" : "cosine";
  c.sigma.coefficients = std::move(coefficients);
  c.mesh = base_mesh();
  c.r_out_list = kRadii;
  c.solver.p = 2.0;
  c.levels = {0, 1, 2};
  return c;
}

std::string strip_timing(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  doc.erase("timing");
  return doc.dump();
}

SigmaCurve bumped(const SigmaCurve& base, double t, double centre, double width) {
  return SigmaCurve::from_function(
      [=](double theta) {
        const double z = (theta - centre) / width;
        const double b = std::exp(-z * z);
        CurveJet j = base.jet(theta);
        j.g += t * b;
        j.dg += t * b * (-2 * z / width);
        j.d2g += t * b * (4 * z * z - 2) / (width * width);
        return j;
      },
      base.theta_max(), "bumped");
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<Case> spheres;
  for (double alpha : {kThird, kHalf}) {
    for (double p : {1.5, 2.0, 2.5}) {
      std::ostringstream label;
      label << "sphere p=" << p << " alpha=" << (alpha == kHalf ? "pi/2" : "pi/3");
      spheres.push_back(solve_case(label.str(), SigmaCurve::sphere(1.0, alpha), alpha, p, true));
    }
  }
  const Case perturbed = solve_case("cap 1+0.2cos(2theta) p=2",
                                    SigmaCurve::cosine_series(1.0, {0.2}, kHalf), kHalf, 2.0, false);
  const SweepResult sphere_sweep = sweep_study(sweep_config("sphere_sweep", {}));
  const SweepResult cap_sweep = sweep_study(sweep_config("cap_sweep", {0.2}));

  std::vector<Criterion> out;

  {
    Criterion c{1, "model potential reproduced (sup error <= 1% for rho <= r_out/2)"};
    for (const Case& k : spheres) {
      const PotentialField& f = k.study.extrapolated_field;
      const double r_half = f.mesh->r_out() / 2;
      double sup = 0;
      for (std::size_t i = 0; i < f.u.size(); ++i) {
        const double rho = f.mesh->node_rho(i);
        if (rho > r_half) continue;
        sup = std::max(sup, std::abs(f.u[i] - reference::radial_model(rho, 1.0, 3, k.p).value));
      }
      c.check(sup <= 0.01, k.label + ": sup error " + sci(sup));
    }
    out.push_back(c);
  }

  {
    Criterion c{2, "extrapolated capacity within 2% of the closed form"};
    for (const Case& k : spheres) {
      const double exact = reference::model_capacity(1.0, k.cone, k.p);
      const double e = rel(k.study.fit.limit, exact);
      c.check(e <= 0.02, k.label + ": Cap " + sci(k.study.fit.limit) + " vs " + sci(exact) + " (" + pct(e) + ")");
    }
    out.push_back(c);
  }

  {
    Criterion c{3, "surface and Pohozaev identities <= 3%, order >= 1 over two refinements"};
    for (const auto* sw : {&sphere_sweep, &cap_sweep}) {
      const std::string name = sw == &sphere_sweep ? "sphere" : "perturbed cap";
      std::vector<double> surf, poho;
      for (const auto& row : sw->levels) {
        surf.push_back(row.surface_mismatch);
        poho.push_back(row.pohozaev_mismatch);
      }
      c.check(surf.front() <= 0.03, name + ": base surface mismatch " + pct(surf.front()));
      c.check(poho.front() <= 0.03, name + ": base Pohozaev mismatch " + pct(poho.front()));
      const double os = order_over_two(surf), op = order_over_two(poho);
      c.check(os >= 1.0 && surf[1] < surf[0] && surf[2] < surf[1],
              name + ": surface mismatches " + sci(surf[0]) + " " + sci(surf[1]) + " " + sci(surf[2]) + " order " + sci(os));
      c.check(op >= 1.0 && poho[1] < poho[0] && poho[2] < poho[1],
              name + ": Pohozaev mismatches " + sci(poho[0]) + " " + sci(poho[1]) + " " + sci(poho[2]) + " order " + sci(op));
    }
    out.push_back(c);
  }

  {
    Criterion c{4, "mean |grad u| on Sigma within 2% of (n-p)/((p-1)R) and of the volume-perimeter formula"};
    for (const Case& k : spheres) {
      const double model = reference::model_boundary_gradient(1.0, 3, k.p);
      const double mean = k.audit.deviation.mean;
      c.check(rel(mean, model) <= 0.02 && rel(mean, k.audit.constant_formula) <= 0.02,
              k.label + ": mean " + sci(mean) + " model " + sci(model) + " formula " + sci(k.audit.constant_formula));
    }
    out.push_back(c);
  }

  {
    Criterion c{5, "gamma estimates pairwise within 3%; unit sphere gives gamma = 1 +- 3%"};
    auto one = [&](const Case& k) {
      const GammaEstimates& g = k.audit.gamma;
      const bool ok = k.audit.gamma_error.empty() && g.spread <= 0.03;
      std::string line = k.label + ": value " + sci(g.from_value) + " gradient " + sci(g.from_gradient) +
                         " capacity " + sci(g.from_capacity) + " spread " + pct(g.spread);
      if (k.sphere) {
        const double worst = std::max({std::abs(g.from_value - 1), std::abs(g.from_gradient - 1),
                                       std::abs(g.from_capacity - 1)});
        c.check(ok && worst <= 0.03, line);
      } else {
        c.check(ok, line);
      }
    };
    for (const Case& k : spheres) one(k);
    one(perturbed);
    out.push_back(c);
  }

  {
    Criterion c{6, "P-function: maxima on Sigma (x1.02), limit <= Sigma max, equality on spheres, gap >= 5% on the cap"};
    auto bounds = [&](const Case& k) {
      const PFunctionSummary& s = k.audit.p_function;
      const double off = std::max(s.interior_max, s.has_wall ? s.wall_max : 0.0);
      const bool ok = off <= 1.02 * s.sigma_max && s.infinity_limit <= 1.02 * s.sigma_max;
      return std::pair{ok, "Sigma max " + sci(s.sigma_max) + " interior/wall " + sci(off) +
                               " limit " + sci(s.infinity_limit)};
    };
    for (const Case& k : spheres) {
      auto [ok, text] = bounds(k);
      const PFunctionSummary& s = k.audit.p_function;
      c.check(ok && rel(s.infinity_limit, s.sigma_max) <= 0.02, k.label + ": " + text);
    }
    auto [ok, text] = bounds(perturbed);
    const PFunctionSummary& s = perturbed.audit.p_function;
    c.check(ok && s.infinity_limit <= 0.95 * s.sigma_max,
            perturbed.label + ": " + text + " gap " + pct(1 - s.infinity_limit / s.sigma_max));
    out.push_back(c);
  }

  {
    Criterion c{7, "curvature bound equality on spheres: closed form <= 1e-8, solved C within 3%"};
    for (int n : {3, 4}) {
      for (double p : {1.5, 2.0, 2.5}) {
        for (double alpha : {kThird, kHalf}) {
          for (double r : {0.5, 1.0, 3.0}) {
            const CurvatureMargin m = curvature_bound_audit(SigmaCurve::sphere(r, alpha),
                                                            ConeSpec::circular(n, alpha), p, 128);
            if (m.max_abs_margin > 1e-8) {
              c.check(false, "closed form n=" + std::to_string(n) + " p=" + sci(p) + " R=" + sci(r) +
                                 ": margin " + sci(m.max_abs_margin));
            }
          }
        }
      }
    }
    if (c.pass) c.check(true, "closed form margins <= 1e-8 on 36 caps");
    for (const Case& k : spheres) {
      const CurvatureMargin& m = k.audit.curvature_measured;
      std::vector<double> h = m.mean_curvature;
      double worst = 0;
      for (double v : h) worst = std::max(worst, rel(v, m.bound));
      c.check(worst <= 0.03, k.label + ": |H - bound(C measured)| / bound " + pct(worst));
    }
    out.push_back(c);
  }

  {
    Criterion c{8, "rigidity detector: relative_std and deficits"};
    for (const Case& k : spheres) {
      c.check(k.audit.deviation.relative_std <= 0.02 && std::abs(k.audit.isoperimetric_deficit) <= 1e-8 &&
                  std::abs(k.audit.heintze_karcher_deficit) <= 1e-8,
              k.label + ": relative_std " + pct(k.audit.deviation.relative_std) + " iso " +
                  sci(k.audit.isoperimetric_deficit) + " HK " + sci(k.audit.heintze_karcher_deficit));
    }
    std::string stds;
    bool stable = true;
    for (const auto& row : cap_sweep.levels) {
      stable = stable && row.relative_std >= 0.05;
      stds += " " + pct(row.relative_std);
    }
    const double drift = rel(cap_sweep.levels.back().relative_std, cap_sweep.levels.front().relative_std);
    c.check(stable && drift <= 0.25, "perturbed cap relative_std over levels:" + stds);
    c.check(perturbed.audit.isoperimetric_deficit > 0 && perturbed.audit.heintze_karcher_deficit > 0,
            "perturbed cap iso " + sci(perturbed.audit.isoperimetric_deficit) + " HK " +
                sci(perturbed.audit.heintze_karcher_deficit));
    out.push_back(c);
  }

  {
    Criterion c{9, "structural properties"};
    // Finite-difference gradient on 50 random directions.
    {
      const SigmaCurve g = SigmaCurve::cosine_series(1.0, {0.2}, kHalf);
      const ConeSpec cone = ConeSpec::circular(3, kHalf);
      const MeridianMesh mesh = build_mesh(g, cone, 4.0, 8, 8);
      const DofMap dofs = DofMap::dirichlet(mesh);
      std::mt19937_64 rng(1);
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> jitter(-0.05, 0.05);
      double worst = 0;
      for (double p : {1.5, 2.5}) {
        std::vector<double> u(mesh.node_count());
        for (std::size_t k = 0; k < u.size(); ++k) {
          const BoundaryTag t = mesh.tag(k);
          u[k] = t == BoundaryTag::Sigma ? 1.0
                 : t == BoundaryTag::Outer ? 0.0
                 : std::clamp(1.0 - (mesh.node_rho(k) - 1.0) / 3.0 + jitter(rng), 0.01, 1.0);
        }
        const EnergyEvaluation ev = energy_gradient_hessian(mesh, u, p, 1e-6, dofs);
        for (int dir = 0; dir < 50; ++dir) {
          std::vector<double> up = u, um = u;
          double analytic = 0;
          const double h = 1e-5;
          for (std::size_t k = 0; k < dofs.free_count(); ++k) {
            const double v = normal(rng);
            up[dofs.free_nodes()[k]] += h * v;
            um[dofs.free_nodes()[k]] -= h * v;
            analytic += v * ev.gradient[static_cast<Eigen::Index>(k)];
          }
          const double fd = (energy_gradient_hessian(mesh, up, p, 1e-6, dofs).energy -
                             energy_gradient_hessian(mesh, um, p, 1e-6, dofs).energy) / (2 * h);
          worst = std::max(worst, rel(fd, analytic));
        }
      }
      c.check(worst <= 1e-5, "energy gradient vs central differences, 2 x 50 directions: " + sci(worst));
    }
    {
      bool bounds = true, monotone = true, sandwich = true;
      double worst_sandwich = 0;
      auto scan = [&](const Case& k) {
        for (const auto& e : k.study.entries) bounds = bounds && e.report.bounds_ok;
        for (std::size_t i = 1; i < k.study.entries.size(); ++i) {
          monotone = monotone && k.study.entries[i].capacity <= k.study.entries[i - 1].capacity;
        }
        monotone = monotone && k.study.probe_monotone;
        sandwich = sandwich && k.audit.sandwich.pass;
        worst_sandwich = std::max(worst_sandwich, record(k.audit, "sandwich_bound").relative_mismatch);
      };
      for (const Case& k : spheres) scan(k);
      scan(perturbed);
      c.check(bounds, "0 < u <= 1 off the outer sphere in every solve");
      c.check(monotone, "capacity nonincreasing and probe value nondecreasing in r_out");
      c.check(sandwich, "sandwich bound with 2% slack, worst excess " + pct(worst_sandwich));
    }
    {
      const ConeSpec cone = ConeSpec::circular(3, kHalf);
      const SigmaCurve g = SigmaCurve::cosine_series(1.0, {0.2}, kHalf);
      double worst = 0;
      for (double centre : {0.25, 0.8, 1.3}) {
        const double width = 0.1, t = 1e-4;
        const double da = (sigma_area(bumped(g, t, centre, width), cone) -
                           sigma_area(bumped(g, -t, centre, width), cone)) / (2 * t);
        const double kernel = cone.solid_angle_factor() * integrate_adaptive(
            [&](double th) {
              const double z = (th - centre) / width;
              return mean_curvature(g, cone, th) * std::exp(-z * z) * g(th) * g(th) * std::sin(th);
            },
            0.0, kHalf);
        worst = std::max(worst, rel(da, kernel));
      }
      c.check(worst <= 1e-6, "mean curvature vs area first variation: " + sci(worst));
    }
    out.push_back(c);
  }

  {
    Criterion c{10, "deterministic report.json across runs and thread counts"};
    ScenarioConfig cfg = sweep_config("determinism", {0.2});
    cfg.solver.p = 1.5;
    cfg.solver.deterministic = true;
    const std::string a = strip_timing(report_json(cfg, run_scenario(cfg)));
    const std::string b = strip_timing(report_json(cfg, run_scenario(cfg)));
    cfg.solver.threads = 4;
    const std::string t = strip_timing(report_json(cfg, run_scenario(cfg)));
    c.check(a == b, "two serial runs identical (" + std::to_string(a.size()) + " bytes)");
    c.check(a == t, "4-thread run identical to serial");
    out.push_back(c);
  }

  bool all = true;
  for (const Criterion& c : out) {
    std::printf("criterion %2d %s  %s\n", c.id, c.pass ? "PASS" : "FAIL", c.title.c_str());
    for (const auto& d : c.details) std::printf("      %s\n", d.c_str());
    all = all && c.pass;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("acceptance %s in %.1f s\n", all ? "PASS" : "FAIL", seconds);
  return all ? 0 : 1;
}
