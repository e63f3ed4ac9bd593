#include <conecap/audit.hpp>

#include <conecap/error.hpp>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace conecap {

void AuditTolerances::validate() const {
  if (!(identity > 0) || !(gamma_spread > 0) || !(max_principle_slack >= 0) ||
      !(far_field_noise > 0)) {
    throw InvalidArgument("audit tolerances must be positive");
  }
  if (!(shell_inner > 0.0 && shell_inner < shell_outer && shell_outer < 1.0)) {
    throw InvalidArgument("far shell must satisfy 0 < inner < outer < 1");
  }
  if (excluded_layers < 0) throw InvalidArgument("excluded_layers must be non-negative");
}

IdentityRecord make_record(std::string name, std::string anchor, double measured,
                           double predicted, double tolerance, bool gated) {
  IdentityRecord r;
  r.name = std::move(name);
  r.anchor = std::move(anchor);
  r.measured = measured;
  r.predicted = predicted;
  r.relative_mismatch = std::abs(measured - predicted) / std::abs(predicted);
  r.tolerance = tolerance;
  r.pass = r.relative_mismatch <= tolerance;
  r.gated = gated;
  return r;
}

double sigma_profile_integral(const RayProfile& profile, const SigmaCurve& curve,
                              const ConeSpec& cone,
                              const std::function<double(double, double)>& f) {
  if (profile.theta.size() < 4 || profile.theta.size() != profile.grad_norm.size()) {
    throw InvalidArgument("Sigma profile needs at least four samples");
  }
  const double h = profile.theta[1] - profile.theta[0];
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline(
      profile.grad_norm.begin(), profile.grad_norm.end(), profile.theta.front(), h);
  return integrate_over_sigma(
      curve, cone, [&](double theta) { return f(theta, spline(theta)); }, 1e-10);
}

IdentityRecord surface_capacity_identity(const PotentialField& field, double tolerance) {
  const MeridianMesh& mesh = *field.mesh;
  const double p = field.p;
  const double cap = capacity_of(field).capacity;
  const RayProfile profile = boundary_gradient_on_sigma(field);
  const double flux = sigma_profile_integral(
      profile, mesh.curve(), mesh.cone(),
      [p](double, double grad) { return std::pow(grad, p - 1.0); });
  return make_record("surface_capacity_identity", "p Cap = int_Sigma |grad u|^{p-1}", flux,
                     p * cap, tolerance);
}

IdentityRecord pohozaev_identity(const PotentialField& field, double tolerance) {
  const MeridianMesh& mesh = *field.mesh;
  const ConeSpec& cone = mesh.cone();
  const SigmaCurve& curve = mesh.curve();
  const double p = field.p;
  const int n = cone.n;
  const double cap = capacity_of(field).capacity;

  const RayProfile sigma = boundary_gradient_on_sigma(field);
  const double inner = sigma_profile_integral(sigma, curve, cone, [&](double theta, double grad) {
    return std::pow(grad, p) * support_function(curve, theta);
  });

  double outer = 0;
  if (field.outer_value == 0.0) {
    const RayProfile far = boundary_gradient_on_outer(field);
    const double r = mesh.r_out();
    const SigmaCurve sphere = SigmaCurve::sphere(r, cone.theta_max());
    const double area_flux = sigma_profile_integral(
        far, sphere, cone, [p](double, double grad) { return std::pow(grad, p); });
    outer = (p - 1.0) * r * area_flux;
  }
  return make_record("pohozaev_identity",
                     "(p-1) int_Sigma |grad u|^p <x,nu> = (n-p) p Cap",
                     (p - 1.0) * inner - outer, (n - p) * p * cap, tolerance);
}

double overdetermined_constant(const SigmaCurve& curve, const ConeSpec& cone, double p) {
  const int n = cone.n;
  return (n - p) / (n * (p - 1.0)) * sigma_area(curve, cone) / enclosed_volume(curve, cone);
}

double rigidity_capacity_formula(const SigmaCurve& curve, const ConeSpec& cone, double p) {
  const int n = cone.n;
  const double kappa = (n - p) / (p - 1.0);
  const double area = sigma_area(curve, cone);
  const double volume = enclosed_volume(curve, cone);
  return std::pow(kappa, p - 1.0) * std::pow(area, p) / std::pow(n * volume, p - 1.0) / p;
}

double gamma_from_capacity(double capacity, const ConeSpec& cone, double p) {
  const int n = cone.n;
  const double omega = cone_unit_ball_volume(cone);
  return std::pow(p / (n * omega), 1.0 / (p - 1.0)) * ((p - 1.0) / (n - p)) *
         std::pow(capacity, 1.0 / (p - 1.0));
}

GammaEstimates gamma_estimates(const PotentialField& field, double capacity,
                               const AuditTolerances& tol) {
  tol.validate();
  const MeridianMesh& mesh = *field.mesh;
  const int n = mesh.cone().n;
  const double p = field.p;
  const double kappa = (n - p) / (p - 1.0);
  const double lo = tol.shell_inner * mesh.r_out();
  const double hi = tol.shell_outer * mesh.r_out();

  double w_sum = 0, ratio_sum = 0, cross = 0, grad_sq = 0;
  double ratio_min = std::numeric_limits<double>::infinity();
  double ratio_max = 0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    for (const auto& q : mesh.quadrature(e)) {
      if (q.rho < lo || q.rho > hi) continue;
      const PointGradient g = evaluate_at(field, e, q);
      const double gamma_p = std::pow(q.rho, -kappa);
      const double grad_gamma = kappa * gamma_p / q.rho;
      const double ratio = g.value / gamma_p;
      w_sum += q.weight;
      ratio_sum += q.weight * ratio;
      cross += q.weight * g.norm() * grad_gamma;
      grad_sq += q.weight * grad_gamma * grad_gamma;
      ratio_min = std::min(ratio_min, ratio);
      ratio_max = std::max(ratio_max, ratio);
    }
  }
  if (w_sum == 0.0) throw InvalidArgument("far shell contains no quadrature points");

  GammaEstimates est;
  est.from_value = ratio_sum / w_sum;
  est.from_gradient = cross / grad_sq;
  est.from_capacity = gamma_from_capacity(capacity, mesh.cone(), p);
  est.shell_variation = (ratio_max - ratio_min) / est.from_value;
  if (!(est.shell_variation <= tol.far_field_noise)) {
    std::ostringstream msg;
    msg << "u / Gamma_p varies by " << 100.0 * est.shell_variation
        << "% over the far shell (limit " << 100.0 * tol.far_field_noise << "%)";
    throw FarFieldTooNoisy(msg.str());
  }
  const double v[3] = {est.from_value, est.from_gradient, est.from_capacity};
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      est.spread = std::max(est.spread, std::abs(v[a] - v[b]) / std::min(v[a], v[b]));
    }
  }
  return est;
}

PFunctionSummary p_function_audit(const PotentialField& field, double capacity,
                                  const AuditTolerances& tol) {
  tol.validate();
  const MeridianMesh& mesh = *field.mesh;
  const ConeSpec& cone = mesh.cone();
  const int n = cone.n;
  const double p = field.p;
  const double kappa = (n - p) / (p - 1.0);
  const double u_power = -p * (n - 1.0) / (n - p);

  PFunctionSummary s;
  s.has_wall = !cone.full_space;
  const double rho_cap = 0.5 * mesh.r_out();
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const QuadraturePoint& c = mesh.centroid(e);
    if (mesh.element_layer(e) < tol.excluded_layers || c.rho > rho_cap) continue;
    const PointGradient g = evaluate_at(field, e, c);
    if (!(g.value > 0.0)) continue;
    PFunctionSample sample;
    sample.rho = c.rho;
    sample.theta = c.theta;
    sample.value = std::pow(g.value, u_power) * std::pow(g.norm(), p);
    const bool wall_cell = s.has_wall && mesh.element_ray(e) == mesh.n_theta() - 1;
    sample.region = wall_cell ? BoundaryTag::Wall : BoundaryTag::Interior;
    if (wall_cell) {
      s.wall_max = std::max(s.wall_max, sample.value);
    } else {
      s.interior_max = std::max(s.interior_max, sample.value);
    }
    s.samples.push_back(sample);
  }

  // u = 1 on Sigma, so P there is |grad u|^p.
  const RayProfile sigma = boundary_gradient_on_sigma(field);
  for (std::size_t k = 0; k < sigma.theta.size(); ++k) {
    const double value = std::pow(sigma.grad_norm[k], p);
    s.sigma_max = std::max(s.sigma_max, value);
    s.samples.push_back({mesh.curve()(sigma.theta[k]), sigma.theta[k], value, BoundaryTag::Sigma});
  }

  const double omega = cone_unit_ball_volume(cone);
  s.infinity_limit = std::pow(n * omega / p, p / (n - p)) *
                     std::pow(kappa, p * (n - 1.0) / (n - p)) * std::pow(capacity, -p / (n - p));

  const double slack = 1.0 + tol.max_principle_slack;
  s.maximum_on_sigma =
      s.interior_max <= s.sigma_max * slack && (!s.has_wall || s.wall_max <= s.sigma_max * slack);
  s.limit_below_sigma = s.infinity_limit <= s.sigma_max * slack;
  s.max_location = BoundaryTag::Sigma;
  if (s.interior_max > s.sigma_max && s.interior_max >= s.wall_max) {
    s.max_location = BoundaryTag::Interior;
  } else if (s.has_wall && s.wall_max > s.sigma_max) {
    s.max_location = BoundaryTag::Wall;
  }
  return s;
}

void enforce_maximum_principle(const PFunctionSummary& s, double slack) {
  const double bound = s.sigma_max * (1.0 + slack);
  const double off_sigma = std::max(s.interior_max, s.has_wall ? s.wall_max : 0.0);
  if (off_sigma > bound) {
    std::ostringstream msg;
    msg << "P-function reaches " << off_sigma << " off Sigma, above the Sigma maximum "
        << s.sigma_max;
    throw MaximumPrincipleViolation(msg.str());
  }
  if (s.infinity_limit > bound) {
    std::ostringstream msg;
    msg << "P-function limit at infinity " << s.infinity_limit << " exceeds the Sigma maximum "
        << s.sigma_max;
    throw MaximumPrincipleViolation(msg.str());
  }
}

CurvatureMargin curvature_bound_audit(const SigmaCurve& curve, const ConeSpec& cone, double p,
                                      double constant, int intervals) {
  const int n = cone.n;
  const CurvatureProfile profile = mean_curvature_profile(curve, cone, intervals);
  CurvatureMargin m;
  m.bound = (n - 1.0) * (p - 1.0) / (n - p) * constant;
  m.theta = profile.theta;
  m.mean_curvature = profile.mean_curvature;
  m.min_margin = std::numeric_limits<double>::infinity();
  for (double h : profile.mean_curvature) {
    const double margin = h - m.bound;
    m.margin.push_back(margin);
    m.max_abs_margin = std::max(m.max_abs_margin, std::abs(margin));
    m.min_margin = std::min(m.min_margin, margin);
  }
  return m;
}

CurvatureMargin curvature_bound_audit(const SigmaCurve& curve, const ConeSpec& cone, double p,
                                      int intervals) {
  return curvature_bound_audit(curve, cone, p, overdetermined_constant(curve, cone, p),
                               intervals);
}

GradientDeviation overdetermined_deviation(const RayProfile& profile, const SigmaCurve& curve,
                                           const ConeSpec& cone) {
  const double area = sigma_area(curve, cone);
  GradientDeviation d;
  d.mean = sigma_profile_integral(profile, curve, cone,
                                  [](double, double grad) { return grad; }) / area;
  const double var = sigma_profile_integral(profile, curve, cone, [&](double, double grad) {
                       return (grad - d.mean) * (grad - d.mean);
                     }) / area;
  d.std = std::sqrt(std::max(0.0, var));
  d.relative_std = d.std / d.mean;
  return d;
}

GradientDeviation overdetermined_deviation(const PotentialField& field) {
  return overdetermined_deviation(boundary_gradient_on_sigma(field), field.mesh->curve(),
                                  field.mesh->cone());
}

SandwichCheck sandwich_bound(const PotentialField& field, double slack, double rho_max) {
  const MeridianMesh& mesh = *field.mesh;
  const int n = mesh.cone().n;
  const double p = field.p;
  const double kappa = (n - p) / (p - 1.0);
  const double r1 = mesh.curve().min_value();
  const double r2 = mesh.curve().max_value();
  SandwichCheck c;
  c.lower = std::pow(r1, kappa);
  c.upper = std::pow(r2, kappa);
  c.min_ratio = std::numeric_limits<double>::infinity();
  c.max_ratio = 0;
  for (std::size_t node = 0; node < mesh.node_count(); ++node) {
    const double rho = mesh.node_rho(node);
    if (rho < r2 || (rho_max > 0.0 && rho > rho_max)) continue;
    const double ratio = field.u[node] * std::pow(rho, kappa);
    c.min_ratio = std::min(c.min_ratio, ratio);
    c.max_ratio = std::max(c.max_ratio, ratio);
    ++c.nodes;
  }
  c.pass = c.nodes > 0 && c.min_ratio >= c.lower * (1.0 - slack) &&
           c.max_ratio <= c.upper * (1.0 + slack);
  return c;
}

bool IdentityReport::pass() const {
  return std::all_of(records.begin(), records.end(),
                     [](const IdentityRecord& r) { return !r.gated || r.pass; });
}

IdentityReport run_audit(const TruncationStudy& study, const AuditTolerances& tol) {
  tol.validate();
  if (study.entries.empty()) throw InvalidArgument("audit needs a completed truncation study");
  const PotentialField& raw = study.final_field;
  const PotentialField& ext = study.extrapolated_field;
  const SigmaCurve& curve = raw.mesh->curve();
  const ConeSpec& cone = raw.mesh->cone();
  const double p = raw.p;

  IdentityReport rep;
  rep.capacity = study.fit.limit;
  rep.capacity_truncated = study.entries.back().capacity;
  rep.capacity_formula = rigidity_capacity_formula(curve, cone, p);
  rep.constant_formula = overdetermined_constant(curve, cone, p);
  rep.isoperimetric_deficit = isoperimetric_deficit(curve, cone);
  try {
    rep.heintze_karcher_deficit = heintze_karcher_deficit(curve, cone);
  } catch (const NonPositiveCurvature&) {
    rep.heintze_karcher_defined = false;
    rep.heintze_karcher_deficit = std::numeric_limits<double>::quiet_NaN();
  }

  rep.records.push_back(surface_capacity_identity(raw, tol.identity));
  rep.records.push_back(pohozaev_identity(raw, tol.identity));

  rep.sigma_gradient = boundary_gradient_on_sigma(ext);
  rep.sigma_gradient_truncated = boundary_gradient_on_sigma(raw);
  rep.deviation = overdetermined_deviation(rep.sigma_gradient, curve, cone);
  rep.records.push_back(make_record("overdetermined_constant",
                                    "C = (n-p)/(n(p-1)) P(Omega;C)/|Omega cap C|",
                                    rep.deviation.mean, rep.constant_formula, tol.identity,
                                    false));
  rep.records.push_back(make_record("rigidity_capacity_formula",
                                    "Cap = (1/p) kappa^{p-1} P^p / (n |Omega cap C|)^{p-1}",
                                    rep.capacity, rep.capacity_formula, tol.identity, false));

  {
    IdentityRecord r;
    r.name = "gamma_consistency";
    r.anchor = "u ~ gamma Gamma_p at infinity with gamma fixed by Cap";
    r.tolerance = tol.gamma_spread;
    try {
      rep.gamma = gamma_estimates(ext, rep.capacity, tol);
      r.measured = rep.gamma.from_value;
      r.predicted = rep.gamma.from_capacity;
      r.relative_mismatch = rep.gamma.spread;
      r.pass = rep.gamma.spread <= tol.gamma_spread;
    } catch (const FarFieldTooNoisy& e) {
      rep.gamma_error = e.what();
      rep.gamma.from_capacity = gamma_from_capacity(rep.capacity, cone, p);
      r.predicted = rep.gamma.from_capacity;
      r.relative_mismatch = std::numeric_limits<double>::infinity();
      r.pass = false;
    }
    rep.records.push_back(r);
  }

  rep.p_function = p_function_audit(ext, rep.capacity, tol);
  {
    const auto& s = rep.p_function;
    IdentityRecord r;
    r.name = "p_function_maximum";
    r.anchor = "P attains its maximum on the closure of Sigma";
    r.measured = std::max(s.interior_max, s.has_wall ? s.wall_max : 0.0);
    r.predicted = s.sigma_max;
    r.relative_mismatch = std::max(0.0, r.measured / r.predicted - 1.0);
    r.tolerance = tol.max_principle_slack;
    r.pass = s.maximum_on_sigma;
    rep.records.push_back(r);

    IdentityRecord lim;
    lim.name = "p_function_infinity_limit";
    lim.anchor = "lim_{|x|->inf} P <= max_Sigma P";
    lim.measured = s.infinity_limit;
    lim.predicted = s.sigma_max;
    lim.relative_mismatch = std::max(0.0, lim.measured / lim.predicted - 1.0);
    lim.tolerance = tol.max_principle_slack;
    lim.pass = s.limit_below_sigma;
    rep.records.push_back(lim);
  }

  rep.curvature = curvature_bound_audit(curve, cone, p);
  rep.curvature_measured = curvature_bound_audit(curve, cone, p, rep.deviation.mean);
  rep.records.push_back(make_record("curvature_bound",
                                    "H_Sigma >= (n-1)(p-1)/(n-p) C",
                                    rep.curvature.min_margin + rep.curvature.bound,
                                    rep.curvature.bound, tol.identity, false));

  rep.sandwich = sandwich_bound(ext, tol.max_principle_slack);
  {
    IdentityRecord r;
    r.name = "sandwich_bound";
    r.anchor = "min g^kappa <= u / Gamma_p <= max g^kappa for |x| >= max g";
    r.measured = rep.sandwich.min_ratio;
    r.predicted = rep.sandwich.lower;
    r.relative_mismatch = std::max({0.0, 1.0 - rep.sandwich.min_ratio / rep.sandwich.lower,
                                    rep.sandwich.max_ratio / rep.sandwich.upper - 1.0});
    r.tolerance = tol.max_principle_slack;
    r.pass = rep.sandwich.pass;
    rep.records.push_back(r);
  }
  return rep;
}

}  // namespace conecap
