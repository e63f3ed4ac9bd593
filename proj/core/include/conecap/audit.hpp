#pragma once

// Integral identities, gamma asymptotics, the P-function maximum principle and
// rigidity diagnostics evaluated on solved potentials.

#include <conecap/geometry.hpp>
#include <conecap/solver.hpp>

#include <string>
#include <vector>

namespace conecap {

struct AuditTolerances {
  double identity = 0.03;
  double gamma_spread = 0.04;
  double max_principle_slack = 0.02;
  double far_field_noise = 0.10;
  double shell_inner = 0.4;  // far shell, as fractions of r_out
  double shell_outer = 0.7;
  int excluded_layers = 2;   // radial layers next to Sigma left out of the interior P max
  void validate() const;
};

struct IdentityRecord {
  std::string name;
  std::string anchor;  // the mathematical statement being checked
  double measured = 0;
  double predicted = 0;
  double relative_mismatch = 0;
  double tolerance = 0;
  bool pass = false;
  /// Diagnostics only hold for rigid geometries and do not gate verification.
  bool gated = true;
};

IdentityRecord make_record(std::string name, std::string anchor, double measured,
                           double predicted, double tolerance, bool gated = true);

/// Integral over Sigma of f(theta, |grad u|(theta)) with the sampled profile
/// interpolated by a cubic spline and the geometry integrated adaptively.
double sigma_profile_integral(const RayProfile& profile, const SigmaCurve& curve,
                              const ConeSpec& cone,
                              const std::function<double(double, double)>& f);

/// p Cap = int_Sigma |grad u|^{p-1}.
IdentityRecord surface_capacity_identity(const PotentialField& field, double tolerance = 0.03);

/// (p-1) int_Sigma |grad u|^p <x,nu> = (n-p) p Cap. On a truncated field the outer
/// sphere contributes -(p-1) r_out int_{|x|=r_out} |grad u|^p, which is included in
/// the measured side.
IdentityRecord pohozaev_identity(const PotentialField& field, double tolerance = 0.03);

/// C = (n-p)/(n(p-1)) P(Omega; C) / |Omega cap C|.
double overdetermined_constant(const SigmaCurve& curve, const ConeSpec& cone, double p);

/// (1/p) ((n-p)/(p-1))^{p-1} P^p / (n |Omega cap C|)^{p-1}.
double rigidity_capacity_formula(const SigmaCurve& curve, const ConeSpec& cone, double p);

struct GammaEstimates {
  double from_value = 0;
  double from_gradient = 0;
  double from_capacity = 0;
  double spread = 0;           // max pairwise |a - b| / min(a, b)
  double shell_variation = 0;  // (max - min) / mean of u / Gamma_p over the shell
};

/// gamma with u ~ gamma Gamma_p at infinity. Throws FarFieldTooNoisy when the
/// shell ratios vary by more than tol.far_field_noise.
GammaEstimates gamma_estimates(const PotentialField& field, double capacity,
                               const AuditTolerances& tol = {});

/// gamma from the capacity alone.
double gamma_from_capacity(double capacity, const ConeSpec& cone, double p);

struct PFunctionSample {
  double rho = 0;
  double theta = 0;
  double value = 0;
  BoundaryTag region = BoundaryTag::Interior;  // Interior, Wall or Sigma
};

struct PFunctionSummary {
  double interior_max = 0;
  double wall_max = 0;
  bool has_wall = false;
  double sigma_max = 0;
  double infinity_limit = 0;
  BoundaryTag max_location = BoundaryTag::Sigma;
  bool maximum_on_sigma = false;
  bool limit_below_sigma = false;
  std::vector<PFunctionSample> samples;
};

/// P = u^{-p(n-1)/(n-p)} |grad u|^p at element centroids. The interior window is
/// tol.excluded_layers <= i and rho <= r_out / 2. The limit at infinity is
/// (n omega/p)^{p/(n-p)} kappa^{p(n-1)/(n-p)} Cap^{-p/(n-p)}.
PFunctionSummary p_function_audit(const PotentialField& field, double capacity,
                                  const AuditTolerances& tol = {});

/// Throws MaximumPrincipleViolation when either comparison fails beyond the slack.
void enforce_maximum_principle(const PFunctionSummary& summary, double slack);

struct CurvatureMargin {
  std::vector<double> theta;
  std::vector<double> mean_curvature;
  std::vector<double> margin;  // H - (n-1)(p-1)/(n-p) C
  double bound = 0;
  double max_abs_margin = 0;
  double min_margin = 0;
};

/// Margin of H_Sigma over (n-1)(p-1)/(n-p) C for a given C.
CurvatureMargin curvature_bound_audit(const SigmaCurve& curve, const ConeSpec& cone, double p,
                                      double constant, int intervals = 256);
/// Same with C from the volume-perimeter formula.
CurvatureMargin curvature_bound_audit(const SigmaCurve& curve, const ConeSpec& cone, double p,
                                      int intervals = 256);

struct GradientDeviation {
  double mean = 0;
  double std = 0;
  double relative_std = 0;
};

/// Area-weighted mean and standard deviation of |grad u| on Sigma.
GradientDeviation overdetermined_deviation(const RayProfile& profile, const SigmaCurve& curve,
                                           const ConeSpec& cone);
GradientDeviation overdetermined_deviation(const PotentialField& field);

struct SandwichCheck {
  double lower = 0;  // R1^kappa
  double upper = 0;  // R2^kappa
  double min_ratio = 0;
  double max_ratio = 0;
  std::size_t nodes = 0;
  bool pass = false;
};

/// R1^kappa <= u / Gamma_p <= R2^kappa at nodes with R2 <= rho <= rho_max, where
/// R1 = min g and R2 = max g; rho_max <= 0 means the whole mesh.
SandwichCheck sandwich_bound(const PotentialField& field, double slack = 0.02,
                             double rho_max = 0.0);

struct IdentityReport {
  std::vector<IdentityRecord> records;
  GammaEstimates gamma;
  std::string gamma_error;  // set when the far field was too noisy to fit
  PFunctionSummary p_function;
  GradientDeviation deviation;
  CurvatureMargin curvature;
  CurvatureMargin curvature_measured;  // bound from the measured mean |grad u|
  SandwichCheck sandwich;
  RayProfile sigma_gradient;            // extrapolated field
  RayProfile sigma_gradient_truncated;  // final truncated solve
  double capacity = 0;                  // extrapolated
  double capacity_truncated = 0;
  double capacity_formula = 0;
  double constant_formula = 0;
  double isoperimetric_deficit = 0;
  double heintze_karcher_deficit = 0;
  bool heintze_karcher_defined = true;

  /// True when every gated record passes.
  bool pass() const;
};

/// Full audit of a truncation study.
IdentityReport run_audit(const TruncationStudy& study, const AuditTolerances& tol = {});

}  // namespace conecap
