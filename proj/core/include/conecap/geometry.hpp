#pragma once

// Geometry of circular cones and of revolution hypersurfaces written as radial
// graphs rho = g(theta) over the cone's meridian section. All integrals are 1-D
// adaptive quadratures in theta; the cone is rotationally symmetric about its
// axis so every quantity reduces to a meridian integral times the area c_n of
// the unit (n-2)-sphere.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace conecap {

inline constexpr double kPi = 3.14159265358979323846;

/// Circular cone of half-angle alpha about the x_n axis, or all of R^n.
struct ConeSpec {
  int n = 3;
  double half_angle = kPi / 2;
  bool full_space = false;

  /// Validated constructors. Throw InvalidArgument on n < 2 or alpha outside (0, pi/2].
  static ConeSpec circular(int n, double half_angle);
  static ConeSpec whole_space(int n);

  void validate() const;

  /// Upper end of the polar-angle range: alpha, or pi for the full space.
  double theta_max() const { return full_space ? kPi : half_angle; }

  /// Area of the unit (n-2)-sphere; c_2 = 2 counts the two reflected half-planes.
  double solid_angle_factor() const;
};

/// Value and first two theta-derivatives of g.
struct CurveJet {
  double g = 0;
  double dg = 0;
  double d2g = 0;
};

/// Generating curve of Sigma as a radial graph rho = g(theta), theta in [0, theta_max].
/// Immutable; copies share the underlying evaluator.
class SigmaCurve {
 public:
  using Evaluator = std::function<CurveJet(double)>;

  static SigmaCurve sphere(double radius, double theta_max);
  /// g(theta) = R (1 + sum_k delta_k cos(k pi theta / theta_max)), k = 1, 2, ...
  static SigmaCurve cosine_series(double radius, std::vector<double> coefficients,
                                  double theta_max);
  /// Arbitrary analytic curve; the evaluator must return exact derivatives.
  static SigmaCurve from_function(Evaluator eval, double theta_max, std::string label);
  /// Samples on the uniform grid theta_k = k theta_max / (size - 1). The evaluator is a
  /// cubic spline clamped to zero slope at both ends; the end-slope residuals are
  /// measured on the raw samples and compared against slope_tolerance.
  static SigmaCurve from_samples(std::vector<double> values, double theta_max,
                                 double slope_tolerance = 1e-3);

  CurveJet jet(double theta) const;
  double operator()(double theta) const { return jet(theta).g; }

  double theta_max() const;
  const std::string& label() const;
  std::optional<double> sphere_radius() const;
  bool is_sampled() const;

  /// |g'(0)| and |g'(theta_max)|, measured on the analytic evaluator or on raw samples.
  double axis_slope_residual() const;
  double wall_slope_residual() const;
  /// Admissibility threshold for the slope residuals: 1e-8 for analytic curves.
  double slope_tolerance() const;

  double min_value() const;
  double max_value() const;

  SigmaCurve scaled(double factor) const;

  /// (theta, g) pairs on a uniform grid with `intervals` cells.
  std::vector<std::pair<double, double>> sample(int intervals) const;

 private:
  struct Impl;
  explicit SigmaCurve(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

/// Adaptive Gauss-Kronrod integral of f over [a, b] to the given relative tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-12);

/// omega_n^C = H^n(C cap B_1).
double cone_unit_ball_volume(const ConeSpec& cone);

/// H^{n-1}(Sigma), the relative perimeter of Omega in the cone.
double sigma_area(const SigmaCurve& curve, const ConeSpec& cone);

/// H^n(Omega cap C).
double enclosed_volume(const SigmaCurve& curve, const ConeSpec& cone);

/// Surface density dH^{n-1}/dtheta of Sigma at theta.
double sigma_area_density(const SigmaCurve& curve, const ConeSpec& cone, double theta);

/// <x, nu> on Sigma with nu the unit normal pointing away from Omega.
double support_function(const SigmaCurve& curve, double theta);

/// Integral over Sigma of a function of the polar angle.
double integrate_over_sigma(const SigmaCurve& curve, const ConeSpec& cone,
                            const std::function<double(double)>& f, double rel_tol = 1e-12);

/// Mean curvature (sum of principal curvatures) w.r.t. the normal pointing away from Omega.
/// The axis uses the symmetric limit of the rotational curvature.
double mean_curvature(const SigmaCurve& curve, const ConeSpec& cone, double theta);

struct CurvatureProfile {
  std::vector<double> theta;
  std::vector<double> mean_curvature;
};

CurvatureProfile mean_curvature_profile(const SigmaCurve& curve, const ConeSpec& cone,
                                        int intervals = 256);

struct SlopeResiduals {
  double axis = 0;
  double wall = 0;
  bool admissible = false;
};

SlopeResiduals orthogonality_residual(const SigmaCurve& curve);

/// P(Omega; C) / |Omega cap C|^{(n-1)/n} - n (omega_n^C)^{1/n}. Nonnegative.
double isoperimetric_deficit(const SigmaCurve& curve, const ConeSpec& cone);

/// int_Sigma (n-1)/H - n |Omega cap C|. Throws NonPositiveCurvature if H <= 0 anywhere.
double heintze_karcher_deficit(const SigmaCurve& curve, const ConeSpec& cone);

}  // namespace conecap
