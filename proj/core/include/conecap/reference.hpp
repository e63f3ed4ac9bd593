#pragma once

// Closed-form radial solutions. These are the oracles the solver and the audits
// are checked against, so nothing here calls into the mesh, solver or
// quadrature code.

#include <conecap/geometry.hpp>

namespace conecap::reference {

struct RadialValue {
  double value = 0;
  double derivative = 0;  // d/d|x|
};

/// kappa = (n - p) / (p - 1), the decay exponent of the fundamental solution.
double decay_exponent(int n, double p);

/// Gamma_p(x) = |x|^{(p-n)/(p-1)}.
RadialValue fundamental_solution(double radius, int n, double p);

/// (|x| / R)^{(p-n)/(p-1)} for |x| >= R.
RadialValue radial_model(double radius, double sphere_radius, int n, double p);

/// |grad u| on the sphere of radius R for the model potential: (n - p) / ((p - 1) R).
double model_boundary_gradient(double sphere_radius, int n, double p);

/// omega_n^C from the regularized incomplete beta function.
double cone_unit_ball_volume_closed_form(const ConeSpec& cone);

/// (1/p) kappa^{p-1} n omega R^{n-p}.
double model_capacity(double sphere_radius, const ConeSpec& cone, double p);

/// Radial p-harmonic profile on the annulus R <= |x| <= r_out with u(R) = 1, u(r_out) = 0.
class TruncatedRadialSolution {
 public:
  TruncatedRadialSolution(double sphere_radius, double r_out, int n, double p);

  RadialValue at(double radius) const;
  /// (1/p) int |u'|^p over the truncated cone annulus.
  double capacity(const ConeSpec& cone) const;

  double sphere_radius() const { return sphere_radius_; }
  double r_out() const { return r_out_; }

 private:
  double sphere_radius_;
  double r_out_;
  int n_;
  double p_;
  double kappa_;
  double scale_;  // 1 / (R^{-kappa} - r_out^{-kappa})
};

}  // namespace conecap::reference
