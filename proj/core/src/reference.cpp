#include <conecap/reference.hpp>

#include <conecap/error.hpp>

#include <boost/math/special_functions/beta.hpp>

#include <cmath>

namespace conecap::reference {

namespace {

void check_exponent(int n, double p) {
  if (n < 2) throw InvalidArgument("dimension must be at least 2");
  if (!(p > 1.0 && p < n)) throw InvalidArgument("exponent p must lie in (1, n)");
}

}  // namespace

double decay_exponent(int n, double p) {
  check_exponent(n, p);
  return (n - p) / (p - 1.0);
}

RadialValue fundamental_solution(double radius, int n, double p) {
  const double kappa = decay_exponent(n, p);
  if (!(radius > 0.0)) throw InvalidArgument("fundamental solution needs |x| > 0");
  const double value = std::pow(radius, -kappa);
  return {value, -kappa * value / radius};
}

RadialValue radial_model(double radius, double sphere_radius, int n, double p) {
  const double kappa = decay_exponent(n, p);
  if (!(sphere_radius > 0.0)) throw InvalidArgument("model radius must be positive");
  if (radius < sphere_radius * (1.0 - 1e-12)) {
    throw InvalidArgument("radial model is only defined outside the ball B_R");
  }
  const double value = std::pow(radius / sphere_radius, -kappa);
  return {value, -kappa * value / radius};
}

double model_boundary_gradient(double sphere_radius, int n, double p) {
  return decay_exponent(n, p) / sphere_radius;
}

double cone_unit_ball_volume_closed_form(const ConeSpec& cone) {
  cone.validate();
  const int n = cone.n;
  const double a = 0.5 * (n - 1);
  const double c_n = 2.0 * std::pow(kPi, a) / std::tgamma(a);
  const double full = boost::math::beta(a, 0.5);  // int_0^pi sin^{n-2}
  double angular = full;
  if (!cone.full_space) {
    const double s = std::sin(cone.half_angle);
    angular = 0.5 * full * boost::math::ibeta(a, 0.5, s * s);
  }
  return c_n * angular / n;
}

double model_capacity(double sphere_radius, const ConeSpec& cone, double p) {
  const int n = cone.n;
  const double kappa = decay_exponent(n, p);
  const double omega = cone_unit_ball_volume_closed_form(cone);
  return std::pow(kappa, p - 1.0) * n * omega * std::pow(sphere_radius, n - p) / p;
}

TruncatedRadialSolution::TruncatedRadialSolution(double sphere_radius, double r_out, int n,
                                                 double p)
    : sphere_radius_(sphere_radius), r_out_(r_out), n_(n), p_(p), kappa_(decay_exponent(n, p)) {
  if (!(sphere_radius > 0.0) || !(r_out > sphere_radius)) {
    throw InvalidArgument("truncated radial solution needs 0 < R < r_out");
  }
  scale_ = 1.0 / (std::pow(sphere_radius_, -kappa_) - std::pow(r_out_, -kappa_));
}

RadialValue TruncatedRadialSolution::at(double radius) const {
  if (radius < sphere_radius_ * (1.0 - 1e-12) || radius > r_out_ * (1.0 + 1e-12)) {
    throw InvalidArgument("radius outside the truncated annulus");
  }
  const double power = std::pow(radius, -kappa_);
  return {(power - std::pow(r_out_, -kappa_)) * scale_, -kappa_ * power / radius * scale_};
}

double TruncatedRadialSolution::capacity(const ConeSpec& cone) const {
  // The flux rho^{n-1} |u'|^{p-1} is constant and equals (kappa * scale)^{p-1}.
  const double omega = cone_unit_ball_volume_closed_form(cone);
  return cone.n * omega * std::pow(kappa_ * scale_, p_ - 1.0) / p_;
}

}  // namespace conecap::reference
