#include <conecap/geometry.hpp>

#include <conecap/error.hpp>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace conecap {

namespace {

// Below this sin(theta) the rotational curvature is replaced by its axis limit.
constexpr double kAxisLimitSin = 1e-5;
constexpr double kAnalyticSlopeTolerance = 1e-8;
constexpr int kExtremaSamples = 2048;

void check_matching(const SigmaCurve& curve, const ConeSpec& cone) {
  cone.validate();
  if (std::abs(curve.theta_max() - cone.theta_max()) > 1e-12) {
    std::ostringstream msg;
    msg << "curve is defined on [0, " << curve.theta_max() << "] but the cone needs [0, "
        << cone.theta_max() << "]";
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

// ---------------------------------------------------------------- ConeSpec

ConeSpec ConeSpec::circular(int n, double half_angle) {
  ConeSpec cone{n, half_angle, false};
  cone.validate();
  return cone;
}

ConeSpec ConeSpec::whole_space(int n) {
  ConeSpec cone{n, kPi, true};
  cone.validate();
  return cone;
}

void ConeSpec::validate() const {
  if (n < 2) {
    throw InvalidArgument("cone dimension n must be at least 2, got " + std::to_string(n));
  }
  if (full_space) return;
  if (!(half_angle > 0.0) || half_angle > kPi / 2 + 1e-14) {
    std::ostringstream msg;
    msg << "half_angle must lie in (0, pi/2] for the cone to be convex, got " << half_angle;
    throw InvalidArgument(msg.str());
  }
}

double ConeSpec::solid_angle_factor() const {
  const double m = 0.5 * (n - 1);
  return 2.0 * std::pow(kPi, m) / std::tgamma(m);
}

// ---------------------------------------------------------------- SigmaCurve

struct SigmaCurve::Impl {
  Evaluator eval;
  double theta_max = 0;
  std::string label;
  std::optional<double> sphere_radius;
  bool sampled = false;
  double axis_residual = 0;
  double wall_residual = 0;
  double tolerance = kAnalyticSlopeTolerance;
  double min_value = 0;
  double max_value = 0;

  void finish() {
    if (!sampled) {
      axis_residual = std::abs(eval(0.0).dg);
      wall_residual = std::abs(eval(theta_max).dg);
    }
    min_value = std::numeric_limits<double>::infinity();
    max_value = -min_value;
    for (int k = 0; k <= kExtremaSamples; ++k) {
      const double g = eval(theta_max * k / kExtremaSamples).g;
      min_value = std::min(min_value, g);
      max_value = std::max(max_value, g);
    }
    if (!(min_value > 0.0)) {
      throw InvalidArgument("curve '" + label + "' must stay positive: the domain has to contain the vertex");
    }
  }
};

SigmaCurve::SigmaCurve(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

SigmaCurve SigmaCurve::sphere(double radius, double theta_max) {
  if (!(radius > 0.0)) throw InvalidArgument("sphere radius must be positive");
  if (!(theta_max > 0.0 && theta_max <= kPi)) throw InvalidArgument("theta_max must lie in (0, pi]");
  auto impl = std::make_shared<Impl>();
  impl->eval = [radius](double) { return CurveJet{radius, 0.0, 0.0}; };
  impl->theta_max = theta_max;
  std::ostringstream label;
  label << "sphere(R=" << radius << ")";
  impl->label = label.str();
  impl->sphere_radius = radius;
  impl->finish();
  return SigmaCurve(std::move(impl));
}

SigmaCurve SigmaCurve::cosine_series(double radius, std::vector<double> coefficients,
                                     double theta_max) {
  if (!(radius > 0.0)) throw InvalidArgument("cosine-series radius must be positive");
  if (!(theta_max > 0.0 && theta_max <= kPi)) throw InvalidArgument("theta_max must lie in (0, pi]");
  bool all_zero = std::all_of(coefficients.begin(), coefficients.end(),
                              [](double c) { return c == 0.0; });
  if (all_zero) return sphere(radius, theta_max);
  auto impl = std::make_shared<Impl>();
  const double freq = kPi / theta_max;
  impl->eval = [radius, freq, coefficients](double theta) {
    CurveJet jet{1.0, 0.0, 0.0};
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
      const double w = static_cast<double>(i + 1) * freq;
      const double c = std::cos(w * theta);
      const double s = std::sin(w * theta);
      jet.g += coefficients[i] * c;
      jet.dg -= coefficients[i] * w * s;
      jet.d2g -= coefficients[i] * w * w * c;
    }
    jet.g *= radius;
    jet.dg *= radius;
    jet.d2g *= radius;
    return jet;
  };
  impl->theta_max = theta_max;
  std::ostringstream label;
  label << "cosine(R=" << radius << ", delta=[";
  for (std::size_t i = 0; i < coefficients.size(); ++i) label << (i ? "," : "") << coefficients[i];
  label << "])";
  impl->label = label.str();
  impl->finish();
  return SigmaCurve(std::move(impl));
}

SigmaCurve SigmaCurve::from_function(Evaluator eval, double theta_max, std::string label) {
  if (!eval) throw InvalidArgument("curve evaluator is empty");
  if (!(theta_max > 0.0 && theta_max <= kPi)) throw InvalidArgument("theta_max must lie in (0, pi]");
  auto impl = std::make_shared<Impl>();
  impl->eval = std::move(eval);
  impl->theta_max = theta_max;
  impl->label = std::move(label);
  impl->finish();
  return SigmaCurve(std::move(impl));
}

SigmaCurve SigmaCurve::from_samples(std::vector<double> values, double theta_max,
                                    double slope_tolerance) {
  if (values.size() < 4) throw InvalidArgument("a sampled curve needs at least 4 samples");
  if (!(theta_max > 0.0 && theta_max <= kPi)) throw InvalidArgument("theta_max must lie in (0, pi]");
  const std::size_t m = values.size() - 1;
  const double h = theta_max / static_cast<double>(m);
  auto impl = std::make_shared<Impl>();
  impl->axis_residual = std::abs((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h));
  impl->wall_residual =
      std::abs((3.0 * values[m] - 4.0 * values[m - 1] + values[m - 2]) / (2.0 * h));
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      values.data(), values.size(), 0.0, h, 0.0, 0.0);
  impl->eval = [spline, theta_max](double theta) {
    const double t = std::clamp(theta, 0.0, theta_max);
    return CurveJet{(*spline)(t), spline->prime(t), spline->double_prime(t)};
  };
  impl->theta_max = theta_max;
  impl->sampled = true;
  impl->tolerance = slope_tolerance;
  impl->label = "sampled(" + std::to_string(values.size()) + " points)";
  impl->finish();
  return SigmaCurve(std::move(impl));
}

CurveJet SigmaCurve::jet(double theta) const { return impl_->eval(theta); }
double SigmaCurve::theta_max() const { return impl_->theta_max; }
const std::string& SigmaCurve::label() const { return impl_->label; }
std::optional<double> SigmaCurve::sphere_radius() const { return impl_->sphere_radius; }
bool SigmaCurve::is_sampled() const { return impl_->sampled; }
double SigmaCurve::axis_slope_residual() const { return impl_->axis_residual; }
double SigmaCurve::wall_slope_residual() const { return impl_->wall_residual; }
double SigmaCurve::slope_tolerance() const { return impl_->tolerance; }
double SigmaCurve::min_value() const { return impl_->min_value; }
double SigmaCurve::max_value() const { return impl_->max_value; }

SigmaCurve SigmaCurve::scaled(double factor) const {
  if (!(factor > 0.0)) throw InvalidArgument("scale factor must be positive");
  auto impl = std::make_shared<Impl>(*impl_);
  auto base = impl_->eval;
  impl->eval = [base, factor](double theta) {
    CurveJet jet = base(theta);
    return CurveJet{factor * jet.g, factor * jet.dg, factor * jet.d2g};
  };
  if (impl->sphere_radius) *impl->sphere_radius *= factor;
  impl->axis_residual *= factor;
  impl->wall_residual *= factor;
  impl->min_value *= factor;
  impl->max_value *= factor;
  std::ostringstream label;
  label << factor << "*" << impl_->label;
  impl->label = label.str();
  return SigmaCurve(std::move(impl));
}

std::vector<std::pair<double, double>> SigmaCurve::sample(int intervals) const {
  if (intervals < 1) throw InvalidArgument("sample needs at least one interval");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(intervals) + 1);
  for (int k = 0; k <= intervals; ++k) {
    const double theta = theta_max() * k / intervals;
    out.emplace_back(theta, jet(theta).g);
  }
  return out;
}

// ---------------------------------------------------------------- integrals

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, rel_tol);
}

double cone_unit_ball_volume(const ConeSpec& cone) {
  cone.validate();
  const int m = cone.n - 2;
  const double angular =
      integrate_adaptive([m](double t) { return std::pow(std::sin(t), m); }, 0.0, cone.theta_max());
  return cone.solid_angle_factor() * angular / cone.n;
}

double sigma_area_density(const SigmaCurve& curve, const ConeSpec& cone, double theta) {
  const CurveJet j = curve.jet(theta);
  return cone.solid_angle_factor() * std::pow(j.g * std::sin(theta), cone.n - 2) *
         std::hypot(j.g, j.dg);
}

double support_function(const SigmaCurve& curve, double theta) {
  const CurveJet j = curve.jet(theta);
  return j.g * j.g / std::hypot(j.g, j.dg);
}

double integrate_over_sigma(const SigmaCurve& curve, const ConeSpec& cone,
                            const std::function<double(double)>& f, double rel_tol) {
  check_matching(curve, cone);
  return integrate_adaptive(
      [&](double t) { return f(t) * sigma_area_density(curve, cone, t); }, 0.0,
      cone.theta_max(), rel_tol);
}

double sigma_area(const SigmaCurve& curve, const ConeSpec& cone) {
  return integrate_over_sigma(curve, cone, [](double) { return 1.0; });
}

double enclosed_volume(const SigmaCurve& curve, const ConeSpec& cone) {
  check_matching(curve, cone);
  const int n = cone.n;
  const double integral = integrate_adaptive(
      [&](double t) { return std::pow(curve(t), n) * std::pow(std::sin(t), n - 2); }, 0.0,
      cone.theta_max());
  return cone.solid_angle_factor() * integral / n;
}

// ---------------------------------------------------------------- curvature

double mean_curvature(const SigmaCurve& curve, const ConeSpec& cone, double theta) {
  const CurveJet j = curve.jet(theta);
  const double s = j.g * j.g + j.dg * j.dg;
  if (!(s > 0.0)) throw InvalidArgument("degenerate curve: g^2 + g'^2 vanishes");
  const double root = std::sqrt(s);
  const double meridian = (j.g * j.g + 2.0 * j.dg * j.dg - j.g * j.d2g) / (s * root);
  if (cone.n == 2) return meridian;
  const double sin_t = std::sin(theta);
  double rotational = meridian;
  if (std::abs(sin_t) > kAxisLimitSin) {
    // Cylindrical-radial component of the outward normal over the distance to the axis.
    rotational = (j.g * sin_t - j.dg * std::cos(theta)) / (root * j.g * sin_t);
  }
  return meridian + (cone.n - 2) * rotational;
}

CurvatureProfile mean_curvature_profile(const SigmaCurve& curve, const ConeSpec& cone,
                                        int intervals) {
  check_matching(curve, cone);
  if (intervals < 1) throw InvalidArgument("profile needs at least one interval");
  CurvatureProfile profile;
  profile.theta.reserve(static_cast<std::size_t>(intervals) + 1);
  profile.mean_curvature.reserve(static_cast<std::size_t>(intervals) + 1);
  for (int k = 0; k <= intervals; ++k) {
    const double theta = cone.theta_max() * k / intervals;
    profile.theta.push_back(theta);
    profile.mean_curvature.push_back(mean_curvature(curve, cone, theta));
  }
  return profile;
}

SlopeResiduals orthogonality_residual(const SigmaCurve& curve) {
  SlopeResiduals r;
  r.axis = curve.axis_slope_residual();
  r.wall = curve.wall_slope_residual();
  r.admissible = r.axis <= curve.slope_tolerance() && r.wall <= curve.slope_tolerance();
  return r;
}

double isoperimetric_deficit(const SigmaCurve& curve, const ConeSpec& cone) {
  const int n = cone.n;
  const double area = sigma_area(curve, cone);
  const double volume = enclosed_volume(curve, cone);
  const double omega = cone_unit_ball_volume(cone);
  return area / std::pow(volume, (n - 1.0) / n) - n * std::pow(omega, 1.0 / n);
}

double heintze_karcher_deficit(const SigmaCurve& curve, const ConeSpec& cone) {
  const auto profile = mean_curvature_profile(curve, cone, 1024);
  const double min_h =
      *std::min_element(profile.mean_curvature.begin(), profile.mean_curvature.end());
  if (!(min_h > 0.0)) {
    std::ostringstream msg;
    msg << "mean curvature reaches " << min_h << " <= 0; the Heintze-Karcher bound needs H > 0";
    throw NonPositiveCurvature(msg.str());
  }
  const int n = cone.n;
  const double integral = integrate_over_sigma(curve, cone, [&](double t) {
    const double h = mean_curvature(curve, cone, t);
    if (!(h > 0.0)) throw NonPositiveCurvature("mean curvature is not positive at a quadrature node");
    return (n - 1.0) / h;
  });
  return integral - n * enclosed_volume(curve, cone);
}

}  // namespace conecap
