#include <conecap/error.hpp>
#include <conecap/reference.hpp>
#include <conecap/solver.hpp>

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace conecap;
using namespace conecap::reference;

TEST_CASE("fundamental solution values") {
  CHECK(fundamental_solution(2.0, 3, 2.0).value == doctest::Approx(0.5));
  CHECK(fundamental_solution(2.0, 4, 2.0).value == doctest::Approx(0.25));
  for (int n : {2, 3, 5}) {
    for (double p : {1.2, 1.5, 1.9}) {
      if (p >= n) continue;
      CHECK(fundamental_solution(1.0, n, p).value == doctest::Approx(1.0));
      CHECK(fundamental_solution(1.0, n, p).derivative == doctest::Approx(-decay_exponent(n, p)));
    }
  }
  const double h = 1e-6;
  const double fd = (fundamental_solution(1.7 + h, 3, 1.5).value -
                     fundamental_solution(1.7 - h, 3, 1.5).value) / (2 * h);
  CHECK(fundamental_solution(1.7, 3, 1.5).derivative == doctest::Approx(fd).epsilon(1e-8));
  CHECK_THROWS_AS(fundamental_solution(0.0, 3, 2.0), InvalidArgument);
  CHECK_THROWS_AS(fundamental_solution(1.0, 3, 3.0), InvalidArgument);
  CHECK_THROWS_AS(fundamental_solution(1.0, 3, 1.0), InvalidArgument);
}

TEST_CASE("radial model") {
  CHECK(radial_model(4.0, 2.0, 3, 2.0).value == doctest::Approx(0.5));
  for (double r : {1.0, 2.5, 9.0}) {
    CHECK(radial_model(r, 1.0, 3, 1.5).value == doctest::Approx(fundamental_solution(r, 3, 1.5).value));
  }
  CHECK(model_boundary_gradient(1.0, 3, 2.0) == doctest::Approx(1.0));
  CHECK(model_boundary_gradient(2.0, 3, 2.0) == doctest::Approx(0.5));
  CHECK(model_boundary_gradient(1.0, 3, 1.5) == doctest::Approx(3.0));
  CHECK(-radial_model(1.0, 1.0, 3, 2.5).derivative == doctest::Approx(model_boundary_gradient(1.0, 3, 2.5)));
  CHECK_THROWS_AS(radial_model(0.5, 1.0, 3, 2.0), InvalidArgument);
}

TEST_CASE("closed-form cone volume") {
  CHECK(cone_unit_ball_volume_closed_form(ConeSpec::circular(3, kPi / 2)) == doctest::Approx(2 * kPi / 3).epsilon(1e-13));
  CHECK(cone_unit_ball_volume_closed_form(ConeSpec::circular(3, kPi / 3)) == doctest::Approx(kPi / 3).epsilon(1e-13));
  CHECK(cone_unit_ball_volume_closed_form(ConeSpec::whole_space(3)) == doctest::Approx(4 * kPi / 3).epsilon(1e-13));
  CHECK(cone_unit_ball_volume_closed_form(ConeSpec::whole_space(4)) == doctest::Approx(kPi * kPi / 2).epsilon(1e-13));
  CHECK(cone_unit_ball_volume_closed_form(ConeSpec::circular(5, 0.9)) ==
        doctest::Approx(cone_unit_ball_volume(ConeSpec::circular(5, 0.9))).epsilon(1e-11));
}

TEST_CASE("model capacity") {
  CHECK(model_capacity(1.0, ConeSpec::circular(3, kPi / 2), 2.0) == doctest::Approx(kPi).epsilon(1e-13));
  CHECK(model_capacity(1.0, ConeSpec::circular(3, kPi / 3), 2.0) == doctest::Approx(kPi / 2).epsilon(1e-13));
  CHECK(model_capacity(1.0, ConeSpec::circular(3, kPi / 2), 1.5) ==
        doctest::Approx(4 * std::sqrt(3.0) / 3 * kPi).epsilon(1e-13));
  CHECK(model_capacity(2.0, ConeSpec::circular(3, kPi / 2), 2.0) == doctest::Approx(2 * kPi).epsilon(1e-13));
}

TEST_CASE("truncated radial solution") {
  const TruncatedRadialSolution t(1.0, 2.0, 3, 2.0);
  CHECK(t.at(std::sqrt(2.0)).value == doctest::Approx(std::sqrt(2.0) - 1).epsilon(1e-14));
  CHECK(t.at(1.0).value == doctest::Approx(1.0));
  CHECK(std::abs(t.at(2.0).value) < 1e-14);
  CHECK_THROWS_AS(TruncatedRadialSolution(1.0, 1.0, 3, 2.0), InvalidArgument);
  CHECK_THROWS_AS(t.at(2.5), InvalidArgument);

  // Constant weighted flux rho^{n-1} |u'|^{p-2} u'.
  const TruncatedRadialSolution q(1.0, 5.0, 3, 1.5);
  auto flux = [&](double r) {
    const double d = q.at(r).derivative;
    return r * r * std::pow(std::abs(d), -0.5) * d;
  };
  CHECK(flux(1.3) == doctest::Approx(flux(4.1)).epsilon(1e-12));

  const ConeSpec cone = ConeSpec::circular(3, kPi / 2);
  for (double p : {1.5, 2.0, 2.5}) {
    const double untruncated = model_capacity(1.0, cone, p);
    double previous = std::numeric_limits<double>::infinity();
    for (double r_out : {2.0, 8.0, 64.0, 1e4}) {
      const TruncatedRadialSolution s(1.0, r_out, 3, p);
      const double cap = s.capacity(cone);
      CHECK(cap > untruncated);
      CHECK(cap < previous);
      previous = cap;
    }
    const TruncatedRadialSolution far(1.0, 1e40, 3, p);
    CHECK(far.at(3.0).value == doctest::Approx(radial_model(3.0, 1.0, 3, p).value).epsilon(1e-4));
    CHECK(far.capacity(cone) == doctest::Approx(untruncated).epsilon(1e-4));
  }
}

TEST_CASE("truncated capacity matches the energy integral") {
  const ConeSpec cone = ConeSpec::circular(3, kPi / 3);
  const TruncatedRadialSolution s(1.0, 4.0, 3, 1.5);
  const double c_n = cone.solid_angle_factor();
  const double angular = 1 - std::cos(kPi / 3);
  const double radial = integrate_adaptive(
      [&](double r) { return std::pow(std::abs(s.at(r).derivative), 1.5) * r * r; }, 1.0, 4.0);
  CHECK(s.capacity(cone) == doctest::Approx(c_n * angular * radial / 1.5).epsilon(1e-10));
}

TEST_CASE("discrete energy of the interpolated oracle converges at second order") {
  const ConeSpec cone = ConeSpec::circular(3, kPi / 2);
  const SigmaCurve sphere = SigmaCurve::sphere(1.0, kPi / 2);
  for (double p : {1.5, 2.0, 2.5}) {
    const TruncatedRadialSolution s(1.0, 4.0, 3, p);
    const double exact = s.capacity(cone);
    double errors[3];
    int k = 0;
    for (int cells : {8, 16, 32}) {
      const MeridianMesh mesh = build_mesh(sphere, cone, 4.0, 4, cells);
      std::vector<double> u(mesh.node_count());
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = s.at(std::min(mesh.node_rho(i), 4.0)).value;
      const EnergyEvaluation ev =
          energy_gradient_hessian(mesh, u, p, 0.0, DofMap::dirichlet(mesh));
      errors[k++] = std::abs(ev.energy - exact);
    }
    CHECK(std::log2(errors[0] / errors[1]) >= 1.9);
    CHECK(std::log2(errors[1] / errors[2]) >= 1.9);
  }
}
