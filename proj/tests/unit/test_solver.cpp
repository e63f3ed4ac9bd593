#include <conecap/error.hpp>
#include <conecap/reference.hpp>
#include <conecap/solver.hpp>

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <random>

using namespace conecap;

namespace {

const double kHalf = kPi / 2;

std::shared_ptr<const MeridianMesh> small_mesh(double alpha = kHalf, int n_theta = 6, int n_rho = 6) {
  return std::make_shared<const MeridianMesh>(
      build_mesh(SigmaCurve::cosine_series(1.0, {0.15}, alpha), ConeSpec::circular(3, alpha), 4.0,
                 n_theta, n_rho));
}

std::vector<double> random_admissible(const MeridianMesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::vector<double> u(mesh.node_count());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double base = 1.0 - (mesh.node_rho(k) - 1.0) / 3.0;
    switch (mesh.tag(k)) {
      case BoundaryTag::Sigma: u[k] = 1.0; break;
      case BoundaryTag::Outer: u[k] = 0.0; break;
      default: u[k] = std::clamp(base + jitter(rng), 0.01, 1.0);
    }
  }
  return u;
}

std::shared_ptr<const MeridianMesh> sphere_mesh(double alpha, double r_out, int n_theta, int n_rho) {
  return std::make_shared<const MeridianMesh>(build_mesh(
      SigmaCurve::sphere(1.0, alpha), ConeSpec::circular(3, alpha), r_out, n_theta, n_rho));
}

}  // namespace

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate(3));
  c.p = 2.96;
  CHECK_THROWS_AS(c.validate(3), InvalidArgument);
  c.p = 1.0;
  CHECK_THROWS_AS(c.validate(3), InvalidArgument);
  c = SolverConfig{};
  c.eps_schedule = {1e-2, 1e-1};
  CHECK_THROWS_AS(c.validate(3), InvalidArgument);
  c.eps_schedule = {};
  CHECK_THROWS_AS(c.validate(3), InvalidArgument);
  const auto schedule = SolverConfig::default_eps_schedule();
  CHECK(schedule.front() == doctest::Approx(1e-1));
  CHECK(schedule.back() == doctest::Approx(1e-6));
  CHECK(schedule.size() == 6);
}

TEST_CASE("energy gradient matches central differences") {
  const auto mesh = small_mesh();
  const DofMap dofs = DofMap::dirichlet(*mesh);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (double p : {1.5, 2.0, 2.5}) {
    for (double eps : {1e-1, 1e-6}) {
      const std::vector<double> u = random_admissible(*mesh, rng);
      const EnergyEvaluation ev = energy_gradient_hessian(*mesh, u, p, eps, dofs);
      int checked = 0;
      for (int dir = 0; dir < 50; ++dir) {
        std::vector<double> d(u.size(), 0.0);
        double analytic = 0;
        for (std::size_t k = 0; k < dofs.free_count(); ++k) {
          const double v = normal(rng);
          d[dofs.free_nodes()[k]] = v;
          analytic += v * ev.gradient[static_cast<Eigen::Index>(k)];
        }
        const double h = 1e-5;
        std::vector<double> up = u, um = u;
        for (std::size_t k = 0; k < u.size(); ++k) {
          up[k] += h * d[k];
          um[k] -= h * d[k];
        }
        const double fd = (energy_gradient_hessian(*mesh, up, p, eps, dofs).energy -
                           energy_gradient_hessian(*mesh, um, p, eps, dofs).energy) / (2 * h);
        CHECK(std::abs(fd - analytic) <= 1e-5 * std::abs(analytic));
        ++checked;
      }
      CHECK(checked == 50);
    }
  }
}

TEST_CASE("Hessian is symmetric positive definite and matches differenced gradients") {
  const auto mesh = small_mesh(kPi / 3, 4, 4);
  const DofMap dofs = DofMap::dirichlet(*mesh);
  std::mt19937_64 rng(11);
  for (double p : {1.5, 2.0, 2.5}) {
    const std::vector<double> u = random_admissible(*mesh, rng);
    const EnergyEvaluation ev = energy_gradient_hessian(*mesh, u, p, 1e-3, dofs);
    const Eigen::MatrixXd H = Eigen::MatrixXd(ev.hessian);
    CHECK((H - H.transpose()).norm() <= 1e-12 * H.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);

    const double h = 1e-6;
    for (std::size_t k = 0; k < dofs.free_count(); k += 3) {
      std::vector<double> up = u, um = u;
      up[dofs.free_nodes()[k]] += h;
      um[dofs.free_nodes()[k]] -= h;
      const Eigen::VectorXd column = (energy_gradient_hessian(*mesh, up, p, 1e-3, dofs).gradient -
                                      energy_gradient_hessian(*mesh, um, p, 1e-3, dofs).gradient) / (2 * h);
      CHECK((column - H.col(static_cast<Eigen::Index>(k))).norm() <= 1e-5 * H.col(static_cast<Eigen::Index>(k)).norm());
    }
  }
}

TEST_CASE("p = 2 Hessian does not depend on the field") {
  const auto mesh = small_mesh();
  const DofMap dofs = DofMap::dirichlet(*mesh);
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd a = Eigen::MatrixXd(energy_gradient_hessian(*mesh, random_admissible(*mesh, rng), 2.0, 1e-6, dofs).hessian);
  const Eigen::MatrixXd b = Eigen::MatrixXd(energy_gradient_hessian(*mesh, random_admissible(*mesh, rng), 2.0, 1e-6, dofs).hessian);
  CHECK((a - b).norm() <= 1e-13 * a.norm());
}

TEST_CASE("constant field with a free outer sphere") {
  const auto mesh = small_mesh();
  const DofMap dofs(*mesh, {BoundaryTag::Sigma});
  CHECK(dofs.free_count() == mesh->node_count() - (mesh->n_theta() + 1));
  const std::vector<double> one(mesh->node_count(), 1.0);
  for (double p : {1.5, 2.0, 2.5}) {
    const double eps = 0.1;
    const EnergyEvaluation ev = energy_gradient_hessian(*mesh, one, p, eps, dofs);
    CHECK(ev.energy == doctest::Approx(std::pow(eps, p) * mesh_measure(*mesh) / p).epsilon(1e-12));
    CHECK(ev.gradient.norm() < 1e-14);
  }
}

TEST_CASE("assembly is identical across thread counts in deterministic mode") {
  const auto mesh = small_mesh(kHalf, 12, 12);
  std::mt19937_64 rng(5);
  const std::vector<double> u = random_admissible(*mesh, rng);
  EnergyAssembler serial(*mesh, DofMap::dirichlet(*mesh), 1, true);
  EnergyAssembler parallel(*mesh, DofMap::dirichlet(*mesh), 4, true);
  EnergyEvaluation a, b;
  serial.evaluate(u, 1.5, 1e-3, EnergyAssembler::kAll, a);
  parallel.evaluate(u, 1.5, 1e-3, EnergyAssembler::kAll, b);
  CHECK(a.energy == b.energy);
  CHECK((a.gradient - b.gradient).norm() == 0.0);
  CHECK(Eigen::MatrixXd(a.hessian - b.hessian).norm() == 0.0);
  EnergyAssembler loose(*mesh, DofMap::dirichlet(*mesh), 4, false);
  EnergyEvaluation c;
  loose.evaluate(u, 1.5, 1e-3, EnergyAssembler::kAll, c);
  CHECK(c.energy == doctest::Approx(a.energy).epsilon(1e-13));
}

TEST_CASE("p = 2 converges in one Newton step") {
  const auto mesh = sphere_mesh(kHalf, 32.0, 8, 48);
  SolverConfig cfg;
  cfg.p = 2.0;
  const auto [field, report] = solve_potential(mesh, cfg);
  CHECK(report.total_iterations == 1);
  CHECK(field.converged);
}

TEST_CASE("radial solves match the truncated oracle") {
  for (double p : {2.0, 1.5}) {
    const auto mesh = sphere_mesh(kHalf, 32.0, 16, 96);
    SolverConfig cfg;
    cfg.p = p;
    const auto [field, report] = solve_potential(mesh, cfg);
    CHECK(report.bounds_ok);
    CHECK(report.energy_monotone);
    const reference::TruncatedRadialSolution oracle(1.0, 32.0, 3, p);
    double sup = 0;
    for (std::size_t k = 0; k < mesh->node_count(); ++k) {
      sup = std::max(sup, std::abs(field.u[k] - oracle.at(mesh->node_rho(k)).value));
    }
    CHECK(sup <= 0.01);
    const CapacityEstimate cap = capacity_of(field);
    CHECK(cap.capacity == doctest::Approx(oracle.capacity(mesh->cone())).epsilon(0.01));
    const RayProfile prof = boundary_gradient_on_sigma(field);
    const double expected = -oracle.at(1.0).derivative;
    for (double v : prof.grad_norm) CHECK(v == doctest::Approx(expected).epsilon(0.02));
  }
}

TEST_CASE("discrete solutions respect the bounds") {
  for (double p : {1.5, 2.5}) {
    const auto mesh = std::make_shared<const MeridianMesh>(
        build_mesh(SigmaCurve::cosine_series(1.0, {0.2}, kHalf), ConeSpec::circular(3, kHalf), 8.0, 12, 32));
    SolverConfig cfg;
    cfg.p = p;
    const auto [field, report] = solve_potential(mesh, cfg);
    CHECK(report.bounds_ok);
    for (std::size_t k = 0; k < mesh->node_count(); ++k) {
      if (mesh->tag(k) == BoundaryTag::Sigma) CHECK(field.u[k] == 1.0);
      else if (mesh->tag(k) == BoundaryTag::Outer) CHECK(field.u[k] == 0.0);
      else {
        CHECK(field.u[k] > 0.0);
        CHECK(field.u[k] <= 1.0);
      }
    }
    for (const StageRecord& stage : report.stages) {
      for (std::size_t k = 1; k < stage.energy.size(); ++k) CHECK(stage.energy[k] <= stage.energy[k - 1]);
    }
  }
}

TEST_CASE("forced non-convergence carries the history") {
  const auto mesh = sphere_mesh(kHalf, 8.0, 8, 16);
  SolverConfig cfg;
  cfg.p = 1.5;
  cfg.max_iterations = 1;
  try {
    solve_potential(mesh, cfg);
    FAIL("expected non-convergence");
  } catch (const SolverNonConvergence& e) {
    CHECK_FALSE(e.report().stages.empty());
    CHECK(e.report().stages.back().iterations == 1);
  }
}

TEST_CASE("truncation study on the unit hemisphere cap") {
  const SigmaCurve s = SigmaCurve::sphere(1.0, kHalf);
  const ConeSpec cone = ConeSpec::circular(3, kHalf);
  MeshSpec spec;
  spec.options.grading = Grading::Nested;
  SolverConfig cfg;
  const std::vector<double> radii{8.0, 16.0, 32.0};
  const TruncationStudy study = truncation_study(s, cone, spec, cfg, radii);
  REQUIRE(study.entries.size() == 3);
  CHECK(study.entries[0].capacity > study.entries[1].capacity);
  CHECK(study.entries[1].capacity > study.entries[2].capacity);
  CHECK(study.probe_monotone);
  CHECK(study.entries[0].probe_value <= study.entries[1].probe_value);
  CHECK(study.fit.limit == doctest::Approx(kPi).epsilon(0.01));
  CHECK(study.fit.limit < study.entries[2].capacity);
  // The rescaled field keeps only the truncated part of the energy: lambda^p Cap_T = lambda Cap.
  const double lambda = study.fit.limit / study.entries.back().capacity;
  CHECK(capacity_of(study.extrapolated_field).capacity == doctest::Approx(lambda * study.fit.limit).epsilon(1e-10));

  const RayProfile prof = boundary_gradient_on_sigma(study.extrapolated_field);
  for (double v : prof.grad_norm) CHECK(v == doctest::Approx(1.0).epsilon(0.02));

  const std::vector<double> two{8.0, 16.0};
  CHECK_THROWS_AS(truncation_study(s, cone, spec, cfg, two), InvalidArgument);
  const std::vector<double> unsorted{8.0, 32.0, 16.0};
  CHECK_THROWS_AS(truncation_study(s, cone, spec, cfg, unsorted), InvalidArgument);
}

TEST_CASE("boundary gradient scales with the sphere radius") {
  const SigmaCurve s = SigmaCurve::sphere(2.0, kHalf);
  const ConeSpec cone = ConeSpec::circular(3, kHalf);
  MeshSpec spec;
  spec.options.grading = Grading::Nested;
  const std::vector<double> radii{16.0, 32.0, 64.0};
  const TruncationStudy study = truncation_study(s, cone, spec, SolverConfig{}, radii);
  for (double v : boundary_gradient_on_sigma(study.extrapolated_field).grad_norm) {
    CHECK(v == doctest::Approx(0.5).epsilon(0.02));
  }
  CHECK(study.fit.limit == doctest::Approx(reference::model_capacity(2.0, cone, 2.0)).epsilon(0.01));
}

TEST_CASE("truncation fit recovers synthetic sequences") {
  // Y = Cap^{-1/(p-1)} = 1 - 0.5 r^{-1.3}.
  const double p = 1.5;
  std::vector<double> r{8, 16, 32}, cap;
  for (double x : r) cap.push_back(std::pow(1.0 - 0.5 * std::pow(x, -1.3), -(p - 1)));
  const TruncationFit fit = fit_truncation(r, cap, 3, p);
  CHECK(fit.rate == doctest::Approx(1.3).epsilon(1e-6));
  CHECK_FALSE(fit.rate_fallback);
  CHECK(fit.limit == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("extrapolated field keeps the boundary data and rescales the capacity") {
  const auto mesh = sphere_mesh(kHalf, 8.0, 8, 32);
  const auto [field, report] = solve_potential(mesh, SolverConfig{});
  const double cap = capacity_of(field).capacity;
  const PotentialField ext = extrapolate_field(field, cap, 0.9 * cap);
  CHECK(ext.outer_value > 0.0);
  CHECK(capacity_of(ext).capacity == doctest::Approx(0.81 * cap).epsilon(1e-12));
  for (std::size_t k = 0; k < mesh->node_count(); ++k) {
    if (mesh->tag(k) == BoundaryTag::Sigma) CHECK(ext.u[k] == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(extrapolate_field(field, cap, 1.1 * cap), InvalidArgument);
}
