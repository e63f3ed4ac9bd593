#include <conecap/solver.hpp>

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace conecap {

// ---------------------------------------------------------------- config

std::vector<double> SolverConfig::default_eps_schedule() {
  return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
}

void SolverConfig::validate(int n) const {
  if (!(p > 1.0) || p > n - 0.05 + 1e-12) {
    std::ostringstream msg;
    msg << "exponent p = " << p << " must satisfy 1 < p <= n - 0.05 = " << n - 0.05;
    throw InvalidArgument(msg.str());
  }
  if (eps_schedule.empty()) throw InvalidArgument("eps schedule is empty");
  for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
    if (!(eps_schedule[k] > 0.0)) throw InvalidArgument("eps schedule values must be positive");
    if (k > 0 && !(eps_schedule[k] < eps_schedule[k - 1])) {
      throw InvalidArgument("eps schedule must be strictly decreasing");
    }
  }
  if (!(tolerance > 0.0)) throw InvalidArgument("Newton tolerance must be positive");
  if (!(decrement_tolerance >= 0.0)) throw InvalidArgument("decrement tolerance must be non-negative");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
  if (!(armijo > 0.0 && armijo < 0.5)) throw InvalidArgument("armijo constant must lie in (0, 0.5)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw InvalidArgument("backtrack factor must lie in (0, 1)");
  if (threads < 1) throw InvalidArgument("threads must be at least 1");
}

// ---------------------------------------------------------------- dofs

DofMap::DofMap(const MeridianMesh& mesh, std::vector<BoundaryTag> fixed_tags)
    : free_index_(mesh.node_count(), -1) {
  for (std::size_t node = 0; node < mesh.node_count(); ++node) {
    const bool fixed =
        std::find(fixed_tags.begin(), fixed_tags.end(), mesh.tag(node)) != fixed_tags.end();
    if (!fixed) {
      free_index_[node] = static_cast<int>(free_count_++);
      free_nodes_.push_back(static_cast<int>(node));
    }
  }
}

DofMap DofMap::dirichlet(const MeridianMesh& mesh) {
  return DofMap(mesh, {BoundaryTag::Sigma, BoundaryTag::Outer});
}

// ---------------------------------------------------------------- assembly

EnergyAssembler::EnergyAssembler(const MeridianMesh& mesh, DofMap dofs, int threads,
                                 bool deterministic)
    : mesh_(&mesh), dofs_(std::move(dofs)), threads_(std::max(1, threads)),
      deterministic_(deterministic) {
  const auto n_free = static_cast<Eigen::Index>(dofs_.free_count());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.element_count() * 16);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.element(e);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const int fa = dofs_.free_index(el[a]);
        const int fb = dofs_.free_index(el[b]);
        if (fa >= 0 && fb >= 0) triplets.emplace_back(fa, fb, 1.0);
      }
    }
  }
  pattern_.resize(n_free, n_free);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  slots_.resize(mesh.element_count());
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.element(e);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const int row = dofs_.free_index(el[a]);
        const int col = dofs_.free_index(el[b]);
        int slot = -1;
        if (row >= 0 && col >= 0) {
          const int* first = inner + outer[col];
          const int* last = inner + outer[col + 1];
          slot = static_cast<int>(std::lower_bound(first, last, row) - inner);
        }
        slots_[e][4 * a + b] = slot;
      }
    }
  }
}

void EnergyAssembler::element_kernel(std::size_t e, std::span<const double> u, double p,
                                     double eps, unsigned parts, ElementResult& out) const {
  out = ElementResult{};
  const auto& el = mesh_->element(e);
  const double eps2 = eps * eps;
  const bool quadratic = p == 2.0;
  for (const auto& q : mesh_->quadrature(e)) {
    double gr = 0, gt = 0;
    for (int a = 0; a < 4; ++a) {
      gr += q.grad_rho[a] * u[el[a]];
      gt += q.grad_theta[a] * u[el[a]];
    }
    const double t = gr * gr + gt * gt + eps2;
    if (parts & kEnergy) out.energy += q.weight * std::pow(t, 0.5 * p) / p;
    if (!(parts & (kGradient | kHessian))) continue;
    const double a1 = quadratic ? 1.0 : std::pow(t, 0.5 * (p - 2.0));
    std::array<double, 4> proj{};
    for (int a = 0; a < 4; ++a) proj[a] = q.grad_rho[a] * gr + q.grad_theta[a] * gt;
    if (parts & kGradient) {
      for (int a = 0; a < 4; ++a) out.gradient[a] += q.weight * a1 * proj[a];
    }
    if (parts & kHessian) {
      const double a2 = quadratic ? 0.0 : (p - 2.0) * std::pow(t, 0.5 * (p - 4.0));
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          const double iso = q.grad_rho[a] * q.grad_rho[b] + q.grad_theta[a] * q.grad_theta[b];
          out.hessian[4 * a + b] += q.weight * (a1 * iso + a2 * proj[a] * proj[b]);
        }
      }
    }
  }
}

void EnergyAssembler::evaluate(std::span<const double> u, double p, double eps, unsigned parts,
                               EnergyEvaluation& out) const {
  if (u.size() != mesh_->node_count()) throw InvalidArgument("nodal field size does not match mesh");
  const std::size_t n_el = mesh_->element_count();
  out.energy = 0;
  if (parts & kGradient) out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dofs_.free_count()));
  if (parts & kHessian) {
    if (out.hessian.nonZeros() != pattern_.nonZeros() || out.hessian.rows() != pattern_.rows()) {
      out.hessian = pattern_;
    }
    std::fill(out.hessian.valuePtr(), out.hessian.valuePtr() + out.hessian.nonZeros(), 0.0);
  }

  auto scatter = [&](std::size_t e, const ElementResult& r, double& energy, double* grad,
                     double* values) {
    energy += r.energy;
    const auto& el = mesh_->element(e);
    if (parts & kGradient) {
      for (int a = 0; a < 4; ++a) {
        const int fa = dofs_.free_index(el[a]);
        if (fa >= 0) grad[fa] += r.gradient[a];
      }
    }
    if (parts & kHessian) {
      for (int k = 0; k < 16; ++k) {
        const int slot = slots_[e][k];
        if (slot >= 0) values[slot] += r.hessian[k];
      }
    }
  };

  double* grad = (parts & kGradient) ? out.gradient.data() : nullptr;
  double* values = (parts & kHessian) ? out.hessian.valuePtr() : nullptr;
  const int workers = static_cast<int>(std::min<std::size_t>(threads_, std::max<std::size_t>(1, n_el)));

  if (workers == 1) {
    ElementResult r;
    for (std::size_t e = 0; e < n_el; ++e) {
      element_kernel(e, u, p, eps, parts, r);
      scatter(e, r, out.energy, grad, values);
    }
    return;
  }

  auto chunk = [&](int w) {
    const std::size_t begin = n_el * w / workers;
    const std::size_t end = n_el * (w + 1) / workers;
    return std::pair{begin, end};
  };

  if (deterministic_) {
    // Element results are reduced afterwards in element order, independent of the thread count.
    std::vector<ElementResult> results(n_el);
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          const auto [begin, end] = chunk(w);
          for (std::size_t e = begin; e < end; ++e) element_kernel(e, u, p, eps, parts, results[e]);
        });
      }
    }
    for (std::size_t e = 0; e < n_el; ++e) scatter(e, results[e], out.energy, grad, values);
    return;
  }

  const std::size_t n_free = dofs_.free_count();
  const std::size_t nnz = static_cast<std::size_t>(pattern_.nonZeros());
  std::vector<double> energies(workers, 0.0);
  std::vector<std::vector<double>> grads(workers), vals(workers);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        if (parts & kGradient) grads[w].assign(n_free, 0.0);
        if (parts & kHessian) vals[w].assign(nnz, 0.0);
        ElementResult r;
        const auto [begin, end] = chunk(w);
        for (std::size_t e = begin; e < end; ++e) {
          element_kernel(e, u, p, eps, parts, r);
          scatter(e, r, energies[w], grads[w].data(), vals[w].data());
        }
      });
    }
  }
  for (int w = 0; w < workers; ++w) {
    out.energy += energies[w];
    if (grad) for (std::size_t k = 0; k < n_free; ++k) grad[k] += grads[w][k];
    if (values) for (std::size_t k = 0; k < nnz; ++k) values[k] += vals[w][k];
  }
}

double EnergyAssembler::energy(std::span<const double> u, double p, double eps) const {
  EnergyEvaluation out;
  evaluate(u, p, eps, kEnergy, out);
  return out.energy;
}

EnergyEvaluation energy_gradient_hessian(const MeridianMesh& mesh, std::span<const double> u,
                                         double p, double eps, const DofMap& dofs) {
  EnergyAssembler assembler(mesh, dofs);
  EnergyEvaluation out;
  assembler.evaluate(u, p, eps, EnergyAssembler::kAll, out);
  return out;
}

// ---------------------------------------------------------------- Newton

namespace {

// Intermediate continuation stages only need to land near their minimizer.
constexpr double kStageTolerance = 1e-8;

}  // namespace

std::pair<PotentialField, SolveReport> solve_potential(std::shared_ptr<const MeridianMesh> mesh,
                                                       const SolverConfig& config) {
  if (!mesh) throw InvalidArgument("solve_potential needs a mesh");
  config.validate(mesh->cone().n);
  const auto start = std::chrono::steady_clock::now();

  EnergyAssembler assembler(*mesh, DofMap::dirichlet(*mesh), config.threads, config.deterministic);
  const DofMap& dofs = assembler.dofs();

  std::vector<double> u(mesh->node_count());
  for (int j = 0; j <= mesh->n_theta(); ++j) {
    for (int i = 0; i <= mesh->n_rho(); ++i) u[mesh->node_index(i, j)] = 1.0 - mesh->layer_s(i);
  }

  // For p = 2 the eps term only shifts the energy by a constant.
  std::vector<double> schedule = config.eps_schedule;
  if (config.p == 2.0) schedule = {config.eps_min()};

  SolveReport report;
  EnergyEvaluation eval;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analysed = false;
  std::vector<double> trial(u.size());

  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eps = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    const double tol = last ? config.tolerance : std::max(config.tolerance, kStageTolerance);
    StageRecord record;
    record.eps = eps;
    assembler.evaluate(u, config.p, eps, EnergyAssembler::kAll, eval);
    record.energy.push_back(eval.energy);

    for (;;) {
      record.gradient_norm = eval.gradient.norm();
      if (record.gradient_norm <= tol) break;
      if (record.iterations >= config.max_iterations) {
        report.stages.push_back(record);
        report.final_gradient_norm = record.gradient_norm;
        std::ostringstream msg;
        msg << "Newton did not converge within " << config.max_iterations
            << " iterations at eps = " << eps << " (gradient norm " << record.gradient_norm << ")";
        throw SolverNonConvergence(msg.str(), report);
      }

      if (!analysed) {
        ldlt.analyzePattern(eval.hessian);
        analysed = true;
      }
      ldlt.factorize(eval.hessian);
      if (ldlt.info() != Eigen::Success) {
        report.stages.push_back(record);
        throw SolverNonConvergence("Hessian factorization failed", report);
      }
      const Eigen::VectorXd step = ldlt.solve(-eval.gradient);
      const double slope = eval.gradient.dot(step);
      // A Newton decrement below round-off of the energy means the gradient norm sits
      // on its floating-point floor.
      if (-slope <= config.decrement_tolerance * std::max(1.0, std::abs(eval.energy))) break;

      double t = 1.0;
      double trial_energy = 0;
      bool accepted = false;
      while (t >= config.min_step && slope < 0.0) {
        trial = u;
        for (std::size_t k = 0; k < dofs.free_count(); ++k) {
          trial[dofs.free_nodes()[k]] += t * step[static_cast<Eigen::Index>(k)];
        }
        trial_energy = assembler.energy(trial, config.p, eps);
        if (trial_energy <= eval.energy + config.armijo * t * slope) {
          accepted = true;
          break;
        }
        t *= config.backtrack;
      }
      if (!accepted) {
        // At the round-off floor no step can decrease the energy further.
        if (record.gradient_norm <= 1e3 * tol) break;
        report.stages.push_back(record);
        report.final_gradient_norm = record.gradient_norm;
        throw SolverNonConvergence("line search failed to decrease the energy", report);
      }
      if (trial_energy > record.energy.back()) report.energy_monotone = false;
      u.swap(trial);
      ++record.iterations;
      assembler.evaluate(u, config.p, eps, EnergyAssembler::kAll, eval);
      record.energy.push_back(eval.energy);
    }
    report.total_iterations += record.iterations;
    report.final_gradient_norm = record.gradient_norm;
    report.stages.push_back(std::move(record));
  }

  PotentialField field;
  field.mesh = mesh;
  field.u = std::move(u);
  field.p = config.p;
  field.eps_min = config.eps_min();
  field.converged = true;

  for (std::size_t node = 0; node < mesh->node_count(); ++node) {
    if (mesh->tag(node) == BoundaryTag::Outer) continue;
    if (!(field.u[node] > 0.0) || field.u[node] > 1.0 + 1e-12) report.bounds_ok = false;
  }
  report.capacity = capacity_of(field);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(field), std::move(report)};
}

CapacityEstimate capacity_of(const PotentialField& field) {
  if (!field.mesh) throw InvalidArgument("field has no mesh");
  EnergyAssembler assembler(*field.mesh, DofMap::dirichlet(*field.mesh));
  CapacityEstimate est;
  est.capacity = assembler.energy(field.u, field.p, 0.0);
  est.regularized = assembler.energy(field.u, field.p, field.eps_min);
  return est;
}

double PointGradient::norm() const { return std::hypot(d_rho, d_theta); }

PointGradient evaluate_at(const PotentialField& field, std::size_t e, const QuadraturePoint& q) {
  const auto& el = field.mesh->element(e);
  PointGradient g;
  for (int a = 0; a < 4; ++a) {
    const double ua = field.u[el[a]];
    g.value += q.shape[a] * ua;
    g.d_rho += q.grad_rho[a] * ua;
    g.d_theta += q.grad_theta[a] * ua;
  }
  return g;
}

namespace {

// Derivative at x0 of the quadratic through (x0,y0), (x1,y1), (x2,y2).
double quadratic_slope(double x0, double x1, double x2, double y0, double y1, double y2) {
  return y0 * (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2)) +
         y1 * (x0 - x2) / ((x1 - x0) * (x1 - x2)) + y2 * (x0 - x1) / ((x2 - x0) * (x2 - x1));
}

}  // namespace

RayProfile boundary_gradient_on_sigma(const PotentialField& field) {
  const MeridianMesh& mesh = *field.mesh;
  RayProfile out;
  for (int j = 0; j <= mesh.n_theta(); ++j) {
    const int n0 = mesh.node_index(0, j);
    const int n1 = mesh.node_index(1, j);
    const int n2 = mesh.node_index(2, j);
    const double slope = quadratic_slope(mesh.node_rho(n0), mesh.node_rho(n1), mesh.node_rho(n2),
                                         field.u[n0], field.u[n1], field.u[n2]);
    const double theta = mesh.ray_theta(j);
    const CurveJet g = mesh.curve().jet(theta);
    // grad u is normal to Sigma, and <nu, e_rho> = g / sqrt(g^2 + g'^2).
    out.theta.push_back(theta);
    out.grad_norm.push_back(std::abs(slope) * std::hypot(g.g, g.dg) / g.g);
  }
  return out;
}

RayProfile boundary_gradient_on_outer(const PotentialField& field) {
  const MeridianMesh& mesh = *field.mesh;
  const int last = mesh.n_rho();
  RayProfile out;
  for (int j = 0; j <= mesh.n_theta(); ++j) {
    const int n0 = mesh.node_index(last, j);
    const int n1 = mesh.node_index(last - 1, j);
    const int n2 = mesh.node_index(last - 2, j);
    const double slope = quadratic_slope(mesh.node_rho(n0), mesh.node_rho(n1), mesh.node_rho(n2),
                                         field.u[n0], field.u[n1], field.u[n2]);
    out.theta.push_back(mesh.ray_theta(j));
    out.grad_norm.push_back(std::abs(slope));
  }
  return out;
}

PotentialField extrapolate_field(const PotentialField& truncated, double cap_truncated,
                                 double cap_limit) {
  if (!(cap_truncated > 0.0) || !(cap_limit > 0.0)) {
    throw InvalidArgument("capacities must be positive");
  }
  if (cap_limit > cap_truncated * (1.0 + 1e-9)) {
    throw InvalidArgument("extrapolated capacity exceeds the truncated one");
  }
  const double lambda = std::pow(cap_limit / cap_truncated, 1.0 / (truncated.p - 1.0));
  PotentialField out = truncated;
  for (double& v : out.u) v = 1.0 - lambda * (1.0 - v);
  out.outer_value = 1.0 - lambda * (1.0 - truncated.outer_value);
  return out;
}

// ---------------------------------------------------------------- truncation

int scaled_radial_cells(const MeshSpec& spec, const SigmaCurve& curve, double base_r_out,
                        double r_out) {
  if (spec.options.grading == Grading::Nested) {
    return nested_radial_cells(curve, r_out, spec.options.cells_per_octave);
  }
  const double g_min = curve.min_value();
  const double cells =
      spec.n_rho * std::log(r_out / g_min) / std::log(base_r_out / g_min);
  return std::max(4, static_cast<int>(std::lround(cells)));
}

TruncationFit fit_truncation(std::span<const double> r_out, std::span<const double> capacities,
                             int n, double p) {
  if (r_out.size() != capacities.size() || r_out.size() < 3) {
    throw InvalidArgument("truncation fit needs at least three radii with capacities");
  }
  const std::size_t m = r_out.size();
  const double r1 = r_out[m - 3], r2 = r_out[m - 2], r3 = r_out[m - 1];
  auto transform = [p](double cap) { return std::pow(cap, -1.0 / (p - 1.0)); };
  const double y1 = transform(capacities[m - 3]);
  const double y2 = transform(capacities[m - 2]);
  const double y3 = transform(capacities[m - 1]);
  const double kappa = (n - p) / (p - 1.0);

  auto ratio = [&](double beta) {
    return (std::pow(r1, -beta) - std::pow(r2, -beta)) / (std::pow(r2, -beta) - std::pow(r3, -beta));
  };

  TruncationFit fit;
  double beta = kappa;
  const double d1 = y2 - y1;
  const double d2 = y3 - y2;
  bool solved = false;
  if (d1 > 0.0 && d2 > 0.0) {
    const double target = d1 / d2;
    double lo = 1e-3, hi = 40.0;
    if (ratio(lo) <= target && target <= ratio(hi)) {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ratio(mid) < target ? lo : hi) = mid;
      }
      beta = 0.5 * (lo + hi);
      solved = beta >= 0.25 * kappa && beta <= 4.0 * kappa;
    }
  }
  if (!solved) {
    beta = kappa;
    fit.rate_fallback = true;
  }
  fit.rate = beta;
  // Y3 = Y_inf - A r3^{-beta}, with A from the last difference.
  const double amplitude = d2 / (std::pow(r2, -beta) - std::pow(r3, -beta));
  const double y_inf = y3 + amplitude * std::pow(r3, -beta);
  if (!(y_inf > 0.0)) throw NonConvergence("truncation extrapolation produced a non-positive limit");
  fit.limit = std::pow(y_inf, -(p - 1.0));
  return fit;
}

TruncationStudy truncation_study(const SigmaCurve& curve, const ConeSpec& cone,
                                 const MeshSpec& mesh, const SolverConfig& config,
                                 std::span<const double> r_out_list, double monotonicity_tol) {
  if (r_out_list.size() < 3) throw InvalidArgument("truncation study needs at least three radii");
  for (std::size_t k = 1; k < r_out_list.size(); ++k) {
    if (!(r_out_list[k] > r_out_list[k - 1])) {
      throw InvalidArgument("truncation radii must be strictly increasing");
    }
  }

  TruncationStudy study;
  study.probe_theta = 0.5 * cone.theta_max();
  study.probe_rho = 0.5 * (curve(study.probe_theta) + 1.5 * curve.max_value());

  std::vector<double> radii, caps;
  for (double r : r_out_list) {
    TruncationEntry entry;
    entry.r_out = r;
    entry.n_rho = scaled_radial_cells(mesh, curve, r_out_list.front(), r);
    auto m = std::make_shared<const MeridianMesh>(
        build_mesh(curve, cone, r, mesh.n_theta, entry.n_rho, mesh.options));
    auto [field, report] = solve_potential(m, config);
    entry.capacity = report.capacity.capacity;
    entry.regularized = report.capacity.regularized;
    entry.probe_value = field.value_at(study.probe_rho, study.probe_theta);
    entry.report = std::move(report);

    if (!study.entries.empty()) {
      const auto& prev = study.entries.back();
      if (entry.capacity > prev.capacity * (1.0 + monotonicity_tol)) {
        std::ostringstream msg;
        msg << "capacity increased from " << prev.capacity << " at r_out = " << prev.r_out
            << " to " << entry.capacity << " at r_out = " << r;
        throw MonotonicityViolation(msg.str());
      }
      if (entry.probe_value < prev.probe_value - monotonicity_tol) study.probe_monotone = false;
    }
    radii.push_back(r);
    caps.push_back(entry.capacity);
    study.entries.push_back(std::move(entry));
    study.final_field = std::move(field);
  }

  study.fit = fit_truncation(radii, caps, cone.n, config.p);
  study.extrapolated_field =
      extrapolate_field(study.final_field, caps.back(), study.fit.limit);
  return study;
}

}  // namespace conecap
