#pragma once

// Minimization of the regularized p-Dirichlet energy
//   E_eps(u) = (1/p) int (|grad u|^2 + eps^2)^{p/2} dmu
// over Q1 fields on a MeridianMesh with u = 1 on SIGMA and u = 0 on OUTER.
// WALL and AXIS nodes are left free, which imposes the natural (zero conormal
// flux) condition there.

#include <conecap/error.hpp>
#include <conecap/mesh.hpp>

#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace conecap {

struct SolverConfig {
  double p = 2.0;
  /// Strictly decreasing continuation values of eps; the last one is eps_min.
  std::vector<double> eps_schedule = default_eps_schedule();
  /// Absolute tolerance on the Euclidean norm of the free-node energy gradient.
  double tolerance = 1e-10;
  /// A stage also stops once the Newton decrement -g.dx falls below this times max(1, |E|).
  double decrement_tolerance = 1e-14;
  /// Newton iterations allowed per continuation stage.
  int max_iterations = 60;
  double armijo = 1e-4;
  double backtrack = 0.5;
  double min_step = 1e-10;
  bool deterministic = true;
  int threads = 1;

  static std::vector<double> default_eps_schedule();
  double eps_min() const { return eps_schedule.back(); }
  /// Requires 1 < p <= n - 0.05 and a strictly decreasing positive schedule.
  void validate(int n) const;
};

/// Map from mesh nodes to free unknowns; nodes with a listed tag are held fixed.
class DofMap {
 public:
  DofMap(const MeridianMesh& mesh, std::vector<BoundaryTag> fixed_tags);
  static DofMap dirichlet(const MeridianMesh& mesh);

  int free_index(std::size_t node) const { return free_index_[node]; }
  bool is_fixed(std::size_t node) const { return free_index_[node] < 0; }
  std::size_t free_count() const { return free_count_; }
  std::span<const int> free_nodes() const { return free_nodes_; }

 private:
  std::vector<int> free_index_;
  std::vector<int> free_nodes_;
  std::size_t free_count_ = 0;
};

struct EnergyEvaluation {
  double energy = 0;
  Eigen::VectorXd gradient;             // free nodes only
  Eigen::SparseMatrix<double> hessian;  // free x free, both triangles stored
};

/// Reusable assembler: the sparsity pattern and scatter slots are built once.
class EnergyAssembler {
 public:
  enum Parts : unsigned { kEnergy = 1, kGradient = 2, kHessian = 4, kAll = 7 };

  EnergyAssembler(const MeridianMesh& mesh, DofMap dofs, int threads = 1,
                  bool deterministic = true);

  /// Evaluates the requested parts at the full nodal vector u.
  void evaluate(std::span<const double> u, double p, double eps, unsigned parts,
                EnergyEvaluation& out) const;
  double energy(std::span<const double> u, double p, double eps) const;

  const DofMap& dofs() const { return dofs_; }
  const MeridianMesh& mesh() const { return *mesh_; }

 private:
  struct ElementResult {
    double energy = 0;
    std::array<double, 4> gradient{};
    std::array<double, 16> hessian{};
  };
  void element_kernel(std::size_t e, std::span<const double> u, double p, double eps,
                      unsigned parts, ElementResult& out) const;

  const MeridianMesh* mesh_;
  DofMap dofs_;
  int threads_;
  bool deterministic_;
  Eigen::SparseMatrix<double> pattern_;
  std::vector<std::array<int, 16>> slots_;
};

/// One-shot evaluation of energy, free gradient and free Hessian.
EnergyEvaluation energy_gradient_hessian(const MeridianMesh& mesh, std::span<const double> u,
                                         double p, double eps, const DofMap& dofs);

struct PotentialField {
  std::shared_ptr<const MeridianMesh> mesh;
  std::vector<double> u;
  double p = 2;
  double eps_min = 0;
  bool converged = false;
  /// Value held on OUTER: 0 for a truncated solve, positive after far-field extrapolation.
  double outer_value = 0;

  double value_at(double rho, double theta) const { return mesh->interpolate(u, rho, theta); }
};

struct StageRecord {
  double eps = 0;
  std::vector<double> energy;  // one entry per accepted iterate, starting with the initial field
  int iterations = 0;
  double gradient_norm = 0;
};

struct CapacityEstimate {
  double capacity = 0;     // (1/p) int |grad u|^p, i.e. eps = 0
  double regularized = 0;  // E_{eps_min}(u)
};

struct SolveReport {
  std::vector<StageRecord> stages;
  double final_gradient_norm = 0;
  int total_iterations = 0;
  CapacityEstimate capacity;
  bool energy_monotone = true;
  bool bounds_ok = true;  // 0 < u <= 1 off OUTER
  double wall_seconds = 0;
};

/// Raised when a continuation stage exhausts its iterations or the line search stalls.
class SolverNonConvergence : public NonConvergence {
 public:
  SolverNonConvergence(const std::string& what, SolveReport report)
      : NonConvergence(what), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

std::pair<PotentialField, SolveReport> solve_potential(std::shared_ptr<const MeridianMesh> mesh,
                                                       const SolverConfig& config);

CapacityEstimate capacity_of(const PotentialField& field);

/// Value and physical gradient components of a field at a quadrature point of element e.
struct PointGradient {
  double value = 0;
  double d_rho = 0;
  double d_theta = 0;  // (1/rho) du/dtheta
  double norm() const;
};
PointGradient evaluate_at(const PotentialField& field, std::size_t e, const QuadraturePoint& q);

struct RayProfile {
  std::vector<double> theta;
  std::vector<double> grad_norm;
};

/// |grad u| on SIGMA along every mesh ray, from a one-sided quadratic fit of the
/// first three nodes of the ray. The tangential derivative vanishes because u is
/// constant on SIGMA, so only the radial derivative enters.
RayProfile boundary_gradient_on_sigma(const PotentialField& field);
/// Same recovery on the OUTER sphere.
RayProfile boundary_gradient_on_outer(const PotentialField& field);

/// u_ext = 1 - lambda (1 - u) with lambda = (cap_limit / cap_truncated)^{1/(p-1)}:
/// the p-harmonic rescaling of 1 - u whose flux through Sigma is p cap_limit.
PotentialField extrapolate_field(const PotentialField& truncated, double cap_truncated,
                                 double cap_limit);

// ------------------------------------------------------------------ truncation

struct MeshSpec {
  int n_theta = 16;
  int n_rho = 32;  // radial cells at the first truncation radius (ignored for Nested)
  MeshOptions options;
};

/// Radial cell count for radius r_out, keeping the log-radial cell size of the base radius.
/// Nested grading takes the count from cells_per_octave.
int scaled_radial_cells(const MeshSpec& spec, const SigmaCurve& curve, double base_r_out,
                        double r_out);

struct TruncationFit {
  double rate = 0;           // fitted beta in Y(r) = Y_inf - A r^{-beta}, Y = Cap^{-1/(p-1)}
  bool rate_fallback = false;  // fit failed; the decay exponent kappa was used
  double limit = 0;          // extrapolated capacity
};

/// Three-point fit on the transformed sequence Y = Cap^{-1/(p-1)}.
TruncationFit fit_truncation(std::span<const double> r_out, std::span<const double> capacities,
                             int n, double p);

struct TruncationEntry {
  double r_out = 0;
  int n_rho = 0;
  double capacity = 0;
  double regularized = 0;
  double probe_value = 0;
  SolveReport report;
};

struct TruncationStudy {
  std::vector<TruncationEntry> entries;
  TruncationFit fit;
  double probe_rho = 0;
  double probe_theta = 0;
  bool probe_monotone = true;
  PotentialField final_field;         // raw solve at the largest radius
  PotentialField extrapolated_field;  // final_field rescaled to the limit capacity
};

/// Solves at every radius in an increasing list (>= 3 entries) and extrapolates.
/// Throws MonotonicityViolation if a capacity increases by more than
/// monotonicity_tol (relative).
TruncationStudy truncation_study(const SigmaCurve& curve, const ConeSpec& cone,
                                 const MeshSpec& mesh, const SolverConfig& config,
                                 std::span<const double> r_out_list,
                                 double monotonicity_tol = 1e-6);

}  // namespace conecap
