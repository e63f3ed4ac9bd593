#pragma once

// Structured mesh of the truncated meridian section
//   { (rho, theta) : g(theta) <= rho <= r_out, 0 <= theta <= theta_max }.
// Nodes sit on a logical (s, theta) grid mapped by a transfinite map whose
// theta = const lines are rays from the vertex. Elements are bilinear in the
// logical coordinates; quadrature weights carry the full R^n measure
//   c_n rho^{n-1} sin^{n-2}(theta) d rho d theta.

#include <conecap/geometry.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace conecap {

enum class BoundaryTag : std::uint8_t { Interior, Sigma, Outer, Wall, Axis };

std::string to_string(BoundaryTag tag);

/// Log: rho = g^{1-s} r_out^s on every ray.
/// Uniform: rho = g + s (r_out - g).
/// Nested: a log-uniform grid rho_k = r_out 2^{(k - n_rho)/c} with c cells per octave,
/// blended linearly in log rho onto g over the first layers. Meshes whose radii differ
/// by powers of two share every layer, so their discrete spaces are nested.
enum class Grading { Log, Uniform, Nested };

struct MeshOptions {
  Grading grading = Grading::Log;
  int quadrature_order = 2;  // Gauss points per logical direction
  int cells_per_octave = 16; // Nested only
};

/// Radial cell count of a Nested mesh: ceil(c log2(r_out / min g)).
int nested_radial_cells(const SigmaCurve& curve, double r_out, int cells_per_octave);

/// Quadrature point with the Q1 shape data already mapped to physical space.
/// grad_rho / grad_theta are the components of grad N_a along e_rho and e_theta.
struct QuadraturePoint {
  double rho = 0;
  double theta = 0;
  double weight = 0;
  double jacobian = 0;  // d rho / d s of the transfinite map
  std::array<double, 4> shape{};
  std::array<double, 4> grad_rho{};
  std::array<double, 4> grad_theta{};
};

class MeridianMesh {
 public:
  MeridianMesh(SigmaCurve curve, ConeSpec cone, double r_out, int n_theta, int n_rho,
               MeshOptions options);

  const SigmaCurve& curve() const { return curve_; }
  const ConeSpec& cone() const { return cone_; }
  double r_out() const { return r_out_; }
  int n_theta() const { return n_theta_; }
  int n_rho() const { return n_rho_; }
  const MeshOptions& options() const { return options_; }

  std::size_t node_count() const { return rho_.size(); }
  std::size_t element_count() const { return elements_.size(); }

  /// i counts radial layers from Sigma (i = 0) to the outer sphere (i = n_rho);
  /// j counts rays from the axis (j = 0) to the wall (j = n_theta).
  int node_index(int i, int j) const { return j * (n_rho_ + 1) + i; }
  int element_index(int i, int j) const { return j * n_rho_ + i; }
  int element_layer(std::size_t e) const { return static_cast<int>(e) % n_rho_; }
  int element_ray(std::size_t e) const { return static_cast<int>(e) / n_rho_; }

  double node_rho(std::size_t node) const { return rho_[node]; }
  double node_theta(std::size_t node) const { return theta_[node]; }
  BoundaryTag tag(std::size_t node) const { return tags_[node]; }
  const std::array<int, 4>& element(std::size_t e) const { return elements_[e]; }

  std::span<const QuadraturePoint> quadrature(std::size_t e) const;
  /// Shape data at the element centre; weight is the element's measure.
  const QuadraturePoint& centroid(std::size_t e) const { return centroids_[e]; }
  /// Smallest mapped Jacobian determinant (logical -> (rho, theta)) over all quadrature points.
  double min_jacobian() const { return min_jacobian_; }

  /// Ray angle theta_j and logical radial coordinate s_i.
  double ray_theta(int j) const;
  double layer_s(int i) const;

  /// Nested grading: inner anchor radius and number of blended layers.
  double nested_anchor() const { return rho0_; }
  int blend_layers() const { return blend_layers_; }

  /// The transfinite map and its inverse along a ray.
  double map_rho(double s, double theta) const;
  double logical_s(double rho, double theta) const;

  /// Q1 interpolation of nodal values at a physical point inside the mesh.
  double interpolate(std::span<const double> nodal, double rho, double theta) const;

 private:
  void build();
  QuadraturePoint make_point(int i, int j, double xi, double eta, double weight_ref) const;

  SigmaCurve curve_;
  ConeSpec cone_;
  double r_out_;
  int n_theta_;
  int n_rho_;
  MeshOptions options_;

  std::vector<double> rho_;
  std::vector<double> theta_;
  std::vector<BoundaryTag> tags_;
  std::vector<std::array<int, 4>> elements_;
  std::vector<QuadraturePoint> points_;
  std::vector<QuadraturePoint> centroids_;
  int points_per_element_ = 0;
  double min_jacobian_ = 0;
  double rho0_ = 0;
  double log_step_ = 0;
  int blend_layers_ = 0;
};

/// Throws InvalidArgument for n_theta or n_rho < 4 and InvalidTruncation when
/// r_out <= 1.5 max g. With Grading::Nested, n_rho must equal nested_radial_cells.
MeridianMesh build_mesh(const SigmaCurve& curve, const ConeSpec& cone, double r_out,
                        int n_theta, int n_rho, MeshOptions options = {});

/// Uniform 2x refinement in both logical directions on the same transfinite map
/// (for Nested grading the octave resolution doubles).
MeridianMesh refine(const MeridianMesh& mesh);

/// Weighted quadrature sum of f(rho, theta).
double quadrature_integral(const MeridianMesh& mesh,
                           const std::function<double(double, double)>& f);
/// Integral of the Q1 interpolant of a nodal field.
double quadrature_integral(const MeridianMesh& mesh, std::span<const double> nodal);

/// Total mesh measure, i.e. the volume of the truncated annular region.
double mesh_measure(const MeridianMesh& mesh);

/// Debug dump: nodes (id, i, j, rho, theta, tag) and elements (id, n0..n3).
void write_mesh_csv(const MeridianMesh& mesh, const std::string& nodes_path,
                    const std::string& elements_path);

}  // namespace conecap
