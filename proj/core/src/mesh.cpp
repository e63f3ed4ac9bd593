#include <conecap/mesh.hpp>

#include <conecap/error.hpp>

#include <boost/math/special_functions/legendre.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace conecap {

namespace {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussRule gauss_legendre(int order) {
  if (order < 1 || order > 12) throw InvalidArgument("quadrature order must lie in [1, 12]");
  GaussRule rule;
  for (double x : boost::math::legendre_p_zeros<double>(order)) {
    const double dp = boost::math::legendre_p_prime(order, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes.push_back(x);
    rule.weights.push_back(w);
    if (x != 0.0) {
      rule.nodes.push_back(-x);
      rule.weights.push_back(w);
    }
  }
  return rule;
}

}  // namespace

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Interior: return "INTERIOR";
    case BoundaryTag::Sigma: return "SIGMA";
    case BoundaryTag::Outer: return "OUTER";
    case BoundaryTag::Wall: return "WALL";
    case BoundaryTag::Axis: return "AXIS";
  }
  return "UNKNOWN";
}

MeridianMesh::MeridianMesh(SigmaCurve curve, ConeSpec cone, double r_out, int n_theta,
                           int n_rho, MeshOptions options)
    : curve_(std::move(curve)),
      cone_(cone),
      r_out_(r_out),
      n_theta_(n_theta),
      n_rho_(n_rho),
      options_(options) {
  if (options_.grading == Grading::Nested) {
    if (options_.cells_per_octave < 1) throw InvalidArgument("cells_per_octave must be positive");
    log_step_ = std::log(2.0) / options_.cells_per_octave;
    rho0_ = r_out_ * std::exp(-n_rho_ * log_step_);
    const double g_min = curve_.min_value();
    if (rho0_ > g_min * (1.0 + 1e-12)) {
      throw InvalidArgument("nested grading needs n_rho >= cells_per_octave * log2(r_out / min g)");
    }
    // Whole octaves of blending keep the map unchanged under refinement; at least
    // twice the log spread of g keeps every cell at half the reference step or more.
    const double spread = std::log(curve_.max_value() / rho0_);
    const int octaves = std::max(1, static_cast<int>(std::ceil(2.0 * spread / std::log(2.0))));
    blend_layers_ = octaves * options_.cells_per_octave;
    if (blend_layers_ >= n_rho_) {
      throw InvalidTruncation("nested grading needs r_out beyond the blend zone of Sigma");
    }
  }
  build();
}

int nested_radial_cells(const SigmaCurve& curve, double r_out, int cells_per_octave) {
  if (cells_per_octave < 1) throw InvalidArgument("cells_per_octave must be positive");
  return static_cast<int>(
      std::ceil(cells_per_octave * std::log2(r_out / curve.min_value()) - 1e-9));
}

double MeridianMesh::ray_theta(int j) const { return cone_.theta_max() * j / n_theta_; }
double MeridianMesh::layer_s(int i) const { return static_cast<double>(i) / n_rho_; }

double MeridianMesh::map_rho(double s, double theta) const {
  const double g = curve_(theta);
  switch (options_.grading) {
    case Grading::Log: return g * std::exp(s * std::log(r_out_ / g));
    case Grading::Uniform: return g + s * (r_out_ - g);
    case Grading::Nested: {
      const double xi = s * n_rho_;
      const double w = std::max(0.0, 1.0 - xi / blend_layers_);
      return rho0_ * std::exp(xi * log_step_ + w * std::log(g / rho0_));
    }
  }
  return 0;
}

double MeridianMesh::logical_s(double rho, double theta) const {
  const double g = curve_(theta);
  switch (options_.grading) {
    case Grading::Log: return std::log(rho / g) / std::log(r_out_ / g);
    case Grading::Uniform: return (rho - g) / (r_out_ - g);
    case Grading::Nested: {
      const double t = std::log(rho / rho0_);
      if (t >= blend_layers_ * log_step_) return t / log_step_ / n_rho_;
      const double lift = std::log(g / rho0_);
      return (t - lift) / (log_step_ - lift / blend_layers_) / n_rho_;
    }
  }
  return 0;
}

QuadraturePoint MeridianMesh::make_point(int i, int j, double xi, double eta,
                                         double weight_ref) const {
  const double ds = 1.0 / n_rho_;
  const double dtheta = cone_.theta_max() / n_theta_;
  const double s = (i + 0.5 * (xi + 1.0)) * ds;
  const double theta = (j + 0.5 * (eta + 1.0)) * dtheta;
  const CurveJet g = curve_.jet(theta);

  double rho = 0, rho_s = 0, rho_theta = 0;
  if (options_.grading == Grading::Log) {
    const double span = std::log(r_out_ / g.g);
    rho = g.g * std::exp(s * span);
    rho_s = rho * span;
    rho_theta = (1.0 - s) * g.dg / g.g * rho;
  } else if (options_.grading == Grading::Uniform) {
    rho = g.g + s * (r_out_ - g.g);
    rho_s = r_out_ - g.g;
    rho_theta = (1.0 - s) * g.dg;
  } else {
    // The blend weight is linear inside layer i < blend_layers_ and zero beyond it.
    const double xi = s * n_rho_;
    const bool blended = i < blend_layers_;
    const double w = blended ? 1.0 - xi / blend_layers_ : 0.0;
    const double lift = std::log(g.g / rho0_);
    rho = rho0_ * std::exp(xi * log_step_ + w * lift);
    rho_s = rho * n_rho_ * (log_step_ - (blended ? lift / blend_layers_ : 0.0));
    rho_theta = rho * w * g.dg / g.g;
  }

  QuadraturePoint q;
  q.rho = rho;
  q.theta = theta;
  q.jacobian = rho_s;
  const double measure = cone_.solid_angle_factor() * std::pow(rho, cone_.n - 1) *
                         std::pow(std::sin(theta), cone_.n - 2);
  q.weight = weight_ref * 0.25 * ds * dtheta * rho_s * measure;

  // Local node order: (i,j), (i+1,j), (i+1,j+1), (i,j+1).
  static constexpr std::array<double, 4> sx{-1.0, 1.0, 1.0, -1.0};
  static constexpr std::array<double, 4> sy{-1.0, -1.0, 1.0, 1.0};
  for (int a = 0; a < 4; ++a) {
    q.shape[a] = 0.25 * (1.0 + sx[a] * xi) * (1.0 + sy[a] * eta);
    const double n_s = 0.25 * sx[a] * (1.0 + sy[a] * eta) * (2.0 / ds);
    const double n_theta = 0.25 * sy[a] * (1.0 + sx[a] * xi) * (2.0 / dtheta);
    q.grad_rho[a] = n_s / rho_s;
    q.grad_theta[a] = (n_theta - rho_theta * q.grad_rho[a]) / rho;
  }
  return q;
}

void MeridianMesh::build() {
  const int ni = n_rho_ + 1;
  const int nj = n_theta_ + 1;
  rho_.resize(static_cast<std::size_t>(ni) * nj);
  theta_.resize(rho_.size());
  tags_.resize(rho_.size());
  for (int j = 0; j < nj; ++j) {
    const double theta = ray_theta(j);
    for (int i = 0; i < ni; ++i) {
      const int node = node_index(i, j);
      rho_[node] = i == n_rho_ ? r_out_ : map_rho(layer_s(i), theta);
      theta_[node] = theta;
      BoundaryTag tag = BoundaryTag::Interior;
      if (i == 0) {
        tag = BoundaryTag::Sigma;
      } else if (i == n_rho_) {
        tag = BoundaryTag::Outer;
      } else if (j == 0) {
        tag = BoundaryTag::Axis;
      } else if (j == n_theta_) {
        tag = cone_.full_space ? BoundaryTag::Axis : BoundaryTag::Wall;
      }
      tags_[node] = tag;
    }
  }

  const GaussRule rule = gauss_legendre(options_.quadrature_order);
  const std::size_t nq = rule.nodes.size();
  points_per_element_ = static_cast<int>(nq * nq);
  elements_.clear();
  elements_.reserve(static_cast<std::size_t>(n_rho_) * n_theta_);
  points_.clear();
  points_.reserve(static_cast<std::size_t>(n_rho_) * n_theta_ * points_per_element_);
  centroids_.clear();
  centroids_.reserve(static_cast<std::size_t>(n_rho_) * n_theta_);
  min_jacobian_ = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n_theta_; ++j) {
    for (int i = 0; i < n_rho_; ++i) {
      elements_.push_back({node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1),
                           node_index(i, j + 1)});
      double cell_measure = 0;
      for (std::size_t a = 0; a < nq; ++a) {
        for (std::size_t b = 0; b < nq; ++b) {
          QuadraturePoint q =
              make_point(i, j, rule.nodes[a], rule.nodes[b], rule.weights[a] * rule.weights[b]);
          cell_measure += q.weight;
          min_jacobian_ = std::min(min_jacobian_, q.jacobian);
          points_.push_back(q);
        }
      }
      QuadraturePoint c = make_point(i, j, 0.0, 0.0, 4.0);
      c.weight = cell_measure;
      centroids_.push_back(c);
    }
  }
}

std::span<const QuadraturePoint> MeridianMesh::quadrature(std::size_t e) const {
  return {points_.data() + e * points_per_element_, static_cast<std::size_t>(points_per_element_)};
}

double MeridianMesh::interpolate(std::span<const double> nodal, double rho, double theta) const {
  if (nodal.size() != node_count()) throw InvalidArgument("nodal field size does not match mesh");
  const double tmax = cone_.theta_max();
  const double t = std::clamp(theta, 0.0, tmax);
  const double tj = t / tmax * n_theta_;
  const int j = std::clamp(static_cast<int>(std::floor(tj)), 0, n_theta_ - 1);
  const double s = std::clamp(logical_s(rho, t), 0.0, 1.0) * n_rho_;
  const int i = std::clamp(static_cast<int>(std::floor(s)), 0, n_rho_ - 1);
  const double x = s - i;
  const double y = tj - j;
  const auto& el = elements_[element_index(i, j)];
  return (1 - x) * (1 - y) * nodal[el[0]] + x * (1 - y) * nodal[el[1]] + x * y * nodal[el[2]] +
         (1 - x) * y * nodal[el[3]];
}

MeridianMesh build_mesh(const SigmaCurve& curve, const ConeSpec& cone, double r_out,
                        int n_theta, int n_rho, MeshOptions options) {
  cone.validate();
  if (std::abs(curve.theta_max() - cone.theta_max()) > 1e-12) {
    throw InvalidArgument("curve angular range does not match the cone");
  }
  if (n_theta < 4 || n_rho < 4) {
    throw InvalidArgument("mesh needs n_theta >= 4 and n_rho >= 4");
  }
  if (!(r_out > 1.5 * curve.max_value())) {
    std::ostringstream msg;
    msg << "truncation radius " << r_out << " must exceed 1.5 * max g = "
        << 1.5 * curve.max_value();
    throw InvalidTruncation(msg.str());
  }
  if (options.grading == Grading::Nested &&
      n_rho != nested_radial_cells(curve, r_out, options.cells_per_octave)) {
    throw InvalidArgument("nested grading requires n_rho = nested_radial_cells(curve, r_out, c)");
  }
  return MeridianMesh(curve, cone, r_out, n_theta, n_rho, options);
}

MeridianMesh refine(const MeridianMesh& mesh) {
  MeshOptions options = mesh.options();
  options.cells_per_octave *= 2;
  return MeridianMesh(mesh.curve(), mesh.cone(), mesh.r_out(), 2 * mesh.n_theta(),
                      2 * mesh.n_rho(), options);
}

double quadrature_integral(const MeridianMesh& mesh,
                           const std::function<double(double, double)>& f) {
  double total = 0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    for (const auto& q : mesh.quadrature(e)) total += q.weight * f(q.rho, q.theta);
  }
  return total;
}

double quadrature_integral(const MeridianMesh& mesh, std::span<const double> nodal) {
  if (nodal.size() != mesh.node_count()) throw InvalidArgument("nodal field size does not match mesh");
  double total = 0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.element(e);
    for (const auto& q : mesh.quadrature(e)) {
      double value = 0;
      for (int a = 0; a < 4; ++a) value += q.shape[a] * nodal[el[a]];
      total += q.weight * value;
    }
  }
  return total;
}

double mesh_measure(const MeridianMesh& mesh) {
  return quadrature_integral(mesh, [](double, double) { return 1.0; });
}

void write_mesh_csv(const MeridianMesh& mesh, const std::string& nodes_path,
                    const std::string& elements_path) {
  std::ofstream nodes(nodes_path);
  if (!nodes) throw Error("cannot open " + nodes_path);
  nodes.precision(17);
  nodes << "id,i,j,rho,theta,tag\r\n";
  for (int j = 0; j <= mesh.n_theta(); ++j) {
    for (int i = 0; i <= mesh.n_rho(); ++i) {
      const int id = mesh.node_index(i, j);
      nodes << id << ',' << i << ',' << j << ',' << mesh.node_rho(id) << ','
            << mesh.node_theta(id) << ',' << to_string(mesh.tag(id)) << "\r\n";
    }
  }
  std::ofstream elements(elements_path);
  if (!elements) throw Error("cannot open " + elements_path);
  elements << "id,n0,n1,n2,n3\r\n";
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.element(e);
    elements << e << ',' << el[0] << ',' << el[1] << ',' << el[2] << ',' << el[3] << "\r\n";
  }
}

}  // namespace conecap
