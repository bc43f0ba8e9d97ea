#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cmcfb/domain.hpp"
#include "cmcfb/types.hpp"

namespace cmc {

/// Samples of u: D -> R^3 on a polar grid. Nodes sit at cell centers
/// r_j = (j + 1/2) / n_r, theta_k = 2 pi k / n_theta for j < n_r, plus a
/// boundary ring at r = 1 stored as row j = n_r.
struct DiskMap {
  int n_r = 0;
  int n_theta = 0;
  std::vector<Vec3> values;
  double H_target = 0.0;

  DiskMap() = default;
  DiskMap(int n_r, int n_theta, double H_target = 0.0);

  static DiskMap sample(int n_r, int n_theta, const std::function<Vec3(Complex)>& f,
                        double H_target = 0.0);

  /// Throws InvalidArgument when the grid or the samples are invalid.
  void validate() const;

  int node(int j, int k) const {
    k %= n_theta;
    if (k < 0) k += n_theta;
    return j * n_theta + k;
  }
  int size() const { return (n_r + 1) * n_theta; }
  double h() const { return 1.0 / n_r; }
  double dtheta() const { return 2.0 * kPi / n_theta; }
  double radius(int j) const { return j == n_r ? 1.0 : (j + 0.5) / n_r; }
  double theta(int k) const { return dtheta() * k; }
  Complex z(int j, int k) const { return std::polar(radius(j), theta(k)); }
  /// Midpoint quadrature weight of the cell around interior node (j, k).
  double cell_area(int j) const { return radius(j) * h() * dtheta(); }

  Vec3& at(int j, int k) { return values[node(j, k)]; }
  const Vec3& at(int j, int k) const { return values[node(j, k)]; }
};

/// Cartesian partial derivatives at every node (boundary ring included).
struct MapGradient {
  std::vector<Vec3> ux;
  std::vector<Vec3> uy;
};

MapGradient gradient(const DiskMap& map);
/// Polar derivatives at every node: u_r and u_theta.
MapGradient polar_gradient(const DiskMap& map);

/// -(u_xx + u_yy) at every node; the ring uses one-sided radial stencils.
std::vector<Vec3> laplacian(const DiskMap& map);

struct FieldNorms {
  std::vector<Vec3> field;
  double sup = 0.0;
  double l2 = 0.0;
};

/// Delta u + 2 H_target u_x ^ u_y, norms over the interior nodes j < n_r.
FieldNorms h_residual(const DiskMap& map);

/// sup |<u_x, u_y>| and sup ||u_x| - |u_y|| over interior nodes.
struct ConformalityDefect {
  double inner = 0.0;
  double length = 0.0;
};
ConformalityDefect conformality_defect(const DiskMap& map);

double dirichlet_energy(const DiskMap& map);
double area(const DiskMap& map);
/// Max pairwise distance over every node when n_r * n_theta <= 64^2,
/// otherwise over the stride-2 subsample in both indices.
double diameter(const DiskMap& map);

struct BoundaryTrace {
  std::vector<Vec3> points;
  /// Unit outward conormal d_r u / |d_r u| (zero where d_r u vanishes).
  std::vector<Vec3> conormal;
  /// Arclength element |u_theta| d theta at each ring node.
  std::vector<double> ds;
  bool degenerate = false;
};

BoundaryTrace boundary_trace(const DiskMap& map);

struct OrthogonalityDefect {
  double defect = 0.0;
  /// Set when u_x ^ u_y vanishes at every ring node (e.g. constant maps).
  bool degenerate = false;
};

/// max_k |<unit(u_x ^ u_y), N(proj u)>| over the ring. Throws
/// BoundaryOffDomain when a ring sample is farther than tol from the boundary.
OrthogonalityDefect orthogonality_defect(const DiskMap& map, const ImplicitDomain& domain,
                                         double tol = 1e-3);

/// Local flattening of the boundary near q:
/// psi(p) = (tangent coordinates of the foot point, signed normal distance).
class Straightening {
 public:
  /// Throws ChartTooLarge if radius exceeds half the smallest curvature radius.
  Straightening(const ImplicitDomain& domain, const Vec3& q, double radius);

  Vec3 forward(const Vec3& p) const;
  Vec3 inverse(const Vec3& w) const;

  const Vec3& base_point() const { return q_; }
  const Vec3& normal() const { return normal_; }
  double radius() const { return radius_; }
  const ImplicitDomain& domain() const { return domain_; }

 private:
  ImplicitDomain domain_;
  Vec3 q_;
  Vec3 normal_;
  std::array<Vec3, 2> basis_;
  double radius_;
};

struct ReflectionExtension {
  /// w = psi o u on the unit disk.
  DiskMap inner;
  /// s(w(1/conj z)) on the inverted grid: node (j, k) sits at radius 1/r_j.
  DiskMap outer;
  double value_mismatch = 0.0;
  double derivative_mismatch = 0.0;
  double inner_energy = 0.0;
  double outer_energy = 0.0;
};

/// Throws BoundaryOffDomain if the trace leaves the boundary by more than tol.
ReflectionExtension reflect_extend(const DiskMap& map, const Straightening& psi,
                                   double tol = 1e-3);

/// Energy of the outer piece integrated on its own radii 1/r_j.
double inverted_energy(const DiskMap& outer);

void write_dmap(const std::string& path, const DiskMap& map);
DiskMap read_dmap(const std::string& path);
std::string dmap_bytes(const DiskMap& map);
DiskMap parse_dmap(const std::string& bytes);

/// Boundary patch X(z) = graph_point(q, radius * z) sampled on the grid;
/// H_target is set to the mean curvature at q.
DiskMap graph_patch(const ImplicitDomain& domain, const Vec3& q, double radius, int n_r,
                    int n_theta);

}  // namespace cmc
