#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "cmcfb/types.hpp"

namespace cmc {

/// Axis-aligned box known to contain the boundary of a domain.
struct BoundingBox {
  Vec3 lo;
  Vec3 hi;
  double diagonal() const { return (hi - lo).norm(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
};

/// A smooth domain Omega = {phi < 0} of R^3 with analytic first and second
/// derivatives of the level-set function. The boundary is {phi = 0} and the
/// exterior normal is grad(phi) / |grad(phi)|.
struct ImplicitDomain {
  std::string name;
  std::function<double(const Vec3&)> phi;
  std::function<Vec3(const Vec3&)> grad_phi;
  std::function<Mat3(const Vec3&)> hess_phi;
  BoundingBox bounding_box;

  double scale() const { return bounding_box.diagonal(); }
  /// Finite-difference step used for grad H and second normal derivatives.
  double fd_step() const { return 1e-4 * scale(); }
};

ImplicitDomain make_ball(double radius, const Vec3& center = Vec3::Zero());
ImplicitDomain make_ellipsoid(const Vec3& semi_axes);
/// Ball of radius R perturbed by a fixed harmonic polynomial bump:
/// phi = |x|^2 - R^2 - amplitude * R^2 * Y(x / R) with
/// Y(p) = p_x p_y + 0.4 p_z (2 p_z^2 - 3 p_x^2 - 3 p_y^2).
ImplicitDomain make_bumpy_ball(double radius, double amplitude);
/// Lower half-space {z < 0}; the nominal box is [-10, 10]^3.
ImplicitDomain make_half_space();

/// Deterministic orthonormal tangent frame at a unit normal: the coordinate
/// axis least aligned with N (lowest index on ties) is Gram-Schmidt'ed
/// against N and the frame is completed by t2 = N x t1.
std::array<Vec3, 2> tangent_basis(const Vec3& normal);

/// Closest point on the boundary (Newton on the normal-line system).
/// Throws NonConvergence after 50 steps.
Vec3 project_to_boundary(const ImplicitDomain& domain, const Vec3& p);

/// Exterior unit normal at a boundary point. Throws DegenerateGradient.
Vec3 boundary_normal(const ImplicitDomain& domain, const Vec3& q);

/// Ambient derivative of the normal field grad(phi)/|grad(phi)|; restricted
/// to tangent vectors it is the differential dN of the Gauss map.
Mat3 normal_derivative(const ImplicitDomain& domain, const Vec3& q);

struct ShapeOperator {
  Mat2 matrix;          // dN in the tangent_basis frame
  double mean_curvature;  // trace / 2, unit sphere -> +1
  std::array<Vec3, 2> basis;
};

ShapeOperator shape_operator(const ImplicitDomain& domain, const Vec3& q);
double mean_curvature(const ImplicitDomain& domain, const Vec3& q);

/// Intrinsic gradient of the boundary mean curvature (central differences
/// along re-projected tangent steps of size domain.fd_step()).
Vec3 surface_grad_H(const ImplicitDomain& domain, const Vec3& q);

/// Point of the boundary over the tangent plane at q: the boundary point
/// q + z1 t1 + z2 t2 + w N(q) (solved for w by Newton).
Vec3 graph_point(const ImplicitDomain& domain, const Vec3& q,
                 const std::array<Vec3, 2>& basis, const Vec2& z);

struct NormalJet {
  Vec3 base_point;
  Vec3 normal;
  std::array<Vec3, 2> basis;
  /// Columns are dN(t1), dN(t2).
  Eigen::Matrix<double, 3, 2> d_normal;
  /// Second derivatives of N in graph coordinates over the tangent plane:
  /// d2_normal[0] = d11, [1] = d12 = d21, [2] = d22.
  std::array<Vec3, 3> d2_normal;

  Vec3 first(const Vec2& s) const { return d_normal * s; }
  Vec3 second(const Vec2& s, const Vec2& t) const {
    return s.x() * t.x() * d2_normal[0] +
           (s.x() * t.y() + s.y() * t.x()) * d2_normal[1] +
           s.y() * t.y() * d2_normal[2];
  }
};

NormalJet normal_jet(const ImplicitDomain& domain, const Vec3& q);

enum class MorseType { minimum, maximum, saddle, degenerate };
std::string to_string(MorseType t);

struct CriticalPoint {
  Vec3 point;
  double mean_curvature;
  MorseType type;
  double grad_norm;
};

struct CriticalPointSet {
  std::vector<CriticalPoint> points;
  /// Set when H is constant to within tolerance over all seeds (e.g. a
  /// ball); every seed is then critical and `points` stays empty.
  bool h_constant = false;
  int seeds_converged = 0;
};

/// n points on the unit sphere (Fibonacci lattice), deterministic.
std::vector<Vec3> fibonacci_sphere(int n);

/// First boundary crossing along the ray from the box center in direction d.
Vec3 boundary_point_along(const ImplicitDomain& domain, const Vec3& direction);

/// Tangent vector field on the boundary (e.g. grad H).
using TangentField = std::function<Vec3(const Vec3&)>;

/// Damped Newton on a tangent field with finite-difference Jacobians in
/// tangent coordinates. Returns true and the converged point when
/// |field| < tol.
bool tangent_newton(const ImplicitDomain& domain, const TangentField& field,
                    const Vec3& seed, double tol, Vec3& out,
                    int max_iter = 60);

/// 2x2 Hessian of a tangent field (FD of the field in tangent coordinates).
Mat2 tangent_jacobian(const ImplicitDomain& domain, const TangentField& field,
                      const Vec3& q);

/// Deduplicated zeros of grad H started from Fibonacci seeds.
CriticalPointSet find_critical_points(const ImplicitDomain& domain, int n_seeds,
                                      double tol);

/// Zeros of an arbitrary tangent field with the same seeding/dedup rules.
std::vector<Vec3> find_field_zeros(const ImplicitDomain& domain,
                                   const TangentField& field, int n_seeds,
                                   double tol);

}  // namespace cmc
