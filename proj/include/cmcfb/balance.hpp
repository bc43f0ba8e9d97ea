#pragma once

#include <vector>

#include "cmcfb/disk_map.hpp"
#include "cmcfb/domain.hpp"

namespace cmc {

struct PlanarDisk {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
};

/// Limit configuration in the tangent plane at base_point: boundary circles
/// and the planar caps they bound (all of radius one in the exact limit).
struct CapConfiguration {
  std::vector<PlanarDisk> circles;
  std::vector<PlanarDisk> caps;
  Vec3 base_point = Vec3::Zero();

  int hemisphere_count() const { return static_cast<int>(circles.size()); }
  /// l exact unit circles and caps at the given centers.
  static CapConfiguration unit(const std::vector<Vec2>& centers, const Vec3& base_point = Vec3::Zero());
};

struct BalancingResult {
  Vec3 boundary_integral = Vec3::Zero();
  Vec3 cap_integral = Vec3::Zero();
  Vec3 residual = Vec3::Zero();
};

/// 2 H0 int_cap (S_x ^ S_y) dx dy - int eta ds, with H0 in the convention
/// Delta u = -2 H u_x ^ u_y. The cap must traverse its boundary in the same
/// direction as the trace; curves further apart than tol (Hausdorff) or
/// with opposite orientation raise BoundaryMismatch.
BalancingResult balancing_residual(const BoundaryTrace& boundary, const DiskMap& cap, double H0,
                                   double tol = 1e-6);

/// (2 * total cap area - total circle length) * N.
Vec3 first_order_term(const CapConfiguration& cfg, const Vec3& normal);

struct Barycenter {
  Vec2 c = Vec2::Zero();
  bool degenerate = false;
  double net_weight = 0.0;
};

/// Solves 2 int_caps (z - c) - int_circles (z - c) = 0. When the net weight
/// |2 |caps| - |circles|| < 1e-9 the cap-area weighted mean of centers is
/// returned with degenerate = true.
Barycenter weighted_barycenter(const CapConfiguration& cfg);

/// 2 int_caps d2N(z - c)(z - c) - int_circles d2N(z - c)(z - c), by exact
/// Gauss rules, projected orthogonally to jet.normal.
Vec3 projected_second_order(const NormalJet& jet, const CapConfiguration& cfg, const Vec2& c);

/// -(pi / 2) l pi0(d11 N + d22 N) at q, which equals -pi l grad H.
Vec3 reduced_force(const ImplicitDomain& domain, const Vec3& q, int l);

struct GaussMapResidual {
  double full = 0.0;
  double ablated = 0.0;
};

/// Sup over nodes j < n_r - 2 of L N + |dN|^2 N - 2 grad H on a boundary
/// patch, where L is the Laplace-Beltrami operator of the induced metric
/// with positive second derivatives (on the unit sphere L N = -2 N).
/// The ablated value drops the grad H term.
GaussMapResidual gauss_map_identity_residual(const DiskMap& patch, const ImplicitDomain& domain);

struct BalanceReport {
  Vec3 normal = Vec3::Zero();
  Vec3 first_order = Vec3::Zero();
  Barycenter barycenter;
  Vec3 second_order_projected = Vec3::Zero();
  Vec3 reduced_force = Vec3::Zero();
  Vec3 grad_H = Vec3::Zero();
};

BalanceReport balance_report(const ImplicitDomain& domain, const CapConfiguration& cfg);

}  // namespace cmc
