#include "cmcfb/balance.hpp"

#include <algorithm>
#include <cmath>

#include "cmcfb/errors.hpp"

namespace cmc {

CapConfiguration CapConfiguration::unit(const std::vector<Vec2>& centers, const Vec3& base_point) {
  CapConfiguration cfg;
  for (const Vec2& c : centers) {
    cfg.circles.push_back({c, 1.0});
    cfg.caps.push_back({c, 1.0});
  }
  cfg.base_point = base_point;
  return cfg;
}

namespace {

// Vector area 1/2 sum p_k x p_{k+1} of a closed polygon.
Vec3 polygon_vector_area(const std::vector<Vec3>& p) {
  Vec3 a = Vec3::Zero();
  for (size_t k = 0; k < p.size(); ++k) a += 0.5 * p[k].cross(p[(k + 1) % p.size()]);
  return a;
}

double hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  auto one_sided = [](const std::vector<Vec3>& x, const std::vector<Vec3>& y) {
    double worst = 0.0;
    for (const Vec3& p : x) {
      double best = 1e300;
      for (const Vec3& q : y) best = std::min(best, (p - q).squaredNorm());
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

}  // namespace

BalancingResult balancing_residual(const BoundaryTrace& boundary, const DiskMap& cap, double H0,
                                   double tol) {
  cap.validate();
  if (boundary.points.empty() || boundary.points.size() != boundary.conormal.size() ||
      boundary.points.size() != boundary.ds.size())
    throw InvalidArgument("boundary trace is incomplete");
  std::vector<Vec3> ring(cap.n_theta);
  for (int k = 0; k < cap.n_theta; ++k) ring[k] = cap.at(cap.n_r, k);

  // Translation-invariant comparison: both curves are taken as given.
  const double dist = hausdorff(boundary.points, ring);
  if (dist > tol) throw BoundaryMismatch("cap boundary is " + std::to_string(dist) + " from the trace");
  if (polygon_vector_area(boundary.points).dot(polygon_vector_area(ring)) < 0)
    throw BoundaryMismatch("cap boundary runs opposite to the trace");

  BalancingResult out;
  for (size_t k = 0; k < boundary.points.size(); ++k) out.boundary_integral += boundary.conormal[k] * boundary.ds[k];
  const MapGradient g = gradient(cap);
  Vec3 area = Vec3::Zero();
  for (int j = 0; j < cap.n_r; ++j)
    for (int k = 0; k < cap.n_theta; ++k) {
      const int id = cap.node(j, k);
      area += g.ux[id].cross(g.uy[id]) * cap.cell_area(j);
    }
  out.cap_integral = 2.0 * H0 * area;
  out.residual = out.cap_integral - out.boundary_integral;
  return out;
}

Vec3 first_order_term(const CapConfiguration& cfg, const Vec3& normal) {
  double w = 0.0;
  for (const PlanarDisk& d : cfg.caps) w += 2.0 * kPi * d.radius * d.radius;
  for (const PlanarDisk& d : cfg.circles) w -= 2.0 * kPi * d.radius;
  return w * normal;
}

Barycenter weighted_barycenter(const CapConfiguration& cfg) {
  Barycenter out;
  Vec2 moment = Vec2::Zero();
  for (const PlanarDisk& d : cfg.caps) {
    out.net_weight += 2.0 * kPi * d.radius * d.radius;
    moment += 2.0 * kPi * d.radius * d.radius * d.center;
  }
  for (const PlanarDisk& d : cfg.circles) {
    out.net_weight -= 2.0 * kPi * d.radius;
    moment -= 2.0 * kPi * d.radius * d.center;
  }
  if (std::abs(out.net_weight) >= 1e-9) {
    out.c = moment / out.net_weight;
    return out;
  }
  out.degenerate = true;
  double area = 0.0;
  Vec2 mean = Vec2::Zero();
  for (const PlanarDisk& d : cfg.caps) {
    area += d.radius * d.radius;
    mean += d.radius * d.radius * d.center;
  }
  if (area > 0) {
    out.c = mean / area;
  } else if (!cfg.circles.empty()) {
    for (const PlanarDisk& d : cfg.circles) out.c += d.center;
    out.c /= static_cast<double>(cfg.circles.size());
  }
  return out;
}

Vec3 projected_second_order(const NormalJet& jet, const CapConfiguration& cfg, const Vec2& c) {
  // The integrand is a quadratic polynomial: 2-point Gauss in r (with the
  // r weight, degree 3) and 8-point trapezoid in theta are exact.
  const double gr[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  constexpr int kTheta = 8;
  Vec3 total = Vec3::Zero();
  for (const PlanarDisk& d : cfg.caps) {
    for (double s : gr) {
      const double r = s * d.radius;
      for (int k = 0; k < kTheta; ++k) {
        const double t = 2 * kPi * k / kTheta;
        const Vec2 z = d.center + r * Vec2(std::cos(t), std::sin(t)) - c;
        total += 2.0 * jet.second(z, z) * (0.5 * d.radius) * r * (2 * kPi / kTheta);
      }
    }
  }
  for (const PlanarDisk& d : cfg.circles) {
    for (int k = 0; k < kTheta; ++k) {
      const double t = 2 * kPi * k / kTheta;
      const Vec2 z = d.center + d.radius * Vec2(std::cos(t), std::sin(t)) - c;
      total -= jet.second(z, z) * d.radius * (2 * kPi / kTheta);
    }
  }
  return total - total.dot(jet.normal) * jet.normal;
}

Vec3 reduced_force(const ImplicitDomain& domain, const Vec3& q, int l) {
  if (l < 0) throw InvalidArgument("hemisphere count must be nonnegative");
  const NormalJet jet = normal_jet(domain, q);
  const Vec3 lap = jet.d2_normal[0] + jet.d2_normal[2];
  const Vec3 v = -0.5 * kPi * l * lap;
  return v - v.dot(jet.normal) * jet.normal;
}

BalanceReport balance_report(const ImplicitDomain& domain, const CapConfiguration& cfg) {
  BalanceReport out;
  const Vec3 q = project_to_boundary(domain, cfg.base_point);
  const NormalJet jet = normal_jet(domain, q);
  out.normal = jet.normal;
  out.first_order = first_order_term(cfg, jet.normal);
  out.barycenter = weighted_barycenter(cfg);
  out.second_order_projected = projected_second_order(jet, cfg, out.barycenter.c);
  out.reduced_force = reduced_force(domain, q, cfg.hemisphere_count());
  out.grad_H = surface_grad_H(domain, q);
  return out;
}

GaussMapResidual gauss_map_identity_residual(const DiskMap& patch, const ImplicitDomain& domain) {
  const MapGradient X = gradient(patch);
  DiskMap N(patch.n_r, patch.n_theta), Hmap(patch.n_r, patch.n_theta);
  for (int i = 0; i < patch.size(); ++i) {
    N.values[i] = boundary_normal(domain, patch.values[i]);
    Hmap.values[i] = Vec3(mean_curvature(domain, patch.values[i]), 0, 0);
  }
  const MapGradient dN = gradient(N);
  const MapGradient dH = gradient(Hmap);

  // Flux fields sqrt(g) g^{ij} d_j N; their divergence over sqrt(g) is L N.
  DiskMap V1(patch.n_r, patch.n_theta), V2(patch.n_r, patch.n_theta);
  std::vector<double> sqrt_g(patch.size());
  std::vector<Mat2> g_inv(patch.size());
  for (int i = 0; i < patch.size(); ++i) {
    Mat2 g;
    g << X.ux[i].squaredNorm(), X.ux[i].dot(X.uy[i]), X.ux[i].dot(X.uy[i]), X.uy[i].squaredNorm();
    const double det = g.determinant();
    if (!(det > 0)) throw DegenerateGradient("patch metric is degenerate");
    sqrt_g[i] = std::sqrt(det);
    g_inv[i] = g.inverse();
    V1.values[i] = sqrt_g[i] * (g_inv[i](0, 0) * dN.ux[i] + g_inv[i](0, 1) * dN.uy[i]);
    V2.values[i] = sqrt_g[i] * (g_inv[i](1, 0) * dN.ux[i] + g_inv[i](1, 1) * dN.uy[i]);
  }
  const MapGradient dV1 = gradient(V1);
  const MapGradient dV2 = gradient(V2);

  GaussMapResidual out;
  for (int j = 0; j < patch.n_r - 2; ++j) {
    for (int k = 0; k < patch.n_theta; ++k) {
      const int i = patch.node(j, k);
      const Mat2& gi = g_inv[i];
      const Vec3 lap = (dV1.ux[i] + dV2.uy[i]) / sqrt_g[i];
      const double dn2 = gi(0, 0) * dN.ux[i].squaredNorm() + 2 * gi(0, 1) * dN.ux[i].dot(dN.uy[i]) +
                         gi(1, 1) * dN.uy[i].squaredNorm();
      const double hx = dH.ux[i].x(), hy = dH.uy[i].x();
      const Vec3 grad_H = (gi(0, 0) * hx + gi(0, 1) * hy) * X.ux[i] + (gi(1, 0) * hx + gi(1, 1) * hy) * X.uy[i];
      const Vec3 ablated = lap + dn2 * N.values[i];
      out.ablated = std::max(out.ablated, ablated.norm());
      out.full = std::max(out.full, (ablated - 2.0 * grad_H).norm());
    }
  }
  return out;
}

}  // namespace cmc
