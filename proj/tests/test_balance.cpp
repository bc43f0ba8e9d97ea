#include <doctest.h>

#include "cmcfb/balance.hpp"
#include "cmcfb/bubble.hpp"
#include "cmcfb/errors.hpp"
#include "oracles.hpp"

using namespace cmc;

namespace {

struct Cap {
  DiskMap surface;
  DiskMap spanning;
};

// Unit-sphere cap above height h, parametrized conformally with H = 1,
// and the flat disk spanning its boundary circle.
Cap upper_cap(double h, int n_r, int n_theta) {
  const double rho = std::sqrt((1 - h) / (1 + h));
  const double r = std::sqrt(1 - h * h);
  const Mat3 flip = axis_angle(Vec3::UnitX(), kPi);
  return {DiskMap::sample(n_r, n_theta, [&](Complex z) { return Vec3(flip * inv_stereographic(rho * z)); }, 1.0),
          DiskMap::sample(n_r, n_theta, [&](Complex z) { return Vec3(r * z.real(), -r * z.imag(), h); })};
}

}  // namespace

TEST_SUITE("balance") {

TEST_CASE("spherical caps balance") {
  for (double h : {0.0, 0.3, 0.5, 0.9}) {
    const Cap c = upper_cap(h, 32, 256);
    const BalancingResult b = balancing_residual(boundary_trace(c.surface), c.spanning, 1.0);
    CHECK(b.residual.norm() < 1e-5);
    CHECK((b.boundary_integral - oracle::cap_boundary_flux(h)).norm() < 1e-5);
  }
}

TEST_CASE("lower piece has the opposite flux") {
  const double h = 0.4;
  const double rho = std::sqrt((1 + h) / (1 - h));
  const double r = std::sqrt(1 - h * h);
  const DiskMap u = DiskMap::sample(32, 256, [&](Complex z) { return inv_stereographic(rho * z); });
  const DiskMap cap = DiskMap::sample(32, 256, [&](Complex z) { return Vec3(r * z.real(), r * z.imag(), h); });
  const BalancingResult b = balancing_residual(boundary_trace(u), cap, 1.0);
  CHECK(b.residual.norm() < 1e-5);
  CHECK((b.boundary_integral + oracle::cap_boundary_flux(h)).norm() < 1e-5);
}

TEST_CASE("mismatched spanning surfaces are rejected") {
  const Cap c = upper_cap(0.5, 16, 64);
  const double r = std::sqrt(0.75);
  const DiskMap reversed = DiskMap::sample(16, 64, [&](Complex z) { return Vec3(r * z.real(), r * z.imag(), 0.5); });
  CHECK_THROWS_AS(balancing_residual(boundary_trace(c.surface), reversed, 1.0), BoundaryMismatch);
  const DiskMap shifted = DiskMap::sample(16, 64, [&](Complex z) { return Vec3(r * z.real(), -r * z.imag(), 0.6); });
  CHECK_THROWS_AS(balancing_residual(boundary_trace(c.surface), shifted, 1.0), BoundaryMismatch);
}

TEST_CASE("first-order term vanishes in the exact limit") {
  const CapConfiguration cfg = CapConfiguration::unit({Vec2(0, 0), Vec2(3, 1)});
  CHECK(first_order_term(cfg, Vec3::UnitZ()).norm() < 1e-12);
  CapConfiguration big;
  big.caps = {{Vec2(0, 0), 2.0}};
  big.circles = {{Vec2(0, 0), 2.0}};
  CHECK((first_order_term(big, Vec3::UnitZ()) - Vec3(0, 0, 4 * kPi)).norm() < 1e-12);
}

TEST_CASE("weighted barycenter") {
  CapConfiguration cfg;
  cfg.caps = {{Vec2(1, 2), 2.0}};
  cfg.circles = {{Vec2(1, 2), 2.0}};
  Barycenter b = weighted_barycenter(cfg);
  CHECK_FALSE(b.degenerate);
  CHECK((b.c - Vec2(1, 2)).norm() < 1e-12);

  cfg.caps = {{Vec2(0, 0), 2.0}, {Vec2(4, 0), 2.0}};
  cfg.circles = {{Vec2(0, 0), 2.0}};
  b = weighted_barycenter(cfg);
  // 2 (4pi * 0 + 4pi * (4, 0)) - 4pi * 0 = c (16 pi - 4 pi)
  CHECK((b.c - Vec2(32.0 / 12.0, 0)).norm() < 1e-12);

  b = weighted_barycenter(CapConfiguration::unit({Vec2(0, 0), Vec2(2, 0)}));
  CHECK(b.degenerate);
  CHECK((b.c - Vec2(1, 0)).norm() < 1e-12);
}

TEST_CASE("second-order moment against dense quadrature") {
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  const NormalJet jet = normal_jet(e, boundary_point_along(e, Vec3(1, 0.7, 0.4)));
  auto f = [&](const Vec2& s) { return jet.second(s, s); };
  CapConfiguration cfg;
  cfg.caps = {{Vec2(0.2, -0.1), 1.3}, {Vec2(-1.0, 0.5), 0.7}};
  cfg.circles = {{Vec2(0.2, -0.1), 1.1}};
  const Vec2 c(0.3, 0.05);
  Vec3 ref = Vec3::Zero();
  for (const PlanarDisk& d : cfg.caps) ref += 2.0 * oracle::dense_disk(f, d.center, d.radius, c);
  for (const PlanarDisk& d : cfg.circles) ref -= oracle::dense_circle(f, d.center, d.radius, c);
  ref -= ref.dot(jet.normal) * jet.normal;
  CHECK((projected_second_order(jet, cfg, c) - ref).norm() < 1e-5 * (1 + ref.norm()));
}

TEST_CASE("reduced force is -pi l grad H") {
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  for (const Vec3& d : fibonacci_sphere(10)) {
    const Vec3 q = boundary_point_along(e, d);
    for (int l : {1, 2}) {
      const Vec3 f = reduced_force(e, q, l);
      const Vec3 g = surface_grad_H(e, q);
      CHECK((f + kPi * l * g).norm() < 1e-5 * (1 + f.norm()));
    }
  }
  CHECK(reduced_force(e, Vec3(2, 0, 0), 1).norm() < 1e-6);
  CHECK_THROWS_AS(reduced_force(e, Vec3(2, 0, 0), -1), InvalidArgument);
}

TEST_CASE("Gauss-map identity") {
  const ImplicitDomain s = make_ball(1.0);
  const GaussMapResidual rs = gauss_map_identity_residual(graph_patch(s, Vec3(0, 0.6, 0.8), 0.3, 16, 64), s);
  CHECK(rs.full < 1e-5);
  CHECK(rs.ablated == doctest::Approx(rs.full));
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  const GaussMapResidual re =
      gauss_map_identity_residual(graph_patch(e, boundary_point_along(e, Vec3(1, 1, 1)), 0.3, 32, 128), e);
  CHECK(re.full < 1e-4);
  CHECK(re.ablated > 0.1);
}

TEST_CASE("balance report is consistent") {
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  const CapConfiguration cfg = CapConfiguration::unit({Vec2(0, 0)}, Vec3(1.2, 0.9, 0.5));
  const BalanceReport r = balance_report(e, cfg);
  CHECK(r.first_order.norm() < 1e-12);
  CHECK((r.second_order_projected - r.reduced_force).norm() < 1e-8 * (1 + r.reduced_force.norm()));
  CHECK((r.reduced_force + kPi * r.grad_H).norm() < 1e-5 * (1 + r.reduced_force.norm()));
}

}
