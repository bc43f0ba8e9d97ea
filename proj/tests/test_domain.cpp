#include <doctest.h>

#include "cmcfb/domain.hpp"
#include "cmcfb/errors.hpp"
#include "oracles.hpp"

using namespace cmc;

TEST_SUITE("domain") {

TEST_CASE("ball projection, normal and curvature") {
  const ImplicitDomain ball = make_ball(2.0, Vec3(1, 0, 0));
  const Vec3 q = project_to_boundary(ball, Vec3(4, 0, 0));
  CHECK((q - Vec3(3, 0, 0)).norm() < 1e-12);
  CHECK((boundary_normal(ball, q) - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK(mean_curvature(ball, q) == doctest::Approx(0.5).epsilon(1e-10));
  const ShapeOperator s = shape_operator(ball, project_to_boundary(ball, Vec3(0.3, 1.2, -0.7)));
  CHECK(s.matrix(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.matrix(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::abs(s.matrix(0, 1)) < 1e-9);
}

TEST_CASE("projection from inside and far away") {
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  for (const Vec3& p : {Vec3(0.1, 0.2, 0.05), Vec3(10, -7, 3), Vec3(0, 0, 0.999)}) {
    const Vec3 q = project_to_boundary(e, p);
    CHECK(std::abs(e.phi(q)) < 1e-10);
    // p - q is normal to the surface.
    const Vec3 n = boundary_normal(e, q);
    CHECK((p - q - (p - q).dot(n) * n).norm() < 1e-8);
  }
}

TEST_CASE("tangent basis is orthonormal and deterministic") {
  for (const Vec3& n : {Vec3(0, 0, 1), Vec3(1, 1, 1).normalized(), Vec3(-0.2, 0.9, 0.1).normalized()}) {
    const auto b = tangent_basis(n);
    CHECK(std::abs(b[0].dot(n)) < 1e-14);
    CHECK(std::abs(b[1].dot(n)) < 1e-14);
    CHECK(std::abs(b[0].dot(b[1])) < 1e-14);
    CHECK(b[0].norm() == doctest::Approx(1.0));
    CHECK(b[0].cross(b[1]).dot(n) == doctest::Approx(1.0));
  }
}

TEST_CASE("ellipsoid mean curvature matches the closed form") {
  const Vec3 ax(2, 1.5, 1);
  const ImplicitDomain e = make_ellipsoid(ax);
  for (const Vec3& d : fibonacci_sphere(40)) {
    const Vec3 q = boundary_point_along(e, d);
    CHECK(mean_curvature(e, q) == doctest::Approx(oracle::ellipsoid_H(ax, q)).epsilon(1e-9));
  }
}

TEST_CASE("surface gradient of H is tangent and matches directional differences") {
  const Vec3 ax(2, 1.5, 1);
  const ImplicitDomain e = make_ellipsoid(ax);
  for (const Vec3& d : fibonacci_sphere(12)) {
    const Vec3 q = boundary_point_along(e, d);
    const Vec3 g = surface_grad_H(e, q);
    const Vec3 n = boundary_normal(e, q);
    CHECK(std::abs(g.dot(n)) < 1e-8 * g.norm() + 1e-12);
    const auto t = tangent_basis(n);
    for (const Vec3& dir : t) {
      const double s = 1e-4;
      const double fd = (oracle::ellipsoid_H(ax, project_to_boundary(e, q + s * dir)) -
                         oracle::ellipsoid_H(ax, project_to_boundary(e, q - s * dir))) /
                        (2 * s);
      CHECK(g.dot(dir) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("graph_point lies on the boundary") {
  const ImplicitDomain e = make_bumpy_ball(1.0, 0.15);
  const Vec3 q = boundary_point_along(e, Vec3(0.2, 0.3, 0.9));
  const auto b = tangent_basis(boundary_normal(e, q));
  for (const Vec2& z : {Vec2(0.1, 0.0), Vec2(-0.05, 0.2), Vec2(0.0, 0.0)})
    CHECK(std::abs(e.phi(graph_point(e, q, b, z))) < 1e-12);
}

TEST_CASE("normal jet first derivative is the shape operator") {
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  const Vec3 q = boundary_point_along(e, Vec3(1, 1, 1));
  const NormalJet jet = normal_jet(e, q);
  const ShapeOperator s = shape_operator(e, q);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(jet.d_normal.col(j).dot(jet.basis[i]) == doctest::Approx(s.matrix(i, j)).epsilon(1e-8));
}

TEST_CASE("ellipsoid critical points are the six axis endpoints") {
  const Vec3 ax(2, 1.5, 1);
  const CriticalPointSet cps = find_critical_points(make_ellipsoid(ax), 64, 1e-6);
  CHECK_FALSE(cps.h_constant);
  REQUIRE(cps.points.size() == 6);
  int max = 0, saddle = 0, min = 0;
  for (const CriticalPoint& c : cps.points) {
    double best = 1e9;
    for (int i = 0; i < 3; ++i)
      for (double s : {-1.0, 1.0}) {
        Vec3 e = Vec3::Zero();
        e[i] = s * ax[i];
        best = std::min(best, (c.point - e).norm());
      }
    CHECK(best < 1e-6);
    CHECK(c.mean_curvature == doctest::Approx(oracle::ellipsoid_H(ax, c.point)).epsilon(1e-8));
    max += c.type == MorseType::maximum;
    saddle += c.type == MorseType::saddle;
    min += c.type == MorseType::minimum;
  }
  CHECK(max == 2);
  CHECK(saddle == 2);
  CHECK(min == 2);
  // Sorted by H, largest first: the long axis carries the maximum.
  CHECK(std::abs(cps.points.front().point.x()) == doctest::Approx(2.0));
}

TEST_CASE("ball has constant H") {
  const CriticalPointSet cps = find_critical_points(make_ball(1.3), 32, 1e-6);
  CHECK(cps.h_constant);
  CHECK(cps.points.empty());
}

TEST_CASE("bumpy ball critical points have small gradient") {
  const ImplicitDomain e = make_bumpy_ball(1.0, 0.1);
  const CriticalPointSet cps = find_critical_points(e, 64, 1e-6);
  REQUIRE_FALSE(cps.points.empty());
  for (const CriticalPoint& c : cps.points) CHECK(surface_grad_H(e, c.point).norm() < 1e-6);
}

TEST_CASE("invalid domains are rejected") {
  CHECK_THROWS_AS(make_bumpy_ball(1.0, 0.25), InvalidArgument);
  CHECK_THROWS_AS(make_ball(-1.0), InvalidArgument);
  CHECK_THROWS_AS(find_critical_points(make_ellipsoid(Vec3(2, 1.5, 1)), 2, 1e-6), InvalidArgument);
}

}
