#include <doctest.h>

#include "cmcfb/errors.hpp"
#include "cmcfb/wente.hpp"
#include "oracles.hpp"

using namespace cmc;

namespace {

ScalarField coord_x(int n) { return ScalarField::sample(n, n, [](Complex z) { return z.real(); }); }
ScalarField coord_y(int n) { return ScalarField::sample(n, n, [](Complex z) { return z.imag(); }); }

double interior_error(const ScalarField& u, double (*exact)(double, double)) {
  double e = 0.0;
  for (int j = 0; j < u.n_r; ++j)
    for (int k = 0; k < u.n_theta; ++k) {
      const Complex z = u.z(j, k);
      e = std::max(e, std::abs(u.at(j, k) - exact(z.real(), z.imag())));
    }
  return e;
}

}  // namespace

TEST_SUITE("wente") {

TEST_CASE("jacobian right-hand side") {
  const ScalarField x = coord_x(16), y = coord_y(16);
  for (double v : jacobian_rhs(x, y).values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : jacobian_rhs(x, x).values) CHECK(std::abs(v) < 1e-14);
  const ScalarField x2 = ScalarField::sample(16, 16, [](Complex z) { return z.real() * z.real(); });
  const ScalarField j = jacobian_rhs(x2, y);
  for (int i = 0; i < j.size(); ++i) {
    const Complex z = j.z(i / 16, i % 16);
    CHECK(j.values[i] == doctest::Approx(2 * z.real()).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("Poisson solver on closed-form solutions") {
  const ScalarField one = ScalarField::sample(64, 64, [](Complex) { return 1.0; });
  const ScalarField u = poisson_solve_disk(one);
  CHECK(interior_error(u, oracle::poisson_const) < 1e-4);
  double umax = 0.0;
  for (double v : u.values) umax = std::max(umax, v);
  CHECK(umax == doctest::Approx(0.25).epsilon(1e-3));
  const ScalarField zero = poisson_solve_disk(ScalarField(32, 32));
  for (double v : zero.values) CHECK(v == 0.0);

  double rel = 1.0;
  PoissonSolver(64, 64).solve(one, &rel);
  CHECK(rel <= 1e-10);
}

TEST_CASE("manufactured solution converges at second order") {
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const ScalarField f = ScalarField::sample(n, n, [](Complex z) { return oracle::poisson_manufactured_rhs(z.real(), z.imag()); });
    const double err = interior_error(poisson_solve_disk(f), oracle::poisson_manufactured);
    if (prev > 0) CHECK(oracle::order(prev, err) >= 1.9);
    prev = err;
  }
}

TEST_CASE("analytic Wente instance") {
  const WenteCheck w = wente_check(coord_x(128), coord_y(128));
  CHECK(w.grad_a == doctest::Approx(std::sqrt(kPi)).epsilon(1e-10));
  CHECK(w.u_inf == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(w.u_grad == doctest::Approx(std::sqrt(kPi / 8)).epsilon(1e-3));
  CHECK(w.ratio_inf == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(w.ratio_grad == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-3));

  const WenteCheck same = wente_check(coord_x(32), coord_x(32));
  CHECK(same.ratio_inf == 0.0);
  CHECK(std::abs(same.ratio_grad) < 1e-12);
}

TEST_CASE("antisymmetry of the right-hand side") {
  const ScalarField a = random_field(3, 32, 64, false);
  const ScalarField b = random_field(4, 32, 64, false);
  const WenteCheck ab = wente_check(a, b), ba = wente_check(b, a);
  for (size_t i = 0; i < ab.rhs.values.size(); ++i) CHECK(std::abs(ab.rhs.values[i] + ba.rhs.values[i]) <= 1e-12);
  CHECK(ab.ratio_inf == doctest::Approx(ba.ratio_inf));
}

TEST_CASE("Bessel zeros and band-limited fields") {
  CHECK(bessel_zero(0, 1) == doctest::Approx(2.404825557695773).epsilon(1e-13));
  CHECK(bessel_zero(1, 1) == doctest::Approx(3.831705970207512).epsilon(1e-13));
  CHECK(bessel_zero(3, 3) == doctest::Approx(13.01520072169843).epsilon(1e-12));
  const ScalarField v = random_field(9, 16, 32, true);
  for (int k = 0; k < 32; ++k) CHECK(v.at(16, k) == 0.0);
  CHECK(dmap_bytes(random_vector_field(9, 8, 16, true)) == dmap_bytes(random_vector_field(9, 8, 16, true)));
}

TEST_CASE("trilinear estimate") {
  const VectorField v = random_vector_field(21, 48, 96, true);
  VectorField c(48, 96);
  for (Vec3& x : c.values) x = Vec3(0.7, -1.2, 2.0);
  CHECK(std::abs(trilinear_check(c, v).lhs) <= 1e-10);
  CHECK(trilinear_check(random_vector_field(2, 48, 96, false), VectorField(48, 96)).lhs == 0.0);
  const TrilinearCheck t = trilinear_check(random_vector_field(2, 48, 96, false), v);
  CHECK(t.C_estimate > 0);
  CHECK(t.C_estimate <= t.bound_factor);
  CHECK_THROWS_AS(trilinear_check(v, random_vector_field(2, 48, 96, false)), InvalidArgument);
}

TEST_CASE("trilinear constant is stable across resolutions") {
  const WenteSweep coarse = wente_sweep(200, 64, 64, 1);
  const WenteSweep fine = wente_sweep(200, 128, 128, 1);
  CHECK(std::isfinite(coarse.C0));
  CHECK(std::abs(coarse.C0 / fine.C0 - 1) <= 0.1);
  // The exported default must bound the sweep and keep nu admissible.
  CHECK(fine.C0 <= 0.014);
  for (const WenteSweepRow& r : fine.rows) CHECK(r.C_estimate <= r.bound_factor);
}

}
