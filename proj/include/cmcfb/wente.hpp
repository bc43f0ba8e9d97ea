#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "cmcfb/disk_map.hpp"

namespace cmc {

/// Real samples on the DiskMap polar grid, boundary ring included as row n_r.
struct ScalarField {
  int n_r = 0;
  int n_theta = 0;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(int n_r, int n_theta);

  static ScalarField sample(int n_r, int n_theta, const std::function<double(Complex)>& f);

  /// Throws InvalidArgument on a bad grid or non-finite samples.
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

  double& at(int j, int k) { return values[node(j, k)]; }
  double at(int j, int k) const { return values[node(j, k)]; }
};

/// Three-component fields share the DiskMap container.
using VectorField = DiskMap;

/// a_x b_y - a_y b_x at every node.
ScalarField jacobian_rhs(const ScalarField& a, const ScalarField& b);

/// L2 norm of the gradient over the interior cells (midpoint rule).
double gradient_l2(const ScalarField& a);
double gradient_l2(const VectorField& a);

/// Finite-volume solver for -(u_xx + u_yy) = rhs on the unit disk with u = 0
/// on the circle. The symmetric system is factored once per grid.
class PoissonSolver {
 public:
  PoissonSolver(int n_r, int n_theta);
  ~PoissonSolver();
  PoissonSolver(PoissonSolver&&) noexcept;
  PoissonSolver& operator=(PoissonSolver&&) noexcept;

  /// The boundary ring of the result is zero. Throws SingularSystem when the
  /// relative residual exceeds 1e-10.
  ScalarField solve(const ScalarField& rhs, double* relative_residual = nullptr) const;

  /// Discrete Dirichlet energy of the quadratic form (zero boundary data).
  double energy(const ScalarField& u) const;

  int n_r() const;
  int n_theta() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

ScalarField poisson_solve_disk(const ScalarField& rhs);

struct WenteCheck {
  double ratio_inf = 0.0;
  double ratio_grad = 0.0;
  double u_inf = 0.0;
  double u_grad = 0.0;
  double grad_a = 0.0;
  double grad_b = 0.0;
  /// The right-hand side a_x b_y - a_y b_x.
  ScalarField rhs;
  ScalarField u;
};

/// Solves Delta u = a_x b_y - a_y b_x (Delta = -(d_xx + d_yy), zero boundary)
/// and returns |u|_inf / ((1/2pi)|da||db|) and |du| / (sqrt(3/16pi)|da||db|).
/// A zero product gives ratios 0.
WenteCheck wente_check(const ScalarField& a, const ScalarField& b,
                       const PoissonSolver* solver = nullptr);

struct TrilinearCheck {
  double lhs = 0.0;
  /// Per-instance bound on C from the gradient Wente constant by duality.
  double bound_factor = 0.0;
  double C_estimate = 0.0;
};

/// |int <u, v_x ^ v_y>| / (|du| |dv|^2). The integral is the sum over grid
/// cells of <mean u, vector area of the image cell>, which telescopes to the
/// (zero) boundary term for constant u. Throws InvalidArgument unless v
/// vanishes on the ring within 1e-12.
TrilinearCheck trilinear_check(const VectorField& u, const VectorField& v);

/// n-th positive zero of J_m.
double bessel_zero(int m, int n);

/// Band-limited Fourier-Bessel field sum_{m<=3, n<=3} c J_m(j_{m,n} r) cos/sin(m theta)
/// with seeded coefficients in [-1, 1]. Unless zero_boundary, a seeded
/// linear term c x + d y is added so the trace does not vanish.
ScalarField random_field(std::uint64_t seed, int n_r, int n_theta, bool zero_boundary);
VectorField random_vector_field(std::uint64_t seed, int n_r, int n_theta, bool zero_boundary);

struct WenteSweepRow {
  std::uint64_t seed = 0;
  double ratio_inf = 0.0;
  double ratio_grad = 0.0;
  double C_estimate = 0.0;
  double bound_factor = 0.0;
};

struct WenteSweep {
  std::vector<WenteSweepRow> rows;
  double max_ratio_inf = 0.0;
  double max_ratio_grad = 0.0;
  /// Empirical trilinear constant: max C_estimate over the rows.
  double C0 = 0.0;
};

/// Instance i uses seeds base_seed + i for the pair (a, b) and for (u, v).
WenteSweep wente_sweep(int instances, int n_r, int n_theta, std::uint64_t base_seed);

}  // namespace cmc
