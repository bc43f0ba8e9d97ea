#include "cmcfb/wente.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>

#include "cmcfb/errors.hpp"

namespace cmc {

ScalarField::ScalarField(int n_r_, int n_theta_) : n_r(n_r_), n_theta(n_theta_) {
  if (n_r < 4 || n_theta < 8 || n_theta % 2 != 0)
    throw InvalidArgument("grid needs n_r >= 4 and even n_theta >= 8");
  values.assign(static_cast<size_t>(size()), 0.0);
}

ScalarField ScalarField::sample(int n_r, int n_theta, const std::function<double(Complex)>& f) {
  ScalarField s(n_r, n_theta);
  for (int j = 0; j <= n_r; ++j)
    for (int k = 0; k < n_theta; ++k) s.at(j, k) = f(s.z(j, k));
  s.validate();
  return s;
}

void ScalarField::validate() const {
  if (n_r < 4 || n_theta < 8 || n_theta % 2 != 0)
    throw InvalidArgument("grid needs n_r >= 4 and even n_theta >= 8");
  if (static_cast<int>(values.size()) != size()) throw InvalidArgument("field size does not match grid");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("field has non-finite samples");
}

namespace {

void check_same_grid(const ScalarField& a, const ScalarField& b) {
  a.validate();
  b.validate();
  if (a.n_r != b.n_r || a.n_theta != b.n_theta) throw InvalidArgument("fields live on different grids");
}

DiskMap pack(const ScalarField& a, const ScalarField& b) {
  DiskMap m(a.n_r, a.n_theta);
  for (int i = 0; i < a.size(); ++i) m.values[i] = Vec3(a.values[i], b.values[i], 0.0);
  return m;
}

}  // namespace

ScalarField jacobian_rhs(const ScalarField& a, const ScalarField& b) {
  check_same_grid(a, b);
  const MapGradient g = gradient(pack(a, b));
  ScalarField out(a.n_r, a.n_theta);
  for (int i = 0; i < a.size(); ++i) out.values[i] = g.ux[i].x() * g.uy[i].y() - g.uy[i].x() * g.ux[i].y();
  return out;
}

double gradient_l2(const VectorField& a) {
  const MapGradient g = gradient(a);
  double s = 0.0;
  for (int j = 0; j < a.n_r; ++j)
    for (int k = 0; k < a.n_theta; ++k) {
      const int id = a.node(j, k);
      s += (g.ux[id].squaredNorm() + g.uy[id].squaredNorm()) * a.cell_area(j);
    }
  return std::sqrt(s);
}

double gradient_l2(const ScalarField& a) {
  a.validate();
  return gradient_l2(pack(a, ScalarField(a.n_r, a.n_theta)));
}

struct PoissonSolver::Impl {
  int n_r;
  int n_theta;
  Eigen::SparseMatrix<double> A;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

PoissonSolver::PoissonSolver(int n_r, int n_theta) : impl_(std::make_unique<Impl>()) {
  ScalarField probe(n_r, n_theta);  // validates the grid
  impl_->n_r = n_r;
  impl_->n_theta = n_theta;
  const double h = 1.0 / n_r;
  const double dt = 2.0 * kPi / n_theta;
  const int n = n_r * n_theta;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n) * 5);
  for (int j = 0; j < n_r; ++j) {
    const double r = (j + 0.5) * h;
    const double w_in = j == 0 ? 0.0 : j * h * dt / h;
    // The last cell sees the boundary value zero at distance h/2.
    const double w_out = j == n_r - 1 ? 1.0 * dt / (0.5 * h) : (j + 1) * h * dt / h;
    const double w_ang = h / (r * dt);
    for (int k = 0; k < n_theta; ++k) {
      const int id = j * n_theta + k;
      trip.emplace_back(id, id, w_in + w_out + 2.0 * w_ang);
      if (j > 0) trip.emplace_back(id, id - n_theta, -w_in);
      if (j < n_r - 1) trip.emplace_back(id, id + n_theta, -w_out);
      trip.emplace_back(id, j * n_theta + (k + 1) % n_theta, -w_ang);
      trip.emplace_back(id, j * n_theta + (k + n_theta - 1) % n_theta, -w_ang);
    }
  }
  impl_->A.resize(n, n);
  impl_->A.setFromTriplets(trip.begin(), trip.end());
  impl_->ldlt.compute(impl_->A);
  if (impl_->ldlt.info() != Eigen::Success) throw SingularSystem("Poisson matrix factorization failed");
}

PoissonSolver::~PoissonSolver() = default;
PoissonSolver::PoissonSolver(PoissonSolver&&) noexcept = default;
PoissonSolver& PoissonSolver::operator=(PoissonSolver&&) noexcept = default;

int PoissonSolver::n_r() const { return impl_->n_r; }
int PoissonSolver::n_theta() const { return impl_->n_theta; }

ScalarField PoissonSolver::solve(const ScalarField& rhs, double* relative_residual) const {
  rhs.validate();
  if (rhs.n_r != impl_->n_r || rhs.n_theta != impl_->n_theta)
    throw InvalidArgument("right-hand side does not match the solver grid");
  const int n = impl_->n_r * impl_->n_theta;
  Eigen::VectorXd b(n);
  for (int j = 0; j < rhs.n_r; ++j) {
    const double w = rhs.radius(j) * rhs.h() * rhs.dtheta();
    for (int k = 0; k < rhs.n_theta; ++k) b[j * rhs.n_theta + k] = rhs.at(j, k) * w;
  }
  const Eigen::VectorXd x = impl_->ldlt.solve(b);
  if (impl_->ldlt.info() != Eigen::Success) throw SingularSystem("Poisson solve failed");
  const double bn = b.norm();
  const double res = bn > 0 ? (impl_->A * x - b).norm() / bn : (impl_->A * x).norm();
  if (relative_residual) *relative_residual = res;
  if (!(res <= 1e-10)) throw SingularSystem("Poisson residual " + std::to_string(res));
  ScalarField u(rhs.n_r, rhs.n_theta);
  for (int i = 0; i < n; ++i) u.values[i] = x[i];
  return u;
}

double PoissonSolver::energy(const ScalarField& u) const {
  if (u.n_r != impl_->n_r || u.n_theta != impl_->n_theta)
    throw InvalidArgument("field does not match the solver grid");
  const int n = impl_->n_r * impl_->n_theta;
  const Eigen::Map<const Eigen::VectorXd> x(u.values.data(), n);
  return x.dot(impl_->A * x);
}

ScalarField poisson_solve_disk(const ScalarField& rhs) {
  return PoissonSolver(rhs.n_r, rhs.n_theta).solve(rhs);
}

WenteCheck wente_check(const ScalarField& a, const ScalarField& b, const PoissonSolver* solver) {
  check_same_grid(a, b);
  WenteCheck out;
  out.rhs = jacobian_rhs(a, b);
  std::unique_ptr<PoissonSolver> own;
  if (!solver || solver->n_r() != a.n_r || solver->n_theta() != a.n_theta) {
    own = std::make_unique<PoissonSolver>(a.n_r, a.n_theta);
    solver = own.get();
  }
  out.u = solver->solve(out.rhs);
  for (int i = 0; i < a.n_r * a.n_theta; ++i) out.u_inf = std::max(out.u_inf, std::abs(out.u.values[i]));
  out.u_grad = std::sqrt(std::max(0.0, solver->energy(out.u)));
  out.grad_a = gradient_l2(a);
  out.grad_b = gradient_l2(b);
  const double prod = out.grad_a * out.grad_b;
  if (prod > 0) {
    out.ratio_inf = out.u_inf / (prod / (2.0 * kPi));
    out.ratio_grad = out.u_grad / (std::sqrt(3.0 / (16.0 * kPi)) * prod);
  }
  return out;
}

TrilinearCheck trilinear_check(const VectorField& u, const VectorField& v) {
  u.validate();
  v.validate();
  if (u.n_r != v.n_r || u.n_theta != v.n_theta) throw InvalidArgument("fields live on different grids");
  for (int k = 0; k < v.n_theta; ++k)
    if (v.at(v.n_r, k).norm() > 1e-12) throw InvalidArgument("v must vanish on the boundary");

  const int nt = v.n_theta;
  Vec3 center_area = Vec3::Zero();
  Vec3 center_u = Vec3::Zero();
  for (int k = 0; k < nt; ++k) {
    center_area += 0.5 * v.at(0, k).cross(v.at(0, k + 1));
    center_u += u.at(0, k);
  }
  double lhs = (center_u / nt).dot(center_area);
  for (int j = 0; j < v.n_r; ++j)
    for (int k = 0; k < nt; ++k) {
      const Vec3& p0 = v.at(j, k);
      const Vec3& p1 = v.at(j + 1, k);
      const Vec3& p2 = v.at(j + 1, k + 1);
      const Vec3& p3 = v.at(j, k + 1);
      const Vec3 area = 0.5 * (p2 - p0).cross(p3 - p1);
      const Vec3 um = 0.25 * (u.at(j, k) + u.at(j + 1, k) + u.at(j + 1, k + 1) + u.at(j, k + 1));
      lhs += um.dot(area);
    }

  TrilinearCheck out;
  out.lhs = lhs;
  std::array<double, 3> gu{};
  std::array<double, 3> gv{};
  for (int c = 0; c < 3; ++c) {
    ScalarField su(u.n_r, nt), sv(v.n_r, nt);
    for (int i = 0; i < u.size(); ++i) {
      su.values[i] = u.values[i][c];
      sv.values[i] = v.values[i][c];
    }
    gu[c] = gradient_l2(su);
    gv[c] = gradient_l2(sv);
  }
  const double nu = std::sqrt(gu[0] * gu[0] + gu[1] * gu[1] + gu[2] * gu[2]);
  const double nv2 = gv[0] * gv[0] + gv[1] * gv[1] + gv[2] * gv[2];
  const double denom = nu * nv2;
  if (denom > 0) {
    out.C_estimate = std::abs(lhs) / denom;
    // Component i pairs u^i with the Jacobian of (v^j, v^k); moving one
    // derivative onto u and applying the gradient bound gives the factor.
    const double cyc = gu[0] * gv[1] * gv[2] + gu[1] * gv[2] * gv[0] + gu[2] * gv[0] * gv[1];
    out.bound_factor = std::sqrt(3.0 / (16.0 * kPi)) * cyc / denom;
  }
  return out;
}

double bessel_zero(int m, int n) {
  if (m < 0 || n < 1) throw InvalidArgument("bessel_zero needs m >= 0 and n >= 1");
  const double beta = (n + 0.5 * m - 0.25) * kPi;
  double x = beta - (4.0 * m * m - 1.0) / (8.0 * beta);
  for (int it = 0; it < 50; ++it) {
    const double f = std::cyl_bessel_j(static_cast<double>(m), x);
    const double df = m == 0 ? -std::cyl_bessel_j(1.0, x)
                             : 0.5 * (std::cyl_bessel_j(m - 1.0, x) - std::cyl_bessel_j(m + 1.0, x));
    const double dx = f / df;
    x -= dx;
    if (std::abs(dx) < 1e-14 * x) break;
  }
  return x;
}

namespace {

constexpr int kModes = 3;
constexpr int kRadial = 3;

double unit_uniform(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

struct FourierBessel {
  struct Term {
    int m;
    double k;
    double c;
    double s;
  };
  std::vector<Term> terms;
  double lx = 0.0;
  double ly = 0.0;

  FourierBessel(std::uint64_t seed, bool zero_boundary) {
    std::mt19937_64 rng(seed);
    for (int m = 0; m <= kModes; ++m)
      for (int n = 1; n <= kRadial; ++n) {
        const double k = bessel_zero(m, n);
        const double c = unit_uniform(rng) / k;
        const double s = m == 0 ? 0.0 : unit_uniform(rng) / k;
        terms.push_back({m, k, c, s});
      }
    if (!zero_boundary) {
      lx = unit_uniform(rng);
      ly = unit_uniform(rng);
    }
  }

  ScalarField sample(int n_r, int n_theta) const {
    ScalarField out(n_r, n_theta);
    std::vector<double> radial(terms.size());
    for (int j = 0; j <= n_r; ++j) {
      const double r = out.radius(j);
      for (size_t t = 0; t < terms.size(); ++t)
        radial[t] = std::cyl_bessel_j(static_cast<double>(terms[t].m), terms[t].k * r);
      for (int k = 0; k < n_theta; ++k) {
        const double th = out.theta(k);
        double v = r * (lx * std::cos(th) + ly * std::sin(th));
        for (size_t t = 0; t < terms.size(); ++t)
          v += radial[t] * (terms[t].c * std::cos(terms[t].m * th) + terms[t].s * std::sin(terms[t].m * th));
        out.at(j, k) = v;
      }
    }
    return out;
  }
};

}  // namespace

ScalarField random_field(std::uint64_t seed, int n_r, int n_theta, bool zero_boundary) {
  ScalarField out = FourierBessel(seed, zero_boundary).sample(n_r, n_theta);
  if (zero_boundary)
    for (int k = 0; k < n_theta; ++k) out.at(n_r, k) = 0.0;
  return out;
}

VectorField random_vector_field(std::uint64_t seed, int n_r, int n_theta, bool zero_boundary) {
  std::mt19937_64 rng(seed);
  std::array<ScalarField, 3> c;
  for (auto& f : c) f = random_field(rng(), n_r, n_theta, zero_boundary);
  VectorField out(n_r, n_theta);
  for (int i = 0; i < out.size(); ++i) out.values[i] = Vec3(c[0].values[i], c[1].values[i], c[2].values[i]);
  return out;
}

WenteSweep wente_sweep(int instances, int n_r, int n_theta, std::uint64_t base_seed) {
  if (instances < 1) throw InvalidArgument("sweep needs at least one instance");
  const PoissonSolver solver(n_r, n_theta);
  WenteSweep out;
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    std::mt19937_64 rng(seed);
    const ScalarField a = random_field(rng(), n_r, n_theta, false);
    const ScalarField b = random_field(rng(), n_r, n_theta, false);
    const VectorField u = random_vector_field(rng(), n_r, n_theta, false);
    const VectorField v = random_vector_field(rng(), n_r, n_theta, true);
    const WenteCheck w = wente_check(a, b, &solver);
    const TrilinearCheck t = trilinear_check(u, v);
    out.rows.push_back({seed, w.ratio_inf, w.ratio_grad, t.C_estimate, t.bound_factor});
    out.max_ratio_inf = std::max(out.max_ratio_inf, w.ratio_inf);
    out.max_ratio_grad = std::max(out.max_ratio_grad, w.ratio_grad);
    out.C0 = std::max(out.C0, t.C_estimate);
  }
  return out;
}

}  // namespace cmc
