#include "cmcfb/domain.hpp"

#include <algorithm>
#include <cmath>

#include "cmcfb/errors.hpp"

namespace cmc {

ImplicitDomain make_ball(double radius, const Vec3& center) {
  if (!(radius > 0)) throw InvalidArgument("ball radius must be positive");
  ImplicitDomain d;
  d.name = "ball";
  d.phi = [=](const Vec3& x) { return (x - center).squaredNorm() - radius * radius; };
  d.grad_phi = [=](const Vec3& x) -> Vec3 { return 2.0 * (x - center); };
  d.hess_phi = [](const Vec3&) -> Mat3 { return 2.0 * Mat3::Identity(); };
  const Vec3 r = Vec3::Constant(1.05 * radius);
  d.bounding_box = {center - r, center + r};
  return d;
}

ImplicitDomain make_ellipsoid(const Vec3& semi_axes) {
  if (!(semi_axes.minCoeff() > 0)) throw InvalidArgument("ellipsoid semi-axes must be positive");
  const Vec3 inv2 = semi_axes.cwiseProduct(semi_axes).cwiseInverse();
  ImplicitDomain d;
  d.name = "ellipsoid";
  d.phi = [=](const Vec3& x) { return x.cwiseProduct(x).dot(inv2) - 1.0; };
  d.grad_phi = [=](const Vec3& x) -> Vec3 { return 2.0 * x.cwiseProduct(inv2); };
  d.hess_phi = [=](const Vec3&) -> Mat3 { return (2.0 * inv2).asDiagonal(); };
  d.bounding_box = {-1.05 * semi_axes, 1.05 * semi_axes};
  return d;
}

ImplicitDomain make_bumpy_ball(double radius, double amplitude) {
  if (!(radius > 0)) throw InvalidArgument("bumpy ball radius must be positive");
  if (!(std::abs(amplitude) < 0.2)) throw InvalidArgument("bumpy ball amplitude must be below 0.2");
  const double R = radius, e = amplitude;
  // G(x) = R^2 Y(x / R), a sum of degree-2 and degree-3 harmonic polynomials.
  auto G = [=](const Vec3& x) {
    return x.x() * x.y() +
           0.4 * x.z() * (2 * x.z() * x.z() - 3 * x.x() * x.x() - 3 * x.y() * x.y()) / R;
  };
  auto dG = [=](const Vec3& x) -> Vec3 {
    return {x.y() - 2.4 * x.x() * x.z() / R, x.x() - 2.4 * x.y() * x.z() / R,
            0.4 * (6 * x.z() * x.z() - 3 * x.x() * x.x() - 3 * x.y() * x.y()) / R};
  };
  auto d2G = [=](const Vec3& x) -> Mat3 {
    Mat3 h;
    h << -2.4 * x.z() / R, 1.0, -2.4 * x.x() / R,
         1.0, -2.4 * x.z() / R, -2.4 * x.y() / R,
         -2.4 * x.x() / R, -2.4 * x.y() / R, 4.8 * x.z() / R;
    return h;
  };
  ImplicitDomain d;
  d.name = "bumpy_ball";
  d.phi = [=](const Vec3& x) { return x.squaredNorm() - R * R - e * G(x); };
  d.grad_phi = [=](const Vec3& x) -> Vec3 { return 2.0 * x - e * dG(x); };
  d.hess_phi = [=](const Vec3& x) -> Mat3 { return 2.0 * Mat3::Identity() - e * d2G(x); };
  const Vec3 r = Vec3::Constant(R * (1.0 + 2.0 * std::abs(e)) + 0.05 * R);
  d.bounding_box = {-r, r};
  return d;
}

ImplicitDomain make_half_space() {
  ImplicitDomain d;
  d.name = "half_space";
  d.phi = [](const Vec3& x) { return x.z(); };
  d.grad_phi = [](const Vec3&) -> Vec3 { return Vec3::UnitZ(); };
  d.hess_phi = [](const Vec3&) -> Mat3 { return Mat3::Zero(); };
  d.bounding_box = {Vec3::Constant(-10.0), Vec3::Constant(10.0)};
  return d;
}

std::array<Vec3, 2> tangent_basis(const Vec3& normal) {
  int axis = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(normal[i]) < std::abs(normal[axis])) axis = i;
  Vec3 t1 = Vec3::Unit(axis);
  t1 -= t1.dot(normal) * normal;
  t1.normalize();
  Vec3 t2 = normal.cross(t1);
  return {t1, t2};
}

Vec3 project_to_boundary(const ImplicitDomain& domain, const Vec3& p) {
  const double scale = domain.scale();
  const double tol = 1e-12 * scale;
  constexpr int kMaxSteps = 50;
  int steps = 0;

  // Newton along the gradient line to land on the level set.
  Vec3 q = p;
  for (; steps < kMaxSteps; ++steps) {
    const Vec3 g = domain.grad_phi(q);
    const double g2 = g.squaredNorm();
    if (g2 < 1e-24) throw DegenerateGradient("vanishing gradient during projection");
    const double f = domain.phi(q);
    if (std::abs(f) / std::sqrt(g2) < 1e-3 * scale) break;
    Vec3 dq = -f / g2 * g;
    const double len = dq.norm();
    if (len > 0.25 * scale) dq *= 0.25 * scale / len;
    q += dq;
  }

  // Closest-point refinement: q - p = t grad(q), phi(q) = 0.
  Vec3 g = domain.grad_phi(q);
  double t = (q - p).dot(g) / g.squaredNorm();
  for (; steps < kMaxSteps; ++steps) {
    g = domain.grad_phi(q);
    const double f = domain.phi(q);
    const Vec3 r = q - p - t * g;
    const double gn = g.norm();
    const Vec3 d = q - p;
    const double dn = d.norm();
    const bool on_level = std::abs(f) / gn < tol;
    const bool aligned = dn < tol || d.cross(g).norm() < 1e-9 * dn * gn;
    if (on_level && aligned && r.norm() < 1e-10 * scale) return q;

    Eigen::Matrix4d J = Eigen::Matrix4d::Zero();
    J.topLeftCorner<3, 3>() = Mat3::Identity() - t * domain.hess_phi(q);
    J.block<3, 1>(0, 3) = -g;
    J.block<1, 3>(3, 0) = g.transpose();
    Eigen::Vector4d F;
    F << r, f;
    const Eigen::Vector4d step = J.fullPivLu().solve(-F);
    Vec3 dq = step.head<3>();
    // Converged to roundoff: the remaining update is below representable scale.
    if (on_level && dq.norm() < 1e-14 * scale) return q;
    const double len = dq.norm();
    if (len > 0.25 * scale) dq *= 0.25 * scale / len;
    q += dq;
    t += step[3];
  }
  throw NonConvergence("projection to boundary did not converge in 50 steps");
}

Vec3 boundary_normal(const ImplicitDomain& domain, const Vec3& q) {
  const Vec3 g = domain.grad_phi(q);
  const double n = g.norm();
  if (n < 1e-12) throw DegenerateGradient("gradient norm below 1e-12");
  return g / n;
}

Mat3 normal_derivative(const ImplicitDomain& domain, const Vec3& q) {
  const Vec3 g = domain.grad_phi(q);
  const double n = g.norm();
  if (n < 1e-12) throw DegenerateGradient("gradient norm below 1e-12");
  const Vec3 N = g / n;
  return (Mat3::Identity() - N * N.transpose()) * domain.hess_phi(q) / n;
}

ShapeOperator shape_operator(const ImplicitDomain& domain, const Vec3& q) {
  const Vec3 N = boundary_normal(domain, q);
  const auto basis = tangent_basis(N);
  const Mat3 dN = normal_derivative(domain, q);
  ShapeOperator s;
  s.basis = basis;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s.matrix(i, j) = basis[i].dot(dN * basis[j]);
  s.mean_curvature = 0.5 * s.matrix.trace();
  return s;
}

double mean_curvature(const ImplicitDomain& domain, const Vec3& q) {
  return shape_operator(domain, q).mean_curvature;
}

Vec3 surface_grad_H(const ImplicitDomain& domain, const Vec3& q) {
  const Vec3 N = boundary_normal(domain, q);
  const auto basis = tangent_basis(N);
  const double h = domain.fd_step();
  Vec3 grad = Vec3::Zero();
  for (const Vec3& t : basis) {
    const double hp = mean_curvature(domain, project_to_boundary(domain, q + h * t));
    const double hm = mean_curvature(domain, project_to_boundary(domain, q - h * t));
    grad += (hp - hm) / (2 * h) * t;
  }
  return grad;
}

Vec3 graph_point(const ImplicitDomain& domain, const Vec3& q,
                 const std::array<Vec3, 2>& basis, const Vec2& z) {
  const Vec3 N = boundary_normal(domain, q);
  const Vec3 base = q + z.x() * basis[0] + z.y() * basis[1];
  double w = 0;
  const double tol = 1e-13 * domain.scale();
  for (int it = 0; it < 50; ++it) {
    const Vec3 p = base + w * N;
    const double f = domain.phi(p);
    const double df = domain.grad_phi(p).dot(N);
    if (std::abs(df) < 1e-14) throw DegenerateGradient("boundary is not a graph over the tangent plane");
    const double dw = -f / df;
    w += dw;
    if (std::abs(dw) < tol) {
      // One more step brings the quadratically converging iterate to roundoff.
      const Vec3 q1 = base + w * N;
      w -= domain.phi(q1) / domain.grad_phi(q1).dot(N);
      return base + w * N;
    }
  }
  throw NonConvergence("graph point did not converge");
}

NormalJet normal_jet(const ImplicitDomain& domain, const Vec3& q) {
  NormalJet jet;
  jet.base_point = q;
  jet.normal = boundary_normal(domain, q);
  jet.basis = tangent_basis(jet.normal);
  const Mat3 dN = normal_derivative(domain, q);
  jet.d_normal.col(0) = dN * jet.basis[0];
  jet.d_normal.col(1) = dN * jet.basis[1];

  // Partial derivatives of N(graph(z)) with respect to z_j, evaluated
  // analytically at an arbitrary graph point.
  const Vec3 N0 = jet.normal;
  auto first_partials = [&](const Vec2& z) {
    const Vec3 p = graph_point(domain, q, jet.basis, z);
    const Vec3 g = domain.grad_phi(p);
    const Mat3 D = normal_derivative(domain, p);
    std::array<Vec3, 2> out;
    for (int j = 0; j < 2; ++j) {
      const double dw = -g.dot(jet.basis[j]) / g.dot(N0);
      out[j] = D * (jet.basis[j] + dw * N0);
    }
    return out;
  };
  const double h = domain.fd_step();
  const auto p1 = first_partials(Vec2(h, 0)), m1 = first_partials(Vec2(-h, 0));
  const auto p2 = first_partials(Vec2(0, h)), m2 = first_partials(Vec2(0, -h));
  jet.d2_normal[0] = (p1[0] - m1[0]) / (2 * h);
  jet.d2_normal[1] = 0.5 * ((p1[1] - m1[1]) + (p2[0] - m2[0])) / (2 * h);
  jet.d2_normal[2] = (p2[1] - m2[1]) / (2 * h);
  return jet;
}

std::string to_string(MorseType t) {
  switch (t) {
    case MorseType::minimum: return "minimum";
    case MorseType::maximum: return "maximum";
    case MorseType::saddle: return "saddle";
    case MorseType::degenerate: return "degenerate";
  }
  return "unknown";
}

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return pts;
}

Vec3 boundary_point_along(const ImplicitDomain& domain, const Vec3& direction) {
  const Vec3 c = domain.bounding_box.center();
  const Vec3 d = direction.normalized();
  const double diag = domain.scale();
  if (domain.phi(c) >= 0) return project_to_boundary(domain, c + 1e-3 * diag * d);
  double lo = 0, hi = 0;
  constexpr int kMarch = 64;
  for (int i = 1; i <= kMarch; ++i) {
    const double t = diag * i / kMarch;
    if (domain.phi(c + t * d) > 0) {
      hi = t;
      lo = diag * (i - 1) / kMarch;
      break;
    }
  }
  if (hi == 0) throw NonConvergence("ray did not leave the domain inside the bounding box");
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (domain.phi(c + mid * d) > 0 ? hi : lo) = mid;
  }
  return project_to_boundary(domain, c + 0.5 * (lo + hi) * d);
}

Mat2 tangent_jacobian(const ImplicitDomain& domain, const TangentField& field,
                      const Vec3& q) {
  const auto basis = tangent_basis(boundary_normal(domain, q));
  const double h = domain.fd_step();
  Mat2 J;
  for (int i = 0; i < 2; ++i) {
    const Vec3 fp = field(project_to_boundary(domain, q + h * basis[i]));
    const Vec3 fm = field(project_to_boundary(domain, q - h * basis[i]));
    const Vec3 d = (fp - fm) / (2 * h);
    J(0, i) = basis[0].dot(d);
    J(1, i) = basis[1].dot(d);
  }
  return J;
}

bool tangent_newton(const ImplicitDomain& domain, const TangentField& field,
                    const Vec3& seed, double tol, Vec3& out, int max_iter) {
  Vec3 q = seed;
  Vec3 f = field(q);
  const double max_step = 0.1 * domain.scale();
  for (int it = 0; it < max_iter; ++it) {
    if (f.norm() < tol) {
      out = q;
      return true;
    }
    const auto basis = tangent_basis(boundary_normal(domain, q));
    const Vec2 ft(basis[0].dot(f), basis[1].dot(f));
    const Mat2 J = tangent_jacobian(domain, field, q);
    const double mu = 1e-12 * std::max(J.squaredNorm(), 1e-300);
    Vec2 step = -(J.transpose() * J + mu * Mat2::Identity()).ldlt().solve(J.transpose() * ft);
    if (!step.allFinite()) return false;
    if (step.norm() > max_step) step *= max_step / step.norm();

    bool improved = false;
    for (int halving = 0; halving < 12; ++halving) {
      Vec3 trial;
      try {
        trial = project_to_boundary(domain, q + step.x() * basis[0] + step.y() * basis[1]);
      } catch (const Error&) {
        step *= 0.5;
        continue;
      }
      const Vec3 ftrial = field(trial);
      if (ftrial.norm() < f.norm()) {
        q = trial;
        f = ftrial;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  if (f.norm() < tol) {
    out = q;
    return true;
  }
  return false;
}

namespace {

std::vector<Vec3> newton_from_seeds(const ImplicitDomain& domain,
                                    const TangentField& field,
                                    const std::vector<Vec3>& seeds, double tol,
                                    int& converged) {
  const double dedup = 1e-3 * domain.scale();
  std::vector<Vec3> found;
  converged = 0;
  for (const Vec3& s : seeds) {
    Vec3 z;
    if (!tangent_newton(domain, field, s, tol, z)) continue;
    ++converged;
    const bool dup = std::any_of(found.begin(), found.end(),
                                 [&](const Vec3& f) { return (f - z).norm() < dedup; });
    if (!dup) found.push_back(z);
  }
  return found;
}

std::vector<Vec3> seed_points(const ImplicitDomain& domain, int n_seeds) {
  std::vector<Vec3> seeds;
  for (const Vec3& d : fibonacci_sphere(n_seeds)) seeds.push_back(boundary_point_along(domain, d));
  return seeds;
}

}  // namespace

CriticalPointSet find_critical_points(const ImplicitDomain& domain, int n_seeds,
                                      double tol) {
  if (n_seeds < 8) throw InvalidArgument("find_critical_points needs at least 8 seeds");
  CriticalPointSet out;
  const auto seeds = seed_points(domain, n_seeds);

  double hmin = 1e300, hmax = -1e300;
  for (const Vec3& s : seeds) {
    const double H = mean_curvature(domain, s);
    hmin = std::min(hmin, H);
    hmax = std::max(hmax, H);
  }
  if (hmax - hmin < 1e-9 * (1.0 + std::abs(hmax))) {
    out.h_constant = true;
    for (const Vec3& s : seeds)
      if (surface_grad_H(domain, s).norm() < tol) ++out.seeds_converged;
    return out;
  }

  const TangentField grad = [&](const Vec3& q) { return surface_grad_H(domain, q); };
  const auto zeros = newton_from_seeds(domain, grad, seeds, tol, out.seeds_converged);
  for (const Vec3& z : zeros) {
    CriticalPoint cp;
    cp.point = z;
    cp.mean_curvature = mean_curvature(domain, z);
    cp.grad_norm = surface_grad_H(domain, z).norm();
    Mat2 hess = tangent_jacobian(domain, grad, z);
    hess = 0.5 * (hess + hess.transpose()).eval();
    const double mid = 0.5 * hess.trace();
    const double rad = std::hypot(0.5 * (hess(0, 0) - hess(1, 1)), hess(0, 1));
    const Vec2 ev(mid - rad, mid + rad);
    const double floor = 1e-6 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (std::abs(ev[0]) < floor || std::abs(ev[1]) < floor) cp.type = MorseType::degenerate;
    else if (ev[0] > 0) cp.type = MorseType::minimum;
    else if (ev[1] < 0) cp.type = MorseType::maximum;
    else cp.type = MorseType::saddle;
    out.points.push_back(cp);
  }
  std::sort(out.points.begin(), out.points.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    if (a.mean_curvature != b.mean_curvature) return a.mean_curvature > b.mean_curvature;
    return std::lexicographical_compare(a.point.data(), a.point.data() + 3, b.point.data(),
                                        b.point.data() + 3);
  });
  return out;
}

std::vector<Vec3> find_field_zeros(const ImplicitDomain& domain,
                                   const TangentField& field, int n_seeds,
                                   double tol) {
  if (n_seeds < 8) throw InvalidArgument("find_field_zeros needs at least 8 seeds");
  int converged = 0;
  auto zeros = newton_from_seeds(domain, field, seed_points(domain, n_seeds), tol, converged);
  std::sort(zeros.begin(), zeros.end(), [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  return zeros;
}

}  // namespace cmc
