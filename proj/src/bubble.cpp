#include "cmcfb/bubble.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cmcfb/errors.hpp"

namespace cmc {

Complex poly_eval(const Poly& p, Complex w) {
  Complex acc = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * w + *it;
  return acc;
}

Poly poly_derivative(const Poly& p) {
  Poly d;
  for (size_t i = 1; i < p.size(); ++i) d.push_back(static_cast<double>(i) * p[i]);
  return d;
}

Poly poly_trim(const Poly& p, double tol) {
  Poly out = p;
  while (!out.empty() && std::abs(out.back()) <= tol) out.pop_back();
  return out;
}

int poly_degree(const Poly& p, double tol) {
  return static_cast<int>(poly_trim(p, tol).size()) - 1;
}

Complex resultant(const Poly& p_in, const Poly& q_in) {
  const Poly p = poly_trim(p_in), q = poly_trim(q_in);
  if (p.empty() || q.empty()) return 0.0;
  const int m = static_cast<int>(p.size()) - 1, n = static_cast<int>(q.size()) - 1;
  if (m + n == 0) return 1.0;
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(m + n, m + n);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i <= m; ++i) S(r, r + i) = p[m - i];
  for (int r = 0; r < m; ++r)
    for (int i = 0; i <= n; ++i) S(n + r, r + i) = q[n - i];
  return S.fullPivLu().determinant();
}

namespace {

double coeff_scale(const Poly& p, const Poly& q) {
  double s = 0.0;
  for (const Complex& c : p) s = std::max(s, std::abs(c));
  for (const Complex& c : q) s = std::max(s, std::abs(c));
  return s;
}

// Long division a = quot * b + rem.
void poly_divide(const Poly& a, const Poly& b, Poly& quot, Poly& rem) {
  rem = a;
  const int nb = static_cast<int>(b.size()) - 1;
  const int na = static_cast<int>(a.size()) - 1;
  quot.assign(std::max(na - nb + 1, 1), 0.0);
  for (int i = na - nb; i >= 0; --i) {
    const Complex c = rem[i + nb] / b[nb];
    quot[i] = c;
    for (int j = 0; j <= nb; ++j) rem[i + j] -= c * b[j];
  }
  rem.resize(std::max(nb, 1));
  if (nb == 0) rem.assign(1, 0.0);
}

}  // namespace

Mat3 pole_frame(const Vec3& pole) {
  const auto t = tangent_basis(pole);
  Mat3 R;
  R.col(0) = t[0];
  R.col(1) = t[1];
  R.col(2) = pole;
  return R;
}

Complex stereographic(const Vec3& p, const Vec3& pole) {
  const Vec3 v = pole_frame(pole).transpose() * p;
  const double den = 1.0 - v.z();
  if (den < 1e-14) throw PoleInput("point coincides with the projection pole");
  return {v.x() / den, v.y() / den};
}

Vec3 inv_stereographic(Complex z, const Vec3& pole, bool* saturated) {
  const double a = std::norm(z);
  const bool sat = !(std::abs(z) <= 1e8);
  if (saturated) *saturated = sat;
  if (sat) return pole;
  const Vec3 v = Vec3(2 * z.real(), 2 * z.imag(), a - 1.0) / (1.0 + a);
  return pole_frame(pole) * v;
}

std::string to_string(BubbleKind k) { return k == BubbleKind::plane ? "plane" : "half_plane"; }

void RationalBubble::validate() const {
  if (poly_trim(p).empty() && poly_trim(q).empty()) throw InvalidArgument("P and Q are both zero");
  if (std::abs(pole.norm() - 1.0) > 1e-9) throw InvalidArgument("pole must be a unit vector");
  if (!(scale > 0) || !std::isfinite(scale)) throw InvalidArgument("bubble scale must be positive");
  if (!shift.allFinite() || !center.allFinite()) throw InvalidArgument("bubble data must be finite");
}

Vec3 eval_bubble(const RationalBubble& b, Complex z) {
  const Complex w = (z - Complex(b.center.x(), b.center.y())) / b.scale;
  const Complex P = poly_eval(b.p, w), Q = poly_eval(b.q, w);
  const double den = std::norm(P) + std::norm(Q);
  const Mat3 R = pole_frame(b.pole);
  if (!(den > 0) || !std::isfinite(den)) return b.shift + b.pole;
  const Complex pq = P * std::conj(Q);
  const Vec3 v(2 * pq.real() / den, 2 * pq.imag() / den, (std::norm(P) - std::norm(Q)) / den);
  return b.shift + R * v;
}

namespace {

double density_w(const RationalBubble& b, Complex w, const Poly& dp, const Poly& dq) {
  const Complex P = poly_eval(b.p, w), Q = poly_eval(b.q, w);
  const Complex W = poly_eval(dp, w) * Q - poly_eval(dq, w) * P;
  const double den = std::norm(P) + std::norm(Q);
  if (!(den > 0)) return 0.0;
  return 8.0 * std::norm(W) / (den * den);
}

struct GaussLegendre {
  std::vector<double> x, w;
  explicit GaussLegendre(int n) {
    for (int i = 0; i < n; ++i) {
      double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1) * t * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (t * p1 - p0) / (t * t - 1.0);
        const double dt = p1 / dp;
        t -= dt;
        if (std::abs(dt) < 1e-16) break;
      }
      x.push_back(t);
      w.push_back(2.0 / ((1.0 - t * t) * dp * dp));
    }
  }
};

template <class F>
double gl_rect(const F& f, double x0, double x1, double y0, double y1) {
  static const GaussLegendre gl(8);
  const double hx = 0.5 * (x1 - x0), hy = 0.5 * (y1 - y0);
  const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  double s = 0.0;
  for (size_t i = 0; i < gl.x.size(); ++i)
    for (size_t j = 0; j < gl.x.size(); ++j)
      s += gl.w[i] * gl.w[j] * f(cx + hx * gl.x[i], cy + hy * gl.x[j]);
  return s * hx * hy;
}

template <class F>
double adaptive(const F& f, double x0, double x1, double y0, double y1, double whole,
                double tol, int depth) {
  const double xm = 0.5 * (x0 + x1), ym = 0.5 * (y0 + y1);
  const double q[4] = {gl_rect(f, x0, xm, y0, ym), gl_rect(f, xm, x1, y0, ym),
                       gl_rect(f, x0, xm, ym, y1), gl_rect(f, xm, x1, ym, y1)};
  const double fine = q[0] + q[1] + q[2] + q[3];
  if (depth >= 24 || std::abs(fine - whole) <= tol) return fine;
  return adaptive(f, x0, xm, y0, ym, q[0], 0.5 * tol, depth + 1) +
         adaptive(f, xm, x1, y0, ym, q[1], 0.5 * tol, depth + 1) +
         adaptive(f, x0, xm, ym, y1, q[2], 0.5 * tol, depth + 1) +
         adaptive(f, xm, x1, ym, y1, q[3], 0.5 * tol, depth + 1);
}

template <class F>
double adaptive_grid(const F& f, double x0, double x1, int nx, double y0, double y1, int ny,
                     double tol) {
  double total = 0.0;
  const double cell_tol = tol / (nx * ny);
  for (int i = 0; i < nx; ++i) {
    const double a = x0 + (x1 - x0) * i / nx, b = x0 + (x1 - x0) * (i + 1) / nx;
    for (int j = 0; j < ny; ++j) {
      const double c = y0 + (y1 - y0) * j / ny, d = y0 + (y1 - y0) * (j + 1) / ny;
      total += adaptive(f, a, b, c, d, gl_rect(f, a, b, c, d), cell_tol, 0);
    }
  }
  return total;
}

}  // namespace

double bubble_gradient_norm(const RationalBubble& b, Complex z) {
  const Complex w = (z - Complex(b.center.x(), b.center.y())) / b.scale;
  return std::sqrt(density_w(b, w, poly_derivative(b.p), poly_derivative(b.q))) / b.scale;
}

BubbleEnergy bubble_energy(const RationalBubble& b) {
  b.validate();
  const Poly p = poly_trim(b.p), q = poly_trim(b.q);
  if (p.empty() || q.empty()) return {0.0, 0};
  const int m = static_cast<int>(p.size()) - 1, n = static_cast<int>(q.size()) - 1;
  const double scale = coeff_scale(p, q);
  if (std::abs(resultant(p, q)) <= 1e-10 * std::pow(scale, m + n))
    throw ReducibleFraction("P and Q share a common factor");
  BubbleEnergy out;
  out.degree = std::max(m, n);
  if (out.degree == 0) return out;

  RationalBubble canon = b;
  canon.p = p;
  canon.q = q;
  const Poly dp = poly_derivative(p), dq = poly_derivative(q);
  const double tol = 1e-9 * 8 * kPi * out.degree;

  if (b.kind == BubbleKind::plane) {
    // Log-polar coordinates w = e^s e^{i theta}, dA = e^{2s} ds dtheta.
    const double s0 = -30.0, s1 = std::log(1e6);
    auto f = [&](double s, double t) {
      const double r = std::exp(s);
      return density_w(canon, std::polar(r, t), dp, dq) * r * r;
    };
    out.energy = adaptive_grid(f, s0, s1, 44, 0.0, 2 * kPi, 8, tol);
    // Tail beyond |w| = 1e6 estimated from the mean density on that circle.
    const double R = std::exp(s1);
    double mean = 0.0;
    for (int k = 0; k < 64; ++k) mean += density_w(canon, std::polar(R, 2 * kPi * k / 64), dp, dq) / 64;
    out.energy += mean * kPi * R * R;
  } else {
    const Complex a(b.center.x(), b.center.y());
    auto f = [&](double r, double t) {
      const Complex w = (std::polar(r, t) - a) / b.scale;
      return density_w(canon, w, dp, dq) / (b.scale * b.scale) * r;
    };
    out.energy = adaptive_grid(f, 0.0, 1.0, 16, 0.0, 2 * kPi, 16, tol);
  }
  return out;
}

SimplicityCheck is_simple(const RationalBubble& b) {
  b.validate();
  const double scale = coeff_scale(b.p, b.q);
  const double tol = 1e-10 * scale;
  SimplicityCheck out;
  out.p = poly_trim(b.p, tol);
  out.q = poly_trim(b.q, tol);
  if (out.p.empty() || out.q.empty()) {
    out.degree = std::max(static_cast<int>(out.p.size()), static_cast<int>(out.q.size())) - 1;
    out.simple = false;
    return out;
  }
  // Euclid on the pair with relative tolerance.
  Poly a = out.p.size() >= out.q.size() ? out.p : out.q;
  Poly c = out.p.size() >= out.q.size() ? out.q : out.p;
  while (!c.empty() && c.size() > 1) {
    Poly quot, rem;
    poly_divide(a, c, quot, rem);
    a = c;
    c = poly_trim(rem, tol);
  }
  // c is empty (a is the gcd) or a nonzero constant (coprime).
  if (c.empty() && a.size() > 1) {
    Poly quot, rem;
    poly_divide(out.p, a, quot, rem);
    out.p = poly_trim(quot, tol);
    poly_divide(out.q, a, quot, rem);
    out.q = poly_trim(quot, tol);
    out.reduced = true;
  }
  out.degree = std::max(out.p.size(), out.q.size()) - 1;
  out.simple = out.degree == 1;
  return out;
}

Complex disk_to_half_plane(Complex z) {
  if (std::abs(z - 1.0) < 1e-300) throw InvalidArgument("z = 1 maps to infinity");
  return Complex(0, -1) * (z + 1.0) / (z - 1.0);
}

Complex half_plane_to_disk(Complex w) {
  if (std::abs(w + Complex(0, 1)) < 1e-300) throw InvalidArgument("w = -i maps to infinity");
  return (w - Complex(0, 1)) / (w + Complex(0, 1));
}

namespace {

// Pole and in-plane phase reproducing rotation * pi^{-1}(.) as pi_pole^{-1}(e^{i phi} .).
Complex absorb_rotation(const Mat3& rotation, Vec3& pole) {
  pole = rotation.col(2).normalized();
  const Mat3 M = pole_frame(pole).transpose() * rotation;
  return std::polar(1.0, std::atan2(M(1, 0), M(0, 0)));
}

}  // namespace

RationalBubble plane_bubble(const Vec2& a, double scale, const Mat3& rotation, const Vec3& shift) {
  RationalBubble b;
  const Complex phase = absorb_rotation(rotation, b.pole);
  b.p = {0.0, phase};
  b.q = {1.0};
  b.center = a;
  b.scale = scale;
  b.shift = shift;
  b.kind = BubbleKind::plane;
  b.validate();
  return b;
}

RationalBubble half_plane_bubble(double boundary_angle, double scale, const Mat3& rotation,
                                 const Vec3& shift) {
  if (!(scale > 0 && scale < 1)) throw InvalidArgument("half-plane bubble scale must lie in (0, 1)");
  RationalBubble b;
  const Complex phase = absorb_rotation(rotation, b.pole);
  const Complex bd = std::polar(1.0, boundary_angle);
  // 1 / g(a + scale w) = ((2 - scale) - (1 - scale) conj(b) w) / w.
  b.p = {phase * (2.0 - scale), -phase * (1.0 - scale) * std::conj(bd)};
  b.q = {0.0, 1.0};
  const Complex a = (1.0 - scale) * bd;
  b.center = Vec2(a.real(), a.imag());
  b.scale = scale;
  b.shift = shift;
  b.kind = BubbleKind::half_plane;
  b.validate();
  return b;
}

RationalBubble hemisphere_bubble(const Vec2& center_2d, double scale, const Mat3& tilt,
                                 double boundary_angle) {
  return half_plane_bubble(boundary_angle, scale, tilt, Vec3(center_2d.x(), center_2d.y(), 0.0));
}

RationalBubble PlantedBubble::realize(double eps) const {
  const double lam = scale0 * std::pow(eps, scale_power);
  if (kind == BubbleKind::plane) return plane_bubble(center, lam, rotation, shift);
  return half_plane_bubble(boundary_angle, lam, rotation, shift);
}

void SyntheticSequence::validate() const {
  if (!(noise_amp >= 0)) throw InvalidArgument("noise_amp must be nonnegative");
  for (size_t i = 0; i < epsilon_schedule.size(); ++i) {
    if (!(epsilon_schedule[i] > 0)) throw InvalidArgument("epsilon values must be positive");
    if (i > 0 && !(epsilon_schedule[i] < epsilon_schedule[i - 1]))
      throw InvalidArgument("epsilon schedule must be strictly decreasing");
  }
}

SynthResult synth_sequence(const SyntheticSequence& s, double eps, int n_r, int n_theta,
                           double H_target) {
  s.validate();
  if (!(eps > 0)) throw InvalidArgument("eps must be positive");
  SynthResult out;
  for (const PlantedBubble& pb : s.bubbles) out.truth.push_back(pb.realize(eps));

  // Harmonic noise: per component amp / (3 sqrt 6) sum_m (a Re z^m + b Im z^m) / m,
  // so each component has gradient norm at most amp / sqrt 3.
  std::mt19937_64 rng(s.seed);
  auto unit = [&] { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
  double coef[3][3][2];
  for (auto& comp : coef)
    for (auto& m : comp) {
      m[0] = unit();
      m[1] = unit();
    }
  const double c = s.noise_amp / (3.0 * std::sqrt(6.0));

  out.map = DiskMap::sample(n_r, n_theta, [&](Complex z) {
    Vec3 v = Vec3::Zero();
    for (const RationalBubble& b : out.truth) v += eval_bubble(b, z);
    if (s.noise_amp > 0) {
      Complex zm = 1.0;
      for (int m = 1; m <= 3; ++m) {
        zm *= z;
        for (int comp = 0; comp < 3; ++comp)
          v[comp] += c * (coef[comp][m - 1][0] * zm.real() + coef[comp][m - 1][1] * zm.imag()) / m;
      }
    }
    return v;
  }, H_target);
  return out;
}

}  // namespace cmc
