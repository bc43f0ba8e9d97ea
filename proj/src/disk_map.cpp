#include "cmcfb/disk_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cmcfb/errors.hpp"

namespace cmc {

DiskMap::DiskMap(int n_r_, int n_theta_, double H)
    : n_r(n_r_), n_theta(n_theta_), H_target(H) {
  if (n_r < 8) throw InvalidArgument("n_r must be at least 8");
  if (n_theta < 16 || n_theta % 2 != 0) throw InvalidArgument("n_theta must be even and at least 16");
  values.assign(static_cast<size_t>(size()), Vec3::Zero());
}

DiskMap DiskMap::sample(int n_r, int n_theta, const std::function<Vec3(Complex)>& f,
                        double H_target) {
  DiskMap m(n_r, n_theta, H_target);
  for (int j = 0; j <= n_r; ++j)
    for (int k = 0; k < n_theta; ++k) m.at(j, k) = f(m.z(j, k));
  return m;
}

void DiskMap::validate() const {
  if (n_r < 8) throw InvalidArgument("n_r must be at least 8");
  if (n_theta < 16 || n_theta % 2 != 0) throw InvalidArgument("n_theta must be even and at least 16");
  if (static_cast<int>(values.size()) != size()) throw InvalidArgument("sample count does not match grid");
  if (!std::isfinite(H_target)) throw InvalidArgument("H_target is not finite");
  for (const Vec3& v : values)
    if (!v.allFinite()) throw InvalidArgument("map contains non-finite samples");
}

namespace {

// Finite-difference weights (Fornberg) for derivatives 0..2 at x0.
std::array<std::vector<double>, 3> fd_weights(double x0, const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::array<double, 3>> c(n, {0.0, 0.0, 0.0});
  double c1 = 1.0, c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, 2);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::array<std::vector<double>, 3> w;
  for (int m = 0; m < 3; ++m)
    for (int i = 0; i < n; ++i) w[m].push_back(c[i][m]);
  return w;
}

// Five-point radial stencil of one grid row. A negative row index -1 - i
// refers to the mirror image of row i through the origin, i.e. the value at
// (r_i, theta + pi) seen at signed radius -r_i.
struct RadialStencil {
  std::array<int, 5> rows;
  std::vector<double> d1;
  std::vector<double> d2;
};

std::vector<RadialStencil> radial_stencils(const DiskMap& m) {
  const int n = m.n_r;
  auto position = [&](int row) { return row < 0 ? -m.radius(-1 - row) : m.radius(row); };
  std::vector<RadialStencil> out(n + 1);
  for (int j = 0; j <= n; ++j) {
    const int first = std::clamp(j - 2, -2, n - 4);
    std::array<int, 5> rows;
    for (int i = 0; i < 5; ++i) rows[i] = first + i;
    if (j == n) rows = {n, n - 1, n - 2, n - 3, n - 4};
    std::vector<double> x;
    for (int row : rows) x.push_back(position(row));
    const auto w = fd_weights(m.radius(j), x);
    out[j] = {rows, w[1], w[2]};
  }
  return out;
}

// Angular weights on offsets 1 and 2 that are exact for harmonics of order
// up to two (fourth order in general).
struct AngularWeights {
  double a1, b1;  // first derivative: a1 (f1 - f-1) + b1 (f2 - f-2)
  double a2, b2;  // second derivative: a2 (f1 + f-1 - 2f) + b2 (f2 + f-2 - 2f)
};

AngularWeights angular_weights(double dt) {
  AngularWeights w;
  Mat2 A;
  A << 2 * std::sin(dt), 2 * std::sin(2 * dt), 2 * std::sin(2 * dt), 2 * std::sin(4 * dt);
  Vec2 s = A.fullPivLu().solve(Vec2(1.0, 2.0));
  w.a1 = s[0];
  w.b1 = s[1];
  A << 2 * (std::cos(dt) - 1), 2 * (std::cos(2 * dt) - 1), 2 * (std::cos(2 * dt) - 1),
      2 * (std::cos(4 * dt) - 1);
  s = A.fullPivLu().solve(Vec2(-1.0, -4.0));
  w.a2 = s[0];
  w.b2 = s[1];
  return w;
}

struct PolarDerivs {
  std::vector<Vec3> ur, urr, ut, utt;
};

PolarDerivs polar_derivatives(const DiskMap& m) {
  m.validate();
  const int n = m.n_r, nt = m.n_theta;
  const auto stencils = radial_stencils(m);
  const AngularWeights aw = angular_weights(m.dtheta());
  PolarDerivs d;
  d.ur.assign(m.size(), Vec3::Zero());
  d.urr = d.ut = d.utt = d.ur;
  for (int j = 0; j <= n; ++j) {
    const RadialStencil& s = stencils[j];
    for (int k = 0; k < nt; ++k) {
      const int id = m.node(j, k);
      const Vec3& u = m.values[id];
      Vec3 a = Vec3::Zero(), b = Vec3::Zero();
      for (int i = 0; i < 5; ++i) {
        const int row = s.rows[i];
        const Vec3& v = row < 0 ? m.at(-1 - row, k + nt / 2) : m.at(row, k);
        a += s.d1[i] * v;
        b += s.d2[i] * v;
      }
      d.ur[id] = a;
      d.urr[id] = b;
      const Vec3& p1 = m.at(j, k + 1);
      const Vec3& m1 = m.at(j, k - 1);
      const Vec3& p2 = m.at(j, k + 2);
      const Vec3& m2 = m.at(j, k - 2);
      d.ut[id] = aw.a1 * (p1 - m1) + aw.b1 * (p2 - m2);
      d.utt[id] = aw.a2 * (p1 + m1 - 2 * u) + aw.b2 * (p2 + m2 - 2 * u);
    }
  }
  return d;
}

std::vector<double> cos_table(const DiskMap& m) {
  std::vector<double> c(m.n_theta);
  for (int k = 0; k < m.n_theta; ++k) c[k] = std::cos(m.theta(k));
  return c;
}

std::vector<double> sin_table(const DiskMap& m) {
  std::vector<double> s(m.n_theta);
  for (int k = 0; k < m.n_theta; ++k) s[k] = std::sin(m.theta(k));
  return s;
}

}  // namespace

MapGradient polar_gradient(const DiskMap& map) {
  PolarDerivs d = polar_derivatives(map);
  return {std::move(d.ur), std::move(d.ut)};
}

MapGradient gradient(const DiskMap& map) {
  const PolarDerivs d = polar_derivatives(map);
  const auto c = cos_table(map), s = sin_table(map);
  MapGradient g;
  g.ux.resize(map.size());
  g.uy.resize(map.size());
  for (int j = 0; j <= map.n_r; ++j) {
    const double r = map.radius(j);
    for (int k = 0; k < map.n_theta; ++k) {
      const int id = map.node(j, k);
      g.ux[id] = c[k] * d.ur[id] - s[k] / r * d.ut[id];
      g.uy[id] = s[k] * d.ur[id] + c[k] / r * d.ut[id];
    }
  }
  return g;
}

std::vector<Vec3> laplacian(const DiskMap& map) {
  const PolarDerivs d = polar_derivatives(map);
  std::vector<Vec3> out(map.size());
  for (int j = 0; j <= map.n_r; ++j) {
    const double r = map.radius(j);
    for (int k = 0; k < map.n_theta; ++k) {
      const int id = map.node(j, k);
      out[id] = -(d.urr[id] + d.ur[id] / r + d.utt[id] / (r * r));
    }
  }
  return out;
}

FieldNorms h_residual(const DiskMap& map) {
  const auto lap = laplacian(map);
  const MapGradient g = gradient(map);
  FieldNorms out;
  out.field.assign(map.size(), Vec3::Zero());
  double sum = 0.0;
  for (int j = 0; j < map.n_r; ++j) {
    for (int k = 0; k < map.n_theta; ++k) {
      const int id = map.node(j, k);
      const Vec3 r = lap[id] + 2.0 * map.H_target * g.ux[id].cross(g.uy[id]);
      out.field[id] = r;
      out.sup = std::max(out.sup, r.norm());
      sum += r.squaredNorm() * map.cell_area(j);
    }
  }
  out.l2 = std::sqrt(sum);
  return out;
}

ConformalityDefect conformality_defect(const DiskMap& map) {
  const MapGradient g = gradient(map);
  ConformalityDefect out;
  for (int j = 0; j < map.n_r; ++j) {
    for (int k = 0; k < map.n_theta; ++k) {
      const int id = map.node(j, k);
      out.inner = std::max(out.inner, std::abs(g.ux[id].dot(g.uy[id])));
      out.length = std::max(out.length, std::abs(g.ux[id].norm() - g.uy[id].norm()));
    }
  }
  return out;
}

double dirichlet_energy(const DiskMap& map) {
  const MapGradient g = gradient(map);
  double e = 0.0;
  for (int j = 0; j < map.n_r; ++j)
    for (int k = 0; k < map.n_theta; ++k) {
      const int id = map.node(j, k);
      e += (g.ux[id].squaredNorm() + g.uy[id].squaredNorm()) * map.cell_area(j);
    }
  return e;
}

double area(const DiskMap& map) {
  const MapGradient g = gradient(map);
  double a = 0.0;
  for (int j = 0; j < map.n_r; ++j)
    for (int k = 0; k < map.n_theta; ++k) {
      const int id = map.node(j, k);
      a += g.ux[id].cross(g.uy[id]).norm() * map.cell_area(j);
    }
  return a;
}

double diameter(const DiskMap& map) {
  map.validate();
  const int stride = map.n_r * map.n_theta <= 64 * 64 ? 1 : 2;
  std::vector<Vec3> pts;
  for (int j = 0; j <= map.n_r; j += stride)
    for (int k = 0; k < map.n_theta; k += stride) pts.push_back(map.at(j, k));
  if (stride == 2 && map.n_r % 2 == 1)
    for (int k = 0; k < map.n_theta; k += stride) pts.push_back(map.at(map.n_r, k));
  double best = 0.0;
  for (size_t a = 0; a < pts.size(); ++a)
    for (size_t b = a + 1; b < pts.size(); ++b) best = std::max(best, (pts[a] - pts[b]).squaredNorm());
  return std::sqrt(best);
}

BoundaryTrace boundary_trace(const DiskMap& map) {
  map.validate();
  const int n = map.n_r, nt = map.n_theta;
  BoundaryTrace t;
  t.points.resize(nt);
  t.conormal.resize(nt);
  t.ds.resize(nt);

  // Fourth-order one-sided radial derivative for the conormal.
  std::vector<double> x;
  for (int i = 0; i < 5; ++i) x.push_back(map.radius(n - i));
  const auto w = fd_weights(1.0, x)[1];
  const double dt = map.dtheta();

  double spread = 0.0, mag = 0.0;
  for (int k = 0; k < nt; ++k) {
    t.points[k] = map.at(n, k);
    Vec3 ur = Vec3::Zero();
    for (int i = 0; i < 5; ++i) ur += w[i] * map.at(n - i, k);
    const double len = ur.norm();
    t.conormal[k] = len > 1e-12 ? Vec3(ur / len) : Vec3::Zero();
    const Vec3 ut = (-map.at(n, k + 2) + 8.0 * map.at(n, k + 1) - 8.0 * map.at(n, k - 1) +
                     map.at(n, k - 2)) / (12.0 * dt);
    t.ds[k] = ut.norm() * dt;
    spread = std::max(spread, (t.points[k] - t.points[0]).norm());
    mag = std::max(mag, t.points[k].norm());
  }
  t.degenerate = spread <= 1e-12 * (1.0 + mag);
  return t;
}

OrthogonalityDefect orthogonality_defect(const DiskMap& map, const ImplicitDomain& domain,
                                         double tol) {
  const MapGradient g = gradient(map);
  const int n = map.n_r;
  OrthogonalityDefect out;
  int vanishing = 0;
  for (int k = 0; k < map.n_theta; ++k) {
    const Vec3& p = map.at(n, k);
    const Vec3 q = project_to_boundary(domain, p);
    if ((p - q).norm() > tol) throw BoundaryOffDomain("ring sample farther than tol from the boundary");
    const int id = map.node(n, k);
    const Vec3 nu = g.ux[id].cross(g.uy[id]);
    const double len = nu.norm();
    if (len < 1e-12) {
      ++vanishing;
      continue;
    }
    out.defect = std::max(out.defect, std::abs(nu.dot(boundary_normal(domain, q)) / len));
  }
  out.degenerate = vanishing == map.n_theta;
  return out;
}

Straightening::Straightening(const ImplicitDomain& domain, const Vec3& q, double radius)
    : domain_(domain), q_(q), radius_(radius) {
  if (!(radius > 0)) throw InvalidArgument("chart radius must be positive");
  const ShapeOperator s = shape_operator(domain, q);
  normal_ = boundary_normal(domain, q);
  basis_ = tangent_basis(normal_);
  const Mat2 sym = 0.5 * (s.matrix + s.matrix.transpose());
  const double mid = 0.5 * sym.trace();
  const double rad = std::hypot(0.5 * (sym(0, 0) - sym(1, 1)), sym(0, 1));
  const double kmax = std::max(std::abs(mid - rad), std::abs(mid + rad));
  if (kmax > 0 && radius > 0.5 / kmax)
    throw ChartTooLarge("chart radius exceeds half the smallest curvature radius");
}

Vec3 Straightening::forward(const Vec3& p) const {
  const Vec3 foot = project_to_boundary(domain_, p);
  const Vec3 d = foot - q_;
  return {basis_[0].dot(d), basis_[1].dot(d), (p - foot).dot(boundary_normal(domain_, foot))};
}

Vec3 Straightening::inverse(const Vec3& w) const {
  const Vec3 foot = graph_point(domain_, q_, basis_, Vec2(w.x(), w.y()));
  return foot + w.z() * boundary_normal(domain_, foot);
}

ReflectionExtension reflect_extend(const DiskMap& map, const Straightening& psi, double tol) {
  map.validate();
  const int n = map.n_r;
  for (int k = 0; k < map.n_theta; ++k) {
    const Vec3& p = map.at(n, k);
    if ((p - project_to_boundary(psi.domain(), p)).norm() > tol)
      throw BoundaryOffDomain("trace leaves the boundary before reflection");
  }
  ReflectionExtension out;
  out.inner = DiskMap(map.n_r, map.n_theta, map.H_target);
  out.outer = out.inner;
  for (int i = 0; i < map.size(); ++i) {
    const Vec3 w = psi.forward(map.values[i]);
    out.inner.values[i] = w;
    out.outer.values[i] = Vec3(w.x(), w.y(), -w.z());
  }
  const MapGradient pg = polar_gradient(out.inner);
  for (int k = 0; k < map.n_theta; ++k) {
    const int id = map.node(n, k);
    out.value_mismatch = std::max(out.value_mismatch, 2.0 * std::abs(out.inner.values[id].z()));
    const Vec3& wr = pg.ux[id];
    out.derivative_mismatch = std::max(out.derivative_mismatch, 2.0 * std::hypot(wr.x(), wr.y()));
  }
  out.inner_energy = dirichlet_energy(out.inner);
  out.outer_energy = inverted_energy(out.outer);
  return out;
}

double inverted_energy(const DiskMap& outer) {
  // Node (j, k) sits at rho = 1 / r_j; d/d rho = -r^2 d/dr and the cell
  // width in rho is h / r^2.
  const MapGradient pg = polar_gradient(outer);
  const double h = outer.h(), dt = outer.dtheta();
  double e = 0.0;
  for (int j = 0; j < outer.n_r; ++j) {
    const double r = outer.radius(j);
    const double rho = 1.0 / r;
    const double drho = h / (r * r);
    for (int k = 0; k < outer.n_theta; ++k) {
      const int id = outer.node(j, k);
      const Vec3 w_rho = -r * r * pg.ux[id];
      const double density = w_rho.squaredNorm() + pg.uy[id].squaredNorm() / (rho * rho);
      e += density * rho * drho * dt;
    }
  }
  return e;
}

namespace {

void put_le_double(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string dmap_bytes(const DiskMap& map) {
  map.validate();
  char header[128];
  std::snprintf(header, sizeof header, "DMAP 1 %d %d %.17g\n", map.n_r, map.n_theta, map.H_target);
  std::string out(header);
  out.reserve(out.size() + 24 * map.values.size());
  for (const Vec3& v : map.values)
    for (int c = 0; c < 3; ++c) put_le_double(out, v[c]);
  return out;
}

DiskMap parse_dmap(const std::string& bytes) {
  const size_t eol = bytes.find('\n');
  if (eol == std::string::npos || eol > 120) throw FormatError("missing DMAP header line");
  std::istringstream hs(bytes.substr(0, eol));
  std::string magic, extra;
  int version = 0, n_r = 0, n_theta = 0;
  double H = 0;
  if (!(hs >> magic >> version >> n_r >> n_theta >> H) || magic != "DMAP")
    throw FormatError("malformed DMAP header");
  if (hs >> extra) throw FormatError("trailing tokens in DMAP header");
  if (version != 1) throw FormatError("unsupported DMAP version " + std::to_string(version));
  if (n_r < 8 || n_theta < 16 || n_theta % 2 != 0 || n_r > (1 << 15) || n_theta > (1 << 15))
    throw FormatError("invalid DMAP grid size");
  const size_t count = static_cast<size_t>(n_r + 1) * n_theta;
  if (bytes.size() - eol - 1 != 24 * count)
    throw FormatError("DMAP payload length " + std::to_string(bytes.size() - eol - 1) +
                      " does not match expected " + std::to_string(24 * count));
  DiskMap m(n_r, n_theta, H);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + eol + 1);
  for (size_t i = 0; i < count; ++i)
    for (int c = 0; c < 3; ++c) m.values[i][c] = get_le_double(p + 24 * i + 8 * c);
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  return m;
}

void write_dmap(const std::string& path, const DiskMap& map) {
  const std::string bytes = dmap_bytes(map);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed for " + path);
}

DiskMap read_dmap(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_dmap(ss.str());
}

DiskMap graph_patch(const ImplicitDomain& domain, const Vec3& q, double radius, int n_r,
                    int n_theta) {
  const auto basis = tangent_basis(boundary_normal(domain, q));
  return DiskMap::sample(
      n_r, n_theta,
      [&](Complex z) { return graph_point(domain, q, basis, Vec2(radius * z.real(), radius * z.imag())); },
      mean_curvature(domain, q));
}

}  // namespace cmc
