// Acceptance criteria AC1-AC9: one [PASS]/[FAIL] line each.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "cmcfb/balance.hpp"
#include "cmcfb/cli.hpp"
#include "cmcfb/extraction.hpp"
#include "cmcfb/wente.hpp"
#include "oracles.hpp"

using namespace cmc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const char* id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0 || dt < limit_s;
  const bool ok = o.pass && in_time;
  failures += !ok;
  std::printf("[%s] %s %s: %s; %.2f s", ok ? "PASS" : "FAIL", id, title, o.detail.c_str(), dt);
  if (limit_s > 0) std::printf(" (limit %.0f s)", limit_s);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Largest deviation of a boundary trace from the unit circle: fit the plane
// and then the circle by algebraic least squares, both exact for points on
// a circle, and compare every sample to the unit radius.
double trace_radius_error(const DiskMap& m) {
  const BoundaryTrace t = boundary_trace(m);
  const int n = static_cast<int>(t.points.size());
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : t.points) mean += p;
  mean /= n;
  Eigen::MatrixXd X(n, 3);
  for (int i = 0; i < n; ++i) X.row(i) = (t.points[i] - mean).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const Vec3 e1 = svd.matrixV().col(0), e2 = svd.matrixV().col(1);
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 d = t.points[i] - mean;
    const double x = d.dot(e1), y = d.dot(e2);
    A.row(i) << 2 * x, 2 * y, 1.0;
    b[i] = x * x + y * y;
  }
  const Eigen::Vector3d s = A.colPivHouseholderQr().solve(b);
  const Vec3 c = mean + s[0] * e1 + s[1] * e2;
  double err = 0.0;
  for (const Vec3& p : t.points) err = std::max(err, std::abs((p - c).norm() - 1.0));
  return err;
}

DiskMap sample(const RationalBubble& b, int n_r, int n_theta) {
  return DiskMap::sample(n_r, n_theta, [&](Complex z) { return eval_bubble(b, z); });
}

Outcome ac1() {
  double worst = 0.0;
  std::string d;
  for (int k = 1; k <= 3; ++k) {
    RationalBubble b = plane_bubble(Vec2(0.1, -0.2), 0.4);
    b.p.assign(static_cast<size_t>(k) + 1, Complex(0.0));
    b.p.back() = 1.0;
    const double rel = std::abs(bubble_energy(b).energy / (8 * kPi * k) - 1);
    worst = std::max(worst, rel);
  }
  for (double lam : {0.05, 0.2, 0.5}) {
    const double rel = std::abs(bubble_energy(half_plane_bubble(0.3, lam)).energy / (4 * kPi) - 1);
    worst = std::max(worst, rel);
  }
  return {worst <= 0.005, fmt("max relative deviation from 8 pi k / 4 pi = %.2e (tol 5e-3)", worst)};
}

Outcome ac2() {
  double constructed = 0.0;
  for (double lam : {0.05, 0.1, 0.3})
    for (double ang : {0.0, 1.0, 2.5}) {
      const Mat3 tilt = axis_angle(Vec3(1, 2, 0), 0.3 * ang);
      const RationalBubble b = hemisphere_bubble(Vec2(0.4, -0.7), lam, tilt, ang);
      constructed = std::max(constructed, trace_radius_error(sample(b, 64, 512)));
    }
  const RationalBubble truth = half_plane_bubble(2.0, 0.1);
  const BubbleDecomposition d = extract(sample(truth, 128, 256), ExtractionConfig{});
  double fitted = 1e9;
  if (d.bubbles.size() == 1 && d.bubbles[0].bubble.kind == BubbleKind::half_plane)
    fitted = trace_radius_error(sample(d.bubbles[0].bubble, 64, 512));
  const bool ok = constructed <= 1e-3 && fitted <= 1e-3;
  return {ok, fmt("constructed radius error %.2e", constructed) + fmt(", fitted %.2e (tol 1e-3)", fitted)};
}

Outcome ac3() {
  double worst = 0.0;
  double closed = 0.0;
  for (int i = 0; i <= 9; ++i) {
    const double h = 0.1 * i;
    const double rho = std::sqrt((1 - h) / (1 + h));
    const double r = std::sqrt(1 - h * h);
    const Mat3 flip = axis_angle(Vec3::UnitX(), kPi);
    const DiskMap u = DiskMap::sample(64, 512, [&](Complex z) { return Vec3(flip * inv_stereographic(rho * z)); }, 1.0);
    const DiskMap cap = DiskMap::sample(64, 512, [&](Complex z) { return Vec3(r * z.real(), -r * z.imag(), h); });
    const BalancingResult b = balancing_residual(boundary_trace(u), cap, 1.0);
    worst = std::max(worst, b.residual.norm());
    closed = std::max(closed, (b.boundary_integral - oracle::cap_boundary_flux(h)).norm());
  }
  const double tol = 1e-5 * 2 * kPi;
  return {worst <= tol && closed <= tol,
          fmt("max residual %.2e", worst) + fmt(", max closed-form error %.2e", closed) + fmt(" (tol %.2e)", tol)};
}

Outcome ac4() {
  const int n = 256;
  const WenteSweep s = wente_sweep(100, n, n, 1);
  const ScalarField x = ScalarField::sample(n, n, [](Complex z) { return z.real(); });
  const ScalarField y = ScalarField::sample(n, n, [](Complex z) { return z.imag(); });
  const WenteCheck w = wente_check(x, y);
  const double e_inf = std::abs(w.ratio_inf / 0.5 - 1);
  const double e_grad = std::abs(w.ratio_grad / 0.8162 - 1);
  const bool ok = s.max_ratio_inf <= 1.02 && s.max_ratio_grad <= 1.02 && e_inf <= 0.01 && e_grad <= 0.01;
  return {ok, fmt("sweep max ratios (%.4f", s.max_ratio_inf) + fmt(", %.4f) <= 1.02", s.max_ratio_grad) +
                  fmt("; analytic (%.5f", w.ratio_inf) + fmt(", %.5f) vs (0.5000, 0.8162) within 1%%", w.ratio_grad)};
}

Outcome ac5() {
  SyntheticSequence s;
  s.noise_amp = 1e-3;
  s.seed = 7;
  PlantedBubble sphere;
  sphere.center = Vec2(-0.3, 0.2);
  sphere.scale0 = 0.05;
  sphere.rotation = axis_angle(Vec3(1, 1, 0), 0.4);
  sphere.shift = Vec3(0.5, 0, 0);
  PlantedBubble hemi;
  hemi.kind = BubbleKind::half_plane;
  hemi.scale0 = 0.1;
  s.bubbles = {sphere, hemi};
  const SynthResult syn = synth_sequence(s, 1.0, 512, 512);
  const BubbleDecomposition d = extract(syn.map, ExtractionConfig{});
  if (d.bubbles.size() != 2) return {false, "recovered " + std::to_string(d.bubbles.size()) + " bubbles, expected 2"};

  double center_err = 0.0, scale_err = 0.0, energy_err = 0.0;
  bool kinds = true;
  for (const RationalBubble& t : syn.truth) {
    const FittedBubble* f = nullptr;
    for (const FittedBubble& c : d.bubbles)
      if (c.bubble.kind == t.kind) f = &c;
    if (!f) {
      kinds = false;
      continue;
    }
    center_err = std::max(center_err, (f->bubble.center - t.center).norm() / t.scale);
    scale_err = std::max(scale_err, std::abs(f->bubble.scale / t.scale - 1));
    const double target = t.kind == BubbleKind::plane ? 8 * kPi : 4 * kPi;
    energy_err = std::max(energy_err, std::abs(f->disk_energy / target - 1));
  }
  const double sep = d.pairwise_separation[0][1];
  const bool ok = kinds && center_err <= 0.5 && scale_err <= 0.1 && energy_err <= 0.05 && sep >= 20 &&
                  d.hemisphere_count == 1;
  return {ok, "2 bubbles" + fmt(", center error %.3f lambda", center_err) + fmt(", scale error %.3f", scale_err) +
                  fmt(", energy error %.3f", energy_err) + fmt(", separation %.1f", sep) +
                  ", l = " + std::to_string(d.hemisphere_count)};
}

Outcome ac6() {
  const Vec3 ax(2, 1.5, 1);
  const ImplicitDomain e = make_ellipsoid(ax);
  double worst_angle = 0.0;
  for (const Vec3& dir : fibonacci_sphere(100)) {
    const Vec3 q = boundary_point_along(e, dir);
    const Vec3 f = reduced_force(e, q, 1);
    const Vec3 g = surface_grad_H(e, q);
    if (f.norm() < 1e-8 || g.norm() < 1e-8) continue;
    worst_angle = std::max(worst_angle, std::acos(std::clamp(-f.dot(g) / (f.norm() * g.norm()), -1.0, 1.0)));
  }
  const std::vector<Vec3> zeros = find_field_zeros(e, [&](const Vec3& q) { return reduced_force(e, q, 1); }, 64, 1e-6);
  std::vector<Vec3> ends;
  for (int i = 0; i < 3; ++i)
    for (double s : {-1.0, 1.0}) {
      Vec3 p = Vec3::Zero();
      p[i] = s * ax[i];
      ends.push_back(p);
    }
  double mismatch = 0.0;
  for (const Vec3& z : zeros) {
    double best = 1e9;
    for (const Vec3& p : ends) best = std::min(best, (z - p).norm());
    mismatch = std::max(mismatch, best);
  }
  for (const Vec3& p : ends) {
    double best = 1e9;
    for (const Vec3& z : zeros) best = std::min(best, (z - p).norm());
    mismatch = std::max(mismatch, best);
  }
  const bool ok = worst_angle <= 1e-2 && zeros.size() == 6 && mismatch <= 1e-6;
  return {ok, fmt("max angle %.2e rad (tol 1e-2)", worst_angle) + ", " + std::to_string(zeros.size()) +
                  fmt(" zeros, max distance to axis endpoints %.2e (tol 1e-6)", mismatch)};
}

Outcome ac7() {
  const ImplicitDomain s = make_ball(1.0);
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  const Vec3 qs = project_to_boundary(s, Vec3(0.3, 0.5, 0.8));
  const Vec3 qe = project_to_boundary(e, Vec3(1.2, 0.9, 0.5));
  std::vector<double> rs, re;
  double ablated = 0.0;
  for (int n : {8, 16, 32}) rs.push_back(gauss_map_identity_residual(graph_patch(s, qs, 0.3, n, 4 * n), s).full);
  for (int n : {16, 32, 64}) {
    const GaussMapResidual r = gauss_map_identity_residual(graph_patch(e, qe, 0.3, n, 4 * n), e);
    re.push_back(r.full);
    ablated = r.ablated;
  }
  const double o1 = oracle::order(rs[0], rs[1]), o2 = oracle::order(rs[1], rs[2]);
  const double o3 = oracle::order(re[0], re[1]), o4 = oracle::order(re[1], re[2]);
  const double ratio = ablated / re[2];
  const bool ok = std::min({o1, o2, o3, o4}) >= 1.9 && ablated > 0.1 && ratio >= 50;
  return {ok, fmt("sphere orders %.2f", o1) + fmt(", %.2f", o2) + fmt("; ellipsoid orders %.2f", o3) +
                  fmt(", %.2f (min 1.9)", o4) + fmt("; ablated %.3f", ablated) + fmt(", ratio %.2e (min 50)", ratio)};
}

Outcome ac8() {
  double worst = 0.0;
  double oracle_gap = 0.0;
  auto check = [&](const NormalJet& jet, const std::vector<Vec2>& centers, const Vec2& c) {
    const CapConfiguration cfg = CapConfiguration::unit(centers);
    const Vec3 tr = jet.d2_normal[0] + jet.d2_normal[2];
    const Vec3 expect = -0.5 * kPi * static_cast<double>(centers.size()) * (tr - tr.dot(jet.normal) * jet.normal);
    worst = std::max(worst, (projected_second_order(jet, cfg, c) - expect).norm());
    auto f = [&](const Vec2& z) { return jet.second(z, z); };
    Vec3 dense = Vec3::Zero();
    // Richardson on the midpoint rule removes its leading dr^2 term.
    for (const PlanarDisk& d : cfg.caps)
      dense += 2.0 * (4.0 * oracle::dense_disk(f, d.center, d.radius, c, 400) -
                      oracle::dense_disk(f, d.center, d.radius, c, 200)) / 3.0;
    for (const PlanarDisk& d : cfg.circles) dense -= oracle::dense_circle(f, d.center, d.radius, c);
    dense -= dense.dot(jet.normal) * jet.normal;
    oracle_gap = std::max(oracle_gap, (dense - expect).norm());
  };
  NormalJet q;
  q.normal = Vec3::UnitZ();
  q.basis = {Vec3::UnitX(), Vec3::UnitY()};
  q.d_normal.setZero();
  q.d2_normal = {Vec3(0.7, -0.2, 0.4), Vec3(0.1, 0.3, -0.5), Vec3(-0.4, 0.9, 1.2)};
  check(q, {Vec2(0, 0)}, Vec2(0, 0));
  check(q, {Vec2(0, 0), Vec2(3, 1)}, Vec2(1.5, 0.5));
  const ImplicitDomain e = make_ellipsoid(Vec3(2, 1.5, 1));
  const NormalJet jet = normal_jet(e, project_to_boundary(e, Vec3(1.2, 0.9, 0.5)));
  check(jet, {Vec2(0, 0)}, Vec2(0, 0));
  check(jet, {Vec2(-1, 2), Vec2(2, 0), Vec2(0.5, -3)}, Vec2(0.3, -0.2));
  const bool ok = worst <= 1e-6 && oracle_gap <= 1e-6;
  return {ok, fmt("max deviation from -(pi/2) l trace %.2e", worst) + fmt(", dense oracle gap %.2e (tol 1e-6)", oracle_gap)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

Outcome ac9() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "cmcfb_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"predict", R"({"schema":1,"force_points":20})"},
      {"extract", R"({"schema":1,"grid":[128,128],"synth":{"bubbles":[{"kind":"plane","center":[-0.3,0.2],"scale0":0.1},{"kind":"half_plane","boundary_angle":0.0,"scale0":0.1}],"epsilon_schedule":[1.0],"noise_amp":0.001,"seed":3}})"},
      {"balance", R"({"schema":1,"grid":[32,256]})"},
      {"wente", R"({"schema":1,"instances":4,"grid":[64,64]})"},
      {"verify-bubble", R"({"schema":1,"kind":"half_plane","scale":0.2})"},
      {"synth", R"({"schema":1,"grid":[32,64]})"}};
  int files = 0;
  std::string diff;
  // Commands echo their checks; keep this binary to one line per criterion.
  std::ostringstream sink;
  struct Restore {
    std::streambuf* buf;
    ~Restore() { std::cout.rdbuf(buf); }
  } restore{std::cout.rdbuf(sink.rdbuf())};
  for (const auto& [cmd, cfg] : runs) {
    fs::create_directories(root);
    const std::string cfg_path = (root / (cmd + ".json")).string();
    std::ofstream(cfg_path) << cfg;
    for (const char* rep : {"a", "b"}) {
      cli::Options opt;
      opt.config_path = cfg_path;
      opt.out_dir = (root / rep / cmd).string();
      if (cmd == "wente" || cmd == "extract" || cmd == "synth") opt.seed = 17;
      const int code = cli::run_command(cmd, opt);
      if (code == cli::kInputError) return {false, cmd + " rejected its config"};
    }
    for (const auto& entry : fs::directory_iterator(root / "a" / cmd)) {
      ++files;
      const fs::path other = root / "b" / cmd / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) diff += " " + cmd + "/" + entry.path().filename().string();
    }
  }
  fs::remove_all(root);
  return {diff.empty(), std::to_string(files) + " output files compared" + (diff.empty() ? ", all identical" : ", differing:" + diff)};
}

}  // namespace

int main() {
  criterion("AC1", "energy quantization", 10, ac1);
  criterion("AC2", "hemisphere boundary is a unit circle", 5, ac2);
  criterion("AC3", "spherical-cap balancing", 5, ac3);
  criterion("AC4", "Wente bounds", 60, ac4);
  criterion("AC5", "extraction recovery", 120, ac5);
  criterion("AC6", "reduced force and grad H", 30, ac6);
  criterion("AC7", "Gauss-map identity convergence", 30, ac7);
  criterion("AC8", "second-order moment constant", 5, ac8);
  criterion("AC9", "determinism", 0, ac9);
  return failures == 0 ? 0 : 1;
}
