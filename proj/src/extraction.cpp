#include "cmcfb/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cmcfb/errors.hpp"

namespace cmc {

void ExtractionConfig::validate() const {
  if (max_bubbles < 0) throw InvalidArgument("max_bubbles must be nonnegative");
  if (!(weighted_sup_rel > 0)) throw InvalidArgument("weighted_sup_rel must be positive");
  if (!(separation_min > 0)) throw InvalidArgument("separation_min must be positive");
  if (!(fit_window > 0)) throw InvalidArgument("fit_window must be positive");
  if (!(domain_cut > 0)) throw InvalidArgument("domain_cut must be positive");
  if (restarts < 0) throw InvalidArgument("restarts must be nonnegative");
  if (!(trilinear_c0 > 0)) throw InvalidArgument("trilinear_c0 must be positive");
  if (!(concentration_nu > 0) || !(concentration_nu < 1.0 / (2.0 * trilinear_c0)))
    throw InvalidArgument("concentration_nu must lie in (0, 1 / (2 C0))");
}

DiskMap residual_map(const DiskMap& u, const std::vector<RationalBubble>& bubbles) {
  u.validate();
  DiskMap r = u;
  if (bubbles.empty()) return r;
  for (int j = 0; j <= u.n_r; ++j)
    for (int k = 0; k < u.n_theta; ++k) {
      const Complex z = u.z(j, k);
      Vec3& v = r.at(j, k);
      for (const RationalBubble& b : bubbles) v -= eval_bubble(b, z);
    }
  return r;
}

double concentration_distance(const RationalBubble& b, const Vec2& x) {
  return std::sqrt(b.scale * b.scale + (b.center - x).squaredNorm());
}

StatisticResult weighted_sup_statistic(const DiskMap& u, const std::vector<RationalBubble>& bubbles) {
  const DiskMap r = residual_map(u, bubbles);
  const MapGradient g = gradient(r);
  StatisticResult out;
  out.field.assign(u.size(), 0.0);
  out.value = -1.0;
  for (int j = 0; j <= u.n_r; ++j)
    for (int k = 0; k < u.n_theta; ++k) {
      const int id = u.node(j, k);
      const Complex z = u.z(j, k);
      const Vec2 x(z.real(), z.imag());
      double d = 1.0;
      if (!bubbles.empty()) {
        d = concentration_distance(bubbles[0], x);
        for (size_t i = 1; i < bubbles.size(); ++i) d = std::min(d, concentration_distance(bubbles[i], x));
      }
      const double grad = std::sqrt(g.ux[id].squaredNorm() + g.uy[id].squaredNorm());
      const double s = d * grad;
      out.field[id] = s;
      // Nodes are visited in increasing index, so strict > keeps the lowest index.
      if (s > out.value) {
        out.value = s;
        out.node = id;
        out.point = x;
        out.gradient_norm = grad;
      }
    }
  return out;
}

Candidate next_candidate(const DiskMap& u, const std::vector<RationalBubble>& bubbles, double tol) {
  const StatisticResult s = weighted_sup_statistic(u, bubbles);
  if (s.value < tol || !(s.gradient_norm > 0))
    throw BelowThreshold("weighted statistic " + std::to_string(s.value) + " below threshold");
  return {s.point, 1.0 / s.gradient_norm, s.value};
}

BubbleKind classify_limit_domain(const Vec2& a, double lambda, double domain_cut) {
  if (!(lambda > 0)) throw InvalidArgument("lambda must be positive");
  return (1.0 - a.norm()) / lambda < domain_cut ? BubbleKind::half_plane : BubbleKind::plane;
}

double separation_statistic(const RationalBubble& bi, const RationalBubble& bj) {
  return concentration_distance(bi, bj.center) / bj.scale + concentration_distance(bj, bi.center) / bi.scale;
}

namespace {

struct Window {
  std::vector<Complex> z;
  std::vector<Vec3> u;
  std::vector<double> w;
};

Window make_window(const DiskMap& u, const Vec2& a, double radius) {
  std::vector<int> ids;
  for (int j = 0; j <= u.n_r; ++j)
    for (int k = 0; k < u.n_theta; ++k) {
      const Complex z = u.z(j, k);
      if (std::hypot(z.real() - a.x(), z.imag() - a.y()) <= radius) ids.push_back(u.node(j, k));
    }
  const int stride = std::max<int>(1, static_cast<int>((ids.size() + 3999) / 4000));
  Window win;
  for (size_t i = 0; i < ids.size(); i += stride) {
    const int j = ids[i] / u.n_theta, k = ids[i] % u.n_theta;
    win.z.push_back(u.z(j, k));
    win.u.push_back(u.values[ids[i]]);
    const double area = j < u.n_r ? u.cell_area(j) : 0.5 * u.h() * u.dtheta();
    win.w.push_back(area * stride);
  }
  return win;
}

// Parameter layouts:
//   plane:      a_x, a_y, log lambda, rotation increment (3), shift (3)
//   half_plane: boundary angle, logit lambda, rotation increment (3), shift (3)
struct Model {
  BubbleKind kind;
  Mat3 base_rotation;

  int size() const { return kind == BubbleKind::plane ? 9 : 8; }

  RationalBubble build(const Eigen::VectorXd& x) const {
    if (kind == BubbleKind::plane) {
      const Mat3 R = rotation_from_vector(x.segment<3>(3)) * base_rotation;
      return plane_bubble(Vec2(x[0], x[1]), std::exp(x[2]), R, x.segment<3>(6));
    }
    const Mat3 R = rotation_from_vector(x.segment<3>(2)) * base_rotation;
    const double lam = 1.0 / (1.0 + std::exp(-x[1]));
    return half_plane_bubble(x[0], lam, R, x.segment<3>(5));
  }
};

Eigen::VectorXd residual_vector(const Model& m, const Eigen::VectorXd& x, const Window& win) {
  const RationalBubble b = m.build(x);
  Eigen::VectorXd r(3 * win.z.size());
  for (size_t i = 0; i < win.z.size(); ++i) {
    const Vec3 d = (win.u[i] - eval_bubble(b, win.z[i])) * std::sqrt(win.w[i]);
    r.segment<3>(3 * i) = d;
  }
  return r;
}

// Levenberg-Marquardt with forward-difference Jacobians.
double levenberg_marquardt(const Model& m, Eigen::VectorXd& x, const Window& win) {
  Eigen::VectorXd r = residual_vector(m, x, win);
  double cost = r.squaredNorm();
  double mu = -1.0;
  const int n = m.size();
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd J(r.size(), n);
    for (int p = 0; p < n; ++p) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[p]));
      Eigen::VectorXd xp = x;
      xp[p] += h;
      J.col(p) = (residual_vector(m, xp, win) - r) / h;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (mu < 0) mu = 1e-3 * A.diagonal().maxCoeff();
    bool improved = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd M = A;
      M.diagonal() += mu * (A.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd step = M.ldlt().solve(-g);
      if (!step.allFinite()) {
        mu *= 4;
        continue;
      }
      Eigen::VectorXd xn = x + step;
      double cn;
      try {
        const Eigen::VectorXd rn = residual_vector(m, xn, win);
        cn = rn.squaredNorm();
        if (cn < cost) {
          const double rel = (cost - cn) / cost;
          x = xn;
          r = rn;
          cost = cn;
          mu = std::max(mu / 3.0, 1e-15);
          improved = true;
          if (rel < 1e-12 || step.norm() < 1e-12 * (1.0 + x.norm())) return cost;
          break;
        }
      } catch (const Error&) {
      }
      mu *= 4;
    }
    if (!improved) break;
  }
  return cost;
}

// Rotation R minimizing |R Jm - Jd| (orthogonal Procrustes, det R = 1).
Mat3 procrustes(const Eigen::Matrix<double, 3, 2>& Jd, const Eigen::Matrix<double, 3, 2>& Jm) {
  const Mat3 M = Jd * Jm.transpose();
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) D(2, 2) = -1;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

Eigen::Matrix<double, 3, 2> model_jacobian(const RationalBubble& b, Complex z, double h) {
  Eigen::Matrix<double, 3, 2> J;
  J.col(0) = (eval_bubble(b, z + h) - eval_bubble(b, z - h)) / (2 * h);
  J.col(1) = (eval_bubble(b, z + Complex(0, h)) - eval_bubble(b, z - Complex(0, h))) / (2 * h);
  return J;
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

FitResult fit_bubble(const DiskMap& u, const Vec2& a, double lambda, BubbleKind kind,
                     const ExtractionConfig& cfg) {
  if (!(lambda > 0)) throw InvalidArgument("candidate scale must be positive");
  const Window win = make_window(u, a, cfg.fit_window * lambda);
  if (win.z.size() < 12) throw FitDiverged("fit window holds fewer than 12 nodes");

  // Data Jacobian and value at the candidate node.
  const MapGradient g = gradient(u);
  int best = 0;
  double best_d = 1e300;
  for (int j = 0; j <= u.n_r; ++j)
    for (int k = 0; k < u.n_theta; ++k) {
      const Complex z = u.z(j, k);
      const double d = std::hypot(z.real() - a.x(), z.imag() - a.y());
      if (d < best_d) {
        best_d = d;
        best = u.node(j, k);
      }
    }
  Eigen::Matrix<double, 3, 2> Jd;
  Jd.col(0) = g.ux[best];
  Jd.col(1) = g.uy[best];
  const Complex zc = u.z(best / u.n_theta, best % u.n_theta);
  const Vec3 uc = u.values[best];

  double data_var = 0.0, wsum = 0.0;
  Vec3 mean = Vec3::Zero();
  for (size_t i = 0; i < win.z.size(); ++i) {
    mean += win.w[i] * win.u[i];
    wsum += win.w[i];
  }
  mean /= wsum;
  for (size_t i = 0; i < win.z.size(); ++i) data_var += win.w[i] * (win.u[i] - mean).squaredNorm();
  if (!(data_var > 0)) throw FitDiverged("fit window carries no variation");

  std::mt19937_64 rng(cfg.seed);
  double best_cost = 1e300;
  RationalBubble best_bubble;
  for (int attempt = 0; attempt <= cfg.restarts; ++attempt) {
    const double jitter = attempt == 0 ? 0.0 : 1.0;
    const double da = 0.3 * jitter * (2 * uniform(rng) - 1);
    const double db = 0.3 * jitter * (2 * uniform(rng) - 1);
    const double ds = 0.2 * jitter * (2 * uniform(rng) - 1);
    const Vec3 drot = 0.3 * jitter * Vec3(2 * uniform(rng) - 1, 2 * uniform(rng) - 1, 2 * uniform(rng) - 1);

    Model model{kind, Mat3::Identity()};
    Eigen::VectorXd x(model.size());
    RationalBubble unrotated;
    if (kind == BubbleKind::plane) {
      const double lam0 = 2.0 * std::sqrt(2.0) * lambda * std::exp(ds);
      const Vec2 a0 = a + lam0 * Vec2(da, db);
      unrotated = plane_bubble(a0, lam0);
      x << a0.x(), a0.y(), std::log(lam0), 0, 0, 0, 0, 0, 0;
    } else {
      // Peak gradient of a hemisphere of scale s is 2 sqrt 2 / (s (2 - s)).
      const double t = std::min(2.0 * std::sqrt(2.0) * lambda * std::exp(ds), 0.99);
      const double lam0 = std::clamp(1.0 - std::sqrt(1.0 - t), 1e-6, 0.9);
      const double ang = std::atan2(a.y(), a.x()) + lam0 * da;
      unrotated = half_plane_bubble(ang, lam0);
      x << ang, std::log(lam0 / (1.0 - lam0)), 0, 0, 0, 0, 0, 0;
    }
    const double hstep = 1e-3 * std::max(lambda, 1e-4);
    model.base_rotation = rotation_from_vector(drot) * procrustes(Jd, model_jacobian(unrotated, zc, hstep));
    const Vec3 shift0 = uc - model.base_rotation * (eval_bubble(unrotated, zc) - unrotated.shift);
    x.tail<3>() = shift0;

    double cost;
    try {
      cost = levenberg_marquardt(model, x, win);
    } catch (const Error&) {
      continue;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_bubble = model.build(x);
    }
  }
  if (best_cost >= 1e300) throw FitDiverged("no restart produced a valid bubble");
  FitResult out;
  out.bubble = best_bubble;
  out.relative_residual = std::sqrt(best_cost / data_var);
  out.window_nodes = static_cast<int>(win.z.size());
  if (out.relative_residual > 0.2)
    throw FitDiverged("relative residual " + std::to_string(out.relative_residual) + " exceeds 0.2");
  return out;
}

double concentration_function(const DiskMap& residual, double t) {
  if (!(t > 0)) return 0.0;
  const MapGradient g = gradient(residual);
  std::vector<Vec2> pts;
  std::vector<double> e;
  double total = 0.0;
  for (int j = 0; j < residual.n_r; ++j)
    for (int k = 0; k < residual.n_theta; ++k) {
      const int id = residual.node(j, k);
      const Complex z = residual.z(j, k);
      pts.emplace_back(z.real(), z.imag());
      e.push_back((g.ux[id].squaredNorm() + g.uy[id].squaredNorm()) * residual.cell_area(j));
      total += e.back();
    }
  if (t >= 2.0) return total;

  // Bucket cells on a square grid of side t so a ball touches 3 x 3 buckets.
  const int nb = std::max(1, static_cast<int>(std::ceil(2.0 / t)));
  auto bucket = [&](double c) { return std::clamp(static_cast<int>((c + 1.0) / t), 0, nb - 1); };
  std::vector<std::vector<int>> buckets(nb * nb);
  for (size_t i = 0; i < pts.size(); ++i) buckets[bucket(pts[i].y()) * nb + bucket(pts[i].x())].push_back(static_cast<int>(i));

  const size_t stride = pts.size() <= 16384 ? 1 : (pts.size() + 16383) / 16384;
  double best = 0.0;
  for (size_t c = 0; c < pts.size(); c += stride) {
    const Vec2& z = pts[c];
    const int bx = bucket(z.x()), by = bucket(z.y());
    double s = 0.0;
    for (int y = std::max(0, by - 1); y <= std::min(nb - 1, by + 1); ++y)
      for (int x = std::max(0, bx - 1); x <= std::min(nb - 1, bx + 1); ++x)
        for (int i : buckets[y * nb + x])
          if ((pts[i] - z).squaredNorm() < t * t) s += e[i];
    best = std::max(best, s);
  }
  return best;
}

namespace {

double grid_energy(const DiskMap& like, const RationalBubble& b) {
  return dirichlet_energy(DiskMap::sample(like.n_r, like.n_theta, [&](Complex z) { return eval_bubble(b, z); }));
}

std::vector<RationalBubble> models(const std::vector<FittedBubble>& f) {
  std::vector<RationalBubble> out;
  for (const FittedBubble& b : f) out.push_back(b.bubble);
  return out;
}

FittedBubble finish_fit(const DiskMap& u, const FitResult& fit) {
  FittedBubble fb;
  fb.bubble = fit.bubble;
  fb.relative_residual = fit.relative_residual;
  fb.model_energy = bubble_energy(fit.bubble).energy;
  fb.disk_energy = grid_energy(u, fit.bubble);
  return fb;
}

}  // namespace

BubbleDecomposition extract(const DiskMap& u, const ExtractionConfig& cfg) {
  cfg.validate();
  u.validate();
  BubbleDecomposition out;
  out.total_energy = dirichlet_energy(u);
  // Sampled energies fall slightly short of 4 pi k; allow the 0.5% quantization slack.
  out.energy_budget = static_cast<int>(std::floor(out.total_energy / (4 * kPi) + 0.005));
  const StatisticResult s0 = weighted_sup_statistic(u, {});
  out.initial_weighted_sup = s0.value;
  out.threshold = cfg.weighted_sup_tol > 0 ? cfg.weighted_sup_tol : cfg.weighted_sup_rel * s0.value;
  out.residual_history.push_back(out.total_energy);

  std::vector<FittedBubble> fitted;
  double residual_energy = out.total_energy;
  const int max_bubbles = std::min(cfg.max_bubbles, out.energy_budget);
  out.stop_reason = "budget";
  for (int iter = 0; iter < 3 * std::max(1, cfg.max_bubbles); ++iter) {
    if (static_cast<int>(fitted.size()) >= max_bubbles) {
      out.stop_reason = static_cast<int>(fitted.size()) >= cfg.max_bubbles ? "max_bubbles" : "energy_budget";
      break;
    }
    Candidate cand;
    try {
      cand = next_candidate(u, models(fitted), out.threshold);
    } catch (const BelowThreshold&) {
      out.stop_reason = "below_threshold";
      break;
    }
    const DiskMap r = residual_map(u, models(fitted));
    const BubbleKind kind = classify_limit_domain(cand.a, cand.lambda, cfg.domain_cut);
    FitResult fit;
    try {
      fit = fit_bubble(r, cand.a, cand.lambda, kind, cfg);
    } catch (const FitDiverged& e) {
      out.flags.push_back(std::string("fit_diverged: ") + e.what());
      out.stop_reason = "fit_diverged";
      break;
    }
    std::vector<FittedBubble> trial = fitted;
    trial.push_back(finish_fit(u, fit));

    // Pairs closer than separation_min are refit as a single bubble.
    for (size_t i = 0; i + 1 < trial.size(); ++i) {
      if (separation_statistic(trial[i].bubble, trial.back().bubble) >= cfg.separation_min) continue;
      out.flags.push_back("merged bubbles " + std::to_string(i) + " and " + std::to_string(trial.size() - 1));
      std::vector<FittedBubble> others;
      for (size_t k = 0; k + 1 < trial.size(); ++k)
        if (k != i) others.push_back(trial[k]);
      const RationalBubble& old = trial[i].bubble;
      try {
        const DiskMap ro = residual_map(u, models(others));
        const double lam = old.kind == BubbleKind::plane ? old.scale / (2 * std::sqrt(2.0))
                                                          : old.scale * (2 - old.scale) / (2 * std::sqrt(2.0));
        const FitResult merged = fit_bubble(ro, old.center, lam, old.kind, cfg);
        others.push_back(finish_fit(u, merged));
        trial = others;
      } catch (const FitDiverged&) {
        trial.pop_back();
      }
      break;
    }

    const double new_energy = dirichlet_energy(residual_map(u, models(trial)));
    if (!(new_energy < residual_energy)) {
      out.flags.push_back("rejected fit that did not lower the residual energy");
      out.stop_reason = "no_improvement";
      break;
    }
    fitted = trial;
    residual_energy = new_energy;
    out.residual_history.push_back(residual_energy);
  }

  double claimed = 0.0;
  for (const FittedBubble& b : fitted) claimed += b.disk_energy;
  if (claimed > 1.05 * out.total_energy)
    throw BudgetExceeded("fitted bubbles claim " + std::to_string(claimed) + " of " +
                         std::to_string(out.total_energy));

  out.bubbles = fitted;
  out.residual_energy = residual_energy;
  const std::vector<RationalBubble> bs = models(fitted);
  out.weighted_sup = weighted_sup_statistic(u, bs).value;
  out.pairwise_separation.assign(bs.size(), std::vector<double>(bs.size(), 0.0));
  for (size_t i = 0; i < bs.size(); ++i)
    for (size_t j = 0; j < bs.size(); ++j)
      if (i != j) out.pairwise_separation[i][j] = separation_statistic(bs[i], bs[j]);
  for (const RationalBubble& b : bs)
    if (b.kind == BubbleKind::half_plane) ++out.hemisphere_count;
  out.coverage_gap = coverage_gap(u, bs);
  return out;
}

double coverage_gap(const DiskMap& u, const std::vector<RationalBubble>& bubbles) {
  u.validate();
  const int stride = u.size() <= 16384 ? 1 : 2;
  std::vector<Vec3> pts;
  std::vector<int> rows;
  for (int j = 0; j < u.n_r; j += stride) rows.push_back(j);
  rows.push_back(u.n_r);
  for (int j : rows)
    for (int k = 0; k < u.n_theta; k += stride) pts.push_back(u.at(j, k));

  if (bubbles.empty()) {
    Vec3 c = Vec3::Zero();
    for (const Vec3& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    double gap = 0.0;
    for (const Vec3& p : pts) gap = std::max(gap, (p - c).norm());
    return gap;
  }

  struct Shape {
    Vec3 center;
    Vec3 axis;  // zero for full spheres
  };
  std::vector<Shape> shapes;
  for (size_t i = 0; i < bubbles.size(); ++i) {
    const RationalBubble& b = bubbles[i];
    const Complex a(b.center.x(), b.center.y());
    Vec3 offset = Vec3::Zero();
    for (size_t j = 0; j < bubbles.size(); ++j)
      if (j != i) offset += eval_bubble(bubbles[j], a);
    Shape s{b.shift + offset, Vec3::Zero()};
    if (b.kind == BubbleKind::half_plane) s.axis = (eval_bubble(b, a) - b.shift).normalized();
    shapes.push_back(s);
  }
  double gap = 0.0;
  for (const Vec3& p : pts) {
    double best = 1e300;
    for (const Shape& s : shapes) {
      const Vec3 v = p - s.center;
      double d;
      if (s.axis.isZero() || v.dot(s.axis) >= 0) {
        d = std::abs(v.norm() - 1.0);
      } else {
        const Vec3 vp = v - v.dot(s.axis) * s.axis;
        const double n = vp.norm();
        d = n > 0 ? (v - vp / n).norm() : std::sqrt(1.0 + v.squaredNorm());
      }
      best = std::min(best, d);
    }
    gap = std::max(gap, best);
  }
  return gap;
}

}  // namespace cmc
