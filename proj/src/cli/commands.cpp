#include "cmcfb/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cmcfb/balance.hpp"
#include "cmcfb/errors.hpp"
#include "cmcfb/extraction.hpp"
#include "cmcfb/wente.hpp"

namespace cmc::cli {

bool CommandResult::passed() const {
  if (!error.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

namespace {

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
Json vec_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Vec3 json_vec3(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument(what + " must be an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Vec2 json_vec2(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument(what + " must be an array of 2 numbers");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

std::pair<int, int> json_grid(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("grid must be [n_r, n_theta]");
  return {j[0].get<int>(), j[1].get<int>()};
}

double positive(const Json& cfg, const char* key) {
  const double v = cfg.at(key).get<double>();
  if (!(v > 0)) throw InvalidArgument(std::string(key) + " must be positive");
  return v;
}

void add_check(CommandResult& r, std::string name, double value, double limit, bool pass) {
  r.checks.push_back({std::move(name), pass, value, limit});
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_number(row[i]);
    os << '\n';
  }
  return os.str();
}

Json default_domain() { return Json{{"kind", "ellipsoid"}, {"semi_axes", {2.0, 1.5, 1.0}}}; }

Json default_synth() {
  return Json{{"bubbles",
               Json::array({Json{{"kind", "plane"},
                                 {"center", {-0.3, 0.2}},
                                 {"scale0", 0.05},
                                 {"scale_power", 0.0},
                                 {"rotation", Json{{"axis", {1.0, 1.0, 0.0}}, {"angle", 0.4}}},
                                 {"shift", {0.5, 0.0, 0.0}}},
                            Json{{"kind", "half_plane"}, {"boundary_angle", 0.0}, {"scale0", 0.1}}})},
              {"epsilon_schedule", {1.0}},
              {"noise_amp", 1e-3},
              {"seed", 7}};
}

Json extraction_defaults() {
  const ExtractionConfig d;
  return Json{{"max_bubbles", d.max_bubbles},
              {"weighted_sup_tol", d.weighted_sup_tol},
              {"weighted_sup_rel", d.weighted_sup_rel},
              {"separation_min", d.separation_min},
              {"concentration_nu", d.concentration_nu},
              {"fit_window", d.fit_window},
              {"domain_cut", d.domain_cut},
              {"restarts", d.restarts},
              {"seed", d.seed},
              {"trilinear_c0", d.trilinear_c0}};
}

ExtractionConfig parse_extraction(const Json& j) {
  ExtractionConfig c;
  c.max_bubbles = j.at("max_bubbles").get<int>();
  c.weighted_sup_tol = j.at("weighted_sup_tol").get<double>();
  c.weighted_sup_rel = j.at("weighted_sup_rel").get<double>();
  c.separation_min = j.at("separation_min").get<double>();
  c.concentration_nu = j.at("concentration_nu").get<double>();
  c.fit_window = j.at("fit_window").get<double>();
  c.domain_cut = j.at("domain_cut").get<double>();
  c.restarts = j.at("restarts").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.trilinear_c0 = j.at("trilinear_c0").get<double>();
  c.validate();
  return c;
}

Json bubble_json(const RationalBubble& b) {
  return Json{{"kind", to_string(b.kind)}, {"center", vec_json(b.center)}, {"scale", b.scale},
              {"pole", vec_json(b.pole)},   {"shift", vec_json(b.shift)}};
}

Json merge(const Json& defaults, const Json& user, const std::string& path) {
  if (!user.is_object()) throw InvalidArgument(path + " must be an object");
  Json out = defaults;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw InvalidArgument("unknown config key '" + key + "'");
    const Json& d = defaults[it.key()];
    // Only the extraction block merges key by key; other objects are replaced.
    if (it.key() == "extraction")
      out[it.key()] = merge(d, it.value(), key);
    else
      out[it.key()] = it.value();
  }
  return out;
}

}  // namespace

ImplicitDomain parse_domain(const Json& j) {
  if (!j.is_object() || !j.contains("kind")) throw InvalidArgument("domain needs a \"kind\"");
  const std::string kind = j.at("kind").get<std::string>();
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "kind" &&
          std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
        throw InvalidArgument("unknown domain key '" + it.key() + "'");
  };
  if (kind == "ball") {
    allow({"radius", "center"});
    const double r = j.value("radius", 1.0);
    if (!(r > 0)) throw InvalidArgument("ball radius must be positive");
    return make_ball(r, j.contains("center") ? json_vec3(j["center"], "center") : Vec3::Zero());
  }
  if (kind == "ellipsoid") {
    allow({"semi_axes"});
    const Vec3 ax = json_vec3(j.at("semi_axes"), "semi_axes");
    if (!(ax.minCoeff() > 0)) throw InvalidArgument("semi_axes must be positive");
    return make_ellipsoid(ax);
  }
  if (kind == "bumpy_ball") {
    allow({"radius", "amplitude"});
    return make_bumpy_ball(j.value("radius", 1.0), j.value("amplitude", 0.1));
  }
  if (kind == "half_space") {
    allow({});
    return make_half_space();
  }
  throw InvalidArgument("unknown domain kind '" + kind + "'");
}

SyntheticSequence parse_synth(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("synth must be an object");
  SyntheticSequence s;
  for (const Json& b : j.at("bubbles")) {
    PlantedBubble p;
    const std::string kind = b.at("kind").get<std::string>();
    if (kind == "plane")
      p.kind = BubbleKind::plane;
    else if (kind == "half_plane")
      p.kind = BubbleKind::half_plane;
    else
      throw InvalidArgument("unknown bubble kind '" + kind + "'");
    if (b.contains("center")) p.center = json_vec2(b["center"], "center");
    p.boundary_angle = b.value("boundary_angle", 0.0);
    p.scale0 = b.value("scale0", 1.0);
    p.scale_power = b.value("scale_power", 0.0);
    if (!(p.scale0 > 0)) throw InvalidArgument("scale0 must be positive");
    if (b.contains("rotation")) {
      const Json& rot = b["rotation"];
      p.rotation = axis_angle(json_vec3(rot.at("axis"), "rotation axis"), rot.at("angle").get<double>());
    }
    if (b.contains("shift")) p.shift = json_vec3(b["shift"], "shift");
    s.bubbles.push_back(p);
  }
  s.epsilon_schedule = j.at("epsilon_schedule").get<std::vector<double>>();
  s.noise_amp = j.at("noise_amp").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"predict", "extract",       "balance",
                                                 "wente",   "verify-bubble", "synth"};
  return names;
}

Json default_config(const std::string& command) {
  if (command == "predict")
    return Json{{"schema", 1},         {"domain", default_domain()}, {"n_seeds", 64},
                {"tol", 1e-6},         {"hemispheres", 1},           {"force_points", 100},
                {"angle_tol", 1e-2},   {"match_tol", 1e-4}};
  if (command == "extract")
    return Json{{"schema", 1},       {"input", ""},
                {"synth", default_synth()}, {"epsilon", 1.0},
                {"grid", {512, 512}}, {"extraction", extraction_defaults()},
                {"expect", nullptr}};
  if (command == "balance")
    return Json{{"schema", 1},
                {"cap_heights", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}},
                {"grid", {64, 512}},
                {"tol", 1e-5},
                {"domain", default_domain()},
                {"base_point", {1.2, 0.9, 0.5}},
                {"centers", Json::array({Json::array({0.0, 0.0})})},
                {"moment_tol", 1e-6}};
  if (command == "wente")
    return Json{{"schema", 1},       {"instances", 100},  {"grid", {256, 256}},
                {"seed", 1},         {"ratio_max", 1.02}, {"analytic_tol", 0.01}};
  if (command == "verify-bubble")
    return Json{{"schema", 1},      {"kind", "plane"},   {"degree", 1},
                {"center", {0.0, 0.0}}, {"scale", 1.0},  {"boundary_angle", 0.0},
                {"tol", 0.005},     {"trace_tol", 1e-3}, {"grid", {64, 512}}};
  if (command == "synth")
    return Json{{"schema", 1},       {"synth", default_synth()}, {"epsilon", 1.0},
                {"grid", {512, 512}}, {"output", "synth.dmap"}};
  throw InvalidArgument("unknown command '" + command + "'");
}

Json resolve_config(const std::string& command, const Json& user, const Options& opt) {
  Json defaults = default_config(command);
  if (!user.is_null()) {
    if (!user.is_object()) throw InvalidArgument("config must be a JSON object");
    if (!user.contains("schema") || user["schema"] != 1) throw InvalidArgument("config needs \"schema\": 1");
  }
  Json cfg = user.is_null() ? defaults : merge(defaults, user, "");
  if (opt.grid) {
    if (!cfg.contains("grid")) throw InvalidArgument("--grid does not apply to " + command);
    cfg["grid"] = {opt.grid->first, opt.grid->second};
  }
  if (opt.seed) {
    if (cfg.contains("seed"))
      cfg["seed"] = *opt.seed;
    else if (cfg.contains("synth") && cfg["synth"].is_object())
      cfg["synth"]["seed"] = *opt.seed;
    else
      throw InvalidArgument("--seed does not apply to " + command);
    if (cfg.contains("extraction")) cfg["extraction"]["seed"] = *opt.seed;
  }
  if (cfg.contains("grid")) {
    const auto [n_r, n_theta] = json_grid(cfg["grid"]);
    if (n_r < 4 || n_theta < 8 || n_theta % 2 != 0)
      throw InvalidArgument("grid needs n_r >= 4 and even n_theta >= 8");
  }
  return cfg;
}

CommandResult cmd_predict(const Json& cfg) {
  CommandResult r;
  r.config = cfg;
  const ImplicitDomain domain = parse_domain(cfg.at("domain"));
  const int n_seeds = cfg.at("n_seeds").get<int>();
  const double tol = positive(cfg, "tol");
  const int l = cfg.at("hemispheres").get<int>();
  if (l < 1) throw InvalidArgument("hemispheres must be at least 1");
  const int n_points = cfg.at("force_points").get<int>();
  const double angle_tol = positive(cfg, "angle_tol");
  const double match_tol = positive(cfg, "match_tol");

  const CriticalPointSet cps = find_critical_points(domain, n_seeds, tol);
  r.results["h_constant"] = cps.h_constant;
  if (cps.h_constant) {
    r.results["note"] = "H constant";
    add_check(r, "h_constant_degenerate", 1.0, 1.0, true);
    return r;
  }

  Json table = Json::array();
  std::vector<std::vector<double>> cp_rows;
  for (const CriticalPoint& c : cps.points) {
    table.push_back({{"point", vec_json(c.point)},
                     {"H", c.mean_curvature},
                     {"type", to_string(c.type)},
                     {"grad_norm", c.grad_norm}});
    cp_rows.push_back({c.point.x(), c.point.y(), c.point.z(), c.mean_curvature,
                       static_cast<double>(static_cast<int>(c.type))});
  }
  r.results["critical_points"] = table;

  const TangentField force = [&](const Vec3& q) { return reduced_force(domain, q, l); };
  const std::vector<Vec3> zeros = find_field_zeros(domain, force, n_seeds, tol * kPi * l);
  Json zj = Json::array();
  for (const Vec3& z : zeros) zj.push_back(vec_json(z));
  r.results["force_zeros"] = zj;

  auto nearest = [](const Vec3& p, const std::vector<Vec3>& set) {
    double best = 1e300;
    for (const Vec3& q : set) best = std::min(best, (p - q).norm());
    return best;
  };
  std::vector<Vec3> cp_pts;
  for (const CriticalPoint& c : cps.points) cp_pts.push_back(c.point);
  double mismatch = 0.0;
  for (const Vec3& z : zeros) mismatch = std::max(mismatch, nearest(z, cp_pts));
  for (const Vec3& p : cp_pts) mismatch = std::max(mismatch, nearest(p, zeros));
  const bool same_count = zeros.size() == cp_pts.size();
  add_check(r, "zero_sets_coincide", mismatch, match_tol, same_count && mismatch <= match_tol);

  double worst = 0.0;
  std::vector<std::vector<double>> rows;
  for (const Vec3& d : fibonacci_sphere(n_points)) {
    const Vec3 q = boundary_point_along(domain, d);
    const Vec3 f = reduced_force(domain, q, l);
    const Vec3 g = surface_grad_H(domain, q);
    double angle = 0.0;
    if (g.norm() > 1e-8 && f.norm() > 1e-8) {
      const double c = std::clamp(-f.dot(g) / (f.norm() * g.norm()), -1.0, 1.0);
      angle = std::acos(c);
    }
    worst = std::max(worst, angle);
    rows.push_back({q.x(), q.y(), q.z(), mean_curvature(domain, q), f.x(), f.y(), f.z(), g.x(), g.y(),
                    g.z(), angle});
  }
  add_check(r, "force_collinear_with_grad_H", worst, angle_tol, worst <= angle_tol);
  r.results["critical_point_count"] = cps.points.size();
  r.files.push_back({"predict_critical_points.csv", csv_table({"x", "y", "z", "H", "morse_type"}, cp_rows)});
  r.files.push_back({"predict_force.csv",
                     csv_table({"x", "y", "z", "H", "fx", "fy", "fz", "gx", "gy", "gz", "angle"}, rows)});
  return r;
}

CommandResult cmd_extract(const Json& cfg) {
  CommandResult r;
  r.config = cfg;
  const ExtractionConfig ecfg = parse_extraction(cfg.at("extraction"));
  const std::string input = cfg.at("input").get<std::string>();
  DiskMap map;
  std::vector<RationalBubble> truth;
  if (!input.empty()) {
    map = read_dmap(input);
  } else {
    const SyntheticSequence s = parse_synth(cfg.at("synth"));
    const auto [n_r, n_theta] = json_grid(cfg.at("grid"));
    SynthResult syn = synth_sequence(s, positive(cfg, "epsilon"), n_r, n_theta);
    map = std::move(syn.map);
    truth = std::move(syn.truth);
  }

  const BubbleDecomposition d = extract(map, ecfg);
  Json bubbles = Json::array();
  std::vector<std::vector<double>> rows;
  for (const FittedBubble& f : d.bubbles) {
    Json b = bubble_json(f.bubble);
    b["model_energy"] = f.model_energy;
    b["disk_energy"] = f.disk_energy;
    b["relative_residual"] = f.relative_residual;
    b["covering_degree"] = f.covering_degree;
    bubbles.push_back(b);
    rows.push_back({f.bubble.kind == BubbleKind::plane ? 0.0 : 1.0, f.bubble.center.x(), f.bubble.center.y(),
                    f.bubble.scale, f.model_energy, f.disk_energy, f.relative_residual});
  }
  r.results["bubbles"] = bubbles;
  r.results["hemisphere_count"] = d.hemisphere_count;
  r.results["total_energy"] = d.total_energy;
  r.results["residual_energy"] = d.residual_energy;
  r.results["residual_history"] = d.residual_history;
  r.results["weighted_sup"] = d.weighted_sup;
  r.results["initial_weighted_sup"] = d.initial_weighted_sup;
  r.results["threshold"] = d.threshold;
  r.results["pairwise_separation"] = d.pairwise_separation;
  r.results["coverage_gap"] = d.coverage_gap;
  r.results["energy_budget"] = d.energy_budget;
  r.results["stop_reason"] = d.stop_reason;
  r.results["flags"] = d.flags;
  if (!truth.empty()) {
    Json t = Json::array();
    for (const RationalBubble& b : truth) t.push_back(bubble_json(b));
    r.results["truth"] = t;
  }

  double claimed = 0.0;
  for (const FittedBubble& f : d.bubbles) claimed += f.disk_energy;
  add_check(r, "energy_within_budget", claimed, 1.05 * d.total_energy, claimed <= 1.05 * d.total_energy + 1e-12);
  const Json& expect = cfg.at("expect");
  if (expect.is_object()) {
    if (expect.contains("bubbles")) {
      const int n = expect["bubbles"].get<int>();
      add_check(r, "bubble_count", static_cast<double>(d.bubbles.size()), n,
                static_cast<int>(d.bubbles.size()) == n);
    }
    if (expect.contains("hemispheres")) {
      const int l = expect["hemispheres"].get<int>();
      add_check(r, "hemisphere_count", d.hemisphere_count, l, d.hemisphere_count == l);
    }
    if (expect.contains("min_separation")) {
      const double s = expect["min_separation"].get<double>();
      double worst = 1e300;
      for (size_t i = 0; i < d.bubbles.size(); ++i)
        for (size_t j = i + 1; j < d.bubbles.size(); ++j) worst = std::min(worst, d.pairwise_separation[i][j]);
      if (d.bubbles.size() < 2) worst = s;
      add_check(r, "min_separation", worst, s, worst >= s);
    }
  }
  r.files.push_back({"extract_bubbles.csv",
                     csv_table({"half_plane", "ax", "ay", "scale", "model_energy", "disk_energy", "relative_residual"},
                               rows)});
  return r;
}

CommandResult cmd_balance(const Json& cfg) {
  CommandResult r;
  r.config = cfg;
  const auto [n_r, n_theta] = json_grid(cfg.at("grid"));
  const double tol = positive(cfg, "tol");
  const double moment_tol = positive(cfg, "moment_tol");

  Json caps = Json::array();
  double worst = 0.0;
  double worst_closed = 0.0;
  for (const double h : cfg.at("cap_heights").get<std::vector<double>>()) {
    if (!(h >= 0 && h < 1)) throw InvalidArgument("cap heights must lie in [0, 1)");
    // Upper cap of the unit sphere above height h, spanned by its flat disk.
    const double rho = std::sqrt((1 - h) / (1 + h));
    const double rad = std::sqrt(1 - h * h);
    const Mat3 flip = axis_angle(Vec3::UnitX(), kPi);
    const DiskMap u = DiskMap::sample(n_r, n_theta, [&](Complex z) { return Vec3(flip * inv_stereographic(rho * z)); });
    const DiskMap cap = DiskMap::sample(n_r, n_theta, [&](Complex z) {
      return Vec3(rad * z.real(), -rad * z.imag(), h);
    });
    const BalancingResult b = balancing_residual(boundary_trace(u), cap, 1.0);
    const Vec3 closed(0, 0, -2 * kPi * (1 - h * h));
    worst = std::max(worst, b.residual.norm());
    worst_closed = std::max(worst_closed, (b.boundary_integral - closed).norm());
    caps.push_back({{"h", h},
                    {"boundary_integral", vec_json(b.boundary_integral)},
                    {"cap_integral", vec_json(b.cap_integral)},
                    {"residual", b.residual.norm()}});
  }
  r.results["caps"] = caps;
  add_check(r, "cap_residual", worst, tol * 2 * kPi, worst <= tol * 2 * kPi);
  add_check(r, "cap_closed_form", worst_closed, tol * 2 * kPi, worst_closed <= tol * 2 * kPi);

  const ImplicitDomain domain = parse_domain(cfg.at("domain"));
  std::vector<Vec2> centers;
  for (const Json& c : cfg.at("centers")) centers.push_back(json_vec2(c, "center"));
  if (centers.empty()) throw InvalidArgument("centers must not be empty");
  const Vec3 base = json_vec3(cfg.at("base_point"), "base_point");
  const CapConfiguration conf = CapConfiguration::unit(centers, project_to_boundary(domain, base));
  const BalanceReport rep = balance_report(domain, conf);
  const NormalJet jet = normal_jet(domain, conf.base_point);
  const Vec3 tr = jet.d2_normal[0] + jet.d2_normal[2];
  const Vec3 expected = -0.5 * kPi * conf.hemisphere_count() * (tr - tr.dot(jet.normal) * jet.normal);
  const double moment_err = (rep.second_order_projected - expected).norm();
  add_check(r, "second_order_constant", moment_err, moment_tol, moment_err <= moment_tol);
  add_check(r, "first_order_vanishes", rep.first_order.norm(), moment_tol, rep.first_order.norm() <= moment_tol);
  r.results["report"] = {{"base_point", vec_json(conf.base_point)},
                         {"normal", vec_json(rep.normal)},
                         {"first_order", vec_json(rep.first_order)},
                         {"barycenter", vec_json(rep.barycenter.c)},
                         {"barycenter_degenerate", rep.barycenter.degenerate},
                         {"second_order_projected", vec_json(rep.second_order_projected)},
                         {"reduced_force", vec_json(rep.reduced_force)},
                         {"grad_H", vec_json(rep.grad_H)}};
  return r;
}

CommandResult cmd_wente(const Json& cfg) {
  CommandResult r;
  r.config = cfg;
  const auto [n_r, n_theta] = json_grid(cfg.at("grid"));
  const int instances = cfg.at("instances").get<int>();
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const double ratio_max = positive(cfg, "ratio_max");
  const double analytic_tol = positive(cfg, "analytic_tol");

  const PoissonSolver solver(n_r, n_theta);
  const ScalarField x = ScalarField::sample(n_r, n_theta, [](Complex z) { return z.real(); });
  const ScalarField y = ScalarField::sample(n_r, n_theta, [](Complex z) { return z.imag(); });
  const WenteCheck w = wente_check(x, y, &solver);
  const double grad_target = std::sqrt(2.0 / 3.0);
  const double e_inf = std::abs(w.ratio_inf / 0.5 - 1.0);
  const double e_grad = std::abs(w.ratio_grad / grad_target - 1.0);
  add_check(r, "analytic_ratio_inf", w.ratio_inf, 0.5, e_inf <= analytic_tol);
  add_check(r, "analytic_ratio_grad", w.ratio_grad, grad_target, e_grad <= analytic_tol);

  const WenteCheck swapped = wente_check(y, x, &solver);
  double anti = 0.0;
  for (size_t i = 0; i < w.rhs.values.size(); ++i) anti = std::max(anti, std::abs(w.rhs.values[i] + swapped.rhs.values[i]));
  add_check(r, "antisymmetry", anti, 1e-12, anti <= 1e-12);

  const WenteSweep s = wente_sweep(instances, n_r, n_theta, seed);
  std::vector<std::vector<double>> rows;
  double dual = 0.0;
  for (const WenteSweepRow& row : s.rows) {
    rows.push_back({static_cast<double>(row.seed), row.ratio_inf, row.ratio_grad, row.C_estimate});
    if (row.bound_factor > 0) dual = std::max(dual, row.C_estimate / row.bound_factor);
  }
  add_check(r, "sweep_ratio_inf", s.max_ratio_inf, ratio_max, s.max_ratio_inf <= ratio_max);
  add_check(r, "sweep_ratio_grad", s.max_ratio_grad, ratio_max, s.max_ratio_grad <= ratio_max);
  add_check(r, "trilinear_within_dual_bound", dual, 1.0, dual <= 1.0);
  r.results["analytic"] = {{"ratio_inf", w.ratio_inf}, {"ratio_grad", w.ratio_grad}};
  r.results["max_ratio_inf"] = s.max_ratio_inf;
  r.results["max_ratio_grad"] = s.max_ratio_grad;
  r.results["C0_empirical"] = s.C0;
  r.files.push_back({"wente_sweep.csv", csv_table({"seed", "ratio_inf", "ratio_grad", "C_estimate"}, rows)});
  return r;
}

CommandResult cmd_verify_bubble(const Json& cfg) {
  CommandResult r;
  r.config = cfg;
  const std::string kind = cfg.at("kind").get<std::string>();
  const int degree = cfg.at("degree").get<int>();
  const double scale = positive(cfg, "scale");
  const double tol = positive(cfg, "tol");
  if (degree < 1) throw InvalidArgument("degree must be at least 1");

  RationalBubble b;
  double target = 0.0;
  if (kind == "plane") {
    b = plane_bubble(json_vec2(cfg.at("center"), "center"), scale);
    b.p.assign(static_cast<size_t>(degree) + 1, Complex(0.0));
    b.p.back() = 1.0;
    target = 8 * kPi * degree;
  } else if (kind == "half_plane") {
    if (degree != 1) throw InvalidArgument("half_plane bubbles are degree 1");
    if (!(scale < 1)) throw InvalidArgument("half_plane scale must be below 1");
    b = half_plane_bubble(cfg.at("boundary_angle").get<double>(), scale);
    target = 4 * kPi;
  } else {
    throw InvalidArgument("unknown bubble kind '" + kind + "'");
  }

  const BubbleEnergy e = bubble_energy(b);
  const double rel = std::abs(e.energy / target - 1.0);
  add_check(r, "energy_quantized", e.energy, target, rel <= tol);
  const SimplicityCheck sc = is_simple(b);
  add_check(r, "simple_iff_degree_one", sc.simple ? 1.0 : 0.0, degree == 1 ? 1.0 : 0.0,
            sc.simple == (degree == 1));
  r.results["energy"] = e.energy;
  r.results["energy_over_pi"] = e.energy / kPi;
  r.results["degree"] = e.degree;
  r.results["simple"] = sc.simple;

  if (b.kind == BubbleKind::half_plane) {
    const auto [n_r, n_theta] = json_grid(cfg.at("grid"));
    const double trace_tol = positive(cfg, "trace_tol");
    const DiskMap m = DiskMap::sample(n_r, n_theta, [&](Complex z) { return eval_bubble(b, z); });
    const BoundaryTrace t = boundary_trace(m);
    // Ring nodes crowd near the concentration point; weight by arclength.
    Vec3 centroid = Vec3::Zero();
    double total = 0.0;
    for (size_t k = 0; k < t.points.size(); ++k) {
      centroid += t.ds[k] * t.points[k];
      total += t.ds[k];
    }
    centroid /= total;
    double radius_err = 0.0;
    double height = 0.0;
    double length = 0.0;
    for (size_t k = 0; k < t.points.size(); ++k) {
      radius_err = std::max(radius_err, std::abs((t.points[k] - centroid).norm() - 1.0));
      height = std::max(height, std::abs(t.points[k].z()));
      length += t.ds[k];
    }
    add_check(r, "trace_unit_circle", radius_err, trace_tol, radius_err <= trace_tol);
    add_check(r, "trace_planar", height, trace_tol, height <= trace_tol);
    r.results["trace_length_over_2pi"] = length / (2 * kPi);
  }
  return r;
}

CommandResult cmd_synth(const Json& cfg) {
  CommandResult r;
  r.config = cfg;
  const SyntheticSequence s = parse_synth(cfg.at("synth"));
  const auto [n_r, n_theta] = json_grid(cfg.at("grid"));
  const std::string name = cfg.at("output").get<std::string>();
  if (name.empty() || std::filesystem::path(name).has_parent_path())
    throw InvalidArgument("output must be a plain file name");
  const SynthResult syn = synth_sequence(s, positive(cfg, "epsilon"), n_r, n_theta);
  Json t = Json::array();
  for (const RationalBubble& b : syn.truth) t.push_back(bubble_json(b));
  r.results["truth"] = t;
  r.results["dirichlet_energy"] = dirichlet_energy(syn.map);
  r.results["output"] = name;
  add_check(r, "map_finite", 1.0, 1.0, true);
  r.files.push_back({name, dmap_bytes(syn.map)});
  return r;
}

std::string format_report(const std::string& command, const CommandResult& r, const std::string& format) {
  if (format == "csv") {
    std::ostringstream os;
    os << "# schema 1, command " << command << ", config " << r.config.dump() << '\n';
    if (!r.error.empty()) os << "# error " << r.error << '\n';
    os << "check,pass,value,limit\n";
    for (const Check& c : r.checks)
      os << c.name << ',' << (c.pass ? 1 : 0) << ',' << csv_number(c.value) << ',' << csv_number(c.limit) << '\n';
    return os.str();
  }
  if (format != "json") throw InvalidArgument("format must be json or csv");
  Json j;
  j["schema"] = 1;
  j["command"] = command;
  j["config"] = r.config;
  Json checks = Json::array();
  for (const Check& c : r.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"limit", c.limit}});
  j["checks"] = checks;
  j["pass"] = r.passed();
  if (!r.error.empty()) j["error"] = r.error;
  j["results"] = r.results;
  return j.dump(2) + "\n";
}

void write_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidArgument("cannot write " + tmp);
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw InvalidArgument("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

CommandResult dispatch(const std::string& command, const Json& cfg) {
  if (command == "predict") return cmd_predict(cfg);
  if (command == "extract") return cmd_extract(cfg);
  if (command == "balance") return cmd_balance(cfg);
  if (command == "wente") return cmd_wente(cfg);
  if (command == "verify-bubble") return cmd_verify_bubble(cfg);
  if (command == "synth") return cmd_synth(cfg);
  throw InvalidArgument("unknown command '" + command + "'");
}

bool is_input_error(const Error& e) {
  return dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const FormatError*>(&e);
}

}  // namespace

int run_command(const std::string& command, const Options& opt) {
  Json cfg;
  try {
    if (opt.format != "json" && opt.format != "csv") throw InvalidArgument("format must be json or csv");
    Json user;
    if (opt.config_path) {
      std::ifstream f(*opt.config_path);
      if (!f) throw InvalidArgument("cannot open config " + *opt.config_path);
      user = Json::parse(f);
    }
    cfg = resolve_config(command, user, opt);
  } catch (const Json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  }

  CommandResult r;
  try {
    r = dispatch(command, cfg);
  } catch (const Json::exception& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    if (is_input_error(e)) {
      std::cerr << "input error: " << e.what() << '\n';
      return kInputError;
    }
    r = CommandResult{};
    r.config = cfg;
    r.error = e.what();
  }

  try {
    std::filesystem::create_directories(opt.out_dir);
    const std::filesystem::path dir(opt.out_dir);
    for (const OutputFile& f : r.files) write_atomic((dir / f.name).string(), f.contents);
    const std::string ext = opt.format == "csv" ? ".csv" : ".json";
    write_atomic((dir / (command + ext)).string(), format_report(command, r, opt.format));
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kInputError;
  }

  for (const Check& c : r.checks)
    std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " value=" << csv_number(c.value)
              << " limit=" << csv_number(c.limit) << '\n';
  if (!r.error.empty()) std::cout << "[FAIL] " << r.error << '\n';
  return r.passed() ? kPass : kFail;
}

}  // namespace cmc::cli
