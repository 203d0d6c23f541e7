#include "relorbit/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relorbit/bertrand.hpp"
#include "relorbit/circular.hpp"
#include "relorbit/clairaut.hpp"
#include "relorbit/collision.hpp"
#include "relorbit/coulomb.hpp"
#include "relorbit/dynamics.hpp"

namespace relorbit::cli {

namespace {

using nlohmann::json;

// Configuration problems detected after argv parsing; reported as usage errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parameter schema

enum class Kind { kNumber, kInteger, kText, kNumberList, kFlag };

struct ParamSpec {
  std::string key;
  Kind kind;
  json fallback;  // null: optional without default
  std::string help;
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::vector<ParamSpec> params;
};

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> specs = {
      {"simulate",
       "Integrate the equations of motion and write the trajectory",
       {
           {"ell", Kind::kNumber, 2.0, "angular momentum of the initial state"},
           {"h", Kind::kNumber, -0.05, "energy of the initial state"},
           {"r0", Kind::kNumber, 5.0, "initial radius (state starts on the positive q1 axis)"},
           {"state", Kind::kNumberList, nullptr, "explicit initial state q1,q2,p1,p2"},
           {"t_end", Kind::kNumber, 1000.0, "final time (negative integrates backward)"},
           {"rtol", Kind::kNumber, 1e-12, "relative tolerance"},
           {"atol", Kind::kNumber, 1e-14, "absolute tolerance"},
           {"max_step", Kind::kNumber, 1.0, "maximum step"},
           {"max_steps", Kind::kInteger, 2000000, "step budget"},
           {"collision_radius", Kind::kNumber, 1e-8, "stop below this radius"},
           {"out", Kind::kText, nullptr, "trajectory CSV path"},
       }},
      {"classify",
       "Classify an energy-momentum pair or a grid of pairs",
       {
           {"ell", Kind::kNumber, 2.0, "angular momentum"},
           {"h", Kind::kNumber, -0.05, "energy"},
           {"tol", Kind::kNumber, 1e-9, "relative boundary tolerance"},
           {"grid", Kind::kFlag, false, "classify a grid instead of one point"},
           {"ell_range", Kind::kNumberList, json::array({-3.0, 3.0}), "grid ell bounds"},
           {"h_range", Kind::kNumberList, json::array({-1.5, 1.0}), "grid h bounds"},
           {"n", Kind::kInteger, 101, "grid points per axis"},
           {"out", Kind::kText, nullptr, "diagram CSV path"},
       }},
      {"circular",
       "Circular orbit of a given radius",
       {
           {"r0", Kind::kNumber, 2.0, "orbit radius"},
           {"check_constant", Kind::kFlag, false, "test constancy of L over a radius grid"},
           {"radii_range", Kind::kNumberList, json::array({0.1, 100.0}), "radius grid bounds"},
           {"n_radii", Kind::kInteger, 20, "log-spaced radii in the grid"},
       }},
      {"period",
       "Period function of the reduced system around a centre",
       {
           {"ell", Kind::kNumber, 2.0, "angular momentum"},
           {"rho0", Kind::kNumber, nullptr, "centre (default: the equilibrium at ell)"},
           {"xi", Kind::kNumberList, nullptr, "sample amplitudes (default 0.05 rho0 / 2^j)"},
           {"out", Kind::kText, nullptr, "xi,P CSV path; the fit goes to <out>.json"},
       }},
      {"bertrand",
       "Build a candidate isochronous family and test the obstruction",
       {
           {"a", Kind::kNumber, 0.5, "isochrony parameter (2 pi / Theta)^2 - 1"},
           {"rho_star", Kind::kNumber, 1.0, "reference rho0"},
           {"ell_star", Kind::kNumber, 2.0, "angular momentum at rho_star"},
           {"rho_range", Kind::kNumberList, json::array({0.5, 2.0}), "family range"},
           {"nodes", Kind::kInteger, 3001, "grid nodes"},
           {"rho0", Kind::kNumberList, json::array({0.8, 1.0, 1.3}),
            "family nodes where the period constant is measured"},
           {"out", Kind::kText, nullptr, "family CSV path; metadata goes to <out>.json"},
       }},
      {"rungelenz",
       "Runge-Lenz frame analysis along a Coulomb orbit",
       {
           {"ell", Kind::kNumber, 2.0, "angular momentum"},
           {"h", Kind::kNumber, -0.05, "energy"},
           {"r0", Kind::kNumber, 5.0, "initial radius"},
           {"t_end", Kind::kNumber, 600.0, "integration time"},
           {"dtheta", Kind::kNumber, 0.01, "angle step of the frame series"},
           {"out", Kind::kText, nullptr, "theta,R_alpha,R_beta CSV path"},
       }},
      {"collision",
       "Integrate into a collision and fit the asymptotic laws",
       {
           {"ell", Kind::kNumber, 0.5, "angular momentum (|ell| < k/c)"},
           {"h", Kind::kNumber, 0.0, "energy"},
           {"r0", Kind::kNumber, 1.0, "initial radius"},
           {"branch", Kind::kText, "incoming", "incoming or outgoing"},
           {"r_stop", Kind::kNumber, 1e-10, "final radius of the approach"},
           {"out", Kind::kText, nullptr, "fit JSON path"},
       }},
  };
  return specs;
}

const CommandSpec& command_spec(const std::string& name) {
  for (const CommandSpec& c : commands()) {
    if (c.name == name) return c;
  }
  throw UsageError("unknown command '" + name + "'");
}

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  for (char& ch : out) {
    if (ch == '_') ch = '-';
  }
  return out;
}

void check_value(const ParamSpec& spec, const json& v) {
  bool ok = false;
  switch (spec.kind) {
    case Kind::kNumber: ok = v.is_number(); break;
    case Kind::kInteger: ok = v.is_number_integer(); break;
    case Kind::kText: ok = v.is_string(); break;
    case Kind::kFlag: ok = v.is_boolean(); break;
    case Kind::kNumberList:
      ok = v.is_array();
      for (const json& e : v) ok = ok && e.is_number();
      break;
  }
  if (!ok) throw UsageError("parameter '" + spec.key + "' has the wrong type");
}

// Effective configuration {m, c, k, potential, command, params}.
struct RunConfig {
  json doc;

  const json& params() const { return doc.at("params"); }
  bool has(const std::string& key) const {
    return params().contains(key) && !params().at(key).is_null();
  }
  double num(const std::string& key) const { return params().at(key).get<double>(); }
  long long integer(const std::string& key) const { return params().at(key).get<long long>(); }
  std::string text(const std::string& key) const { return params().at(key).get<std::string>(); }
  bool flag(const std::string& key) const { return params().at(key).get<bool>(); }
  std::vector<double> list(const std::string& key) const {
    return params().at(key).get<std::vector<double>>();
  }
  PhysicalParams physical() const {
    PhysicalParams p;
    p.m = doc.at("m").get<double>();
    p.c = doc.at("c").get<double>();
    return p;
  }
  double k() const { return doc.at("k").get<double>(); }
  PotentialKind potential_kind() const {
    return parse_potential_kind(doc.at("potential").get<std::string>());
  }
  std::string command() const { return doc.at("command").get<std::string>(); }
};

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw UsageError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
  // Output of --json: the resolved config sits under "config".
  if (doc.contains("config") && doc.contains("result") && doc["config"].is_object()) {
    doc = json(doc["config"]);
  }
  for (const auto& [key, value] : doc.items()) {
    if (key != "m" && key != "c" && key != "k" && key != "potential" && key != "command" &&
        key != "params") {
      throw UsageError("unknown config key '" + key + "'");
    }
    if ((key == "m" || key == "c" || key == "k") && !value.is_number()) {
      throw UsageError("config key '" + key + "' must be a number");
    }
    if ((key == "potential" || key == "command") && !value.is_string()) {
      throw UsageError("config key '" + key + "' must be a string");
    }
    if (key == "params" && !value.is_object()) throw UsageError("config params must be an object");
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Helpers

template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  // Report the failure with the lowest index so the outcome does not depend on scheduling.
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text << '\n';
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void require_coulomb(const RunConfig& cfg) {
  if (cfg.potential_kind() != PotentialKind::kCoulomb) {
    throw Error(ErrorCode::kInvalidParameter, cfg.command() + " needs the coulomb potential");
  }
}

// State at q = (r0, 0) with angular momentum ell and energy h.
PhaseState state_on_axis(double ell, double h, double r0, double radial_sign, const Potential& pot,
                         const PhysicalParams& params) {
  if (!(r0 > 0.0)) throw Error(ErrorCode::kInvalidParameter, "r0 must be positive");
  const double mc = params.m * params.c;
  const double e = (h + mc * params.c - pot.v(r0)) / params.c;
  const double p_theta = ell / r0;
  const double p_r2 = e * e - mc * mc - p_theta * p_theta;
  if (!(e > 0.0) || p_r2 < 0.0) {
    throw Error(ErrorCode::kDomain, "radius r0 is not reachable with this (ell, h)");
  }
  return {{r0, 0.0}, {radial_sign * std::sqrt(p_r2), p_theta}};
}

struct CommandResult {
  json result;
  std::string summary;
};

// ---------------------------------------------------------------------------
// Commands

CommandResult cmd_simulate(const RunConfig& cfg, int) {
  const PhysicalParams params = cfg.physical();
  const Potential pot = make_potential(cfg.potential_kind(), cfg.k(), params);
  PhaseState s0;
  if (cfg.has("state")) {
    const std::vector<double> v = cfg.list("state");
    if (v.size() != 4) throw UsageError("--state needs four values q1,q2,p1,p2");
    s0 = {{v[0], v[1]}, {v[2], v[3]}};
  } else {
    s0 = state_on_axis(cfg.num("ell"), cfg.num("h"), cfg.num("r0"), 1.0, pot, params);
  }
  IntegratorConfig ic;
  ic.rtol = cfg.num("rtol");
  ic.atol = cfg.num("atol");
  ic.max_step = cfg.num("max_step");
  if (cfg.integer("max_steps") <= 0) throw UsageError("--max-steps must be positive");
  ic.max_steps = static_cast<std::size_t>(cfg.integer("max_steps"));
  ic.collision_radius = cfg.num("collision_radius");

  const Trajectory traj = integrate(s0, 0.0, cfg.num("t_end"), pot, params, ic);
  if (cfg.has("out")) {
    std::ofstream out = open_output(cfg.text("out"));
    write_trajectory_csv(out, traj);
  }
  const ConservationReport rep = conservation_report(traj);
  std::size_t peri = 0, aph = 0;
  for (const Apsis& a : apsis_times(traj)) (a.kind == EventKind::kPerihelion ? peri : aph)++;
  json events = json::array();
  for (const Event& e : traj.events()) events.push_back({{"kind", to_string(e.kind)}, {"time", e.time}});

  CommandResult res;
  res.result = {{"samples", traj.size()},
                {"t_final", traj.t_end()},
                {"H0", traj.energy(0)},
                {"L0", traj.momentum(0)},
                {"energy_drift_abs", rep.energy_abs},
                {"energy_drift_rel", rep.energy_rel},
                {"momentum_drift_abs", rep.momentum_abs},
                {"momentum_drift_rel", rep.momentum_rel},
                {"perihelia", peri},
                {"aphelia", aph},
                {"events", events}};
  res.summary = "simulate: " + std::to_string(traj.size()) + " samples to t=" +
                sci(traj.t_end()) + ", H drift " + sci(rep.energy_rel) + " (rel), L drift " +
                sci(rep.momentum_rel) + " (rel), " + std::to_string(peri) + " perihelia" +
                (traj.collided() ? ", collision reached" : "");
  return res;
}

CommandResult cmd_classify(const RunConfig& cfg, int jobs) {
  require_coulomb(cfg);
  const PhysicalParams params = cfg.physical();
  const double k = cfg.k();
  const double tol = cfg.num("tol");
  CommandResult res;
  if (!cfg.flag("grid")) {
    const EMPoint pt{cfg.num("ell"), cfg.num("h")};
    const Classification cls = classify(pt, k, params, tol);
    res.result = {{"class", to_string(cls.cls)}, {"code", class_code(cls.cls)}};
    if (cls.sigma.sigma2_defined) res.result["sigma2"] = cls.sigma.sigma2;
    if (cls.sigma.h_min_defined) res.result["h_min"] = cls.sigma.h_min;
    if (!cls.note.empty()) res.result["note"] = cls.note;
    res.summary = std::string(to_string(cls.cls));
    if (!cls.note.empty()) res.summary += " (" + cls.note + ")";
    return res;
  }
  const std::vector<double> er = cfg.list("ell_range");
  const std::vector<double> hr = cfg.list("h_range");
  if (er.size() != 2 || hr.size() != 2) throw UsageError("ranges need two values lo,hi");
  const long long n = cfg.integer("n");
  if (n < 2) throw UsageError("--n must be at least 2");
  // One CSV block per ell row, joined in order.
  std::vector<std::string> rows(static_cast<std::size_t>(n));
  std::vector<std::array<std::size_t, 7>> counts(static_cast<std::size_t>(n));
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    std::ostringstream block;
    const double ell = er[0] + (er[1] - er[0]) * static_cast<double>(i) / static_cast<double>(n - 1);
    for (long long j = 0; j < n; ++j) {
      const double h = hr[0] + (hr[1] - hr[0]) * static_cast<double>(j) / static_cast<double>(n - 1);
      const EMClass cls = classify({ell, h}, k, params, tol).cls;
      counts[i][static_cast<std::size_t>(class_code(cls))]++;
      block << format_double(ell) << ',' << format_double(h) << ',' << class_code(cls) << '\n';
    }
    rows[i] = block.str();
  });
  if (cfg.has("out")) {
    std::ofstream out = open_output(cfg.text("out"));
    out << "ell,h,class_code\n";
    for (const std::string& r : rows) out << r;
  }
  json tally = json::object();
  for (int c = 0; c < 7; ++c) {
    std::size_t total = 0;
    for (const auto& row : counts) total += row[static_cast<std::size_t>(c)];
    tally[to_string(static_cast<EMClass>(c))] = total;
  }
  res.result = {{"points", n * n}, {"counts", tally}};
  res.summary = "classify: " + std::to_string(n * n) + " grid points, " +
                std::to_string(tally["BoundedNonCollision"].get<std::size_t>()) +
                " bounded non-collision";
  return res;
}

CommandResult cmd_circular(const RunConfig& cfg, int) {
  const PhysicalParams params = cfg.physical();
  const Potential pot = make_potential(cfg.potential_kind(), cfg.k(), params);
  const CircularOrbit orb = circular_orbit(cfg.num("r0"), pot, params);
  CommandResult res;
  res.result = {{"r0", orb.r0}, {"Omega", orb.omega}, {"L", orb.ell}, {"Gamma", orb.gamma}};
  res.summary = "circular: r0=" + sci(orb.r0) + " Omega=" + sci(orb.omega) + " L=" +
                sci(orb.ell) + " Gamma=" + sci(orb.gamma);
  if (cfg.flag("check_constant")) {
    const std::vector<double> range = cfg.list("radii_range");
    if (range.size() != 2 || !(range[0] > 0.0) || !(range[1] > range[0])) {
      throw UsageError("--radii-range needs 0 < lo < hi");
    }
    const long long n = cfg.integer("n_radii");
    if (n < 2) throw UsageError("--n-radii must be at least 2");
    std::vector<double> radii;
    for (long long i = 0; i < n; ++i) {
      radii.push_back(range[0] * std::pow(range[1] / range[0], static_cast<double>(i) / (n - 1)));
    }
    const MomentumProfile prof = momentum_profile_is_constant(pot, params, radii);
    res.result["constant_momentum"] = prof.constant;
    res.result["max_deviation"] = prof.max_deviation;
    res.summary += std::string(", L ") + (prof.constant ? "constant" : "not constant") +
                   " (max deviation " + sci(prof.max_deviation) + ")";
  }
  return res;
}

CommandResult cmd_period(const RunConfig& cfg, int jobs) {
  const PhysicalParams params = cfg.physical();
  const Potential pot = make_potential(cfg.potential_kind(), cfg.k(), params);
  const double ell = cfg.num("ell");
  double rho0 = 0.0;
  if (cfg.has("rho0")) {
    rho0 = cfg.num("rho0");
  } else {
    const EquilibriumSet eq = equilibrium_solve(ell, pot, params);
    if (eq.continuum) {
      throw Error(ErrorCode::kPrecondition, "every rho is an equilibrium at this ell; no centre");
    }
    if (eq.roots.empty()) throw Error(ErrorCode::kDomain, "no equilibrium at this ell");
    rho0 = eq.roots.front();
  }
  const Linearization lin = linearized_frequency(rho0, ell, pot, params);
  if (!(lin.a_coeff > 0.0)) throw Error(ErrorCode::kPrecondition, "equilibrium is not a centre");
  const std::vector<double> xis = cfg.has("xi") ? cfg.list("xi") : default_xis(rho0);
  std::vector<PeriodSample> samples(xis.size());
  std::vector<double> cross(xis.size());
  parallel_for(xis.size(), jobs, [&](std::size_t i) {
    samples[i] = {xis[i], period_at(rho0, ell, xis[i], pot, params)};
    cross[i] = std::abs(return_map_period(rho0, ell, xis[i], pot, params) - samples[i].period);
  });
  PeriodFit fit = fit_period_samples(rho0, ell, lin.theta0, samples);
  fit.samples = samples;  // keep the requested order in the CSV
  if (cfg.has("out")) {
    std::ofstream out = open_output(cfg.text("out"));
    write_period_csv(out, fit);
    write_text(cfg.text("out") + ".json", period_fit_json(fit));
  }
  double worst_cross = 0.0;
  for (double d : cross) worst_cross = std::max(worst_cross, d);
  json rows = json::array();
  for (const PeriodSample& s : fit.samples) rows.push_back({{"xi", s.xi}, {"P", s.period}});
  CommandResult res;
  res.result = {{"rho0", rho0},          {"ell", ell},
                {"A", lin.a_coeff},      {"Theta0", fit.theta0},
                {"c2", fit.c2},          {"c1", fit.c1},
                {"residual", fit.residual},
                {"return_map_max_diff", worst_cross},
                {"samples", rows}};
  res.summary = "period: rho0=" + sci(rho0) + " Theta0=" + sci(fit.theta0) + " c2=" +
                sci(fit.c2) + " (fit error " + sci(fit.residual) + "), two-method agreement " +
                sci(worst_cross);
  return res;
}

CommandResult cmd_bertrand(const RunConfig& cfg, int jobs) {
  const PhysicalParams params = cfg.physical();
  const std::vector<double> range = cfg.list("rho_range");
  if (range.size() != 2) throw UsageError("--rho-range needs two values lo,hi");
  if (cfg.integer("nodes") < 3) throw UsageError("--nodes must be at least 3");
  const double a = cfg.num("a");
  const BertrandFamily fam =
      build_family(a, cfg.num("rho_star"), cfg.num("ell_star"), range[0], range[1], params,
                   static_cast<std::size_t>(cfg.integer("nodes")));
  if (fam.truncated) std::cerr << "warning: " << fam.warning << '\n';
  if (cfg.has("out")) {
    std::ofstream out = open_output(cfg.text("out"));
    write_family_csv(out, fam);
    write_text(cfg.text("out") + ".json", family_metadata_json(fam));
  }
  const ObstructionReport rep = obstruction_certificate(fam);
  const Potential pot = fam.potential();
  const std::vector<double> rho0s = cfg.list("rho0");
  std::vector<json> rows(rho0s.size());
  parallel_for(rho0s.size(), jobs, [&](std::size_t i) {
    const double rho0 = rho0s[i];
    const double ell = fam.ell[fam.node(rho0)];
    const PeriodFit fit = period_function(rho0, ell, pot, params, default_xis(rho0));
    const double closed = period_constant_formula(rho0, ell, a, params);
    rows[i] = {{"rho0", rho0},
               {"L", ell},
               {"x", family_x(rho0, ell, params)},
               {"Q", q_poly(family_x(rho0, ell, params), a)},
               {"c2_measured", fit.c2},
               {"c2_closed_form", closed},
               {"rel_error", std::abs(fit.c2 - closed) / std::abs(closed)},
               {"fit_residual", fit.residual}};
  });
  json report = {{"a", rep.a},
                 {"K_defined", rep.k_defined},
                 {"cubic_at_0", rep.cubic_at_0},
                 {"cubic_at_1", rep.cubic_at_1},
                 {"derivative_discriminant", rep.derivative_discriminant},
                 {"cubic_root_free", rep.cubic_root_free},
                 {"no_isochronous_family", rep.no_isochronous_family},
                 {"gamma_tilde_min", rep.gamma_tilde_min}};
  if (rep.k_defined) {
    report["K"] = rep.k_value;
    report["Q_at_K"] = rep.q_direct;
    report["Q_at_K_identity"] = rep.q_identity;
  }
  CommandResult res;
  res.result = {{"nodes", fam.size()},
                {"truncated", fam.truncated},
                {"max_equilibrium_residual", fam.max_equilibrium_residual()},
                {"x_monotone", family_x_monotone(fam)},
                {"obstruction", report},
                {"measurements", rows}};
  double worst = 0.0;
  for (const json& r : rows) worst = std::max(worst, r["rel_error"].get<double>());
  res.summary = "bertrand: a=" + sci(a) + ", " + std::to_string(fam.size()) + " nodes, " +
                (rep.no_isochronous_family ? "no isochronous family" : "obstruction inconclusive") +
                (rows.empty() ? std::string()
                              : ", max c2 rel error " + sci(worst) + " over " +
                                    std::to_string(rows.size()) + " centres");
  return res;
}

CommandResult cmd_rungelenz(const RunConfig& cfg, int) {
  require_coulomb(cfg);
  const PhysicalParams params = cfg.physical();
  const double k = cfg.k();
  const Potential pot = make_potential(PotentialKind::kCoulomb, k, params);
  PhaseState s0 = state_on_axis(cfg.num("ell"), cfg.num("h"), cfg.num("r0"), 1.0, pot, params);
  const bool reflected = angular_momentum(s0) < 0.0;
  if (reflected) s0 = reflect_orientation(s0);
  IntegratorConfig ic;
  const Trajectory traj = integrate(s0, 0.0, cfg.num("t_end"), pot, params, ic);
  const RLSeries series = rl_components_and_invariant(traj, k, params, cfg.num("dtheta"));
  if (cfg.has("out")) {
    std::ofstream out = open_output(cfg.text("out"));
    out << "theta,R_alpha,R_beta\n";
    for (std::size_t i = 0; i < series.theta.size(); ++i) {
      out << format_double(series.theta[i]) << ',' << format_double(series.r_alpha[i]) << ','
          << format_double(series.r_beta[i]) << '\n';
    }
  }
  CommandResult res;
  res.result = {{"sigma2", series.sigma2},
                {"reflected", reflected},
                {"invariant", series.invariant0},
                {"invariant_drift", series.invariant_drift},
                {"ode_residual", series.ode_residual},
                {"gamma_link_residual", series.gamma_link_residual}};
  if (std::abs(series.sigma2) > 0.0) {
    const ClosedFormFit fit = fit_closed_form(traj, k, params);
    res.result["closed_form"] = {{"a", fit.a}, {"b", fit.b}, {"max_residual", fit.max_residual}};
  }
  try {
    const Precession pre = apsidal_precession(traj, k, params);
    res.result["precession"] = {{"delta_theta", pre.delta_theta},
                                {"predicted", pre.predicted},
                                {"per_period", pre.per_period}};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInsufficientData) throw;
  }
  res.summary = "rungelenz: sigma^2=" + sci(series.sigma2) + ", invariant drift " +
                sci(series.invariant_drift) + ", frame ODE residual " + sci(series.ode_residual) +
                (reflected ? " (orientation reflected)" : "");
  return res;
}

CommandResult cmd_collision(const RunConfig& cfg, int) {
  require_coulomb(cfg);
  const PhysicalParams params = cfg.physical();
  const double k = cfg.k();
  const Potential pot = make_potential(PotentialKind::kCoulomb, k, params);
  const std::string branch_name = cfg.text("branch");
  CollisionBranch branch;
  if (branch_name == "incoming") {
    branch = CollisionBranch::kIncoming;
  } else if (branch_name == "outgoing") {
    branch = CollisionBranch::kOutgoing;
  } else {
    throw UsageError("--branch must be incoming or outgoing");
  }
  const double sign = branch == CollisionBranch::kIncoming ? -1.0 : 1.0;
  const PhaseState s0 = state_on_axis(cfg.num("ell"), cfg.num("h"), cfg.num("r0"), sign, pot, params);
  CollisionConfig cc;
  cc.r_stop = cfg.num("r_stop");
  const CollisionRun run = integrate_to_collision(s0, k, params, branch, cc);
  const std::string fit_json = collision_fit_json(run.fit);
  if (cfg.has("out")) write_text(cfg.text("out"), fit_json);
  CommandResult res;
  res.result = json::parse(fit_json);
  const CollisionFit& f = run.fit;
  res.summary = "collision: t_c=" + sci(f.t_collision) + " w10=" + sci(f.w10) + " slope " +
                sci(f.slope) + " (pred " + sci(f.slope_pred) + ") lambda " + sci(f.lambda) +
                " (pred " + sci(f.lambda_pred) + ")";
  return res;
}

CommandResult dispatch(const RunConfig& cfg, int jobs) {
  const std::string name = cfg.command();
  if (name == "simulate") return cmd_simulate(cfg, jobs);
  if (name == "classify") return cmd_classify(cfg, jobs);
  if (name == "circular") return cmd_circular(cfg, jobs);
  if (name == "period") return cmd_period(cfg, jobs);
  if (name == "bertrand") return cmd_bertrand(cfg, jobs);
  if (name == "rungelenz") return cmd_rungelenz(cfg, jobs);
  if (name == "collision") return cmd_collision(cfg, jobs);
  throw UsageError("unknown command '" + name + "'");
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"code", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Relativistic central-force orbit experiments", "relorbit"};
  app.require_subcommand(0, 1);
  // "--h" is the energy option, so help keeps only its long form.
  app.set_help_flag("--help", "print this help and exit");

  std::string config_path;
  bool as_json = false;
  int jobs = 1;
  double m = 1.0, c = 1.0, k = 1.0;
  std::string potential = "coulomb";
  CLI::Option* opt_m = app.add_option("--m", m, "rest mass");
  CLI::Option* opt_c = app.add_option("--c", c, "speed of light");
  CLI::Option* opt_k = app.add_option("--k", k, "coupling constant");
  CLI::Option* opt_pot =
      app.add_option("--potential", potential, "coulomb or constant-momentum");
  app.add_option("--config", config_path, "JSON config {m, c, k, potential, command, params}");
  app.add_flag("--json", as_json, "print the resolved config and result as JSON");
  app.add_option("--jobs", jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);

  // Typed storage per parameter; std::map keeps element addresses stable.
  std::map<std::string, double> numbers;
  std::map<std::string, long long> integers;
  std::map<std::string, std::string> texts;
  std::map<std::string, std::vector<double>> lists;
  std::map<std::string, bool> flags;
  std::map<std::string, std::vector<std::pair<const ParamSpec*, CLI::Option*>>> bound;

  for (const CommandSpec& cs : commands()) {
    CLI::App* sub = app.add_subcommand(cs.name, cs.help);
    sub->fallthrough();
    sub->set_help_flag("--help", "print this help and exit");
    for (const ParamSpec& ps : cs.params) {
      const std::string id = cs.name + "." + ps.key;
      const std::string flag = flag_name(ps.key);
      CLI::Option* opt = nullptr;
      switch (ps.kind) {
        case Kind::kNumber: opt = sub->add_option(flag, numbers[id], ps.help); break;
        case Kind::kInteger: opt = sub->add_option(flag, integers[id], ps.help); break;
        case Kind::kText: opt = sub->add_option(flag, texts[id], ps.help); break;
        case Kind::kNumberList:
          opt = sub->add_option(flag, lists[id], ps.help)->delimiter(',');
          break;
        case Kind::kFlag: opt = sub->add_flag(flag, flags[id], ps.help); break;
      }
      bound[cs.name].push_back({&ps, opt});
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    cfg.doc = {{"m", 1.0}, {"c", 1.0}, {"k", 1.0}, {"potential", "coulomb"}};
    json file_params = json::object();
    if (!config_path.empty()) {
      json file = read_config_file(config_path);
      for (const char* key : {"m", "c", "k", "potential", "command"}) {
        if (file.contains(key)) cfg.doc[key] = file[key];
      }
      if (file.contains("params")) file_params = file["params"];
    }
    std::string command;
    for (const CLI::App* sub : app.get_subcommands()) command = sub->get_name();
    if (command.empty()) {
      if (!cfg.doc.contains("command")) {
        std::cerr << app.help();
        throw UsageError("no command given");
      }
      command = cfg.doc["command"].get<std::string>();
    } else if (cfg.doc.contains("command") && cfg.doc["command"] != command) {
      throw UsageError("config file is for '" + cfg.doc["command"].get<std::string>() +
                       "', not '" + command + "'");
    }
    cfg.doc["command"] = command;
    const CommandSpec& spec = command_spec(command);

    if (opt_m->count() > 0) cfg.doc["m"] = m;
    if (opt_c->count() > 0) cfg.doc["c"] = c;
    if (opt_k->count() > 0) cfg.doc["k"] = k;
    if (opt_pot->count() > 0) cfg.doc["potential"] = potential;

    // Defaults, then config-file values, then flags.
    json params = json::object();
    for (const ParamSpec& ps : spec.params) {
      if (!ps.fallback.is_null()) params[ps.key] = ps.fallback;
    }
    for (const auto& [key, value] : file_params.items()) {
      const ParamSpec* match = nullptr;
      for (const ParamSpec& ps : spec.params) {
        if (ps.key == key) match = &ps;
      }
      if (match == nullptr) throw UsageError("unknown parameter '" + key + "' for " + command);
      if (!value.is_null()) check_value(*match, value);
      params[key] = value;
    }
    for (const auto& [ps, opt] : bound[command]) {
      if (opt->count() == 0) continue;
      const std::string id = command + "." + ps->key;
      switch (ps->kind) {
        case Kind::kNumber: params[ps->key] = numbers[id]; break;
        case Kind::kInteger: params[ps->key] = integers[id]; break;
        case Kind::kText: params[ps->key] = texts[id]; break;
        case Kind::kNumberList: params[ps->key] = lists[id]; break;
        case Kind::kFlag: params[ps->key] = flags[id]; break;
      }
    }
    cfg.doc["params"] = params;
    try {
      parse_potential_kind(cfg.doc["potential"].get<std::string>());
    } catch (const Error& e) {
      throw UsageError(e.what());
    }

    const CommandResult res = dispatch(cfg, jobs);
    if (as_json) {
      std::cout << json{{"config", cfg.doc}, {"result", res.result}}.dump(2) << '\n';
    } else {
      std::cout << res.summary << '\n';
    }
    return kExitOk;
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return kExitDomain;
  } catch (const IoError& e) {
    print_error("io", e.what());
    return kExitDomain;
  } catch (const json::exception& e) {
    print_error("usage", e.what());
    return kExitUsage;
  }
}

}  // namespace relorbit::cli
