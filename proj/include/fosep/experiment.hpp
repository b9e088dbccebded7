#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fosep/contour.hpp"
#include "fosep/dynamics.hpp"
#include "fosep/errors.hpp"
#include "fosep/fbs.hpp"
#include "fosep/geometry.hpp"
#include "fosep/lp.hpp"
#include "fosep/opt_path.hpp"
#include "fosep/opt_time.hpp"
#include "fosep/servo.hpp"
#include "fosep/trajgen.hpp"

namespace fosep {

/// Invalid or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { kTap, kFoTime, kFoSep, kFoPath };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kTap: return "tap";
    case Algorithm::kFoTime: return "fo-time";
    case Algorithm::kFoSep: return "fo-sep";
    case Algorithm::kFoPath: return "fo-path";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "tap") return Algorithm::kTap;
  if (name == "fo-time") return Algorithm::kFoTime;
  if (name == "fo-sep") return Algorithm::kFoSep;
  if (name == "fo-path") return Algorithm::kFoPath;
  throw ConfigError("unknown algorithm '" + name + "' (expected tap, fo-time, fo-sep or fo-path)");
}

struct ModelCoefficients {
  std::vector<double> num;
  std::vector<double> den;
};

struct SplineParameters {
  int control_points = 40;
  int degree = 5;
};

struct PathLpParameters {
  int grid_points = 1001;
  int control_points = 40;
  int degree = 5;
  bool rest_acceleration = true;
};

/// Printer servo models as published: 3-decimal coefficients.
inline ModelCoefficients printer_model_x() {
  return {{0.021, -0.061, 0.044, 0.033, -0.056, 0.012}, {1.0, -5.627, 13.38, -17.2, 12.6, -4.994, 0.836}};
}
inline ModelCoefficients printer_model_y() {
  return {{0.018, -0.053, 0.038, 0.027, -0.048, 0.017}, {1.0, -5.648, 13.48, -17.4, 12.8, -5.093, 0.856}};
}

struct ExperimentConfig {
  std::variant<CircleSpec, SplinePathSpec> path = CircleSpec{Point2(0.0, 0.0), 5.0, 0.0, 2.0 * std::numbers::pi};
  double sample_time = 1e-3;
  std::map<std::string, KinematicLimits> limit_sets{{"conservative", {30.0, 0.5, 5.0}},
                                                    {"aggressive", {50.0, 10.0, 5000.0}}};
  std::string limits = "conservative";
  ModelCoefficients model_x = printer_model_x();
  ModelCoefficients model_y = printer_model_y();
  bool stabilize_models = true;
  bool dc_normalize = true;
  SplineParameters fbs_x;
  SplineParameters fbs_y;
  SplineParameters s_spline;
  KnotStyle knots = KnotStyle::kClamped;
  std::optional<double> ce_limit_um = 14.0;
  Algorithm algorithm = Algorithm::kFoSep;
  bool jerk = true;
  double dwell_fraction = 0.1;
  double done_tolerance = 1e-5;
  /// Limit sets whose TAP is tried, in order, as the linearization trajectory
  /// when the run's own TAP gives an infeasible LP.
  std::vector<std::string> init_fallback{"conservative"};
  PathLpParameters path_lp;
  LpOptions solver;
  int passes = 1;
  std::optional<long long> seed;  // reserved: every algorithm is deterministic

  const KinematicLimits& active_limits() const { return limit_set(limits); }

  const KinematicLimits& limit_set(const std::string& name) const {
    const auto it = limit_sets.find(name);
    if (it == limit_sets.end()) throw ConfigError("unknown limit set '" + name + "'");
    return it->second;
  }

  Toolpath toolpath() const {
    if (const auto* c = std::get_if<CircleSpec>(&path)) return Toolpath::circle(*c);
    return Toolpath::spline(std::get<SplinePathSpec>(path));
  }

  void validate() const {
    if (!(sample_time > 0.0) || !std::isfinite(sample_time)) throw ConfigError("sample_time_s must be positive");
    if (limit_sets.empty()) throw ConfigError("at least one limit set is required");
    for (const auto& [name, l] : limit_sets) {
      try {
        l.validate();
      } catch (const ArgumentError& e) {
        throw ConfigError("limit set '" + name + "': " + e.what());
      }
    }
    active_limits();
    for (const auto& name : init_fallback) limit_set(name);
    for (const auto* sp : {&fbs_x, &fbs_y, &s_spline}) {
      if (sp->degree < 1 || sp->control_points < sp->degree + 1) {
        throw ConfigError("spline parameters need degree >= 1 and control_points >= degree + 1");
      }
    }
    if (path_lp.grid_points < path_lp.control_points || path_lp.degree < 3 ||
        path_lp.control_points < path_lp.degree + 1) {
      throw ConfigError("path_lp needs degree >= 3, control_points > degree and grid_points >= control_points");
    }
    if (ce_limit_um && !(*ce_limit_um > 0.0)) throw ConfigError("ce_limit_um must be positive or null");
    if (algorithm == Algorithm::kFoSep && !ce_limit_um) throw ConfigError("fo-sep needs ce_limit_um");
    if (!(dwell_fraction >= 0.0) || dwell_fraction > 10.0) throw ConfigError("dwell_fraction must be in [0, 10]");
    if (!(done_tolerance >= 0.0 && done_tolerance < 1.0)) throw ConfigError("done_tolerance must be in [0, 1)");
    if (passes < 1) throw ConfigError("passes must be >= 1");
    if (!(solver.feasibility_tol > 0.0) || !(solver.absolute_gap_tol > 0.0) || !(solver.relative_gap_tol > 0.0) ||
        solver.max_iterations < 1) {
      throw ConfigError("solver tolerances must be positive");
    }
    try {
      (void)servo_models();
      (void)toolpath();
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }

  /// Models after the optional stabilization and DC normalization.
  std::pair<DiscreteTransferFunction, DiscreteTransferFunction> servo_models() const {
    const auto prepare = [&](const ModelCoefficients& c) {
      DiscreteTransferFunction tf(c.num, c.den, sample_time);
      if (stabilize_models) tf = stabilize(tf);
      if (dc_normalize) tf = normalize_dc(tf);
      return tf;
    };
    return {prepare(model_x), prepare(model_y)};
  }
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid or missing '" + key + "' in " + where);
  }
}

inline SplineParameters parse_spline(const json& j, const std::string& where) {
  check_keys(j, {"control_points", "degree"}, where);
  SplineParameters p;
  if (j.contains("control_points")) p.control_points = get_as<int>(j, "control_points", where);
  if (j.contains("degree")) p.degree = get_as<int>(j, "degree", where);
  return p;
}

inline ModelCoefficients parse_model(const json& j, const std::string& where) {
  check_keys(j, {"num", "den"}, where);
  return {get_as<std::vector<double>>(j, "num", where), get_as<std::vector<double>>(j, "den", where)};
}

inline Point2 parse_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + " must be a two-element number array");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

/// Parses a configuration document. Every key is optional and defaults to the
/// printer circle benchmark; unknown keys are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::get_as;
  ExperimentConfig c;
  detail::check_keys(j,
                     {"path", "sample_time_s", "limit_sets", "limits", "models", "stabilize_models", "dc_normalize",
                      "fbs", "s_spline", "knots", "ce_limit_um", "algorithm", "jerk", "dwell_fraction",
                      "done_tolerance", "init_fallback", "path_lp", "solver", "passes", "seed"},
                     "config");
  if (j.contains("path")) {
    const auto& p = j["path"];
    if (!p.is_object()) throw ConfigError("path must be an object");
    const std::string type = p.contains("type") ? get_as<std::string>(p, "type", "path") : "circle";
    if (type == "circle") {
      detail::check_keys(p, {"type", "center", "radius", "start_angle_deg", "sweep_deg"}, "path");
      CircleSpec cs;
      if (p.contains("center")) cs.center = detail::parse_point(p["center"], "path.center");
      if (p.contains("radius")) cs.radius = get_as<double>(p, "radius", "path");
      if (p.contains("start_angle_deg")) cs.start_angle = get_as<double>(p, "start_angle_deg", "path") * std::numbers::pi / 180.0;
      if (p.contains("sweep_deg")) cs.sweep = get_as<double>(p, "sweep_deg", "path") * std::numbers::pi / 180.0;
      c.path = cs;
    } else if (type == "spline") {
      detail::check_keys(p, {"type", "degree", "control_points", "knots"}, "path");
      SplinePathSpec sp;
      if (p.contains("degree")) sp.degree = get_as<int>(p, "degree", "path");
      if (!p.contains("control_points") || !p["control_points"].is_array()) throw ConfigError("path.control_points is required");
      for (const auto& pt : p["control_points"]) sp.control_points.push_back(detail::parse_point(pt, "path.control_points"));
      if (p.contains("knots")) sp.knots = get_as<std::vector<double>>(p, "knots", "path");
      c.path = sp;
    } else {
      throw ConfigError("path.type must be 'circle' or 'spline'");
    }
  }
  if (j.contains("sample_time_s")) c.sample_time = get_as<double>(j, "sample_time_s", "config");
  if (j.contains("limit_sets")) {
    const auto& ls = j["limit_sets"];
    if (!ls.is_object()) throw ConfigError("limit_sets must be an object");
    c.limit_sets.clear();
    for (const auto& [name, v] : ls.items()) {
      const std::string where = "limit_sets." + name;
      detail::check_keys(v, {"feedrate_mm_s", "acceleration_m_s2", "jerk_m_s3"}, where);
      c.limit_sets[name] = {get_as<double>(v, "feedrate_mm_s", where), get_as<double>(v, "acceleration_m_s2", where),
                            get_as<double>(v, "jerk_m_s3", where)};
    }
  }
  if (j.contains("limits")) c.limits = get_as<std::string>(j, "limits", "config");
  if (j.contains("models")) {
    detail::check_keys(j["models"], {"x", "y"}, "models");
    if (j["models"].contains("x")) c.model_x = detail::parse_model(j["models"]["x"], "models.x");
    if (j["models"].contains("y")) c.model_y = detail::parse_model(j["models"]["y"], "models.y");
  }
  if (j.contains("stabilize_models")) c.stabilize_models = get_as<bool>(j, "stabilize_models", "config");
  if (j.contains("dc_normalize")) c.dc_normalize = get_as<bool>(j, "dc_normalize", "config");
  if (j.contains("fbs")) {
    detail::check_keys(j["fbs"], {"x", "y"}, "fbs");
    if (j["fbs"].contains("x")) c.fbs_x = detail::parse_spline(j["fbs"]["x"], "fbs.x");
    if (j["fbs"].contains("y")) c.fbs_y = detail::parse_spline(j["fbs"]["y"], "fbs.y");
  }
  if (j.contains("s_spline")) c.s_spline = detail::parse_spline(j["s_spline"], "s_spline");
  if (j.contains("knots")) {
    const auto style = get_as<std::string>(j, "knots", "config");
    if (style == "clamped") c.knots = KnotStyle::kClamped;
    else if (style == "uniform") c.knots = KnotStyle::kUniform;
    else throw ConfigError("knots must be 'clamped' or 'uniform'");
  }
  if (j.contains("ce_limit_um")) {
    if (j["ce_limit_um"].is_null()) c.ce_limit_um.reset();
    else c.ce_limit_um = get_as<double>(j, "ce_limit_um", "config");
  }
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(get_as<std::string>(j, "algorithm", "config"));
  if (j.contains("jerk")) c.jerk = get_as<bool>(j, "jerk", "config");
  if (j.contains("dwell_fraction")) c.dwell_fraction = get_as<double>(j, "dwell_fraction", "config");
  if (j.contains("done_tolerance")) c.done_tolerance = get_as<double>(j, "done_tolerance", "config");
  if (j.contains("init_fallback")) c.init_fallback = get_as<std::vector<std::string>>(j, "init_fallback", "config");
  if (j.contains("path_lp")) {
    const auto& p = j["path_lp"];
    detail::check_keys(p, {"grid_points", "control_points", "degree", "rest_acceleration"}, "path_lp");
    if (p.contains("grid_points")) c.path_lp.grid_points = get_as<int>(p, "grid_points", "path_lp");
    if (p.contains("control_points")) c.path_lp.control_points = get_as<int>(p, "control_points", "path_lp");
    if (p.contains("degree")) c.path_lp.degree = get_as<int>(p, "degree", "path_lp");
    if (p.contains("rest_acceleration")) c.path_lp.rest_acceleration = get_as<bool>(p, "rest_acceleration", "path_lp");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    detail::check_keys(s, {"feasibility_tol", "gap_tol", "max_iterations"}, "solver");
    if (s.contains("feasibility_tol")) c.solver.feasibility_tol = get_as<double>(s, "feasibility_tol", "solver");
    if (s.contains("gap_tol")) {
      c.solver.absolute_gap_tol = c.solver.relative_gap_tol = get_as<double>(s, "gap_tol", "solver");
    }
    if (s.contains("max_iterations")) c.solver.max_iterations = get_as<int>(s, "max_iterations", "solver");
  }
  if (j.contains("passes")) c.passes = get_as<int>(j, "passes", "config");
  if (j.contains("seed")) c.seed = get_as<long long>(j, "seed", "config");
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file '" + file + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Everything an algorithm run produces. Series cover the simulation horizon,
/// which extends past the cycle time so the servo response can settle.
struct RunResult {
  Algorithm algorithm = Algorithm::kTap;
  std::string limits;
  std::string initialization;  // limit set of the linearization TAP, if any
  double cycle_time = 0.0;
  double compute_time = 0.0;  // wall clock of formulation and solve
  int lp_iterations = 0;
  double lp_max_violation = 0.0;
  std::vector<PassReport> passes;
  TrajectoryProfile commands;  // desired commands and kinematics over the horizon
  std::vector<double> x_dm, y_dm;
  std::vector<double> x_actual, y_actual;
  ContourResult contour;
  /// CE of the linearized commands the LP rows constrain (time LP with CE rows).
  std::optional<double> max_ce_linearized_um;
};

/// Servo response of desired commands, with the compensator (when given)
/// applied to deviations from the start point.
struct SimulatedMotion {
  std::vector<double> x_dm, y_dm, x, y;
};

inline SimulatedMotion simulate_motion(const ServoPair& servo, const std::vector<double>& x_d,
                                       const std::vector<double>& y_d) {
  const auto n = static_cast<Eigen::Index>(x_d.size());
  if (y_d.size() != x_d.size() || n == 0) throw ArgumentError("simulate_motion: series lengths differ");
  const double x0 = x_d.front();
  const double y0 = y_d.front();
  const Eigen::VectorXd ex = Eigen::Map<const Eigen::VectorXd>(x_d.data(), n).array() - x0;
  const Eigen::VectorXd ey = Eigen::Map<const Eigen::VectorXd>(y_d.data(), n).array() - y0;
  const Eigen::VectorXd cx = servo.x.command(ex);
  const Eigen::VectorXd cy = servo.y.command(ey);
  const Eigen::VectorXd ax = simulate(servo.x.model(), cx);
  const Eigen::VectorXd ay = simulate(servo.y.model(), cy);
  SimulatedMotion m;
  for (Eigen::Index k = 0; k < n; ++k) {
    m.x_dm.push_back(cx(k) + x0);
    m.y_dm.push_back(cy(k) + y0);
    m.x.push_back(ax(k) + x0);
    m.y.push_back(ay(k) + y0);
  }
  return m;
}

class Experiment {
 public:
  explicit Experiment(ExperimentConfig config) : config_(std::move(config)), path_(config_.toolpath()) {
    std::tie(gx_, gy_) = config_.servo_models();
  }

  const ExperimentConfig& config() const noexcept { return config_; }
  const Toolpath& path() const noexcept { return path_; }
  const DiscreteTransferFunction& model_x() const noexcept { return gx_; }
  const DiscreteTransferFunction& model_y() const noexcept { return gy_; }

  /// Linearization trajectory: TAP under the named limits plus the dwell tail.
  std::vector<double> initial_trajectory(const std::string& limit_set) const {
    return with_dwell(tap_profile(path_.length(), config_.limit_set(limit_set), config_.sample_time).s,
                      config_.dwell_fraction);
  }

  ServoPair servo(bool compensated, int rows) const {
    if (!compensated) return {AxisServo(gx_), AxisServo(gy_)};
    return {AxisServo(gx_, Compensator::build(gx_, rows, config_.fbs_x.control_points, config_.fbs_x.degree, config_.knots)),
            AxisServo(gy_, Compensator::build(gy_, rows, config_.fbs_y.control_points, config_.fbs_y.degree, config_.knots))};
  }

  RunResult run() const { return run(config_.algorithm); }

  RunResult run(Algorithm alg) const {
    const auto start = std::chrono::steady_clock::now();
    RunResult r;
    r.algorithm = alg;
    r.limits = config_.limits;
    std::vector<double> horizon_s;
    bool compensated = false;
    switch (alg) {
      case Algorithm::kTap: {
        const TrajectoryProfile tap = tap_profile(path_.length(), config_.active_limits(), config_.sample_time);
        r.cycle_time = tap.cycle_time;
        horizon_s = with_dwell(tap.s, config_.dwell_fraction);
        break;
      }
      case Algorithm::kFoPath: {
        const PathLpSpec spec = path_spec();
        const PathLpResult res = solve_path_lp(spec, config_.solver);
        r.cycle_time = res.cycle_time;
        r.lp_iterations = res.lp.iterations;
        r.lp_max_violation = res.lp.max_violation;
        horizon_s = with_dwell(res.profile.s, config_.dwell_fraction);
        break;
      }
      case Algorithm::kFoTime:
      case Algorithm::kFoSep: {
        compensated = alg == Algorithm::kFoSep;
        const RelinearizeResult res = solve_time(compensated, r);
        r.cycle_time = res.best.cycle_time;
        r.lp_iterations = res.best.lp.iterations;
        r.lp_max_violation = res.best.lp.max_violation;
        r.passes = res.passes;
        horizon_s = res.best.s_full;
        break;
      }
    }
    r.compute_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    r.commands.sample_time = config_.sample_time;
    r.commands.s = horizon_s;
    r.commands.cycle_time = r.cycle_time;
    fill_commands(r.commands, path_);
    const ServoPair sv = servo(compensated, static_cast<int>(horizon_s.size()));
    const SimulatedMotion m = simulate_motion(sv, r.commands.x_d, r.commands.y_d);
    r.x_dm = m.x_dm;
    r.y_dm = m.y_dm;
    r.x_actual = m.x;
    r.y_actual = m.y;
    r.contour = contour_errors(path_, r.commands.s, r.commands.x_d, r.commands.y_d, m.x, m.y);
    return r;
  }

 private:
  RelinearizeResult solve_time(bool compensated, RunResult& r) const {
    std::vector<std::string> candidates{config_.limits};
    for (const auto& name : config_.init_fallback) {
      if (std::find(candidates.begin(), candidates.end(), name) == candidates.end()) candidates.push_back(name);
    }
    std::optional<InfeasibleError> last;
    for (const auto& name : candidates) {
      const TimeLpSpec spec = time_spec(compensated, name);
      try {
        RelinearizeResult res = relinearize(spec, config_.passes, config_.solver);
        r.initialization = name;
        if (spec.ce_limit_um) {
          TimeLpSpec best_spec = spec;
          best_spec.linearization = res.best_linearization;
          r.max_ce_linearized_um = linearized_ce_um(best_spec, res.best.control);
        }
        return res;
      } catch (const InfeasibleError& e) {
        last = e;
      }
    }
    throw *last;
  }

 public:
  /// Time-LP problem of this configuration, linearized around the TAP of the
  /// named limit set; CE rows use the compensated or plain servo channels.
  TimeLpSpec time_spec(bool compensated, const std::string& init_limits) const {
    TimeLpSpec spec{.path = path_,
                    .limits = config_.active_limits(),
                    .sample_time = config_.sample_time,
                    .linearization = initial_trajectory(init_limits)};
    spec.degree = config_.s_spline.degree;
    spec.control_points = config_.s_spline.control_points;
    spec.knots = config_.knots;
    spec.include_jerk = config_.jerk;
    spec.done_tolerance = config_.done_tolerance;
    if (config_.ce_limit_um) {
      spec.ce_limit_um = config_.ce_limit_um;
      spec.servo = servo(compensated, spec.samples());
    }
    return spec;
  }

  PathLpSpec path_spec() const {
    PathLpSpec spec{.path = path_, .limits = config_.active_limits(), .sample_time = config_.sample_time};
    spec.grid_points = config_.path_lp.grid_points;
    spec.control_points = config_.path_lp.control_points;
    spec.degree = config_.path_lp.degree;
    spec.knots = config_.knots;
    spec.include_jerk = config_.jerk;
    spec.rest_acceleration = config_.path_lp.rest_acceleration;
    return spec;
  }

  /// Max |CE| (um) of the linearized commands diag(a) N_s p + b through the
  /// spec's servo channels, i.e. exactly what the contour rows bound.
  static double linearized_ce_um(const TimeLpSpec& spec, const Eigen::VectorXd& p) {
    const TimeLp lp = build_time_lp(spec);
    const auto [xl, yl] = linearized_commands(lp, p);
    const Point2 s0 = spec.path.eval(0.0);
    const Eigen::VectorXd ex = spec.servo->x.tracking_error(Eigen::VectorXd(xl.array() - s0.x()));
    const Eigen::VectorXd ey = spec.servo->y.tracking_error(Eigen::VectorXd(yl.array() - s0.y()));
    const Eigen::VectorXd ce = -lp.lin.theta.array().sin() * ex.array() + lp.lin.theta.array().cos() * ey.array();
    return ce.lpNorm<Eigen::Infinity>() * 1e3;
  }

 private:
  ExperimentConfig config_;
  Toolpath path_;
  DiscreteTransferFunction gx_ = DiscreteTransferFunction::identity(1e-3);
  DiscreteTransferFunction gy_ = DiscreteTransferFunction::identity(1e-3);
};

}  // namespace fosep
