#pragma once

// Config-file model for the simulator. The format is line-oriented
// `key = value` under `[section]` headers; `#` starts a comment line.
// Angles may carry a `deg` suffix and are stored in radians. A scenario
// describes one plant family (planar integrator with keep-out discs, or the
// cart-pole anti-swing rig), a controller, the filter parameters and
// optional pass/fail expectations used by the suite runner.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbfpc/cbf_models.hpp"
#include "cbfpc/errors.hpp"
#include "cbfpc/pc_solver.hpp"
#include "cbfpc/plants.hpp"

namespace cbfpc {

enum class PlantKind { Integrator, CartPole };

struct ObstacleConfig {
  Eigen::Vector2d center = Eigen::Vector2d::Constant(std::nan(""));
  double radius = -1.0;
  double alpha = -1.0;
};

struct ExpectSpec {
  std::optional<double> final_dist_max;
  bool min_h_positive = false;
  bool angle_within_limit = false;
  bool within_saturation = false;
  bool no_failed_steps = false;

  bool any() const {
    return final_dist_max.has_value() || min_h_positive || angle_within_limit ||
           within_saturation || no_failed_steps;
  }
};

struct ScenarioConfig {
  // [scenario]
  std::string id;
  PlantKind plant = PlantKind::Integrator;
  ControllerKind controller = ControllerKind::PcGradient;
  double horizon = -1.0;
  double dt = -1.0;
  unsigned long seed = 0;
  bool freeze_plant = false;
  int timing_warmup = 100;

  // [integrator] + [obstacle]*
  std::vector<Eigen::Vector2d> starts;
  Eigen::Vector2d goal = Eigen::Vector2d::Constant(std::nan(""));
  double k_d = -1.0;
  std::vector<ObstacleConfig> obstacles;

  // [cartpole]
  CartPoleParams cartpole;
  double swing_alpha = -1.0;
  double swing_mu = -1.0;
  double angle_limit = -1.0;
  double u_min = 0.0;
  double u_max = 0.0;
  double drive_amplitude = 0.0;
  double cert_grad_bound = 1.0;
  Eigen::Vector4d cartpole_start = Eigen::Vector4d::Zero();

  // [pc]
  double gamma = -1.0;
  BarrierSchedule schedule{-1.0, 0.0, 1e9};
  PredictionMode prediction = PredictionMode::Analytic;
  double fd_jump_threshold = 0.01;
  double backtrack_factor = 0.5;
  int max_backtracks = 30;

  ExpectSpec expect;

  int run_count() const {
    return plant == PlantKind::Integrator ? static_cast<int>(starts.size()) : 1;
  }
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void fail(int line, const std::string& what) {
  throw ConfigurationError("config line " + std::to_string(line) + ": " + what);
}

// Scalar with optional `deg` suffix.
inline double number(const std::string& raw, int line) {
  std::string s = trim(raw);
  double scale = 1.0;
  if (s.size() > 3 && s.substr(s.size() - 3) == "deg") {
    scale = M_PI / 180.0;
    s = trim(s.substr(0, s.size() - 3));
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) fail(line, "trailing characters in number '" + raw + "'");
    return v * scale;
  } catch (const ConfigurationError&) {
    throw;
  } catch (const std::exception&) {
    fail(line, "cannot parse number '" + raw + "'");
  }
}

inline std::vector<double> numbers(const std::string& raw, int line, int expected) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(number(part, line));
  if (static_cast<int>(out.size()) != expected)
    fail(line, "expected " + std::to_string(expected) + " comma-separated values");
  return out;
}

inline bool boolean(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(line, "expected true or false, got '" + raw + "'");
}

inline long integer(const std::string& raw, int line) {
  const double v = number(raw, line);
  const long n = static_cast<long>(std::llround(v));
  if (std::abs(v - static_cast<double>(n)) > 1e-12) fail(line, "expected an integer");
  return n;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace cfgdetail

inline const char* plant_name(PlantKind plant) {
  return plant == PlantKind::Integrator ? "integrator" : "cartpole";
}

inline const char* prediction_name(PredictionMode mode) {
  switch (mode) {
    case PredictionMode::Analytic: return "analytic";
    case PredictionMode::FiniteDifference: return "fd";
    case PredictionMode::Off: return "off";
  }
  return "off";
}

inline void validate_scenario(const ScenarioConfig& cfg) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigurationError("config field " + what);
  };
  need(!cfg.id.empty(), "scenario.id is required");
  need(cfg.horizon > 0.0, "scenario.horizon must be positive");
  need(cfg.dt > 0.0 && cfg.dt <= cfg.horizon, "scenario.dt must be in (0, horizon]");
  need(cfg.timing_warmup >= 0, "scenario.timing_warmup must be nonnegative");

  if (cfg.plant == PlantKind::Integrator) {
    need(!cfg.starts.empty(), "integrator.start is required");
    need(cfg.goal.allFinite(), "integrator.goal is required");
    need(cfg.k_d > 0.0, "integrator.k_d must be positive");
    need(!cfg.obstacles.empty(), "at least one [obstacle] section is required");
    for (std::size_t i = 0; i < cfg.obstacles.size(); ++i) {
      const auto& o = cfg.obstacles[i];
      const std::string tag = "obstacle " + std::to_string(i);
      need(o.center.allFinite(), tag + " center is required");
      need(o.radius > 0.0, tag + " radius must be positive");
      need(o.alpha > 0.0, tag + " alpha must be positive");
      for (const auto& s : cfg.starts)
        need((s - o.center).norm() > o.radius, tag + " contains a start position");
      need((cfg.goal - o.center).norm() > o.radius, tag + " contains the goal");
    }
  } else {
    cfg.cartpole.check();
    need(cfg.angle_limit > 0.0, "cartpole.angle_limit must be positive");
    need(cfg.swing_alpha > 0.0, "cartpole.alpha must be positive");
    need(cfg.swing_mu > 0.0, "cartpole.mu must be positive");
    need(cfg.u_min < cfg.u_max, "cartpole needs u_min < u_max");
    need(cfg.cert_grad_bound > 0.0, "cartpole.cert_grad_bound must be positive");
    need(std::abs(cfg.cartpole_start[1]) < cfg.angle_limit,
         "cartpole.start angle must lie strictly inside the limit");
  }

  const bool is_pc = cfg.controller == ControllerKind::PcGradient ||
                     cfg.controller == ControllerKind::PcNewton;
  if (is_pc) {
    need(cfg.gamma > 0.0, "pc.gamma must be positive");
    need(cfg.schedule.c0 > 0.0, "pc.c0 must be positive");
    need(cfg.schedule.growth >= 0.0, "pc.c_growth must be nonnegative");
    need(cfg.schedule.c_max >= cfg.schedule.c0, "pc.c_max must be >= c0");
    need(cfg.fd_jump_threshold > 0.0, "pc.fd_jump_threshold must be positive");
    need(cfg.backtrack_factor > 0.0 && cfg.backtrack_factor < 1.0,
         "pc.backtrack_factor must lie in (0, 1)");
    need(cfg.max_backtracks >= 0, "pc.max_backtracks must be nonnegative");
  }
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = cfgdetail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') cfgdetail::fail(line, "unterminated section header");
      section = s.substr(1, s.size() - 2);
      if (section == "obstacle")
        cfg.obstacles.emplace_back();
      else if (section != "scenario" && section != "integrator" && section != "cartpole" &&
               section != "pc" && section != "expect")
        cfgdetail::fail(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) cfgdetail::fail(line, "expected key = value");
    const std::string key = cfgdetail::trim(s.substr(0, eq));
    const std::string value = cfgdetail::trim(s.substr(eq + 1));
    if (section.empty()) cfgdetail::fail(line, "key outside any section");

    using namespace cfgdetail;
    if (section == "scenario") {
      if (key == "id") cfg.id = value;
      else if (key == "plant") {
        if (value == "integrator") cfg.plant = PlantKind::Integrator;
        else if (value == "cartpole") cfg.plant = PlantKind::CartPole;
        else fail(line, "unknown plant '" + value + "'");
      } else if (key == "controller") {
        if (value == "pc_gradient") cfg.controller = ControllerKind::PcGradient;
        else if (value == "pc_newton") cfg.controller = ControllerKind::PcNewton;
        else if (value == "oracle_qp") cfg.controller = ControllerKind::OracleQp;
        else if (value == "nominal") cfg.controller = ControllerKind::Nominal;
        else fail(line, "unknown controller '" + value + "'");
      } else if (key == "horizon") cfg.horizon = number(value, line);
      else if (key == "dt") cfg.dt = number(value, line);
      else if (key == "seed") cfg.seed = static_cast<unsigned long>(integer(value, line));
      else if (key == "freeze_plant") cfg.freeze_plant = boolean(value, line);
      else if (key == "timing_warmup") cfg.timing_warmup = static_cast<int>(integer(value, line));
      else fail(line, "unknown key scenario." + key);
    } else if (section == "integrator") {
      if (key == "start") {
        const auto v = numbers(value, line, 2);
        cfg.starts.emplace_back(v[0], v[1]);
      } else if (key == "goal") {
        const auto v = numbers(value, line, 2);
        cfg.goal = Eigen::Vector2d(v[0], v[1]);
      } else if (key == "k_d") cfg.k_d = number(value, line);
      else fail(line, "unknown key integrator." + key);
    } else if (section == "obstacle") {
      if (cfg.obstacles.empty()) fail(line, "obstacle key outside [obstacle] section");
      auto& obs = cfg.obstacles.back();
      if (key == "center") {
        const auto v = numbers(value, line, 2);
        obs.center = Eigen::Vector2d(v[0], v[1]);
      } else if (key == "radius") obs.radius = number(value, line);
      else if (key == "alpha") obs.alpha = number(value, line);
      else fail(line, "unknown key obstacle." + key);
    } else if (section == "cartpole") {
      if (key == "cart_mass") cfg.cartpole.cart_mass = number(value, line);
      else if (key == "pole_mass") cfg.cartpole.pole_mass = number(value, line);
      else if (key == "pole_length") cfg.cartpole.pole_length = number(value, line);
      else if (key == "gravity") cfg.cartpole.gravity = number(value, line);
      else if (key == "alpha") cfg.swing_alpha = number(value, line);
      else if (key == "mu") cfg.swing_mu = number(value, line);
      else if (key == "angle_limit") cfg.angle_limit = number(value, line);
      else if (key == "u_min") cfg.u_min = number(value, line);
      else if (key == "u_max") cfg.u_max = number(value, line);
      else if (key == "drive_amplitude") cfg.drive_amplitude = number(value, line);
      else if (key == "cert_grad_bound") cfg.cert_grad_bound = number(value, line);
      else if (key == "start") {
        const auto v = numbers(value, line, 4);
        cfg.cartpole_start = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
      } else fail(line, "unknown key cartpole." + key);
    } else if (section == "pc") {
      if (key == "gamma") cfg.gamma = number(value, line);
      else if (key == "c0") cfg.schedule.c0 = number(value, line);
      else if (key == "c_growth") cfg.schedule.growth = number(value, line);
      else if (key == "c_max") cfg.schedule.c_max = number(value, line);
      else if (key == "prediction") {
        if (value == "analytic") cfg.prediction = PredictionMode::Analytic;
        else if (value == "fd") cfg.prediction = PredictionMode::FiniteDifference;
        else if (value == "off") cfg.prediction = PredictionMode::Off;
        else fail(line, "unknown prediction mode '" + value + "'");
      } else if (key == "fd_jump_threshold") cfg.fd_jump_threshold = number(value, line);
      else if (key == "backtrack_factor") cfg.backtrack_factor = number(value, line);
      else if (key == "max_backtracks") cfg.max_backtracks = static_cast<int>(integer(value, line));
      else fail(line, "unknown key pc." + key);
    } else if (section == "expect") {
      if (key == "final_dist_max") cfg.expect.final_dist_max = number(value, line);
      else if (key == "min_h_positive") cfg.expect.min_h_positive = boolean(value, line);
      else if (key == "angle_within_limit") cfg.expect.angle_within_limit = boolean(value, line);
      else if (key == "within_saturation") cfg.expect.within_saturation = boolean(value, line);
      else if (key == "no_failed_steps") cfg.expect.no_failed_steps = boolean(value, line);
      else fail(line, "unknown key expect." + key);
    }
  }
  validate_scenario(cfg);
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

inline std::string serialize_scenario(const ScenarioConfig& cfg) {
  using cfgdetail::format_number;
  std::ostringstream out;
  out << "[scenario]\n";
  out << "id = " << cfg.id << "\n";
  out << "plant = " << plant_name(cfg.plant) << "\n";
  out << "controller = " << controller_name(cfg.controller) << "\n";
  out << "horizon = " << format_number(cfg.horizon) << "\n";
  out << "dt = " << format_number(cfg.dt) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "freeze_plant = " << (cfg.freeze_plant ? "true" : "false") << "\n";
  out << "timing_warmup = " << cfg.timing_warmup << "\n";
  if (cfg.plant == PlantKind::Integrator) {
    out << "\n[integrator]\n";
    out << "goal = " << format_number(cfg.goal[0]) << ", " << format_number(cfg.goal[1]) << "\n";
    out << "k_d = " << format_number(cfg.k_d) << "\n";
    for (const auto& s : cfg.starts)
      out << "start = " << format_number(s[0]) << ", " << format_number(s[1]) << "\n";
    for (const auto& o : cfg.obstacles) {
      out << "\n[obstacle]\n";
      out << "center = " << format_number(o.center[0]) << ", " << format_number(o.center[1])
          << "\n";
      out << "radius = " << format_number(o.radius) << "\n";
      out << "alpha = " << format_number(o.alpha) << "\n";
    }
  } else {
    out << "\n[cartpole]\n";
    out << "cart_mass = " << format_number(cfg.cartpole.cart_mass) << "\n";
    out << "pole_mass = " << format_number(cfg.cartpole.pole_mass) << "\n";
    out << "pole_length = " << format_number(cfg.cartpole.pole_length) << "\n";
    out << "gravity = " << format_number(cfg.cartpole.gravity) << "\n";
    out << "alpha = " << format_number(cfg.swing_alpha) << "\n";
    out << "mu = " << format_number(cfg.swing_mu) << "\n";
    out << "angle_limit = " << format_number(cfg.angle_limit) << "\n";
    out << "u_min = " << format_number(cfg.u_min) << "\n";
    out << "u_max = " << format_number(cfg.u_max) << "\n";
    out << "drive_amplitude = " << format_number(cfg.drive_amplitude) << "\n";
    out << "cert_grad_bound = " << format_number(cfg.cert_grad_bound) << "\n";
    out << "start = " << format_number(cfg.cartpole_start[0]) << ", "
        << format_number(cfg.cartpole_start[1]) << ", " << format_number(cfg.cartpole_start[2])
        << ", " << format_number(cfg.cartpole_start[3]) << "\n";
  }
  out << "\n[pc]\n";
  out << "gamma = " << format_number(cfg.gamma) << "\n";
  out << "c0 = " << format_number(cfg.schedule.c0) << "\n";
  out << "c_growth = " << format_number(cfg.schedule.growth) << "\n";
  out << "c_max = " << format_number(cfg.schedule.c_max) << "\n";
  out << "prediction = " << prediction_name(cfg.prediction) << "\n";
  out << "fd_jump_threshold = " << format_number(cfg.fd_jump_threshold) << "\n";
  out << "backtrack_factor = " << format_number(cfg.backtrack_factor) << "\n";
  out << "max_backtracks = " << cfg.max_backtracks << "\n";
  if (cfg.expect.any()) {
    out << "\n[expect]\n";
    if (cfg.expect.final_dist_max)
      out << "final_dist_max = " << format_number(*cfg.expect.final_dist_max) << "\n";
    if (cfg.expect.min_h_positive) out << "min_h_positive = true\n";
    if (cfg.expect.angle_within_limit) out << "angle_within_limit = true\n";
    if (cfg.expect.within_saturation) out << "within_saturation = true\n";
    if (cfg.expect.no_failed_steps) out << "no_failed_steps = true\n";
  }
  return out.str();
}

inline bool operator==(const ObstacleConfig& a, const ObstacleConfig& b) {
  return a.center == b.center && a.radius == b.radius && a.alpha == b.alpha;
}

namespace cfgdetail {

// goal keeps its NaN sentinel in cart-pole configs; two unset goals are equal.
inline bool nan_equal(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  for (int i = 0; i < 2; ++i)
    if (a[i] != b[i] && !(std::isnan(a[i]) && std::isnan(b[i]))) return false;
  return true;
}

} // namespace cfgdetail

inline bool operator==(const ExpectSpec& a, const ExpectSpec& b) {
  return a.final_dist_max == b.final_dist_max && a.min_h_positive == b.min_h_positive &&
         a.angle_within_limit == b.angle_within_limit &&
         a.within_saturation == b.within_saturation && a.no_failed_steps == b.no_failed_steps;
}

inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  return a.id == b.id && a.plant == b.plant && a.controller == b.controller &&
         a.horizon == b.horizon && a.dt == b.dt && a.seed == b.seed &&
         a.freeze_plant == b.freeze_plant && a.timing_warmup == b.timing_warmup &&
         a.starts == b.starts && cfgdetail::nan_equal(a.goal, b.goal) && a.k_d == b.k_d &&
         a.obstacles == b.obstacles && a.cartpole.cart_mass == b.cartpole.cart_mass &&
         a.cartpole.pole_mass == b.cartpole.pole_mass &&
         a.cartpole.pole_length == b.cartpole.pole_length &&
         a.cartpole.gravity == b.cartpole.gravity && a.swing_alpha == b.swing_alpha &&
         a.swing_mu == b.swing_mu && a.angle_limit == b.angle_limit && a.u_min == b.u_min &&
         a.u_max == b.u_max && a.drive_amplitude == b.drive_amplitude &&
         a.cert_grad_bound == b.cert_grad_bound && a.cartpole_start == b.cartpole_start &&
         a.gamma == b.gamma && a.schedule.c0 == b.schedule.c0 &&
         a.schedule.growth == b.schedule.growth && a.schedule.c_max == b.schedule.c_max &&
         a.prediction == b.prediction && a.fd_jump_threshold == b.fd_jump_threshold &&
         a.backtrack_factor == b.backtrack_factor && a.max_backtracks == b.max_backtracks &&
         a.expect == b.expect;
}

inline PcConfig scenario_pc_config(const ScenarioConfig& cfg) {
  PcConfig pc;
  pc.method =
      cfg.controller == ControllerKind::PcNewton ? PcMethod::Newton : PcMethod::Gradient;
  pc.gamma = cfg.gamma > 0.0 ? cfg.gamma : 1.0;
  pc.schedule = cfg.schedule;
  if (!(pc.schedule.c0 > 0.0)) pc.schedule.c0 = 1.0;
  pc.step = cfg.dt;
  pc.prediction = cfg.prediction;
  pc.fd_jump_threshold = cfg.fd_jump_threshold;
  pc.backtrack_factor = cfg.backtrack_factor;
  pc.max_backtracks = cfg.max_backtracks;
  return pc;
}

// Wire the config into a runnable scenario. start_index selects among the
// integrator start positions; the cart-pole family has a single run.
inline ControlScenario build_control_scenario(const ScenarioConfig& cfg, int start_index = 0) {
  validate_scenario(cfg);
  if (start_index < 0 || start_index >= cfg.run_count())
    throw ConfigurationError("start index out of range");

  ControlScenario sc;
  sc.horizon = cfg.horizon;
  sc.dt = cfg.dt;
  sc.freeze_plant = cfg.freeze_plant;

  if (cfg.plant == PlantKind::Integrator) {
    std::vector<CircularObstacle> obstacles;
    for (const auto& o : cfg.obstacles) obstacles.push_back({o.center, o.radius, o.alpha});
    sc.qp.objective = integrator_tracking_objective(cfg.k_d, cfg.goal);
    sc.qp.constraints = obstacle_rows(obstacles);
    sc.exact_integrator = true;
    sc.plant_rhs = [](const Vector&, const Vector& u) { return u; };
    sc.x0 = cfg.starts[static_cast<std::size_t>(start_index)];
    sc.input_dim = 2;
    const double k_d = cfg.k_d;
    const Eigen::Vector2d goal = cfg.goal;
    sc.nominal_input = [k_d, goal](const Vector& x, double) -> Vector {
      return k_d * (goal - Eigen::Vector2d(x[0], x[1]));
    };
    for (const auto& obs : obstacles)
      sc.safety_fns.push_back(
          [obs](const Vector& x) { return obs.h(Eigen::Vector2d(x[0], x[1])); });
    sc.certificate_h = [obstacles](const Vector& x) {
      double hmin = std::numeric_limits<double>::infinity();
      for (const auto& obs : obstacles)
        hmin = std::min(hmin, obs.h(Eigen::Vector2d(x[0], x[1])));
      return hmin;
    };
    sc.cbf_alpha = cfg.obstacles.front().alpha;
    sc.b_h = 1.0; // the keep-out normals are unit vectors
  } else {
    const CartPoleParams params = cfg.cartpole;
    const SwingLimit limit{cfg.angle_limit, cfg.swing_mu, cfg.swing_alpha};
    sc.qp.objective = signal_tracking_objective(1);
    sc.qp.constraints = cartpole_filter_rows(params, limit, cfg.u_min, cfg.u_max);
    sc.plant_rhs = [params](const Vector& x, const Vector& u) -> Vector {
      return cartpole::rhs(params, Eigen::Vector4d(x[0], x[1], x[2], x[3]), u[0]);
    };
    sc.x0 = cfg.cartpole_start;
    sc.input_dim = 1;
    const double amp = cfg.drive_amplitude;
    sc.theta.dim = 1;
    sc.theta.value = [amp](double t) -> Vector {
      Vector v(1);
      v[0] = amp * std::sin(t) * std::cos(t);
      return v;
    };
    sc.theta.derivative = [amp](double t) -> Vector {
      Vector v(1);
      v[0] = amp * std::cos(2.0 * t);
      return v;
    };
    sc.nominal_input = [amp](const Vector&, double t) -> Vector {
      Vector v(1);
      v[0] = amp * std::sin(t) * std::cos(t);
      return v;
    };
    sc.safety_fns.push_back([limit](const Vector& x) {
      return limit.h(Eigen::Vector4d(x[0], x[1], x[2], x[3]));
    });
    sc.certificate_h = [limit](const Vector& x) {
      return limit.h_exp(Eigen::Vector4d(x[0], x[1], x[2], x[3]));
    };
    sc.cbf_alpha = cfg.swing_alpha;
    sc.b_h = cfg.cert_grad_bound;
  }
  return sc;
}

} // namespace cbfpc
