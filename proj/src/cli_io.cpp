#include "aeroarm/cli_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "CLI11.hpp"

namespace aeroarm {

namespace {

// ============================================================================
// Value formatting and parsing
// ============================================================================

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  return buf;  // %.17g always round-trips; not reached
}

double parse_double_value(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(x))
    throw ConfigError("config: invalid number for '" + key + "': '" + v + "'");
  return x;
}

long long parse_int_value(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const long long x = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw ConfigError("config: invalid integer for '" + key + "': '" + v + "'");
  return x;
}

bool parse_bool_value(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: invalid boolean for '" + key + "': '" + v + "'");
}

// ============================================================================
// Key bindings: one named getter/setter per configuration key
// ============================================================================

struct KeyBinding {
  std::string name;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string&)> set;
};

using FieldRef = std::function<double&(ScenarioConfig&)>;

KeyBinding bind_double(const std::string& name, FieldRef ref) {
  return {name,
          [ref](const ScenarioConfig& c) {
            return format_double(ref(const_cast<ScenarioConfig&>(c)));
          },
          [ref, name](ScenarioConfig& c, const std::string& v) {
            ref(c) = parse_double_value(name, v);
          }};
}

KeyBinding bind_bool(const std::string& name,
                     std::function<bool&(ScenarioConfig&)> ref) {
  return {name,
          [ref](const ScenarioConfig& c) {
            return std::string(ref(const_cast<ScenarioConfig&>(c)) ? "true"
                                                                   : "false");
          },
          [ref, name](ScenarioConfig& c, const std::string& v) {
            ref(c) = parse_bool_value(name, v);
          }};
}

// A scalar key that fans out to every entry of a diagonal parameter vector.
template <typename Vec>
KeyBinding bind_uniform(const std::string& name,
                        std::function<Vec&(ScenarioConfig&)> ref) {
  return {name,
          [ref](const ScenarioConfig& c) {
            return format_double(ref(const_cast<ScenarioConfig&>(c))(0));
          },
          [ref, name](ScenarioConfig& c, const std::string& v) {
            ref(c).setConstant(parse_double_value(name, v));
          }};
}

const char* kCoordName[8] = {"x", "y", "z", "psi", "theta", "phi", "joint1",
                             "joint2"};
const char* kTaskName[6] = {"x", "y", "z", "psi", "theta", "phi"};
const char* kCoordUnit[8] = {"m", "m", "m", "rad", "rad", "rad", "rad", "rad"};
const char* kTaskUnit[6] = {"m", "m", "m", "rad", "rad", "rad"};

std::vector<KeyBinding> config_bindings(int waypoint_count) {
  std::vector<KeyBinding> keys;
  keys.reserve(96);
  auto D = [](auto member) {
    return FieldRef([member](ScenarioConfig& c) -> double& { return c.*member; });
  };

  keys.push_back(bind_double("duration_s", D(&ScenarioConfig::duration)));
  keys.push_back(bind_double("control_dt_s", D(&ScenarioConfig::control_dt)));
  keys.push_back(
      {"physics_substeps",
       [](const ScenarioConfig& c) { return std::to_string(c.physics_substeps); },
       [](ScenarioConfig& c, const std::string& v) {
         c.physics_substeps =
             static_cast<int>(parse_int_value("physics_substeps", v));
       }});
  keys.push_back({"rng_seed",
                  [](const ScenarioConfig& c) { return std::to_string(c.rng_seed); },
                  [](ScenarioConfig& c, const std::string& v) {
                    const char* b = v.c_str();
                    char* e = nullptr;
                    c.rng_seed = std::strtoull(b, &e, 10);
                    if (e == b || *e != '\0')
                      throw ConfigError(
                          "config: invalid integer for 'rng_seed': '" + v + "'");
                  }});
  keys.push_back(
      bind_double("divergence_norm", D(&ScenarioConfig::divergence_norm)));

  for (int i = 0; i < 8; ++i)
    keys.push_back(bind_double(
        std::string("q0_") + kCoordName[i] + "_" + kCoordUnit[i],
        [i](ScenarioConfig& c) -> double& { return c.q0(i); }));

  keys.push_back(bind_bool("noise_enabled", [](ScenarioConfig& c) -> bool& {
    return c.noise.enabled;
  }));
  keys.push_back(bind_double(
      "noise_mean", [](ScenarioConfig& c) -> double& { return c.noise.mean; }));
  keys.push_back(bind_double(
      "noise_std", [](ScenarioConfig& c) -> double& { return c.noise.std; }));

  keys.push_back(bind_bool("uncertainty_enabled", [](ScenarioConfig& c) -> bool& {
    return c.uncertainty.enabled;
  }));
  keys.push_back(bind_double("uncertainty_time_s", [](ScenarioConfig& c) -> double& {
    return c.uncertainty.time;
  }));
  keys.push_back(
      bind_double("uncertainty_mass_scale", [](ScenarioConfig& c) -> double& {
        return c.uncertainty.mass_scale;
      }));
  keys.push_back(
      bind_double("uncertainty_actuator_scale", [](ScenarioConfig& c) -> double& {
        return c.uncertainty.actuator_scale;
      }));

  keys.push_back(
      {"reference_mode",
       [](const ScenarioConfig& c) {
         return std::string(c.trajectory.mode == TrajectorySpec::Mode::kHelix
                                ? "helix"
                                : "hold");
       },
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "helix")
           c.trajectory.mode = TrajectorySpec::Mode::kHelix;
         else if (v == "hold")
           c.trajectory.mode = TrajectorySpec::Mode::kHold;
         else
           throw ConfigError(
               "config: 'reference_mode' must be 'helix' or 'hold', got '" + v +
               "'");
       }});
  keys.push_back(bind_double("helix_radius_m", [](ScenarioConfig& c) -> double& {
    return c.trajectory.helix_radius;
  }));
  keys.push_back(
      bind_double("helix_angular_rate_rad_s", [](ScenarioConfig& c) -> double& {
        return c.trajectory.helix_angular_rate;
      }));
  keys.push_back(
      bind_double("helix_climb_rate_m_s", [](ScenarioConfig& c) -> double& {
        return c.trajectory.helix_climb_rate;
      }));
  for (int i = 0; i < 3; ++i)
    keys.push_back(
        bind_double(std::string("helix_center_") + kTaskName[i] + "_m",
                    [i](ScenarioConfig& c) -> double& {
                      return c.trajectory.helix_center(i);
                    }));
  for (int i = 0; i < 6; ++i)
    keys.push_back(bind_double(
        std::string("hold_") + kTaskName[i] + "_" + kTaskUnit[i],
        [i](ScenarioConfig& c) -> double& { return c.trajectory.hold_pose(i); }));

  keys.push_back(
      {"orient_waypoint_count",
       [](const ScenarioConfig& c) {
         return std::to_string(c.trajectory.orientation.size());
       },
       // Count is applied in a pre-pass (it shapes the key set); here it only
       // cross-checks.
       [](ScenarioConfig& c, const std::string& v) {
         const long long n = parse_int_value("orient_waypoint_count", v);
         if (n != static_cast<long long>(c.trajectory.orientation.size()))
           throw ConfigError("config: orient_waypoint_count mismatch");
       }});
  const char* ang_name[3] = {"psi", "theta", "phi"};
  for (int w = 0; w < waypoint_count; ++w) {
    const std::string base = "orient_wp" + std::to_string(w) + "_";
    keys.push_back(
        bind_double(base + "time_s", [w](ScenarioConfig& c) -> double& {
          return c.trajectory.orientation[static_cast<size_t>(w)].time;
        }));
    for (int a = 0; a < 3; ++a)
      keys.push_back(bind_double(
          base + ang_name[a] + "_rad", [w, a](ScenarioConfig& c) -> double& {
            return c.trajectory.orientation[static_cast<size_t>(w)].angles(a);
          }));
  }

  keys.push_back(bind_bool("contact_enabled", [](ScenarioConfig& c) -> bool& {
    return c.contact_enabled;
  }));
  keys.push_back(bind_uniform<Vec6>(
      "contact_stiffness_N_m",
      [](ScenarioConfig& c) -> Vec6& { return c.contact.stiffness; }));
  keys.push_back(bind_uniform<Vec6>(
      "contact_damping_Ns_m",
      [](ScenarioConfig& c) -> Vec6& { return c.contact.damping; }));
  for (int i = 0; i < 6; ++i)
    keys.push_back(bind_double(
        std::string("contact_anchor_") + kTaskName[i] + "_" + kTaskUnit[i],
        [i](ScenarioConfig& c) -> double& { return c.contact.anchor(i); }));

  keys.push_back(bind_bool(
      "wind_enabled", [](ScenarioConfig& c) -> bool& { return c.wind_enabled; }));
  keys.push_back(bind_double(
      "wind_area1_m2", [](ScenarioConfig& c) -> double& { return c.wind.Ae1; }));
  keys.push_back(bind_double(
      "wind_area2_m2", [](ScenarioConfig& c) -> double& { return c.wind.Ae2; }));
  keys.push_back(bind_double(
      "wind_ref_alt_m", [](ScenarioConfig& c) -> double& { return c.wind.z0; }));
  keys.push_back(bind_double("wind_speed_ref_m_s", [](ScenarioConfig& c) -> double& {
    return c.wind.Vwz0;
  }));
  keys.push_back(bind_double("wind_heading_rad", [](ScenarioConfig& c) -> double& {
    return c.wind.heading_rad;
  }));

  keys.push_back(
      {"estimator_seed",
       [](const ScenarioConfig& c) {
         return std::string(
             c.estimator_seed == EstimatorSeed::kNominal ? "nominal" : "zero");
       },
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "nominal")
           c.estimator_seed = EstimatorSeed::kNominal;
         else if (v == "zero")
           c.estimator_seed = EstimatorSeed::kZero;
         else
           throw ConfigError(
               "config: 'estimator_seed' must be 'nominal' or 'zero', got '" +
               v + "'");
       }});
  keys.push_back(bind_double("ftrls_eta_min", [](ScenarioConfig& c) -> double& {
    return c.ftrls.eta_min;
  }));
  keys.push_back(bind_double(
      "ftrls_gamma", [](ScenarioConfig& c) -> double& { return c.ftrls.gamma_g; }));
  keys.push_back(bind_double(
      "ftrls_r0", [](ScenarioConfig& c) -> double& { return c.ftrls.r0; }));
  keys.push_back(bind_double("ftrls_cond_max", [](ScenarioConfig& c) -> double& {
    return c.ftrls.cond_max;
  }));
  keys.push_back({"ftrls_cond_check_period",
                  [](const ScenarioConfig& c) {
                    return std::to_string(c.ftrls.cond_check_period);
                  },
                  [](ScenarioConfig& c, const std::string& v) {
                    c.ftrls.cond_check_period = static_cast<int>(
                        parse_int_value("ftrls_cond_check_period", v));
                  }});
  keys.push_back(
      bind_double("ftrls_diff_cutoff_rad_s", [](ScenarioConfig& c) -> double& {
        return c.ftrls.diff_cutoff_rad_s;
      }));

  for (int i = 0; i < 6; ++i)
    keys.push_back(bind_double(
        std::string("imp_stiffness_") + kTaskName[i],
        [i](ScenarioConfig& c) -> double& { return c.impedance.stiffness(i); }));
  for (int i = 0; i < 6; ++i)
    keys.push_back(bind_double(
        std::string("imp_damping_") + kTaskName[i],
        [i](ScenarioConfig& c) -> double& { return c.impedance.damping(i); }));
  keys.push_back(bind_uniform<Vec2>(
      "att_kp", [](ScenarioConfig& c) -> Vec2& { return c.impedance.att_kp; }));
  keys.push_back(bind_uniform<Vec2>(
      "att_kd", [](ScenarioConfig& c) -> Vec2& { return c.impedance.att_kd; }));
  keys.push_back(
      bind_double("min_thrust_for_tilt_N", [](ScenarioConfig& c) -> double& {
        return c.impedance.min_thrust_for_tilt;
      }));
  keys.push_back(bind_double("tilt_limit_rad", [](ScenarioConfig& c) -> double& {
    return c.impedance.tilt_limit;
  }));
  keys.push_back(bind_double("dls_sigma_min", [](ScenarioConfig& c) -> double& {
    return c.impedance.dls_sigma_min;
  }));
  keys.push_back(bind_double("dls_lambda", [](ScenarioConfig& c) -> double& {
    return c.impedance.dls_lambda;
  }));
  keys.push_back(
      bind_double("sigma_ff_cutoff_rad_s", [](ScenarioConfig& c) -> double& {
        return c.impedance.sigma_ff_cutoff;
      }));
  keys.push_back(
      bind_double("lever_cutoff_rad_s", [](ScenarioConfig& c) -> double& {
        return c.impedance.lever_cutoff;
      }));

  for (int i = 0; i < 8; ++i)
    keys.push_back(bind_double(
        std::string("dob_g_") + kCoordName[i],
        [i](ScenarioConfig& c) -> double& { return c.dob.g(i); }));
  keys.push_back(bind_uniform<Vec8>(
      "dob_gv", [](ScenarioConfig& c) -> Vec8& { return c.dob.gv; }));

  return keys;
}

// Raw `key = value` pairs in file order, duplicates rejected.
std::vector<std::pair<std::string, std::string>> tokenize_config(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    for (const auto& p : pairs)
      if (p.first == key)
        throw ConfigError("config: duplicate key '" + key + "'");
    pairs.emplace_back(key, value);
  }
  return pairs;
}

}  // namespace

// ============================================================================
// Config parse / serialize
// ============================================================================

ScenarioConfig parse_config_text(const std::string& text) {
  const auto pairs = tokenize_config(text);

  ScenarioConfig cfg;
  for (const auto& [key, value] : pairs) {
    if (key == "orient_waypoint_count") {
      const long long n = parse_int_value(key, value);
      if (n < 1 || n > 64)
        throw ConfigError("config: orient_waypoint_count must be in [1, 64]");
      cfg.trajectory.orientation.assign(static_cast<size_t>(n),
                                        OrientationWaypoint{});
    }
  }

  const auto keys =
      config_bindings(static_cast<int>(cfg.trajectory.orientation.size()));
  std::map<std::string, const KeyBinding*> by_name;
  for (const auto& k : keys) by_name[k.name] = &k;

  for (const auto& [key, value] : pairs) {
    const auto it = by_name.find(key);
    if (it == by_name.end())
      throw ConfigError("config: unknown key '" + key + "'");
    it->second->set(cfg, value);
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IOFailure("cannot read config file '" + path + "'");
  return parse_config_text(buf.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  const auto keys =
      config_bindings(static_cast<int>(cfg.trajectory.orientation.size()));
  std::string out;
  out.reserve(4096);
  for (const auto& k : keys) {
    out += k.name;
    out += " = ";
    out += k.get(cfg);
    out += "\n";
  }
  return out;
}

// ============================================================================
// CSV
// ============================================================================

std::string log_to_csv(const SimLog& log) {
  std::string out;
  out.reserve(static_cast<size_t>(log.rows() + 1) * log.cols() * 12);
  for (int c = 0; c < log.cols(); ++c) {
    if (c) out += ',';
    out += log.columns()[static_cast<size_t>(c)];
  }
  out += '\n';
  for (int r = 0; r < log.rows(); ++r) {
    for (int c = 0; c < log.cols(); ++c) {
      if (c) out += ',';
      out += format_double(log.value(r, c));
    }
    out += '\n';
  }
  return out;
}

SimLog log_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("csv: missing header row");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
    line.pop_back();

  std::vector<std::string> columns;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) columns.push_back(cell);
  }
  if (columns.empty()) throw ConfigError("csv: empty header row");

  std::vector<std::vector<double>> rows;
  std::vector<double> row(columns.size(), 0.0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.c_str();
    for (size_t c = 0; c < columns.size(); ++c) {
      char* end = nullptr;
      row[c] = std::strtod(p, &end);
      if (end == p)
        throw ConfigError("csv line " + std::to_string(lineno) +
                          ": expected a number in column " + std::to_string(c));
      p = end;
      if (c + 1 < columns.size()) {
        if (*p != ',')
          throw ConfigError("csv line " + std::to_string(lineno) +
                            ": expected ',' after column " + std::to_string(c));
        ++p;
      }
    }
    if (*p != '\0' && *p != '\r')
      throw ConfigError("csv line " + std::to_string(lineno) +
                        ": trailing characters");
    rows.push_back(row);
  }

  double dt = 0.0;
  if (rows.size() >= 2) dt = rows[1][0] - rows[0][0];
  SimLog log(columns, dt);
  log.reserve_rows(static_cast<int>(rows.size()));
  for (const auto& r : rows) log.add_row(r);
  return log;
}

SimLog read_log_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open log file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IOFailure("cannot read log file '" + path + "'");
  return log_from_csv(buf.str());
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IOFailure("cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out.good()) throw IOFailure("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw IOFailure("failed to move '" + tmp + "' into place: " + ec.message());
}

// ============================================================================
// Summary
// ============================================================================

namespace {

struct ColSet {
  int t;
  int chi[6], ref[6], fe_hat[6], fe_true[6];
  int flags[5];
};

ColSet columns_of(const SimLog& log) {
  ColSet s{};
  s.t = log.column_index("t_s");
  const char* task[6] = {"x", "y", "z", "psi", "theta", "phi"};
  const char* tu[6] = {"m", "m", "m", "rad", "rad", "rad"};
  const char* fu[6] = {"N", "N", "N", "Nm", "Nm", "Nm"};
  for (int i = 0; i < 6; ++i) {
    s.chi[i] = log.column_index(std::string("chi_") + task[i] + "_" + tu[i]);
    s.ref[i] = log.column_index(std::string("ref_") + task[i] + "_" + tu[i]);
    s.fe_hat[i] = log.column_index(std::string("fe_hat_") + task[i] + "_" + fu[i]);
    s.fe_true[i] =
        log.column_index(std::string("fe_true_") + task[i] + "_" + fu[i]);
  }
  const char* flags[5] = {"flag_thrust_sat", "flag_joint_sat", "flag_dls",
                          "flag_tilt_guard", "flag_est_reset"};
  for (int i = 0; i < 5; ++i) s.flags[i] = log.column_index(flags[i]);
  return s;
}

}  // namespace

RunSummary summarize(const SimLog& log) {
  RunSummary s;
  const int n = log.rows();
  s.ticks = n;
  s.diverged = log.events.diverged;
  s.divergence_time = log.events.divergence_time;
  if (n == 0) return s;

  const ColSet col = columns_of(log);
  const double t_first = log.value(0, col.t);
  const double dt = n >= 2 ? log.value(1, col.t) - t_first : 0.0;
  const double duration = n * (dt > 0.0 ? dt : 1.0);
  s.duration = n * dt;

  const double t_early = t_first + duration / 10.0;
  const double t_third = t_first + duration / 3.0;
  const double t_half = t_first + duration / 2.0;
  const double t_final = t_first + 0.75 * duration;

  int half_idx = n;
  for (int r = 0; r < n; ++r)
    if (log.value(r, col.t) >= t_half) {
      half_idx = r;
      break;
    }

  Vec6 pre_band = Vec6::Zero();
  Vec6 sum_pre = Vec6::Zero(), sum_post = Vec6::Zero(), sum_final = Vec6::Zero();
  int n_pre = 0, n_post = 0, n_final = 0;

  for (int r = 0; r < n; ++r) {
    const double t = log.value(r, col.t);
    for (int i = 0; i < 6; ++i) {
      const double fe_err =
          std::abs(log.value(r, col.fe_hat[i]) - log.value(r, col.fe_true[i]));
      const double task_err = log.value(r, col.chi[i]) - log.value(r, col.ref[i]);
      if (t < t_early)
        s.force_err_peak_early(i) = std::max(s.force_err_peak_early(i), fe_err);
      if (t >= t_third)
        s.force_err_peak_late(i) = std::max(s.force_err_peak_late(i), fe_err);
      if (t >= t_third && t < t_half) {
        pre_band(i) = std::max(pre_band(i), fe_err);
        sum_pre(i) += task_err * task_err;
      }
      if (t >= t_half) {
        sum_post(i) += task_err * task_err;
        s.task_peak_post(i) = std::max(s.task_peak_post(i), std::abs(task_err));
      }
      if (t >= t_final) sum_final(i) += task_err * task_err;
    }
    if (t >= t_third && t < t_half) ++n_pre;
    if (t >= t_half) ++n_post;
    if (t >= t_final) ++n_final;

    s.thrust_saturation_ticks += log.value(r, col.flags[0]) != 0.0 ? 1 : 0;
    s.joint_saturation_ticks += log.value(r, col.flags[1]) != 0.0 ? 1 : 0;
    s.dls_ticks += log.value(r, col.flags[2]) != 0.0 ? 1 : 0;
    s.tilt_guard_ticks += log.value(r, col.flags[3]) != 0.0 ? 1 : 0;
    s.estimator_resets += log.value(r, col.flags[4]) != 0.0 ? 1 : 0;
  }
  if (n_pre > 0) s.task_rms_pre = (sum_pre / n_pre).cwiseSqrt();
  if (n_post > 0) s.task_rms_post = (sum_post / n_post).cwiseSqrt();
  if (n_final > 0) s.task_rms_final = (sum_final / n_final).cwiseSqrt();

  {
    Vec6 e;
    for (int i = 0; i < 6; ++i)
      e(i) = log.value(n - 1, col.chi[i]) - log.value(n - 1, col.ref[i]);
    s.terminal_task_err = e.norm();
  }

  // Settle time of the force-estimation transient: walk back from the split,
  // tracking the running per-axis maximum; the settle point is the earliest
  // sample from which the error never again leaves the pre-window band.
  if (half_idx > 0 && n_pre > 0) {
    const Vec6 band = 1.05 * pre_band + Vec6::Constant(1e-12);
    Vec6 suffix_max = Vec6::Zero();
    int settle_idx = half_idx;
    for (int r = half_idx - 1; r >= 0; --r) {
      for (int i = 0; i < 6; ++i)
        suffix_max(i) = std::max(
            suffix_max(i),
            std::abs(log.value(r, col.fe_hat[i]) - log.value(r, col.fe_true[i])));
      if ((suffix_max.array() <= band.array()).all())
        settle_idx = r;
      else
        break;
    }
    if (settle_idx < half_idx)
      s.force_err_settle = log.value(settle_idx, col.t) - t_first;
  }

  // Recovery of the end-effector pitch/roll tracking after the mid-run plant
  // step: earliest start of a one-second window whose RMS re-enters the
  // pre-window RMS band.
  if (dt > 0.0 && half_idx < n && n_pre > 0) {
    const int w = std::max(1, static_cast<int>(std::lround(1.0 / dt)));
    for (int axis : {4, 5}) {
      double& out = axis == 4 ? s.theta_recovery : s.phi_recovery;
      const double band = 1.1 * s.task_rms_pre(axis) + 1e-12;
      for (int start = half_idx; start + w <= n; ++start) {
        double acc = 0.0;
        for (int r = start; r < start + w; ++r) {
          const double e =
              log.value(r, col.chi[axis]) - log.value(r, col.ref[axis]);
          acc += e * e;
        }
        if (std::sqrt(acc / w) <= band) {
          out = log.value(start, col.t) - t_half;
          break;
        }
      }
    }
  }

  return s;
}

std::string render_summary(const RunSummary& s) {
  std::ostringstream out;
  const char* task[6] = {"x", "y", "z", "psi", "theta", "phi"};
  auto put = [&out](const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  auto put_d = [&](const std::string& key, double v) { put(key, format_double(v)); };
  auto put_vec = [&](const std::string& prefix, const Vec6& v) {
    for (int i = 0; i < 6; ++i) put_d(prefix + "_" + task[i], v(i));
  };

  put("code_version", kCodeVersion);
  put_d("duration_s", s.duration);
  put("ticks", std::to_string(s.ticks));
  put("diverged", s.diverged ? "true" : "false");
  if (s.diverged) put_d("divergence_time_s", s.divergence_time);
  put_vec("force_err_peak_early", s.force_err_peak_early);
  put_vec("force_err_peak_late", s.force_err_peak_late);
  put_d("force_err_settle_s", s.force_err_settle);
  put_vec("task_rms_pre", s.task_rms_pre);
  put_vec("task_rms_post", s.task_rms_post);
  put_vec("task_peak_post", s.task_peak_post);
  put_vec("task_rms_final", s.task_rms_final);
  put_d("terminal_task_err", s.terminal_task_err);
  put_d("theta_recovery_s", s.theta_recovery);
  put_d("phi_recovery_s", s.phi_recovery);
  put("thrust_saturation_ticks", std::to_string(s.thrust_saturation_ticks));
  put("joint_saturation_ticks", std::to_string(s.joint_saturation_ticks));
  put("dls_ticks", std::to_string(s.dls_ticks));
  put("tilt_guard_ticks", std::to_string(s.tilt_guard_ticks));
  put("estimator_resets", std::to_string(s.estimator_resets));
  put_d("wall_clock_s", s.wall_clock);
  return out.str();
}

// ============================================================================
// Run outputs
// ============================================================================

RunOutputs write_run_outputs(const SimLog& log, const ScenarioConfig& cfg,
                             const std::string& dir, double wall_clock) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IOFailure("cannot create output directory '" + dir + "'");

  RunOutputs paths;
  paths.csv_path = (std::filesystem::path(dir) / "log.csv").string();
  paths.metadata_path = (std::filesystem::path(dir) / "metadata.cfg").string();
  paths.summary_path = (std::filesystem::path(dir) / "summary.txt").string();

  write_file_atomic(paths.csv_path, log_to_csv(log));

  std::ostringstream meta;
  meta << "# run metadata -- also a valid scenario config for reproduction\n";
  meta << "# code_version = " << kCodeVersion << "\n";
  meta << "# wall_clock_s = " << format_double(wall_clock) << "\n";
  meta << "# diverged = " << (log.events.diverged ? "true" : "false") << "\n";
  if (log.events.diverged) {
    meta << "# divergence_time_s = " << format_double(log.events.divergence_time)
         << "\n";
    meta << "# divergence_reason = " << log.events.divergence_reason << "\n";
  }
  meta << serialize_config(cfg);
  write_file_atomic(paths.metadata_path, meta.str());

  RunSummary summary = summarize(log);
  summary.wall_clock = wall_clock;
  summary.diverged = log.events.diverged;
  summary.divergence_time = log.events.divergence_time;
  write_file_atomic(paths.summary_path, render_summary(summary));
  return paths;
}

std::string emit_plot_script(const std::string& dir) {
  static const char* kScript = R"PY(#!/usr/bin/env python3
"""Render force-estimation, tracking and actuator charts from a run log."""
import argparse
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("csv", nargs="?", default=None, help="path to log.csv")
parser.add_argument("--out", default=None, help="output directory for PNGs")
args = parser.parse_args()

here = os.path.dirname(os.path.abspath(__file__))
csv = args.csv or os.path.join(here, "log.csv")
out = args.out or os.path.dirname(os.path.abspath(csv))

d = np.genfromtxt(csv, delimiter=",", names=True)
t = d["t_s"]
task = ["x", "y", "z", "psi", "theta", "phi"]
force_unit = ["N", "N", "N", "Nm", "Nm", "Nm"]
task_unit = ["m", "m", "m", "rad", "rad", "rad"]

fig, axes = plt.subplots(3, 2, figsize=(11, 8), sharex=True)
for i, ax in enumerate(axes.ravel()):
    fe = d[f"fe_true_{task[i]}_{force_unit[i]}"]
    fe_hat = d[f"fe_hat_{task[i]}_{force_unit[i]}"]
    ax.plot(t, fe, lw=1.0, label="true")
    ax.plot(t, fe_hat, "--", lw=1.0, label="estimate")
    ax.set_ylabel(f"F_{task[i]} [{force_unit[i]}]")
    ax.grid(alpha=0.3)
axes[0, 0].legend(loc="best")
for ax in axes[-1]:
    ax.set_xlabel("t [s]")
fig.suptitle("Contact-force estimation")
fig.tight_layout()
fig.savefig(os.path.join(out, "force_estimation.png"), dpi=130)

fig, axes = plt.subplots(3, 2, figsize=(11, 8), sharex=True)
for i, ax in enumerate(axes.ravel()):
    err = d[f"chi_{task[i]}_{task_unit[i]}"] - d[f"ref_{task[i]}_{task_unit[i]}"]
    ax.plot(t, err, lw=1.0)
    ax.set_ylabel(f"e_{task[i]} [{task_unit[i]}]")
    ax.grid(alpha=0.3)
for ax in axes[-1]:
    ax.set_xlabel("t [s]")
fig.suptitle("Task tracking error")
fig.tight_layout()
fig.savefig(os.path.join(out, "tracking_error.png"), dpi=130)

fig, (ax1, ax2, ax3) = plt.subplots(3, 1, figsize=(11, 8), sharex=True)
for j in range(1, 5):
    ax1.plot(t, d[f"u_f{j}_N"], lw=0.8, label=f"rotor {j}")
ax1.set_ylabel("thrust [N]")
ax1.legend(ncol=4, fontsize=8)
ax1.grid(alpha=0.3)
ax2.plot(t, d["u_j1_Nm"], lw=0.8, label="joint 1")
ax2.plot(t, d["u_j2_Nm"], lw=0.8, label="joint 2")
ax2.set_ylabel("joint torque [Nm]")
ax2.legend(fontsize=8)
ax2.grid(alpha=0.3)
ax3.plot(t, d["att_sp_theta_rad"], lw=0.8, label="pitch setpoint")
ax3.plot(t, d["q_theta_rad"], lw=0.8, label="pitch")
ax3.plot(t, d["att_sp_phi_rad"], lw=0.8, label="roll setpoint")
ax3.plot(t, d["q_phi_rad"], lw=0.8, label="roll")
ax3.set_ylabel("attitude [rad]")
ax3.set_xlabel("t [s]")
ax3.legend(ncol=2, fontsize=8)
ax3.grid(alpha=0.3)
fig.suptitle("Actuators and attitude")
fig.tight_layout()
fig.savefig(os.path.join(out, "actuators.png"), dpi=130)

print(f"wrote force_estimation.png, tracking_error.png, actuators.png to {out}")
)PY";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IOFailure("cannot create output directory '" + dir + "'");
  const std::string path =
      (std::filesystem::path(dir) / "plot_results.py").string();
  write_file_atomic(path, kScript);
  return path;
}

// ============================================================================
// CLI
// ============================================================================

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("AEROARM_OUT_DIR");
  return env != nullptr && *env != '\0' ? std::string(env)
                                        : std::string("aeroarm_out");
}

int cli_simulate(const std::string& cfg_path, std::string out_dir,
                 const std::uint64_t* seed_override) {
  ScenarioConfig cfg = load_config(cfg_path);
  if (seed_override != nullptr) cfg.rng_seed = *seed_override;
  if (out_dir.empty()) out_dir = default_out_dir();

  const auto t0 = std::chrono::steady_clock::now();
  const SimLog log = run_scenario(cfg);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const RunOutputs paths = write_run_outputs(log, cfg, out_dir, wall);
  RunSummary summary = summarize(log);
  summary.wall_clock = wall;
  std::printf("%s", render_summary(summary).c_str());
  std::printf("log = %s\n", paths.csv_path.c_str());
  std::printf("metadata = %s\n", paths.metadata_path.c_str());
  std::printf("summary = %s\n", paths.summary_path.c_str());
  if (log.events.diverged) {
    std::fprintf(stderr, "error: divergence: %s at t = %gs\n",
                 log.events.divergence_reason.c_str(),
                 log.events.divergence_time);
    return 1;
  }
  return 0;
}

int cli_validate(const std::string& cfg_path) {
  const ScenarioConfig cfg = load_config(cfg_path);
  validate_dob_robustness(cfg.dob);
  require_stable_impedance(cfg.impedance);

  double worst_margin = 1e300;
  int worst = 0;
  for (int i = 0; i < 8; ++i) {
    const double alpha_g = cfg.dob.Mn(i) / cfg.dob.M_lower(i) * cfg.dob.g(i);
    const double margin = cfg.dob.gv(i) / 2.0 - alpha_g;
    if (margin < worst_margin) {
      worst_margin = margin;
      worst = i;
    }
  }
  const auto poles = impedance_error_poles(cfg.impedance);
  double slowest = -1e300;
  for (int i = 0; i < 12; ++i) slowest = std::max(slowest, poles(i).real());

  std::printf("configuration valid\n");
  std::printf(
      "observer robustness: worst channel %d, alpha*g = %s <= gv/2 = %s\n",
      worst,
      format_double(cfg.dob.Mn(worst) / cfg.dob.M_lower(worst) * cfg.dob.g(worst))
          .c_str(),
      format_double(cfg.dob.gv(worst) / 2.0).c_str());
  std::printf("impedance poles stable: slowest real part = %s\n",
              format_double(slowest).c_str());
  return 0;
}

int cli_analyze(const std::string& log_path) {
  const SimLog log = read_log_csv(log_path);
  std::printf("%s", render_summary(summarize(log)).c_str());
  return 0;
}

int cli_plots(const std::string& log_path, std::string out_dir) {
  (void)read_log_csv(log_path);  // validates the log before emitting anything
  if (out_dir.empty()) {
    const auto parent = std::filesystem::path(log_path).parent_path();
    out_dir = parent.empty() ? std::string(".") : parent.string();
  }
  const std::string script = emit_plot_script(out_dir);
  std::printf("plot script = %s\n", script.c_str());
  std::printf("run: python3 %s %s\n", script.c_str(), log_path.c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"aerial-manipulator simulation: robust cascade with online "
               "contact-force identification"};
  app.require_subcommand(1);

  std::string sim_cfg, sim_out;
  std::uint64_t sim_seed = 0;
  auto* sim = app.add_subcommand("simulate", "run a scenario and write outputs");
  sim->add_option("config", sim_cfg, "scenario config file")->required();
  sim->add_option("--out", sim_out,
                  "output directory (default: $AEROARM_OUT_DIR or aeroarm_out)");
  auto* seed_opt =
      sim->add_option("--seed", sim_seed, "override the config rng_seed");

  std::string val_cfg;
  auto* val = app.add_subcommand(
      "validate", "check a config against the controller constraints");
  val->add_option("config", val_cfg, "scenario config file")->required();

  std::string ana_log;
  auto* ana = app.add_subcommand("analyze", "summarize a run log");
  ana->add_option("log", ana_log, "log.csv produced by simulate")->required();

  std::string plot_log, plot_out;
  auto* plot = app.add_subcommand("plots", "emit a python plotting script");
  plot->add_option("log", plot_log, "log.csv produced by simulate")->required();
  plot->add_option("--out", plot_out, "directory for the script (default: log dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (sim->parsed())
      return cli_simulate(sim_cfg, sim_out,
                          seed_opt->count() > 0 ? &sim_seed : nullptr);
    if (val->parsed()) return cli_validate(val_cfg);
    if (ana->parsed()) return cli_analyze(ana_log);
    if (plot->parsed()) return cli_plots(plot_log, plot_out);
  } catch (const IOFailure& e) {
    std::fprintf(stderr, "error: io: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const ConstraintViolation& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const UnstableImpedanceConfig& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace aeroarm
