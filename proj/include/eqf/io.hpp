// Plain-text persistence: flat key=value scenario configs and CSV output.
//
// Config format: one `key = value` per line, `#` starts a comment, blank
// lines are ignored. Keys are the ScenarioConfig field names; any key left
// out keeps the ScenarioConfig default. Vectors are three numbers separated
// by spaces or commas. input_mode is `unbiased_cascade` or
// `biased_passthrough`.

#pragma once

#include "eqf/harness.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace eqf {

/// Malformed config input. what() names the source line and key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument("expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view text) {
  text = trim(text);
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument("expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline Vec3 parse_vec3(std::string_view text) {
  std::string s(text);
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  std::vector<std::string> parts;
  for (std::string p; in >> p;) parts.push_back(p);
  if (parts.size() != 3) throw std::invalid_argument("expected three components, got '" + std::string(text) + "'");
  return {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

/// Fixed-precision text for CSV cells.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string mode_name(Stage2InputMode m) {
  return m == Stage2InputMode::unbiased_cascade ? "unbiased_cascade" : "biased_passthrough";
}

struct ConfigField {
  std::function<void(ScenarioConfig&, std::string_view)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <class T>
ConfigField number_field(T ScenarioConfig::*member) {
  return {[member](ScenarioConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*member = parse_double(v);
            } else {
              c.*member = parse_int<T>(v);
            }
          },
          [member](const ScenarioConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

inline ConfigField vec_field(Vec3 ScenarioConfig::*member) {
  return {[member](ScenarioConfig& c, std::string_view v) { c.*member = parse_vec3(v); },
          [member](const ScenarioConfig& c) {
            const Vec3& x = c.*member;
            return format_double(x.x()) + " " + format_double(x.y()) + " " + format_double(x.z());
          }};
}

// Ordered as written by write_config.
inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      {"seed", number_field(&ScenarioConfig::seed)},
      {"duration_s", number_field(&ScenarioConfig::duration_s)},
      {"gyro_rate", number_field(&ScenarioConfig::gyro_rate)},
      {"star_rate", number_field(&ScenarioConfig::star_rate)},
      {"vector_rate", number_field(&ScenarioConfig::vector_rate)},
      {"update_iterations", number_field(&ScenarioConfig::update_iterations)},
      {"gain_M", number_field(&ScenarioConfig::gain_M)},
      {"gain_N", number_field(&ScenarioConfig::gain_N)},
      {"sigma0", number_field(&ScenarioConfig::sigma0)},
      {"gyro_noise_std", number_field(&ScenarioConfig::gyro_noise_std)},
      {"direction_noise_std", number_field(&ScenarioConfig::direction_noise_std)},
      {"omega_T_min_dps", number_field(&ScenarioConfig::omega_T_min_dps)},
      {"omega_T_max_dps", number_field(&ScenarioConfig::omega_T_max_dps)},
      {"u_min_dps", number_field(&ScenarioConfig::u_min_dps)},
      {"u_max_dps", number_field(&ScenarioConfig::u_max_dps)},
      {"b_min_dps", number_field(&ScenarioConfig::b_min_dps)},
      {"b_max_dps", number_field(&ScenarioConfig::b_max_dps)},
      {"input_mode",
       {[](ScenarioConfig& c, std::string_view v) {
          v = trim(v);
          if (v == "unbiased_cascade") {
            c.input_mode = Stage2InputMode::unbiased_cascade;
          } else if (v == "biased_passthrough") {
            c.input_mode = Stage2InputMode::biased_passthrough;
          } else {
            throw std::invalid_argument("expected unbiased_cascade or biased_passthrough, got '" + std::string(v) +
                                        "'");
          }
        },
        [](const ScenarioConfig& c) { return mode_name(c.input_mode); }}},
      {"init_att_error_deg", number_field(&ScenarioConfig::init_att_error_deg)},
      {"init_vec_error_dps", number_field(&ScenarioConfig::init_vec_error_dps)},
      {"u_sine_amplitude_dps", number_field(&ScenarioConfig::u_sine_amplitude_dps)},
      {"u_sine_freq_hz", number_field(&ScenarioConfig::u_sine_freq_hz)},
      {"feature_d1", vec_field(&ScenarioConfig::feature_d1)},
      {"feature_d2", vec_field(&ScenarioConfig::feature_d2)},
      {"window_start_s", number_field(&ScenarioConfig::window_start_s)},
      {"window_end_s", number_field(&ScenarioConfig::window_end_s)},
      {"threshold_deg", number_field(&ScenarioConfig::threshold_deg)},
  };
  return fields;
}

inline const ConfigField* find_field(std::string_view key) {
  for (const auto& [name, field] : config_fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

}  // namespace detail

/// Applies one `key = value` assignment. Throws ConfigError on an unknown
/// key or a bad value.
inline void set_config_value(ScenarioConfig& cfg, std::string_view key, std::string_view value) {
  const detail::ConfigField* f = detail::find_field(detail::trim(key));
  if (f == nullptr) throw ConfigError("unknown config key '" + std::string(detail::trim(key)) + "'");
  try {
    f->set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("field '" + std::string(detail::trim(key)) + "': " + e.what());
  }
}

/// Parses config text on top of `base`. Errors carry `source:line`.
[[nodiscard]] inline ScenarioConfig parse_config(std::istream& in, const std::string& source = "<config>",
                                                 ScenarioConfig base = {}) {
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view s(line);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set_config_value(base, s.substr(0, eq), s.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

[[nodiscard]] inline ScenarioConfig read_config(const std::string& path, ScenarioConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path, std::move(base));
}

inline void write_config(std::ostream& out, const ScenarioConfig& cfg) {
  for (const auto& [name, field] : detail::config_fields()) out << name << " = " << field.get(cfg) << '\n';
}

inline void write_config(const std::string& path, const ScenarioConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_config(out, cfg);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSeriesHeader =
    "t,err_att_chaser_deg,err_roll_c,err_pitch_c,err_yaw_c,err_bias_dps,err_att_rel_deg,err_roll,err_pitch,err_yaw,"
    "err_omega_dps,V1,V2,E_A_norm,E_a_norm,E_Q_norm,E_q_norm";

inline void write_series_csv(std::ostream& out, const std::vector<SeriesRow>& rows) {
  using detail::csv_number;
  out << kSeriesHeader << '\n';
  for (const SeriesRow& r : rows) {
    out << csv_number(r.t) << ',' << csv_number(r.err_att_chaser_deg);
    for (int i = 0; i < 3; ++i) out << ',' << csv_number(r.err_euler_chaser_deg(i));
    out << ',' << csv_number(r.err_bias_dps) << ',' << csv_number(r.err_att_rel_deg);
    for (int i = 0; i < 3; ++i) out << ',' << csv_number(r.err_euler_rel_deg(i));
    out << ',' << csv_number(r.err_omega_dps) << ',' << csv_number(r.V1) << ',' << csv_number(r.V2) << ','
        << csv_number(r.E_A_norm) << ',' << csv_number(r.E_a_norm) << ',' << csv_number(r.E_Q_norm) << ','
        << csv_number(r.E_q_norm) << '\n';
  }
}

inline constexpr std::string_view kSummaryHeader =
    "run,seed,failed,"
    "chaser_ttt_roll_s,chaser_ttt_pitch_s,chaser_ttt_yaw_s,"
    "chaser_mean_roll_deg,chaser_mean_pitch_deg,chaser_mean_yaw_deg,"
    "chaser_min_roll_deg,chaser_min_pitch_deg,chaser_min_yaw_deg,"
    "bias_mean_dps,bias_mean_pct,bias_min_dps,bias_min_pct,"
    "rel_ttt_roll_s,rel_ttt_pitch_s,rel_ttt_yaw_s,"
    "rel_mean_roll_deg,rel_mean_pitch_deg,rel_mean_yaw_deg,"
    "rel_min_roll_deg,rel_min_pitch_deg,rel_min_yaw_deg,"
    "omega_mean_dps,omega_mean_pct,omega_min_dps,omega_min_pct,"
    "true_bias_dps,true_omega_dps,max_q_hat_norm,gimbal_flag";

namespace detail {

inline void summary_cells(std::ostream& out, const RunMetrics& m) {
  const auto vec = [&](const Vec3& v) {
    for (int i = 0; i < 3; ++i) out << ',' << csv_number(v(i));
  };
  vec(m.chaser.time_to_threshold_s);
  vec(m.chaser.mean_deg);
  vec(m.chaser.min_deg);
  out << ',' << csv_number(m.bias.mean_dps) << ',' << csv_number(m.bias.mean_pct) << ','
      << csv_number(m.bias.min_dps) << ',' << csv_number(m.bias.min_pct);
  vec(m.relative.time_to_threshold_s);
  vec(m.relative.mean_deg);
  vec(m.relative.min_deg);
  out << ',' << csv_number(m.omega.mean_dps) << ',' << csv_number(m.omega.mean_pct) << ','
      << csv_number(m.omega.min_dps) << ',' << csv_number(m.omega.min_pct) << ',' << csv_number(m.true_bias_dps)
      << ',' << csv_number(m.true_omega_dps) << ',' << csv_number(m.max_q_hat_norm) << ','
      << (m.gimbal_flag ? 1 : 0);
}

}  // namespace detail

/// One row per run in index order, then a `mean` row over non-failed runs
/// whose `failed` cell holds the failure count.
inline void write_summary_csv(std::ostream& out, const BatchSummary& s) {
  out << kSummaryHeader << '\n';
  for (std::size_t i = 0; i < s.per_run.size(); ++i) {
    const RunMetrics& r = s.per_run[i];
    out << i << ',' << r.seed << ',' << (r.failed ? 1 : 0);
    detail::summary_cells(out, r);
    out << '\n';
  }
  out << "mean,," << s.failures;
  detail::summary_cells(out, s.mean);
  out << '\n';
}

inline void write_series_csv(const std::string& path, const std::vector<SeriesRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_series_csv(out, rows);
}

inline void write_summary_csv(const std::string& path, const BatchSummary& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_summary_csv(out, s);
}

}  // namespace eqf
