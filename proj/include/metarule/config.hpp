#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metarule/episode.hpp"
#include "metarule/errors.hpp"
#include "metarule/gradient.hpp"
#include "metarule/optimizer.hpp"
#include "metarule/problems.hpp"

namespace metarule {

// Training task distribution.
struct SuiteConfig {
  int dim = 10;
  std::vector<BaseFunction> bases{kAllBaseFunctions.begin(), kAllBaseFunctions.end()};
  Bounds bounds;
  double shift_range = 80.0;
};

struct TrainConfig {
  int batch_problems = 32;     // N
  int ppo_epochs = 3;          // k
  int rollout_interval = 10;   // n
  double gamma = 0.9;
  double learning_rate = 1e-3;
  long max_steps = 50000;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  bool normalize_advantages = true;
  double init_gain = 1.0;
  long checkpoint_every = 100;  // meta-steps; rounded up to an update boundary
  LossConfig loss;
};

struct EvalConfig {
  int runs = 5;    // M
  int top_k = 5;
};

struct Config {
  std::uint64_t seed = 0;
  EpisodeConfig episode;
  TrainConfig train;
  SuiteConfig suite;
  EvalConfig eval;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& v, int line, const std::string& key) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError("'" + key + "': bad number '" + v + "'", line);
  return out;
}

inline bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "': expected true or false", line);
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline Strategy strategy_from_name(const std::string& s, int line = 0) {
  if (s == "explore") return Strategy::Explore;
  if (s == "guided") return Strategy::Guided;
  if (s == "synergized") return Strategy::Synergized;
  throw ConfigError("unknown strategy '" + s + "'", line);
}

// Throws ConfigError naming the first out-of-range field.
inline void validate(const Config& c) {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  const auto& e = c.episode;
  const auto& t = c.train;
  req(e.horizon >= 1, "horizon must be at least 1");
  req(e.population >= 2, "population must be at least 2");
  req(e.lambda >= 0.0, "lambda must be non-negative");
  req(!needs_teacher(e.strategy) || e.teacher.has_value(), "strategy guided/synergized requires a teacher");
  req(!e.teacher || e.teacher != TeacherKind::DE || e.teacher_population >= 4,
      "teacher_population must be at least 4 for de");
  req(e.teacher_population >= 1, "teacher_population must be positive");
  req(e.max_height >= 2 && e.max_height <= kMaxHeight, "max_height must be in [2, 5]");
  req(t.batch_problems >= 1, "batch_problems must be at least 1");
  req(t.ppo_epochs >= 0, "ppo_epochs must be non-negative");
  req(t.rollout_interval >= 1, "rollout_interval must be at least 1");
  req(t.gamma > 0.0 && t.gamma <= 1.0, "gamma must be in (0, 1]");
  req(t.learning_rate > 0.0, "learning_rate must be positive");
  req(t.max_steps >= 0, "max_steps must be non-negative");
  req(t.init_gain > 0.0, "init_gain must be positive");
  req(t.checkpoint_every >= 1, "checkpoint_every must be at least 1");
  req(t.loss.clip > 0.0, "clip must be positive");
  req(t.loss.value_coef >= 0.0, "value_coef must be non-negative");
  req(t.loss.entropy_coef >= 0.0, "entropy_coef must be non-negative");
  req(c.suite.dim >= 1, "dim must be at least 1");
  req(!c.suite.bases.empty(), "bases must not be empty");
  req(c.suite.bounds.upper > c.suite.bounds.lower, "upper must exceed lower");
  req(c.suite.shift_range >= 0.0, "shift_range must be non-negative");
  req(c.eval.runs >= 1, "runs must be at least 1");
  req(c.eval.top_k >= 1, "top_k must be at least 1");
}

namespace detail {

using Setter = std::function<void(Config&, const std::string&, int)>;
using Getter = std::function<std::string(const Config&)>;

struct Field {
  Setter set;
  Getter get;
};

inline const std::vector<std::pair<std::string, Field>>& config_fields() {
  static const std::vector<std::pair<std::string, Field>> fields = [] {
    std::vector<std::pair<std::string, Field>> f;
    auto int_field = [&](const char* key, auto member) {
      f.push_back({key,
                   {[=](Config& c, const std::string& v, int line) { member(c) = parse_number<std::remove_reference_t<decltype(member(c))>>(v, line, key); },
                    [=](const Config& c) { return std::to_string(member(const_cast<Config&>(c))); }}});
    };
    auto dbl_field = [&](const char* key, auto member) {
      f.push_back({key,
                   {[=](Config& c, const std::string& v, int line) { member(c) = parse_number<double>(v, line, key); },
                    [=](const Config& c) { return fmt_double(member(const_cast<Config&>(c))); }}});
    };
    f.push_back({"seed",
                 {[](Config& c, const std::string& v, int line) { c.seed = parse_number<std::uint64_t>(v, line, "seed"); },
                  [](const Config& c) { return std::to_string(c.seed); }}});
    f.push_back({"strategy",
                 {[](Config& c, const std::string& v, int line) { c.episode.strategy = strategy_from_name(v, line); },
                  [](const Config& c) { return std::string(name_of(c.episode.strategy)); }}});
    f.push_back({"teacher",
                 {[](Config& c, const std::string& v, int line) {
                    if (v == "de") {
                      c.episode.teacher = TeacherKind::DE;
                    } else if (v == "pso") {
                      c.episode.teacher = TeacherKind::PSO;
                    } else if (v == "none") {
                      c.episode.teacher.reset();
                    } else {
                      throw ConfigError("unknown teacher '" + v + "'", line);
                    }
                  },
                  [](const Config& c) { return c.episode.teacher ? std::string(name_of(*c.episode.teacher)) : "none"; }}});
    dbl_field("lambda", [](Config& c) -> double& { return c.episode.lambda; });
    int_field("horizon", [](Config& c) -> int& { return c.episode.horizon; });
    int_field("population", [](Config& c) -> int& { return c.episode.population; });
    int_field("teacher_population", [](Config& c) -> int& { return c.episode.teacher_population; });
    int_field("max_height", [](Config& c) -> int& { return c.episode.max_height; });
    dbl_field("de_f", [](Config& c) -> double& { return c.episode.de.f; });
    dbl_field("de_cr", [](Config& c) -> double& { return c.episode.de.cr; });
    dbl_field("pso_w", [](Config& c) -> double& { return c.episode.pso.w; });
    dbl_field("pso_c1", [](Config& c) -> double& { return c.episode.pso.c1; });
    dbl_field("pso_c2", [](Config& c) -> double& { return c.episode.pso.c2; });
    int_field("batch_problems", [](Config& c) -> int& { return c.train.batch_problems; });
    int_field("ppo_epochs", [](Config& c) -> int& { return c.train.ppo_epochs; });
    int_field("rollout_interval", [](Config& c) -> int& { return c.train.rollout_interval; });
    dbl_field("gamma", [](Config& c) -> double& { return c.train.gamma; });
    dbl_field("learning_rate", [](Config& c) -> double& { return c.train.learning_rate; });
    int_field("max_steps", [](Config& c) -> long& { return c.train.max_steps; });
    f.push_back({"optimizer",
                 {[](Config& c, const std::string& v, int line) {
                    if (v == "sgd") {
                      c.train.optimizer = OptimizerKind::Sgd;
                    } else if (v == "adam") {
                      c.train.optimizer = OptimizerKind::Adam;
                    } else {
                      throw ConfigError("unknown optimizer '" + v + "'", line);
                    }
                  },
                  [](const Config& c) { return std::string(c.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd"); }}});
    f.push_back({"normalize_advantages",
                 {[](Config& c, const std::string& v, int line) {
                    c.train.normalize_advantages = parse_bool(v, line, "normalize_advantages");
                  },
                  [](const Config& c) { return std::string(c.train.normalize_advantages ? "true" : "false"); }}});
    dbl_field("init_gain", [](Config& c) -> double& { return c.train.init_gain; });
    int_field("checkpoint_every", [](Config& c) -> long& { return c.train.checkpoint_every; });
    dbl_field("clip", [](Config& c) -> double& { return c.train.loss.clip; });
    dbl_field("value_coef", [](Config& c) -> double& { return c.train.loss.value_coef; });
    dbl_field("entropy_coef", [](Config& c) -> double& { return c.train.loss.entropy_coef; });
    int_field("dim", [](Config& c) -> int& { return c.suite.dim; });
    f.push_back({"bases",
                 {[](Config& c, const std::string& v, int line) {
                    c.suite.bases.clear();
                    std::stringstream ss(v);
                    std::string item;
                    while (std::getline(ss, item, ',')) {
                      const std::string name = trim(item);
                      auto b = base_from_name(name);
                      if (!b) throw ConfigError("unknown base function '" + name + "'", line);
                      c.suite.bases.push_back(*b);
                    }
                  },
                  [](const Config& c) {
                    std::string out;
                    for (std::size_t i = 0; i < c.suite.bases.size(); ++i) {
                      if (i) out += ',';
                      out += name_of(c.suite.bases[i]);
                    }
                    return out;
                  }}});
    dbl_field("lower", [](Config& c) -> double& { return c.suite.bounds.lower; });
    dbl_field("upper", [](Config& c) -> double& { return c.suite.bounds.upper; });
    dbl_field("shift_range", [](Config& c) -> double& { return c.suite.shift_range; });
    int_field("runs", [](Config& c) -> int& { return c.eval.runs; });
    int_field("top_k", [](Config& c) -> int& { return c.eval.top_k; });
    return f;
  }();
  return fields;
}

}  // namespace detail

// `key = value` lines; `#` starts a comment. Missing keys keep defaults.
inline Config parse_config(std::istream& in) {
  Config c;
  const auto& fields = detail::config_fields();
  std::map<std::string, int> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
    if (it == fields.end()) throw ConfigError("unknown key '" + key + "'", line);
    if (seen.count(key)) throw ConfigError("duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")", line);
    seen[key] = line;
    if (value.empty()) throw ConfigError("missing value for '" + key + "'", line);
    it->second.set(c, value, line);
  }
  validate(c);
  return c;
}

inline Config parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in);
}

// Every key with its effective value; parse_config reads it back unchanged.
inline std::string format_config(const Config& c) {
  std::string out;
  for (const auto& [key, field] : detail::config_fields()) out += key + " = " + field.get(c) + "\n";
  return out;
}

}  // namespace metarule
