#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "metarule/config.hpp"
#include "metarule/episode.hpp"
#include "metarule/errors.hpp"
#include "metarule/expression.hpp"
#include "metarule/problems.hpp"
#include "metarule/teachers.hpp"

namespace metarule {

// One run of one method on one instance.
struct RunRecord {
  std::string method;
  std::size_t instance = 0;
  int run = 0;
  double best = 0.0;   // f_min^{m,k}
  double worst = 0.0;  // largest value evaluated during the run
  long evaluations = 0;

  bool operator==(const RunRecord&) const = default;
};

struct InstanceScale {
  double f_min = 0.0;
  double f_max = 0.0;
};

// Normalization scope for one comparison session: f_min^k is the known
// optimum, f_max^k the worst value any run of any method evaluated.
inline std::vector<InstanceScale> session_scales(std::span<const RunRecord> records, std::span<const double> y_opt) {
  std::vector<InstanceScale> out(y_opt.size());
  for (std::size_t k = 0; k < y_opt.size(); ++k) out[k] = {y_opt[k], y_opt[k]};
  for (const auto& r : records) {
    if (r.instance >= out.size()) throw ContractError("run record refers to an unknown instance");
    out[r.instance].f_max = std::max(out[r.instance].f_max, r.worst);
  }
  return out;
}

struct EvalReport {
  std::string method;
  std::vector<double> instance_obj;  // mean over runs, per instance
  double obj = 0.0;
  double performance = 0.0;  // 1 - obj
  double log_obj = 0.0;      // log10(obj)
  int instances = 0;
  int runs = 0;
};

inline double normalized_objective(double best, const InstanceScale& s) {
  const double span = s.f_max - s.f_min;
  if (!(span > 0.0)) return 0.0;
  return std::clamp((best - s.f_min) / span, 0.0, 1.0);
}

inline EvalReport make_report(const std::string& method, std::span<const RunRecord> records,
                              std::span<const InstanceScale> scales) {
  EvalReport rep;
  rep.method = method;
  std::vector<double> sum(scales.size(), 0.0);
  std::vector<int> count(scales.size(), 0);
  for (const auto& r : records) {
    if (r.method != method) continue;
    if (r.instance >= scales.size()) throw ContractError("run record refers to an unknown instance");
    sum[r.instance] += normalized_objective(r.best, scales[r.instance]);
    ++count[r.instance];
    rep.runs = std::max(rep.runs, r.run + 1);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    if (count[k] == 0) continue;
    rep.instance_obj.push_back(sum[k] / count[k]);
    total += rep.instance_obj.back();
  }
  rep.instances = static_cast<int>(rep.instance_obj.size());
  if (rep.instances == 0) throw ContractError("no runs recorded for method '" + method + "'");
  rep.obj = total / rep.instances;
  rep.performance = 1.0 - rep.obj;
  rep.log_obj = std::log10(rep.obj);
  return rep;
}

// Horizon whose full episode uses at most `budget` evaluations.
inline int horizon_for_budget(long budget, int population) {
  const long t = budget / population - 1;
  if (t < 1) throw ConfigError("evaluation budget below two generations");
  return static_cast<int>(t);
}

struct MetaTestResult {
  std::vector<RunRecord> records;
  std::map<std::string, long> rule_counts;  // canonical infix -> count
};

// K x M episodes with sampled rules and no teacher. Run (k, m) draws from
// split_rng({seed, k, m}).
inline MetaTestResult meta_test(const ModelParams& model, std::span<const ProblemInstance> problems, int runs,
                                EpisodeConfig episode, std::uint64_t seed, const std::string& method = "policy") {
  episode.strategy = Strategy::Explore;
  MetaTestResult out;
  for (std::size_t k = 0; k < problems.size(); ++k) {
    for (int m = 0; m < runs; ++m) {
      Rng rng = split_rng({seed, k, static_cast<std::uint64_t>(m), 0x7e57ull});
      const Trajectory t = run_episode(model.policy, model.critic, problems[k], episode, rng);
      out.records.push_back({method, k, m, t.final_best, t.worst_value, t.evaluations});
      for (const auto& s : t.steps) ++out.rule_counts[to_infix(s.rule)];
    }
  }
  return out;
}

enum class BaselineKind { RS, DE, PSO };

inline std::string_view name_of(BaselineKind k) {
  switch (k) {
    case BaselineKind::RS:
      return "rs";
    case BaselineKind::DE:
      return "de";
    case BaselineKind::PSO:
      return "pso";
  }
  return "?";
}

inline BaselineKind baseline_from_name(const std::string& s) {
  if (s == "rs") return BaselineKind::RS;
  if (s == "de") return BaselineKind::DE;
  if (s == "pso") return BaselineKind::PSO;
  throw ConfigError("unknown baseline '" + s + "'");
}

// Same protocol as meta_test: `budget` evaluations per run. RS samples the
// box uniformly; DE and PSO run whole generations while the budget allows.
inline std::vector<RunRecord> run_baseline(BaselineKind kind, std::span<const ProblemInstance> problems, int runs,
                                           long budget, int population, std::uint64_t seed, DeSettings de = {},
                                           PsoSettings pso = {}) {
  if (budget < 1) throw ConfigError("budget must be positive");
  std::vector<RunRecord> out;
  const std::string method(name_of(kind));
  for (std::size_t k = 0; k < problems.size(); ++k) {
    const ProblemInstance& p = problems[k];
    for (int m = 0; m < runs; ++m) {
      Rng rng = split_rng({seed, k, static_cast<std::uint64_t>(m), 0xba5eull});
      RunRecord rec{method, k, m, 0.0, 0.0, 0};
      if (kind == BaselineKind::RS) {
        const Vector v = p.evaluate(uniform_positions(budget, p.dim, p.bounds, rng));
        rec.best = v.minCoeff();
        rec.worst = v.maxCoeff();
        rec.evaluations = budget;
      } else {
        if (budget < population) throw ConfigError("budget smaller than one population");
        TeacherState s = make_teacher(kind == BaselineKind::DE ? TeacherKind::DE : TeacherKind::PSO, p,
                                      uniform_positions(population, p.dim, p.bounds, rng), de, pso);
        while (s.evaluations + population <= budget) s = teacher_step(std::move(s), p, rng);
        rec.best = s.best_val;
        rec.worst = s.worst_val;
        rec.evaluations = s.evaluations;
      }
      out.push_back(rec);
    }
  }
  return out;
}

struct RuleFrequency {
  std::string rule;
  long count = 0;
  double share = 0.0;
};

struct RuleFrequencyReport {
  std::vector<RuleFrequency> entries;  // most frequent first, ties by rule text
  long total = 0;
};

inline RuleFrequencyReport rule_frequencies(const std::map<std::string, long>& counts) {
  RuleFrequencyReport rep;
  for (const auto& [rule, c] : counts) rep.total += c;
  for (const auto& [rule, c] : counts) {
    rep.entries.push_back({rule, c, rep.total ? static_cast<double>(c) / static_cast<double>(rep.total) : 0.0});
  }
  std::stable_sort(rep.entries.begin(), rep.entries.end(),
                   [](const RuleFrequency& a, const RuleFrequency& b) { return a.count > b.count; });
  return rep;
}

struct TimelineRow {
  int run = 0;
  int generation = 0;
  double best_so_far = 0.0;
  std::string rule;
};

struct InterpretResult {
  RuleFrequencyReport frequencies;
  std::vector<TimelineRow> timeline;
};

inline InterpretResult interpret(const ModelParams& model, const ProblemInstance& problem, int runs,
                                 EpisodeConfig episode, std::uint64_t seed) {
  episode.strategy = Strategy::Explore;
  std::map<std::string, long> counts;
  InterpretResult out;
  for (int m = 0; m < runs; ++m) {
    Rng rng = split_rng({seed, static_cast<std::uint64_t>(m), 0x1e7ull});
    const Trajectory t = run_episode(model.policy, model.critic, problem, episode, rng);
    for (std::size_t g = 0; g < t.steps.size(); ++g) {
      std::string infix = to_infix(t.steps[g].rule);
      ++counts[infix];
      out.timeline.push_back({m, static_cast<int>(g) + 1, t.steps[g].best_so_far, std::move(infix)});
    }
  }
  out.frequencies = rule_frequencies(counts);
  return out;
}

// ---- CSV and text output ----

inline std::string format_double(double v) { return detail::fmt_double(v); }

inline void write_runs_csv(std::ostream& os, std::span<const RunRecord> records) {
  os << "method,instance,run,best,worst,evaluations\n";
  for (const auto& r : records) {
    os << r.method << ',' << r.instance << ',' << r.run << ',' << format_double(r.best) << ','
       << format_double(r.worst) << ',' << r.evaluations << '\n';
  }
}

inline std::vector<RunRecord> read_runs_csv(std::istream& is) {
  std::vector<RunRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("method,", 0) == 0)) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (int i = 0; i < 6; ++i) {
      if (!std::getline(ss, f[i], i < 5 ? ',' : '\n')) {
        throw ParseError("runs line " + std::to_string(lineno) + ": expected 6 fields");
      }
    }
    try {
      out.push_back({f[0], std::stoull(f[1]), std::stoi(f[2]), std::stod(f[3]), std::stod(f[4]), std::stol(f[5])});
    } catch (const std::exception&) {
      throw ParseError("runs line " + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

inline void write_report_csv(std::ostream& os, std::span<const EvalReport> reports) {
  os << "method,instances,runs,obj,performance,log10_obj\n";
  for (const auto& r : reports) {
    os << r.method << ',' << r.instances << ',' << r.runs << ',' << format_double(r.obj) << ','
       << format_double(r.performance) << ',' << format_double(r.log_obj) << '\n';
  }
}

inline void write_frequency_table(std::ostream& os, const RuleFrequencyReport& rep, int top_k) {
  os << "rank  share   count  rule\n";
  const int n = std::min<int>(top_k, static_cast<int>(rep.entries.size()));
  for (int i = 0; i < n; ++i) {
    const auto& e = rep.entries[static_cast<std::size_t>(i)];
    std::ostringstream share;
    share << std::fixed << std::setprecision(2) << 100.0 * e.share << '%';
    os << std::left << std::setw(6) << (i + 1) << std::setw(8) << share.str() << std::setw(7) << e.count << e.rule
       << '\n';
  }
  os << "total " << rep.total << " rules, " << rep.entries.size() << " distinct\n";
}

inline void write_frequency_csv(std::ostream& os, const RuleFrequencyReport& rep) {
  os << "rule,count,share\n";
  for (const auto& e : rep.entries) os << '"' << e.rule << "\"," << e.count << ',' << format_double(e.share) << '\n';
}

inline void write_timeline_csv(std::ostream& os, std::span<const TimelineRow> rows) {
  os << "run,generation,best_so_far,rule\n";
  for (const auto& r : rows) {
    os << r.run << ',' << r.generation << ',' << format_double(r.best_so_far) << ",\"" << r.rule << "\"\n";
  }
}

}  // namespace metarule
