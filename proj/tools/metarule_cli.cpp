// Command-line front end: train, test, baseline, interpret, suite gen.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metarule/metarule.hpp"

namespace fs = std::filesystem;
using namespace metarule;

namespace {

int exit_code(const Error& e) {
  const std::string k = e.kind();
  if (k == "ConfigError") return 2;
  if (k == "ParseError") return 3;
  if (k == "IoError") return 4;
  if (k == "DimensionError") return 5;
  if (k == "GrammarError") return 6;
  if (k == "ContractError") return 7;
  if (k == "NumericError") return 8;
  return 9;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  return os;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

Config read_config(const std::string& path, std::optional<std::uint64_t> seed) {
  Config c = path.empty() ? Config{} : load_config(path);
  if (seed) c.seed = *seed;
  validate(c);
  return c;
}

std::vector<ProblemInstance> load_suite(const std::string& manifest, const Config& c) {
  auto entries = read_manifest_file(manifest);
  if (entries.empty()) throw ParseError("manifest '" + manifest + "' lists no instances");
  return instantiate(entries, c.suite.bounds);
}

void check_dim(const Checkpoint& ck, std::span<const ProblemInstance> problems) {
  auto it = ck.meta.find("dim");
  if (it == ck.meta.end()) return;
  const int dim = std::stoi(it->second);
  for (const auto& p : problems) {
    if (p.dim != dim) {
      throw DimensionError("checkpoint dim " + it->second + " but manifest instance has dim " + std::to_string(p.dim));
    }
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Config file (key = value)");
  cmd->add_option("-s,--seed", c.seed, "Override the config seed");
  cmd->add_option("-o,--out", c.out, "Output directory");
}

int run_train(const Common& common, const std::string& resume, std::optional<long> max_steps) {
  Config cfg = read_config(common.config, common.seed);
  if (max_steps) cfg.train.max_steps = *max_steps;
  validate(cfg);
  const fs::path out(common.out);
  ensure_dir(out);
  {
    auto os = open_out(out / "config.txt");
    os << format_config(cfg);
  }
  TrainerState state = resume.empty() ? initial_state(cfg) : from_checkpoint(load_checkpoint(resume), cfg);
  const bool append = !resume.empty();
  std::ofstream log(out / "train_log.csv", std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  std::ofstream timing(out / "timing.csv", std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!log || !timing) throw IoError("cannot open log files in '" + out.string() + "'");
  if (!append) {
    write_log_header(log);
    timing << "step,seconds\n";
  }
  const fs::path ckpt = out / "checkpoint.bin";
  auto last = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_step = [&](const TrainLogRow& row) {
    write_log_row(log, row);
    log.flush();
    const auto now = std::chrono::steady_clock::now();
    timing << row.step << ',' << std::chrono::duration<double>(now - last).count() << '\n';
    last = now;
  };
  hooks.on_checkpoint = [&](const TrainerState& s) { save_checkpoint(to_checkpoint(s, cfg), ckpt.string()); };
  if (cfg.train.max_steps == 0 || state.step >= static_cast<std::uint64_t>(cfg.train.max_steps)) {
    save_checkpoint(to_checkpoint(state, cfg), ckpt.string());
  }
  try {
    train(cfg, std::move(state), hooks);
  } catch (const NumericError&) {
    std::cerr << "training aborted; last checkpoint kept at " << ckpt << "\n";
    throw;
  }
  std::cout << "trained to step " << cfg.train.max_steps << "; checkpoint " << ckpt.string() << "\n";
  return 0;
}

void write_session(const fs::path& out, std::span<const ProblemInstance> problems, std::span<const RunRecord> records,
                   const std::vector<std::string>& methods) {
  std::vector<double> y_opt;
  for (const auto& p : problems) y_opt.push_back(p.y_opt);
  const auto scales = session_scales(records, y_opt);
  std::vector<EvalReport> reports;
  for (const auto& m : methods) reports.push_back(make_report(m, records, scales));
  {
    auto os = open_out(out / "runs.csv");
    write_runs_csv(os, records);
  }
  auto os = open_out(out / "report.csv");
  write_report_csv(os, reports);
  for (const auto& r : reports) {
    std::cout << r.method << ": performance " << format_double(r.performance) << " over " << r.instances
              << " instances x " << r.runs << " runs\n";
  }
}

int run_test(const Common& common, const std::string& checkpoint, const std::string& manifest,
             std::optional<int> runs, std::optional<long> budget, const std::vector<std::string>& baselines) {
  const Config cfg = read_config(common.config, common.seed);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto problems = load_suite(manifest, cfg);
  check_dim(ck, problems);
  const int m = runs.value_or(cfg.eval.runs);
  EpisodeConfig ep = cfg.episode;
  const long fe = budget.value_or(static_cast<long>(ep.population) * (ep.horizon + 1));
  ep.horizon = horizon_for_budget(fe, ep.population);
  const fs::path out(common.out);
  ensure_dir(out);

  MetaTestResult res = meta_test(ck.model, problems, m, ep, cfg.seed);
  std::vector<RunRecord> records = res.records;
  std::vector<std::string> methods{"policy"};
  for (const auto& b : baselines) {
    const BaselineKind kind = baseline_from_name(b);
    const auto more = run_baseline(kind, problems, m, fe, ep.population, cfg.seed, ep.de, ep.pso);
    records.insert(records.end(), more.begin(), more.end());
    methods.emplace_back(name_of(kind));
  }
  write_session(out, problems, records, methods);
  const RuleFrequencyReport freq = rule_frequencies(res.rule_counts);
  auto os = open_out(out / "rules.txt");
  write_frequency_table(os, freq, cfg.eval.top_k);
  return 0;
}

int run_baseline_cmd(const Common& common, const std::vector<std::string>& kinds, const std::string& manifest,
                     std::optional<int> runs, std::optional<long> budget) {
  const Config cfg = read_config(common.config, common.seed);
  const auto problems = load_suite(manifest, cfg);
  const int m = runs.value_or(cfg.eval.runs);
  const long fe = budget.value_or(static_cast<long>(cfg.episode.population) * (cfg.episode.horizon + 1));
  const fs::path out(common.out);
  ensure_dir(out);
  std::vector<RunRecord> records;
  std::vector<std::string> methods;
  for (const auto& k : kinds) {
    const BaselineKind kind = baseline_from_name(k);
    const auto more = run_baseline(kind, problems, m, fe, cfg.episode.population, cfg.seed, cfg.episode.de, cfg.episode.pso);
    records.insert(records.end(), more.begin(), more.end());
    methods.emplace_back(name_of(kind));
  }
  write_session(out, problems, records, methods);
  return 0;
}

int run_interpret(const Common& common, const std::string& checkpoint, const std::string& base, int dim,
                  std::optional<std::uint64_t> instance_seed, std::optional<int> runs) {
  const Config cfg = read_config(common.config, common.seed);
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto id = base_from_name(base);
  if (!id) throw ConfigError("unknown base function '" + base + "'");
  const ProblemInstance problem = instance_seed ? make_instance(*id, dim, *instance_seed, cfg.suite.bounds)
                                                : make_instance(*id, dim, 0, cfg.suite.bounds, 0.0, false);
  const std::vector<ProblemInstance> one{problem};
  check_dim(ck, one);
  const InterpretResult res = interpret(ck.model, problem, runs.value_or(50), cfg.episode, cfg.seed);
  const fs::path out(common.out);
  ensure_dir(out);
  {
    auto os = open_out(out / "rules.txt");
    write_frequency_table(os, res.frequencies, cfg.eval.top_k);
  }
  {
    auto os = open_out(out / "rules.csv");
    write_frequency_csv(os, res.frequencies);
  }
  auto os = open_out(out / "timeline.csv");
  write_timeline_csv(os, res.timeline);
  write_frequency_table(std::cout, res.frequencies, cfg.eval.top_k);
  return 0;
}

int run_suite_gen(int count, int dim, std::uint64_t seed, const std::string& bases, const std::string& out) {
  std::vector<BaseFunction> list;
  if (bases.empty()) {
    list.assign(kAllBaseFunctions.begin(), kAllBaseFunctions.end());
  } else {
    std::stringstream ss(bases);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto b = base_from_name(item);
      if (!b) throw ConfigError("unknown base function '" + item + "'");
      list.push_back(*b);
    }
  }
  if (count < 1 || dim < 1) throw ConfigError("count and dim must be positive");
  const auto entries = generate_manifest(count, dim, seed, list);
  if (out.empty() || out == "-") {
    write_manifest(std::cout, entries);
  } else {
    auto os = open_out(out);
    write_manifest(os, entries);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned symbolic update rules for population-based black-box optimization"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, manifest, resume;
  std::optional<long> max_steps, budget;
  std::optional<int> runs;
  std::vector<std::string> baselines;

  auto* train_cmd = app.add_subcommand("train", "Meta-train the rule generator");
  add_common(train_cmd, common);
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint");
  train_cmd->add_option("--max-steps", max_steps, "Override max_steps");

  auto* test_cmd = app.add_subcommand("test", "Meta-test a checkpoint on a suite manifest");
  add_common(test_cmd, common);
  test_cmd->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
  test_cmd->add_option("-m,--manifest", manifest, "Suite manifest CSV")->required();
  test_cmd->add_option("-r,--runs", runs, "Runs per instance");
  test_cmd->add_option("-b,--budget", budget, "Function evaluations per run");
  test_cmd->add_option("--baseline", baselines, "Baselines in the same session (rs, de, pso)")->delimiter(',');

  std::vector<std::string> kinds;
  auto* base_cmd = app.add_subcommand("baseline", "Evaluate classical baselines on a suite manifest");
  add_common(base_cmd, common);
  base_cmd->add_option("--kind", kinds, "rs, de, pso")->delimiter(',')->required();
  base_cmd->add_option("-m,--manifest", manifest, "Suite manifest CSV")->required();
  base_cmd->add_option("-r,--runs", runs, "Runs per instance");
  base_cmd->add_option("-b,--budget", budget, "Function evaluations per run");

  std::string base = "rastrigin";
  int dim = 2;
  std::optional<std::uint64_t> instance_seed;
  auto* interp_cmd = app.add_subcommand("interpret", "Rule frequency table and per-generation rule log");
  add_common(interp_cmd, common);
  interp_cmd->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
  interp_cmd->add_option("--base", base, "Base function");
  interp_cmd->add_option("--dim", dim, "Dimension");
  interp_cmd->add_option("--instance-seed", instance_seed, "Shift and rotate the problem with this seed");
  interp_cmd->add_option("-r,--runs", runs, "Runs (default 50)");

  auto* suite_cmd = app.add_subcommand("suite", "Problem suite tools");
  suite_cmd->require_subcommand(1);
  int count = 32;
  int suite_dim = 10;
  std::uint64_t suite_seed = 0;
  std::string suite_bases, suite_out;
  auto* gen_cmd = suite_cmd->add_subcommand("gen", "Write a suite manifest");
  gen_cmd->add_option("-n,--count", count, "Instances");
  gen_cmd->add_option("--dim", suite_dim, "Dimension");
  gen_cmd->add_option("-s,--seed", suite_seed, "Seed");
  gen_cmd->add_option("--bases", suite_bases, "Comma separated base functions (default all)");
  gen_cmd->add_option("-o,--out", suite_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return run_train(common, resume, max_steps);
    if (*test_cmd) return run_test(common, checkpoint, manifest, runs, budget, baselines);
    if (*base_cmd) return run_baseline_cmd(common, kinds, manifest, runs, budget);
    if (*interp_cmd) return run_interpret(common, checkpoint, base, dim, instance_seed, runs);
    if (*gen_cmd) return run_suite_gen(count, suite_dim, suite_seed, suite_bases, suite_out);
  } catch (const Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error[Unexpected]: " << e.what() << "\n";
    return 10;
  }
  return 1;
}
