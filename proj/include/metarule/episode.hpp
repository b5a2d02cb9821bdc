#pragma once

#include <optional>
#include <vector>

#include "metarule/errors.hpp"
#include "metarule/policy.hpp"
#include "metarule/population.hpp"
#include "metarule/problems.hpp"
#include "metarule/rewards.hpp"
#include "metarule/teachers.hpp"

namespace metarule {

struct EpisodeConfig {
  int horizon = 500;
  int population = 100;
  Strategy strategy = Strategy::Synergized;
  double lambda = 1.0;
  std::optional<TeacherKind> teacher = TeacherKind::DE;
  int teacher_population = 100;
  DeSettings de;
  PsoSettings pso;
  int max_height = kMaxHeight;
};

struct Transition {
  FlaState fla;
  UpdateRule rule;
  double logprob = 0.0;
  double entropy = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double best_so_far = 0.0;  // after the step
};

struct Trajectory {
  std::vector<Transition> steps;
  double initial_best = 0.0;
  double final_best = 0.0;
  double worst_value = 0.0;      // largest value the student evaluated
  long evaluations = 0;          // student only
  long teacher_evaluations = 0;
};

inline bool needs_teacher(Strategy s) { return s != Strategy::Explore; }

// Runs the teacher alone for the whole horizon; rewards read its
// populations generation by generation.
struct TeacherRecord {
  std::vector<Matrix> positions;  // generations 0..T
  std::vector<double> best;       // best so far, generations 0..T
  long evaluations = 0;
};

inline TeacherRecord run_teacher(TeacherState t, const ProblemInstance& problem, int horizon, Rng& rng) {
  TeacherRecord rec;
  rec.positions.reserve(static_cast<std::size_t>(horizon) + 1);
  rec.positions.push_back(t.positions);
  rec.best.push_back(t.best_val);
  for (int g = 0; g < horizon; ++g) {
    t = teacher_step(std::move(t), problem, rng);
    rec.positions.push_back(t.positions);
    rec.best.push_back(t.best_val);
  }
  rec.evaluations = t.evaluations;
  return rec;
}

// One lower-level optimization run driven by the policy. Random streams:
// the teacher draws from a stream seeded off `rng`; initialization, rule
// sampling and peer choices then share `rng` in generation order.
inline Trajectory run_episode(const PolicyParams& policy, const CriticParams& critic, const ProblemInstance& problem,
                              const EpisodeConfig& cfg, Rng& rng) {
  if (cfg.horizon < 1) throw ContractError("horizon must be positive");
  const bool teacher = needs_teacher(cfg.strategy);
  if (teacher && !cfg.teacher) throw ConfigError("strategy " + std::string(name_of(cfg.strategy)) + " needs a teacher");
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be non-negative");

  Rng teacher_rng(rng());
  TeacherRecord rec;
  PopulationState pop;
  if (teacher) {
    Matrix tpos = uniform_positions(cfg.teacher_population, problem.dim, problem.bounds, teacher_rng);
    TeacherState ts = make_teacher(*cfg.teacher, problem, std::move(tpos), cfg.de, cfg.pso);
    pop = make_population(problem,
                          align_student_population(ts.positions, ts.values, cfg.population, problem.bounds, rng),
                          cfg.horizon);
    rec = run_teacher(std::move(ts), problem, cfg.horizon, teacher_rng);
  } else {
    pop = init_population(problem, cfg.population, cfg.horizon, rng);
  }

  double surrogate = rec.best.empty() ? 0.0 : *std::min_element(rec.best.begin(), rec.best.end());
  const double f_scale = objective_scale(pop);
  Trajectory out;
  out.initial_best = pop.initial_best_val;
  out.steps.reserve(static_cast<std::size_t>(cfg.horizon));
  for (int t = 0; t < cfg.horizon; ++t) {
    const FlaState fla = compute_fla(pop, f_scale);
    Generated g = unroll(policy, fla, SampleChooser{rng}, nullptr, cfg.max_height);
    const double value = critic_value(critic, fla);
    pop = step(std::move(pop), g.rule, problem, rng);

    double reward = 0.0;
    const auto next = static_cast<std::size_t>(t + 1);
    switch (cfg.strategy) {
      case Strategy::Explore:
        reward = r_explore(pop.best_so_far_val, pop.initial_best_val, problem.y_opt);
        break;
      case Strategy::Guided:
        reward = r_guided(pop.positions, rec.positions[next], problem.bounds.lower, problem.bounds.upper);
        break;
      case Strategy::Synergized: {
        surrogate = update_surrogate(surrogate, pop.best_so_far_val, rec.best[next]);
        const double explore = r_explore(pop.best_so_far_val, pop.initial_best_val, surrogate);
        const double guided = r_guided(pop.positions, rec.positions[next], problem.bounds.lower, problem.bounds.upper);
        reward = r_synergized(explore, guided, cfg.lambda);
        break;
      }
    }
    if (!std::isfinite(reward)) throw NumericError("non-finite reward at generation " + std::to_string(t));
    out.steps.push_back({fla, std::move(g.rule), g.logprob, g.entropy, reward, value, pop.best_so_far_val});
  }
  out.final_best = pop.best_so_far_val;
  out.worst_value = pop.worst_so_far_val;
  out.evaluations = pop.evaluations;
  out.teacher_evaluations = rec.evaluations;
  return out;
}

// G_t = R_t + gamma G_{t+1}, terminal G = R.
inline std::vector<double> discounted_returns(const std::vector<Transition>& steps, double gamma) {
  std::vector<double> g(steps.size());
  double acc = 0.0;
  for (std::size_t i = steps.size(); i-- > 0;) {
    acc = steps[i].reward + gamma * acc;
    g[i] = acc;
  }
  return g;
}

}  // namespace metarule
