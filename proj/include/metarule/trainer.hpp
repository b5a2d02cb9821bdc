#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "metarule/checkpoint.hpp"
#include "metarule/config.hpp"
#include "metarule/episode.hpp"
#include "metarule/gradient.hpp"
#include "metarule/optimizer.hpp"
#include "metarule/problems.hpp"

namespace metarule {

// N instances, bases drawn uniformly with repetition, fresh shift and
// rotation for each.
inline std::vector<ProblemInstance> sample_problem_batch(const SuiteConfig& suite, int n, Rng& rng) {
  if (suite.bases.empty()) throw ContractError("empty base function list");
  std::vector<ProblemInstance> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const BaseFunction b = suite.bases[uniform_index(rng, suite.bases.size())];
    out.push_back(make_instance(b, suite.dim, rng(), suite.bounds, suite.shift_range));
  }
  return out;
}

struct RolloutStats {
  double mean_reward = 0.0;  // per generation
  double mean_return = 0.0;  // G at t = 0, per episode
  double mean_final_best = 0.0;
  long evaluations = 0;
};

struct Rollouts {
  std::vector<PpoSample> samples;
  RolloutStats stats;
};

// One meta-step: a full episode on every problem. Problem p draws from
// split_rng({seed, step, p}).
inline Rollouts collect_rollouts(const ModelParams& model, std::span<const ProblemInstance> problems,
                                 const EpisodeConfig& episode, double gamma, std::uint64_t seed, std::uint64_t step) {
  Rollouts out;
  out.samples.reserve(problems.size() * static_cast<std::size_t>(episode.horizon));
  double reward_sum = 0.0;
  std::size_t reward_count = 0;
  for (std::size_t p = 0; p < problems.size(); ++p) {
    Rng rng = split_rng({seed, step, p});
    Trajectory traj = run_episode(model.policy, model.critic, problems[p], episode, rng);
    const std::vector<double> g = discounted_returns(traj.steps, gamma);
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      Transition& s = traj.steps[t];
      reward_sum += s.reward;
      ++reward_count;
      out.samples.push_back({s.fla, std::move(s.rule), s.logprob, g[t], g[t] - s.value});
    }
    out.stats.mean_return += g.empty() ? 0.0 : g.front();
    out.stats.mean_final_best += traj.final_best;
    out.stats.evaluations += traj.evaluations;
  }
  const double np = static_cast<double>(std::max<std::size_t>(problems.size(), 1));
  out.stats.mean_return /= np;
  out.stats.mean_final_best /= np;
  out.stats.mean_reward = reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0;
  return out;
}

inline void normalize_advantages(std::vector<PpoSample>& batch) {
  if (batch.size() < 2) return;
  double mean = 0.0;
  for (const auto& b : batch) mean += b.advantage;
  mean /= static_cast<double>(batch.size());
  double var = 0.0;
  for (const auto& b : batch) var += (b.advantage - mean) * (b.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(batch.size()));
  for (auto& b : batch) b.advantage = (b.advantage - mean) / (sd + 1e-8);
}

struct UpdateStats {
  bool applied = false;  // false when a non-finite loss rolled the update back
  int passes = 0;
  double first_mean_ratio = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double policy_loss = 0.0;
};

// k full-batch gradient passes. A non-finite loss or gradient restores the
// parameters and optimizer state held before the call.
inline UpdateStats ppo_update(ModelParams& model, Optimizer& opt, std::vector<PpoSample> batch, const TrainConfig& cfg) {
  if (batch.empty()) throw ContractError("empty rollout buffer");
  if (cfg.normalize_advantages) normalize_advantages(batch);
  UpdateStats st;
  const ModelParams saved_model = model;
  const Optimizer saved_opt = opt;
  try {
    for (int k = 0; k < cfg.ppo_epochs; ++k) {
      const Gradients g = policy_gradient(model.policy, model.critic, batch, cfg.loss);
      if (!all_finite(g.policy) || !all_finite(g.critic)) throw NumericError("non-finite gradient");
      if (k == 0) {
        st.first_mean_ratio = g.loss.mean_ratio;
        st.value_loss = g.loss.value;
        st.entropy = g.loss.entropy;
        st.policy_loss = g.loss.policy;
      }
      opt.apply(model, g);
      if (!all_finite(model.policy) || !all_finite(model.critic)) throw NumericError("non-finite parameters");
      ++st.passes;
    }
    st.applied = true;
  } catch (const NumericError&) {
    model = saved_model;
    opt = saved_opt;
    st.applied = false;
  }
  return st;
}

struct TrainLogRow {
  std::uint64_t step = 0;  // meta-steps completed
  RolloutStats rollout;
  bool updated = false;
  UpdateStats update;
};

inline void write_log_header(std::ostream& os) {
  os << "step,mean_reward,mean_return,mean_final_best,updated,mean_ratio,value_loss,entropy\n";
}

inline void write_log_row(std::ostream& os, const TrainLogRow& r) {
  auto num = [](double v) { return detail::fmt_double(v); };
  os << r.step << ',' << num(r.rollout.mean_reward) << ',' << num(r.rollout.mean_return) << ','
     << num(r.rollout.mean_final_best) << ',' << (r.updated ? (r.update.applied ? 1 : 2) : 0) << ','
     << num(r.updated ? r.update.first_mean_ratio : 0.0) << ',' << num(r.updated ? r.update.value_loss : 0.0) << ','
     << num(r.updated ? r.update.entropy : 0.0) << '\n';
}

struct TrainerState {
  ModelParams model{PolicyParams::zeros(), CriticParams::zeros()};
  Optimizer optimizer;
  std::uint64_t step = 0;
};

inline TrainerState initial_state(const Config& cfg) {
  TrainerState s;
  s.model = init_params(cfg.seed, cfg.train.init_gain);
  s.optimizer.kind = cfg.train.optimizer;
  s.optimizer.learning_rate = cfg.train.learning_rate;
  return s;
}

inline Checkpoint to_checkpoint(const TrainerState& s, const Config& cfg) {
  Checkpoint ck;
  ck.seed = cfg.seed;
  ck.step = s.step;
  ck.model = s.model;
  if (s.optimizer.kind == OptimizerKind::Adam) ck.adam = s.optimizer.adam;
  ck.meta["dim"] = std::to_string(cfg.suite.dim);
  ck.meta["max_height"] = std::to_string(cfg.episode.max_height);
  return ck;
}

inline TrainerState from_checkpoint(const Checkpoint& ck, const Config& cfg) {
  if (ck.seed != cfg.seed) throw ConfigError("checkpoint seed does not match the config seed");
  auto it = ck.meta.find("dim");
  if (it != ck.meta.end() && std::stoi(it->second) != cfg.suite.dim) {
    throw DimensionError("checkpoint was trained for dim " + it->second);
  }
  TrainerState s;
  s.model = ck.model;
  s.step = ck.step;
  s.optimizer.kind = cfg.train.optimizer;
  s.optimizer.learning_rate = cfg.train.learning_rate;
  if (ck.adam) s.optimizer.adam = *ck.adam;
  return s;
}

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_step;
  std::function<void(const TrainerState&)> on_checkpoint;
};

// Alternates rollouts and PPO updates until max_steps meta-steps. The
// buffer holds n meta-steps; the last partial buffer is also used.
// Checkpoints happen only at update boundaries, where the buffer is empty,
// so a resumed run reproduces an uninterrupted one.
inline TrainerState train(const Config& cfg, TrainerState state, const TrainHooks& hooks = {}) {
  validate(cfg);
  const auto max_steps = static_cast<std::uint64_t>(cfg.train.max_steps);
  const auto n = static_cast<std::uint64_t>(cfg.train.rollout_interval);
  const auto every = static_cast<std::uint64_t>(cfg.train.checkpoint_every);
  std::vector<PpoSample> buffer;
  std::uint64_t since_checkpoint = 0;
  while (state.step < max_steps) {
    Rng batch_rng = split_rng({cfg.seed, state.step, 0xba7c4ull});
    const auto problems = sample_problem_batch(cfg.suite, cfg.train.batch_problems, batch_rng);
    Rollouts r = collect_rollouts(state.model, problems, cfg.episode, cfg.train.gamma, cfg.seed, state.step);
    buffer.insert(buffer.end(), std::make_move_iterator(r.samples.begin()), std::make_move_iterator(r.samples.end()));
    ++state.step;
    ++since_checkpoint;

    TrainLogRow row;
    row.step = state.step;
    row.rollout = r.stats;
    if (state.step % n == 0 || state.step == max_steps) {
      row.updated = true;
      row.update = ppo_update(state.model, state.optimizer, std::move(buffer), cfg.train);
      buffer.clear();
      if (hooks.on_checkpoint && (since_checkpoint >= every || state.step == max_steps)) {
        hooks.on_checkpoint(state);
        since_checkpoint = 0;
      }
    }
    if (hooks.on_step) hooks.on_step(row);
  }
  return state;
}

}  // namespace metarule
