#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "metarule/errors.hpp"
#include "metarule/expression.hpp"
#include "metarule/population.hpp"
#include "metarule/random.hpp"
#include "metarule/token.hpp"

namespace metarule {

inline constexpr int kHidden = 16;
inline constexpr int kGateSize = 4 * kHidden;  // gate blocks: input, forget, cell, output

template <int R, int C>
using Weights = Eigen::Matrix<double, R, C, (C == 1 ? Eigen::ColMajor : Eigen::RowMajor)>;

using Hidden = Weights<kHidden, 1>;
using Gates = Weights<kGateSize, 1>;
using FlaVector = Weights<kFlaSize, 1>;
using TokenScores = Weights<kTokenCount, 1>;
using MantissaScores = Weights<kMantissaCount, 1>;
using ExponentScores = Weights<kExponentCount, 1>;

// Every matrix maps its row space to its column space: y = W^T x + b.
struct PolicyParams {
  Weights<kFlaSize, kHidden> fla_weight;
  Hidden fla_bias;
  Weights<kVteBits, kGateSize> input_weight;
  Gates input_bias;
  Weights<kHidden, kGateSize> hidden_weight;
  Gates hidden_bias;
  Weights<kHidden, kTokenCount> token_weight;
  TokenScores token_bias;
  Weights<kHidden, kMantissaCount> mantissa_weight;
  MantissaScores mantissa_bias;
  Weights<kHidden, kExponentCount> exponent_weight;
  ExponentScores exponent_bias;

  static PolicyParams zeros() {
    PolicyParams p;
    for_each_tensor(p, [](const char*, auto& t) { t.setZero(); });
    return p;
  }

  // Visits (name, tensor) in checkpoint order.
  template <class Self, class F>
  static void for_each_tensor(Self& p, F&& f) {
    f("fla_embed.weight", p.fla_weight);
    f("fla_embed.bias", p.fla_bias);
    f("lstm_input.weight", p.input_weight);
    f("lstm_input.bias", p.input_bias);
    f("lstm_hidden.weight", p.hidden_weight);
    f("lstm_hidden.bias", p.hidden_bias);
    f("token_head.weight", p.token_weight);
    f("token_head.bias", p.token_bias);
    f("mantissa_head.weight", p.mantissa_weight);
    f("mantissa_head.bias", p.mantissa_bias);
    f("exponent_head.weight", p.exponent_weight);
    f("exponent_head.bias", p.exponent_bias);
  }
};

struct CriticParams {
  FlaVector weight = FlaVector::Zero();
  Weights<1, 1> bias = Weights<1, 1>::Zero();

  static CriticParams zeros() { return {}; }

  template <class Self, class F>
  static void for_each_tensor(Self& p, F&& f) {
    f("critic.weight", p.weight);
    f("critic.bias", p.bias);
  }
};

inline bool all_finite(const PolicyParams& p) {
  bool ok = true;
  PolicyParams::for_each_tensor(p, [&](const char*, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

inline bool all_finite(const CriticParams& c) { return c.weight.allFinite() && std::isfinite(c.bias(0)); }

struct ModelParams {
  PolicyParams policy;
  CriticParams critic;
};

// Weights uniform in +-gain/sqrt(fan_in), fan_in being the row count; biases zero.
inline ModelParams init_params(std::uint64_t seed, double gain = 1.0) {
  if (!(gain > 0.0)) throw ContractError("init gain must be positive");
  Rng rng = split_rng({seed, 0x1417});
  ModelParams m{PolicyParams::zeros(), CriticParams::zeros()};
  auto fill = [&](const char*, auto& t) {
    if (t.cols() == 1) return;  // bias
    const double bound = gain / std::sqrt(static_cast<double>(t.rows()));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = uniform(rng, -bound, bound);
    }
  };
  PolicyParams::for_each_tensor(m.policy, fill);
  const double bound = gain / std::sqrt(static_cast<double>(kFlaSize));
  for (int i = 0; i < kFlaSize; ++i) m.critic.weight(i) = uniform(rng, -bound, bound);
  return m;
}

inline FlaVector to_vector(const FlaState& s) {
  FlaVector v;
  for (int i = 0; i < kFlaSize; ++i) v(i) = s[static_cast<std::size_t>(i)];
  return v;
}

inline double critic_value(const CriticParams& c, const FlaState& s) {
  double v = c.bias(0);
  for (int i = 0; i < kFlaSize; ++i) v += c.weight(i) * s[static_cast<std::size_t>(i)];
  return v;
}

enum class Choice { Token, Mantissa, Exponent };

// Everything the backward pass needs from one emitted token.
struct StepCache {
  std::array<std::int16_t, kVteBits> bits{};
  int bit_count = 0;
  Hidden h_prev, c_prev;
  Hidden in_gate, forget_gate, cell_gate, out_gate;
  Hidden c, tanh_c, h;
  TokenMask mask{};
  TokenScores token_prob, token_logp;
  int token = 0;
  double token_entropy = 0.0;
  bool has_const = false;
  MantissaScores mantissa_prob, mantissa_logp;
  int mantissa = 0;
  double mantissa_entropy = 0.0;
  ExponentScores exponent_prob, exponent_logp;
  int exponent = 0;
  double exponent_entropy = 0.0;
};

struct Generated {
  UpdateRule rule;
  double logprob = 0.0;
  double entropy = 0.0;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Masked log-softmax. Masked entries get probability 0 and log-prob 0 and
// are left out of the entropy.
template <int N>
double masked_log_softmax(const Weights<N, 1>& z, const bool* mask, Weights<N, 1>& prob, Weights<N, 1>& logp) {
  double peak = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < N; ++j) {
    if (mask[j] && z(j) > peak) peak = z(j);
  }
  double sum = 0.0;
  for (int j = 0; j < N; ++j) {
    if (mask[j]) sum += std::exp(z(j) - peak);
  }
  const double lse = peak + std::log(sum);
  double entropy = 0.0;
  for (int j = 0; j < N; ++j) {
    if (mask[j]) {
      logp(j) = z(j) - lse;
      prob(j) = std::exp(logp(j));
      entropy -= prob(j) * logp(j);
    } else {
      logp(j) = 0.0;
      prob(j) = 0.0;
    }
  }
  return entropy;
}

template <int N>
double log_softmax(const Weights<N, 1>& z, Weights<N, 1>& prob, Weights<N, 1>& logp) {
  std::array<bool, N> all;
  all.fill(true);
  return masked_log_softmax<N>(z, all.data(), prob, logp);
}

}  // namespace detail

// Draws from the policy's distributions.
struct SampleChooser {
  Rng& rng;

  int operator()(Choice, std::span<const double> prob) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int last = -1;
    for (std::size_t j = 0; j < prob.size(); ++j) {
      if (prob[j] <= 0.0) continue;
      acc += prob[j];
      last = static_cast<int>(j);
      if (u < acc) return last;
    }
    return last;
  }
};

// Replays a fixed rule; the unroll then scores it.
struct ReplayChooser {
  const UpdateRule& rule;
  std::size_t next = 0;

  int operator()(Choice c, std::span<const double> prob) {
    switch (c) {
      case Choice::Token: {
        if (next >= rule.size()) throw GrammarError("rule is shorter than its tree");
        const int k = static_cast<int>(index_of(rule.tokens()[next++]));
        if (!(prob[static_cast<std::size_t>(k)] > 0.0)) {
          throw GrammarError("token masked at position " + std::to_string(next - 1));
        }
        return k;
      }
      case Choice::Mantissa: {
        const Constant& k = rule.constant_at(next - 1);
        if (!k.is_grid()) throw GrammarError("constant is not on the grid");
        return k.mantissa;
      }
      case Choice::Exponent:
        return rule.constant_at(next - 1).exponent;
    }
    return 0;
  }
};

// One pass of the generator. Log-probs accumulate in emission order (token,
// then mantissa, then exponent), so sampling and replay agree bit for bit.
template <class Chooser>
Generated unroll(const PolicyParams& p, const FlaState& fla, Chooser&& choose, std::vector<StepCache>* caches,
                 int max_height = kMaxHeight) {
  if (caches) caches->clear();
  const FlaVector s = to_vector(fla);
  Hidden c = p.fla_weight.transpose() * s + p.fla_bias;
  Hidden h = Hidden::Zero();
  const Gates bias = p.input_bias + p.hidden_bias;

  PartialTree tree(max_height);
  std::vector<Constant> constants;
  double logprob = 0.0;
  double entropy = 0.0;
  StepCache local;

  while (!tree.complete()) {
    StepCache& st = caches ? caches->emplace_back() : local;
    st.bit_count = 0;
    Gates z = bias;
    tree.for_each_active_bit([&](int b) {
      z += p.input_weight.row(b).transpose();
      st.bits[static_cast<std::size_t>(st.bit_count++)] = static_cast<std::int16_t>(b);
    });
    z.noalias() += p.hidden_weight.transpose() * h;
    for (int j = 0; j < kHidden; ++j) {
      st.in_gate(j) = detail::sigmoid(z(j));
      st.forget_gate(j) = detail::sigmoid(z(kHidden + j));
      st.cell_gate(j) = std::tanh(z(2 * kHidden + j));
      st.out_gate(j) = detail::sigmoid(z(3 * kHidden + j));
    }
    st.h_prev = h;
    st.c_prev = c;
    st.c = st.forget_gate.cwiseProduct(c) + st.in_gate.cwiseProduct(st.cell_gate);
    st.tanh_c = st.c.array().tanh();
    st.h = st.out_gate.cwiseProduct(st.tanh_c);

    const TokenScores tz = p.token_weight.transpose() * st.h + p.token_bias;
    st.mask = tree.valid_tokens();
    st.token_entropy = detail::masked_log_softmax<kTokenCount>(tz, st.mask.data(), st.token_prob, st.token_logp);
    st.token = choose(Choice::Token, std::span<const double>(st.token_prob.data(), kTokenCount));
    logprob += st.token_logp(st.token);
    entropy += st.token_entropy;
    const Token t = token_at(static_cast<std::size_t>(st.token));
    tree.append(t);

    st.has_const = t == Token::Const;
    if (st.has_const) {
      const MantissaScores mz = p.mantissa_weight.transpose() * st.h + p.mantissa_bias;
      st.mantissa_entropy = detail::log_softmax<kMantissaCount>(mz, st.mantissa_prob, st.mantissa_logp);
      st.mantissa = choose(Choice::Mantissa, std::span<const double>(st.mantissa_prob.data(), kMantissaCount));
      const ExponentScores ez = p.exponent_weight.transpose() * st.h + p.exponent_bias;
      st.exponent_entropy = detail::log_softmax<kExponentCount>(ez, st.exponent_prob, st.exponent_logp);
      st.exponent = choose(Choice::Exponent, std::span<const double>(st.exponent_prob.data(), kExponentCount));
      logprob += st.mantissa_logp(st.mantissa);
      logprob += st.exponent_logp(st.exponent);
      entropy += st.mantissa_entropy + st.exponent_entropy;
      constants.push_back(Constant::on_grid(st.mantissa, st.exponent));
    }
    h = st.h;
    c = st.c;
  }
  return {UpdateRule(tree.traversal(), std::move(constants)), logprob, entropy};
}

inline Generated generate_rule(const PolicyParams& p, const FlaState& fla, Rng& rng, int max_height = kMaxHeight) {
  return unroll(p, fla, SampleChooser{rng}, nullptr, max_height);
}

struct Score {
  double logprob = 0.0;
  double entropy = 0.0;
};

// Teacher-forced re-scoring of a rule. Throws GrammarError when the rule
// could not have been emitted under the masks.
inline Score logprob_of(const PolicyParams& p, const FlaState& fla, const UpdateRule& rule,
                        std::vector<StepCache>* caches = nullptr, int max_height = kMaxHeight) {
  ReplayChooser replay{rule};
  const Generated g = unroll(p, fla, replay, caches, max_height);
  if (replay.next != rule.size()) throw GrammarError("rule is longer than its tree");
  return {g.logprob, g.entropy};
}

}  // namespace metarule
