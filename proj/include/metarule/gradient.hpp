#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "metarule/errors.hpp"
#include "metarule/policy.hpp"

namespace metarule {

struct PpoSample {
  FlaState fla;
  UpdateRule rule;
  double old_logprob = 0.0;
  double ret = 0.0;
  double advantage = 0.0;
};

struct LossConfig {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int max_height = kMaxHeight;
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;  // mean entropy sum per rule
  double mean_ratio = 0.0;
  int clipped = 0;
};

struct Gradients {
  PolicyParams policy = PolicyParams::zeros();
  CriticParams critic = CriticParams::zeros();
  LossTerms loss;
};

namespace detail {

inline void check_batch(std::span<const PpoSample> batch) {
  if (batch.empty()) throw ContractError("empty batch");
  for (const auto& b : batch) {
    bool ok = std::isfinite(b.old_logprob) && std::isfinite(b.ret) && std::isfinite(b.advantage);
    for (double v : b.fla.s) ok = ok && std::isfinite(v);
    if (!ok) throw NumericError("non-finite value in batch");
  }
}

// d(loss)/d(logits) for one categorical choice with selected index k:
// g_lp scales log p_k, g_ent scales the entropy of the distribution.
template <int N>
Weights<N, 1> choice_grad(const Weights<N, 1>& prob, const Weights<N, 1>& logp, double entropy, int k, double g_lp,
                          double g_ent, const bool* mask) {
  Weights<N, 1> d;
  for (int j = 0; j < N; ++j) {
    if (mask && !mask[j]) {
      d(j) = 0.0;
      continue;
    }
    d(j) = g_lp * ((j == k ? 1.0 : 0.0) - prob(j)) - g_ent * prob(j) * (logp(j) + entropy);
  }
  return d;
}

// Accumulates d(loss)/d(params) for one unroll given the loss sensitivity
// to its total log-prob and its entropy sum.
inline void backprop_unroll(const PolicyParams& p, const FlaState& fla, const std::vector<StepCache>& caches,
                            double g_lp, double g_ent, PolicyParams& grad) {
  Hidden dh_next = Hidden::Zero();
  Hidden dc_next = Hidden::Zero();
  for (auto it = caches.rbegin(); it != caches.rend(); ++it) {
    const StepCache& st = *it;
    Hidden dh = dh_next;

    const TokenScores dz_tok = choice_grad<kTokenCount>(st.token_prob, st.token_logp, st.token_entropy, st.token,
                                                        g_lp, g_ent, st.mask.data());
    grad.token_weight.noalias() += st.h * dz_tok.transpose();
    grad.token_bias += dz_tok;
    dh.noalias() += p.token_weight * dz_tok;

    if (st.has_const) {
      const MantissaScores dz_m = choice_grad<kMantissaCount>(st.mantissa_prob, st.mantissa_logp,
                                                              st.mantissa_entropy, st.mantissa, g_lp, g_ent, nullptr);
      grad.mantissa_weight.noalias() += st.h * dz_m.transpose();
      grad.mantissa_bias += dz_m;
      dh.noalias() += p.mantissa_weight * dz_m;
      const ExponentScores dz_e = choice_grad<kExponentCount>(st.exponent_prob, st.exponent_logp,
                                                              st.exponent_entropy, st.exponent, g_lp, g_ent, nullptr);
      grad.exponent_weight.noalias() += st.h * dz_e.transpose();
      grad.exponent_bias += dz_e;
      dh.noalias() += p.exponent_weight * dz_e;
    }

    const Hidden d_out = dh.cwiseProduct(st.tanh_c);
    const Hidden dc =
        dc_next + dh.cwiseProduct(st.out_gate).cwiseProduct((1.0 - st.tanh_c.array().square()).matrix());
    Gates dz;
    for (int j = 0; j < kHidden; ++j) {
      const double i = st.in_gate(j), f = st.forget_gate(j), g = st.cell_gate(j), o = st.out_gate(j);
      dz(j) = dc(j) * g * i * (1.0 - i);
      dz(kHidden + j) = dc(j) * st.c_prev(j) * f * (1.0 - f);
      dz(2 * kHidden + j) = dc(j) * i * (1.0 - g * g);
      dz(3 * kHidden + j) = d_out(j) * o * (1.0 - o);
    }
    for (int b = 0; b < st.bit_count; ++b) grad.input_weight.row(st.bits[static_cast<std::size_t>(b)]) += dz.transpose();
    grad.input_bias += dz;
    grad.hidden_bias += dz;
    grad.hidden_weight.noalias() += st.h_prev * dz.transpose();
    dh_next.noalias() = p.hidden_weight * dz;
    dc_next = dc.cwiseProduct(st.forget_gate);
  }
  const FlaVector s = to_vector(fla);
  grad.fla_weight.noalias() += s * dc_next.transpose();
  grad.fla_bias += dc_next;
}

inline double clip_ratio(double r, double eps) { return std::clamp(r, 1.0 - eps, 1.0 + eps); }

}  // namespace detail

// L = -mean(min(r A, clip(r) A)) + c_v mean((v - G)^2) - c_e mean(H),
// r = exp(logprob - old_logprob).
inline LossTerms ppo_loss(const PolicyParams& p, const CriticParams& critic, std::span<const PpoSample> batch,
                          const LossConfig& cfg) {
  detail::check_batch(batch);
  const double n = static_cast<double>(batch.size());
  LossTerms t;
  for (const auto& b : batch) {
    const Score sc = logprob_of(p, b.fla, b.rule, nullptr, cfg.max_height);
    const double r = std::exp(sc.logprob - b.old_logprob);
    const double s1 = r * b.advantage;
    const double s2 = detail::clip_ratio(r, cfg.clip) * b.advantage;
    t.policy -= std::min(s1, s2) / n;
    const double v = critic_value(critic, b.fla);
    t.value += (v - b.ret) * (v - b.ret) / n;
    t.entropy += sc.entropy / n;
    t.mean_ratio += r / n;
    if (s2 < s1) ++t.clipped;
  }
  t.total = t.policy + cfg.value_coef * t.value - cfg.entropy_coef * t.entropy;
  return t;
}

// Analytic gradient of ppo_loss by backpropagation through every unroll.
inline Gradients policy_gradient(const PolicyParams& p, const CriticParams& critic, std::span<const PpoSample> batch,
                                 const LossConfig& cfg) {
  detail::check_batch(batch);
  const double n = static_cast<double>(batch.size());
  Gradients g;
  LossTerms& t = g.loss;
  std::vector<StepCache> caches;
  caches.reserve(kSlotCount);
  for (const auto& b : batch) {
    const Score sc = logprob_of(p, b.fla, b.rule, &caches, cfg.max_height);
    const double r = std::exp(sc.logprob - b.old_logprob);
    const double s1 = r * b.advantage;
    const double s2 = detail::clip_ratio(r, cfg.clip) * b.advantage;
    const bool clipped = s2 < s1;
    t.policy -= std::min(s1, s2) / n;
    t.entropy += sc.entropy / n;
    t.mean_ratio += r / n;
    if (clipped) ++t.clipped;

    const double g_lp = clipped ? 0.0 : -b.advantage * r / n;
    const double g_ent = -cfg.entropy_coef / n;
    detail::backprop_unroll(p, b.fla, caches, g_lp, g_ent, g.policy);

    const double v = critic_value(critic, b.fla);
    t.value += (v - b.ret) * (v - b.ret) / n;
    const double dv = 2.0 * cfg.value_coef * (v - b.ret) / n;
    g.critic.weight += dv * to_vector(b.fla);
    g.critic.bias(0) += dv;
  }
  t.total = t.policy + cfg.value_coef * t.value - cfg.entropy_coef * t.entropy;
  if (!std::isfinite(t.total)) throw NumericError("non-finite loss");
  return g;
}

}  // namespace metarule
