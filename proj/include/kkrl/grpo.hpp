#pragma once

// Group Relative Policy Optimization.
//
// For each prompt a group of G responses is sampled from the behavior policy.
// Rewards are normalized within the group into advantages
//
//     A_i = (r_i - mean(r)) / std(r)
//
// and the per-sample objective is the clipped importance-ratio surrogate with
// an additive KL penalty toward a frozen reference policy:
//
//     rho_i  = exp(logp_new_i - logp_old_i)
//     surr_i = min(rho_i * A_i, clip(rho_i, 1 - eps, 1 + eps) * A_i)
//     kl_i   = exp(logp_ref_i - logp_new_i) - (logp_ref_i - logp_new_i) - 1
//     loss   = mean_i( -surr_i + beta * kl_i )
//
// kl_i is the nonnegative unbiased per-sample estimator of KL(new || ref).
// Responses are treated as single actions, so there is no per-token split.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kkrl/error.hpp"

namespace kkrl::grpo {

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.001;
  double learning_rate = 1e-6;
  int inner_epochs = 2;
  // 0 selects the degenerate-group rule (all-zero advantages when every
  // reward in the group is equal); > 0 divides by (std + std_epsilon).
  double std_epsilon = 0.0;
  bool sample_std = false;  // population std (divide by G) unless set

  void validate() const {
    if (group_size < 2) throw StructuralError("group_size must be >= 2");
    if (!(clip_eps > 0 && clip_eps < 1)) throw StructuralError("clip_eps must be in (0, 1)");
    if (!(kl_beta >= 0) || !std::isfinite(kl_beta)) throw StructuralError("kl_beta must be finite and >= 0");
    if (!std::isfinite(learning_rate)) throw StructuralError("learning_rate must be finite");
    if (inner_epochs < 1) throw StructuralError("inner_epochs must be >= 1");
    if (!(std_epsilon >= 0) || !std::isfinite(std_epsilon)) throw StructuralError("std_epsilon must be >= 0");
  }
};

inline std::vector<double> advantages(std::span<const double> rewards, const GrpoConfig& cfg = {}) {
  const std::size_t g = rewards.size();
  if (g < 2) throw StructuralError("advantages need a group of at least 2 rewards");
  for (double r : rewards)
    if (!std::isfinite(r)) throw NumericError("nonfinite reward");
  std::vector<double> out(g, 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return out;
  double sum = 0;
  for (double r : rewards) sum += r;
  const double mean = sum / static_cast<double>(g);
  double ss = 0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double denom_n = cfg.sample_std ? static_cast<double>(g - 1) : static_cast<double>(g);
  const double sd = std::sqrt(ss / denom_n) + cfg.std_epsilon;
  for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

inline double clipped_surrogate(double ratio, double adv, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * adv, clipped * adv);
}

/// True when the clipped branch is strictly selected, i.e. the surrogate is
/// flat in the ratio.
inline bool clip_active(double ratio, double adv, double eps) {
  return ratio * adv > std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
}

inline double kl_estimate(double logp_new, double logp_ref) {
  const double d = logp_ref - logp_new;
  return std::exp(d) - d - 1.0;
}

inline bool near_clip_kink(double ratio, double eps, double margin) {
  return std::abs(ratio - (1.0 + eps)) < margin || std::abs(ratio - (1.0 - eps)) < margin;
}

/// Sampled responses for one prompt, with their log-probabilities under the
/// current, behavior and reference policies.
struct Group {
  std::vector<double> rewards;
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;

  std::size_t size() const { return rewards.size(); }

  void validate() const {
    const std::size_t g = rewards.size();
    if (g < 2) throw StructuralError("group must hold at least 2 samples");
    if (logp_new.size() != g || logp_old.size() != g || logp_ref.size() != g)
      throw StructuralError("group vectors have inconsistent lengths");
    for (const auto* v : {&logp_new, &logp_old, &logp_ref})
      for (double x : *v)
        if (!std::isfinite(x)) throw NumericError("nonfinite log-probability");
  }
};

struct SampleTerms {
  double advantage = 0;
  double ratio = 1;
  double surrogate = 0;
  double kl = 0;
  bool clipped = false;
};

struct LossResult {
  double loss = 0;
  std::vector<std::vector<SampleTerms>> terms;         // [group][sample]
  std::vector<std::vector<double>> grad_logp_new;      // d loss / d logp_new
  double mean_kl = 0;
  double clip_fraction = 0;
};

inline LossResult grpo_loss(std::span<const Group> groups, const GrpoConfig& cfg) {
  cfg.validate();
  if (groups.empty()) throw StructuralError("grpo_loss needs at least one group");
  std::size_t n = 0;
  for (const Group& g : groups) {
    g.validate();
    n += g.size();
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  LossResult out;
  out.terms.reserve(groups.size());
  out.grad_logp_new.reserve(groups.size());
  double loss = 0, kl_sum = 0;
  std::size_t clipped = 0;
  for (const Group& g : groups) {
    const auto adv = advantages(g.rewards, cfg);
    auto& terms = out.terms.emplace_back(g.size());
    auto& grad = out.grad_logp_new.emplace_back(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      SampleTerms& t = terms[i];
      t.advantage = adv[i];
      t.ratio = std::exp(g.logp_new[i] - g.logp_old[i]);
      t.surrogate = clipped_surrogate(t.ratio, t.advantage, cfg.clip_eps);
      t.kl = kl_estimate(g.logp_new[i], g.logp_ref[i]);
      t.clipped = clip_active(t.ratio, t.advantage, cfg.clip_eps);
      loss += -t.surrogate + cfg.kl_beta * t.kl;
      kl_sum += t.kl;
      if (t.clipped) ++clipped;
      // d(rho*A)/d logp_new = rho*A on the unclipped branch; zero when flat
      const double d_surr = t.clipped ? 0.0 : t.ratio * t.advantage;
      const double d_kl = 1.0 - std::exp(g.logp_ref[i] - g.logp_new[i]);
      grad[i] = (-d_surr + cfg.kl_beta * d_kl) * inv_n;
    }
  }
  out.loss = loss * inv_n;
  out.mean_kl = kl_sum * inv_n;
  out.clip_fraction = static_cast<double>(clipped) * inv_n;
  if (!std::isfinite(out.loss)) throw NumericError("nonfinite GRPO loss");
  return out;
}

// ---------------------------------------------------------------------------
// Parameterized policies

/// Flat parameter vector; its layout belongs to the policy rule reading it.
struct PolicyParams {
  std::vector<double> values;

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
  }
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// An evaluation rule mapping (params, prompt, action) to a log-probability,
/// with its gradient accumulated into a caller buffer: grad += w * dlogp/dθ.
template <class P>
concept DifferentiablePolicy = requires(const P& p, std::span<const double> params, std::size_t prompt,
                                        std::size_t action, double w, std::span<double> grad) {
  { p.num_params() } -> std::convertible_to<std::size_t>;
  { p.log_prob(params, prompt, action) } -> std::convertible_to<double>;
  p.accumulate_log_prob_grad(params, prompt, action, w, grad);
};

/// Sampled group for one prompt. Log-probabilities under the behavior and
/// reference policies are frozen at sampling time.
struct Rollout {
  std::size_t prompt = 0;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
};

struct Objective {
  double loss = 0;
  double mean_kl = 0;
  double clip_fraction = 0;
  std::vector<double> gradient;  // empty unless requested
};

template <DifferentiablePolicy P>
Objective grpo_objective(const P& policy, std::span<const double> params, std::span<const Rollout> rollouts,
                         const GrpoConfig& cfg, bool with_gradient = true) {
  if (params.size() != policy.num_params()) throw StructuralError("parameter vector has the wrong size");
  std::vector<Group> groups;
  groups.reserve(rollouts.size());
  for (const Rollout& r : rollouts) {
    if (r.actions.size() != r.rewards.size()) throw StructuralError("rollout actions/rewards length mismatch");
    Group g{r.rewards, {}, r.logp_old, r.logp_ref};
    g.logp_new.reserve(r.actions.size());
    for (std::size_t a : r.actions) g.logp_new.push_back(policy.log_prob(params, r.prompt, a));
    groups.push_back(std::move(g));
  }
  LossResult lr = grpo_loss(groups, cfg);
  Objective out{lr.loss, lr.mean_kl, lr.clip_fraction, {}};
  if (with_gradient) {
    out.gradient.assign(params.size(), 0.0);
    for (std::size_t k = 0; k < rollouts.size(); ++k)
      for (std::size_t i = 0; i < rollouts[k].actions.size(); ++i)
        policy.accumulate_log_prob_grad(params, rollouts[k].prompt, rollouts[k].actions[i],
                                        lr.grad_logp_new[k][i], out.gradient);
  }
  return out;
}

struct GradCheckResult {
  double max_relative_error = 0;
  std::size_t excluded_groups = 0;
  std::size_t checked_groups = 0;
};

/// Compares the analytic gradient with central finite differences over every
/// parameter: max |analytic - numeric| / max(1, |numeric|). Groups holding a
/// sample whose ratio lies within `kink_margin` of 1 +/- eps are excluded,
/// since the objective is not differentiable there.
template <DifferentiablePolicy P>
GradCheckResult grad_check(const P& policy, std::span<const double> params, std::span<const Rollout> rollouts,
                           const GrpoConfig& cfg, double h = 1e-5, double kink_margin = 1e-3) {
  GradCheckResult res;
  std::vector<Rollout> kept;
  for (const Rollout& r : rollouts) {
    bool kink = false;
    for (std::size_t i = 0; i < r.actions.size(); ++i) {
      const double ratio = std::exp(policy.log_prob(params, r.prompt, r.actions[i]) - r.logp_old[i]);
      if (near_clip_kink(ratio, cfg.clip_eps, kink_margin)) kink = true;
    }
    if (kink) ++res.excluded_groups;
    else kept.push_back(r);
  }
  res.checked_groups = kept.size();
  if (kept.empty()) return res;

  const Objective base = grpo_objective(policy, params, std::span<const Rollout>(kept), cfg, true);
  std::vector<double> theta(params.begin(), params.end());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double saved = theta[j];
    theta[j] = saved + h;
    const double up = grpo_objective(policy, theta, std::span<const Rollout>(kept), cfg, false).loss;
    theta[j] = saved - h;
    const double down = grpo_objective(policy, theta, std::span<const Rollout>(kept), cfg, false).loss;
    theta[j] = saved;
    const double numeric = (up - down) / (2 * h);
    const double err = std::abs(base.gradient[j] - numeric) / std::max(1.0, std::abs(numeric));
    res.max_relative_error = std::max(res.max_relative_error, err);
  }
  return res;
}

struct UpdateResult {
  PolicyParams params;
  // Objective statistics at the start of the final inner epoch.
  double loss = 0;
  double mean_kl = 0;
  double clip_fraction = 0;
};

/// Plain gradient descent on the GRPO loss: cfg.inner_epochs passes over the
/// same rollouts, with the behavior log-probabilities held fixed. Returns new
/// parameters; the input is not modified.
template <DifferentiablePolicy P>
UpdateResult update(const P& policy, const PolicyParams& params, std::span<const Rollout> rollouts,
                    const GrpoConfig& cfg) {
  cfg.validate();
  UpdateResult out{params, 0, 0, 0};
  for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
    Objective obj = grpo_objective(policy, out.params.values, rollouts, cfg, true);
    for (double g : obj.gradient)
      if (!std::isfinite(g))
        throw NumericError("update step rejected: nonfinite gradient in epoch " + std::to_string(epoch));
    for (std::size_t j = 0; j < obj.gradient.size(); ++j) out.params.values[j] -= cfg.learning_rate * obj.gradient[j];
    if (!out.params.all_finite()) throw NumericError("update step rejected: nonfinite parameters");
    out.loss = obj.loss;
    out.mean_kl = obj.mean_kl;
    out.clip_fraction = obj.clip_fraction;
  }
  return out;
}

}  // namespace kkrl::grpo
