#pragma once

// Desk-scale GRPO run: a tabular softmax policy over role assignments, one row
// per puzzle, trained against the real grader on generated puzzles.
//
// Action k of a row is Assignment::from_index(k): bit i is person i,
// Knight = 0, Knave = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kkrl/error.hpp"
#include "kkrl/genpuzzle.hpp"
#include "kkrl/grpo.hpp"
#include "kkrl/logic.hpp"
#include "kkrl/logic_io.hpp"
#include "kkrl/parallel.hpp"
#include "kkrl/prompts.hpp"
#include "kkrl/report.hpp"
#include "kkrl/reward.hpp"
#include "kkrl/rng.hpp"

namespace kkrl::toy {

/// Softmax over a ragged logit table: row r has 2^people[r] entries.
class TabularSoftmax {
 public:
  TabularSoftmax() = default;
  TabularSoftmax(std::vector<std::size_t> row_people, double temperature = 1.0)
      : people_(std::move(row_people)), temperature_(temperature) {
    if (!(temperature_ > 0) || !std::isfinite(temperature_)) throw StructuralError("temperature must be positive");
    offsets_.reserve(people_.size() + 1);
    offsets_.push_back(0);
    for (std::size_t n : people_) {
      if (n == 0 || n > kMaxPeople) throw StructuralError("row people count out of range");
      offsets_.push_back(offsets_.back() + (std::size_t{1} << n));
    }
  }

  std::size_t num_rows() const { return people_.size(); }
  std::size_t row_people(std::size_t row) const { return people_.at(row); }
  std::size_t num_actions(std::size_t row) const { return offsets_.at(row + 1) - offsets_[row]; }
  std::size_t offset(std::size_t row) const { return offsets_.at(row); }
  std::size_t num_params() const { return offsets_.empty() ? 0 : offsets_.back(); }
  double temperature() const { return temperature_; }

  std::vector<double> log_probabilities(std::span<const double> params, std::size_t row) const {
    const std::size_t k = num_actions(row), off = offset(row);
    std::vector<double> z(k);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < k; ++a) {
      z[a] = params[off + a] / temperature_;
      mx = std::max(mx, z[a]);
    }
    double sum = 0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (double& v : z) v -= lse;
    return z;
  }

  std::vector<double> probabilities(std::span<const double> params, std::size_t row) const {
    auto lp = log_probabilities(params, row);
    for (double& v : lp) v = std::exp(v);
    return lp;
  }

  double log_prob(std::span<const double> params, std::size_t row, std::size_t action) const {
    if (action >= num_actions(row)) throw StructuralError("action index out of range");
    return log_probabilities(params, row)[action];
  }

  // d log pi(a) / d logit_j = (1[j == a] - pi_j) / temperature
  void accumulate_log_prob_grad(std::span<const double> params, std::size_t row, std::size_t action, double w,
                                std::span<double> grad) const {
    const auto p = probabilities(params, row);
    const std::size_t off = offset(row);
    for (std::size_t j = 0; j < p.size(); ++j)
      grad[off + j] += w * ((j == action ? 1.0 : 0.0) - p[j]) / temperature_;
  }

  /// Argmax action; ties go to the lowest index.
  std::size_t greedy(std::span<const double> params, std::size_t row) const {
    const std::size_t k = num_actions(row), off = offset(row);
    std::size_t best = 0;
    for (std::size_t a = 1; a < k; ++a)
      if (params[off + a] > params[off + best]) best = a;
    return best;
  }

 private:
  std::vector<std::size_t> people_;
  std::vector<std::size_t> offsets_;
  double temperature_ = 1.0;
};

static_assert(grpo::DifferentiablePolicy<TabularSoftmax>);

struct ToyPolicy {
  TabularSoftmax rule;
  grpo::PolicyParams params;

  /// All-zero logits, i.e. uniform over each puzzle's assignments.
  static ToyPolicy uniform(std::span<const Puzzle> puzzles, double temperature = 1.0) {
    std::vector<std::size_t> people;
    people.reserve(puzzles.size());
    for (const Puzzle& p : puzzles) people.push_back(p.num_people());
    TabularSoftmax rule(std::move(people), temperature);
    grpo::PolicyParams params{std::vector<double>(rule.num_params(), 0.0)};
    return {std::move(rule), std::move(params)};
  }
};

inline Json to_json(const ToyPolicy& policy, MotivationVariant variant = MotivationVariant::None) {
  Json j;
  j["format"] = "kkrl-toy-policy";
  j["num_puzzles"] = policy.rule.num_rows();
  j["temperature"] = policy.rule.temperature();
  j["variant"] = variant_name(variant);
  Json rows = Json::array();
  for (std::size_t r = 0; r < policy.rule.num_rows(); ++r) {
    Json row;
    row["num_people"] = policy.rule.row_people(r);
    const auto off = static_cast<std::ptrdiff_t>(policy.rule.offset(r));
    const auto k = static_cast<std::ptrdiff_t>(policy.rule.num_actions(r));
    row["logits"] = std::vector<double>(policy.params.values.begin() + off, policy.params.values.begin() + off + k);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

inline ToyPolicy toy_policy_from_json(const Json& j) {
  try {
    std::vector<std::size_t> people;
    std::vector<double> values;
    for (const auto& row : j.at("rows")) {
      people.push_back(row.at("num_people").get<std::size_t>());
      auto logits = row.at("logits").get<std::vector<double>>();
      if (people.back() > kMaxPeople || logits.size() != (std::size_t{1} << people.back()))
        throw ParseError("policy row has the wrong number of logits");
      values.insert(values.end(), logits.begin(), logits.end());
    }
    if (people.size() != j.at("num_puzzles").get<std::size_t>()) throw ParseError("policy row count mismatch");
    ToyPolicy p{TabularSoftmax(std::move(people), j.at("temperature").get<double>()), {std::move(values)}};
    if (!p.params.all_finite()) throw ParseError("policy logits must be finite");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy JSON: ") + e.what());
  }
}

/// The tagged response a toy action stands for.
inline std::string action_response(const Puzzle& p, std::size_t action) {
  return reward::wrap_response("sampled assignment",
                               render_solution(Assignment::from_index(action, p.num_people()), p.names()));
}

/// Draws G actions for one puzzle from the current policy and grades each with
/// the real reward function. logp_old is filled from the sampling policy;
/// logp_ref is left for the caller.
inline grpo::Rollout sample_group(const TabularSoftmax& rule, std::span<const double> params,
                                  std::span<const Puzzle> puzzles, std::size_t puzzle_index, std::size_t group_size,
                                  Rng& rng) {
  if (puzzle_index >= puzzles.size() || puzzle_index >= rule.num_rows())
    throw StructuralError("puzzle index out of range");
  const Puzzle& p = puzzles[puzzle_index];
  const auto probs = rule.probabilities(params, puzzle_index);
  const auto logp = rule.log_probabilities(params, puzzle_index);
  grpo::Rollout r;
  r.prompt = puzzle_index;
  for (std::size_t i = 0; i < group_size; ++i) {
    double u = uniform_unit(rng);
    std::size_t a = 0;
    for (; a + 1 < probs.size(); ++a) {
      if (u < probs[a]) break;
      u -= probs[a];
    }
    r.actions.push_back(a);
    r.rewards.push_back(reward::score(action_response(p, a), p).total);
    r.logp_old.push_back(logp[a]);
  }
  return r;
}

/// Greedy decoding graded through the reward module, bucketed by people count.
inline EvalReport evaluate(const TabularSoftmax& rule, std::span<const double> params,
                           std::span<const Puzzle> puzzles, const LevelSplit& split = {}) {
  std::map<int, BucketCounts> counts;
  for (std::size_t i = 0; i < puzzles.size(); ++i) {
    const Puzzle& p = puzzles[i];
    auto& b = counts[static_cast<int>(p.num_people())];
    ++b.total;
    if (reward::score(action_response(p, rule.greedy(params, i)), p).correctness_score == reward::kCorrectScore)
      ++b.correct;
  }
  return EvalReport::from_counts(counts, split);
}

inline double overall_accuracy(const EvalReport& r) {
  std::size_t c = 0, t = 0;
  for (const auto& [level, b] : r.counts()) {
    c += b.correct;
    t += b.total;
  }
  return t ? static_cast<double>(c) / static_cast<double>(t) : 0.0;
}

inline grpo::GrpoConfig toy_grpo_defaults() {
  grpo::GrpoConfig cfg;
  cfg.learning_rate = 0.1;
  return cfg;
}

/// `count` puzzles cycling through `levels`; puzzle i uses puzzle_seed(seed, i).
inline std::vector<Puzzle> toy_puzzles(std::size_t count, const std::vector<int>& levels, std::uint64_t seed,
                                       const GenConfig& gen_template = {}, std::size_t jobs = 1) {
  if (levels.empty()) throw StructuralError("toy puzzle set needs at least one level");
  std::vector<std::optional<Puzzle>> slots(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    GenConfig c = gen_template;
    c.num_people = levels[i % levels.size()];
    c.seed = puzzle_seed(seed, i);
    slots[i] = generate(c);
  });
  std::vector<Puzzle> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct RunSpec {
  std::vector<Puzzle> puzzles;
  grpo::GrpoConfig grpo = toy_grpo_defaults();
  int total_steps = 500;
  int eval_every = 50;
  std::size_t batch_size = 16;
  std::uint64_t seed = kDefaultSeed;
  double temperature = 1.0;
  // Provenance only: the tabular policy never sees prompt text.
  MotivationVariant variant = MotivationVariant::GroundTruth;

  void validate() const {
    grpo.validate();
    if (puzzles.empty()) throw StructuralError("run needs at least one puzzle");
    for (const Puzzle& p : puzzles)
      if (!p.solution()) throw StructuralError("run puzzles must carry their solution");
    if (total_steps <= 0) throw StructuralError("total_steps must be positive");
    if (eval_every <= 0 || total_steps % eval_every != 0)
      throw StructuralError("eval_every must be positive and divide total_steps");
    if (batch_size == 0 || batch_size > puzzles.size())
      throw StructuralError("batch_size must be in [1, number of puzzles]");
  }
};

struct TelemetryRow {
  int step = 0;
  double mean_reward = 0;
  double accuracy = 0;
  double loss = 0;
  double mean_kl = 0;
  double clip_fraction = 0;
  std::map<int, double> level_accuracy;
};

struct RunReport {
  std::vector<TelemetryRow> rows;
  ToyPolicy final_policy;
  EvalReport final_eval;

  std::string csv() const {
    std::string out = "step,mean_reward,accuracy,loss,mean_kl,clip_fraction";
    if (!rows.empty())
      for (const auto& [level, a] : rows.front().level_accuracy) out += ",acc_" + std::to_string(level);
    out += '\n';
    char buf[64];
    for (const TelemetryRow& r : rows) {
      std::snprintf(buf, sizeof buf, "%d", r.step);
      out += buf;
      for (double v : {r.mean_reward, r.accuracy, r.loss, r.mean_kl, r.clip_fraction}) {
        std::snprintf(buf, sizeof buf, ",%.9g", v);
        out += buf;
      }
      for (const auto& [level, a] : r.level_accuracy) {
        std::snprintf(buf, sizeof buf, ",%.6f", a);
        out += buf;
      }
      out += '\n';
    }
    return out;
  }
};

namespace detail {

// Puzzle order for one pass over the set, reshuffled every pass.
inline std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x6570, epoch}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);
  return order;
}

}  // namespace detail

/// Runs GRPO on the toy policy. Each step snapshots the policy, samples one
/// group per puzzle in the batch, and applies grpo::update. Telemetry rows are
/// emitted every eval_every steps and average the step statistics since the
/// previous row.
inline RunReport train(const RunSpec& spec) {
  spec.validate();
  const std::size_t n = spec.puzzles.size();
  ToyPolicy policy = ToyPolicy::uniform(spec.puzzles, spec.temperature);
  const grpo::PolicyParams reference = policy.params;
  const LevelSplit split{};

  RunReport report;
  double win_reward = 0, win_loss = 0, win_kl = 0, win_clip = 0;
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> order;

  for (int step = 0; step < spec.total_steps; ++step) {
    std::vector<grpo::Rollout> rollouts;
    rollouts.reserve(spec.batch_size);
    double reward_sum = 0;
    std::size_t reward_n = 0;
    for (std::size_t slot = 0; slot < spec.batch_size; ++slot) {
      const std::uint64_t pos = static_cast<std::uint64_t>(step) * spec.batch_size + slot;
      const std::uint64_t epoch = pos / n;
      if (epoch != cached_epoch) {
        order = detail::epoch_order(spec.seed, epoch, n);
        cached_epoch = epoch;
      }
      const std::size_t idx = order[pos % n];
      Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(step), idx, slot}));
      grpo::Rollout r =
          sample_group(policy.rule, policy.params.values, spec.puzzles, idx, spec.grpo.group_size, rng);
      for (std::size_t a : r.actions) r.logp_ref.push_back(policy.rule.log_prob(reference.values, idx, a));
      for (double x : r.rewards) reward_sum += x;
      reward_n += r.rewards.size();
      rollouts.push_back(std::move(r));
    }
    grpo::UpdateResult up = grpo::update(policy.rule, policy.params, rollouts, spec.grpo);
    if (!std::isfinite(up.loss))
      throw NumericError("training diverged at step " + std::to_string(step + 1));
    policy.params = std::move(up.params);

    win_reward += reward_sum / static_cast<double>(reward_n);
    win_loss += up.loss;
    win_kl += up.mean_kl;
    win_clip += up.clip_fraction;

    if ((step + 1) % spec.eval_every == 0) {
      const double w = spec.eval_every;
      EvalReport ev = evaluate(policy.rule, policy.params.values, spec.puzzles, split);
      TelemetryRow row{step + 1, win_reward / w, overall_accuracy(ev), win_loss / w, win_kl / w, win_clip / w,
                       ev.level_accuracy()};
      report.rows.push_back(std::move(row));
      win_reward = win_loss = win_kl = win_clip = 0;
    }
  }
  report.final_eval = evaluate(policy.rule, policy.params.values, spec.puzzles, split);
  report.final_policy = std::move(policy);
  return report;
}

}  // namespace kkrl::toy
