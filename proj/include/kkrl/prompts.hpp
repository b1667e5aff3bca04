#pragma once

// Chat prompt assembly with an optional in-context description of the reward.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "kkrl/error.hpp"
#include "kkrl/genpuzzle.hpp"
#include "kkrl/logic.hpp"

namespace kkrl {

enum class MotivationVariant { None, GroundTruth, Suboptimal, Adverse };

inline constexpr std::array<MotivationVariant, 4> kAllVariants{
    MotivationVariant::None, MotivationVariant::GroundTruth, MotivationVariant::Suboptimal,
    MotivationVariant::Adverse};

inline std::string_view variant_name(MotivationVariant v) {
  switch (v) {
    case MotivationVariant::None: return "none";
    case MotivationVariant::GroundTruth: return "ground_truth";
    case MotivationVariant::Suboptimal: return "suboptimal";
    case MotivationVariant::Adverse: return "adverse";
  }
  return "?";
}

inline std::optional<MotivationVariant> parse_variant(std::string_view s) {
  for (auto v : kAllVariants)
    if (variant_name(v) == s) return v;
  return std::nullopt;
}

// Base instructions, kept byte-for-byte as used by the original training
// stack, including its spacing quirks.
inline constexpr std::string_view kBaseSystemText =
    "You are a helpful assistant. The assistant first thinks about the reasoning process in the mind and then "
    "provides the user with the answer. The reasoning process and answer are enclosed within <think> </think> "
    "and<answer> </answer> tags, respectively, i.e., <think> reasoning process here </think><answer> answer here "
    "</answer>.  Now the user asks you to solve a logical reasoning problem. After thinking, when you finally "
    "reach a conclusion, clearly state the identity of each character within <answer> </answer> tags. i.e., "
    "<answer> (1) Zoey is a knight\n(2) ... </answer>.";

inline constexpr std::string_view kGroundTruthMotivation =
    "You will get evaluated following Evaluation Scoring Rules:\n"
    "- Correctness Score:\n"
    "  - If your final answer is correct, score 2\n"
    "  - If your answer is understandable but wrong, score -1.5\n"
    "  - If your answer is not parsable or incomplete, score -2\n"
    "- Format Score:\n"
    "  - If you follow the tag format exactly as above, score 1\n"
    "  - Otherwise, score -1\n"
    "You will get the final score as their sum. Example:\n"
    "(1) The format follows the required structure: +1\n"
    "(2) The final answer is correct: +2\n"
    "(3) Total evaluation score: 3\n"
    "Think carefully, follow the structure, and consider the evaluation rules.";

// Correctness component only.
inline constexpr std::string_view kSuboptimalMotivation =
    "You will get evaluated following Evaluation Scoring Rules:\n"
    "- Correctness Score:\n"
    "  - If your final answer is correct, score 2\n"
    "  - If your answer is understandable but wrong, score -1.5\n"
    "  - If your answer is not parsable or incomplete, score -2\n"
    "You will get the final score as the correctness score. Example:\n"
    "(1) The final answer is correct: +2\n"
    "(2) Total evaluation score: 2\n"
    "Think carefully, follow the structure, and consider the evaluation rules.";

// Ground-truth text with every score negated.
inline constexpr std::string_view kAdverseMotivation =
    "You will get evaluated following Evaluation Scoring Rules:\n"
    "- Correctness Score:\n"
    "  - If your final answer is correct, score -2\n"
    "  - If your answer is understandable but wrong, score 1.5\n"
    "  - If your answer is not parsable or incomplete, score 2\n"
    "- Format Score:\n"
    "  - If you follow the tag format exactly as above, score -1\n"
    "  - Otherwise, score 1\n"
    "You will get the final score as their sum. Example:\n"
    "(1) The format follows the required structure: -1\n"
    "(2) The final answer is correct: -2\n"
    "(3) Total evaluation score: -3\n"
    "Think carefully, follow the structure, and consider the evaluation rules.";

inline std::string motivation_text(MotivationVariant v) {
  switch (v) {
    case MotivationVariant::None: return {};
    case MotivationVariant::GroundTruth: return std::string(kGroundTruthMotivation);
    case MotivationVariant::Suboptimal: return std::string(kSuboptimalMotivation);
    case MotivationVariant::Adverse: return std::string(kAdverseMotivation);
  }
  return {};
}

enum class PromptStyle { Chat, Plain };

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::string rendered;
};

inline std::string system_text(MotivationVariant v) {
  std::string out(kBaseSystemText);
  if (v != MotivationVariant::None) {
    out += '\n';
    out += motivation_text(v);
  }
  return out;
}

/// Assembles the prompt. Chat style uses <|im_start|>/<|im_end|> role markers;
/// both styles end with the assistant turn opened by <think>.
inline std::string render_prompt(std::string_view system, std::string_view user, PromptStyle style = PromptStyle::Chat) {
  std::string out;
  if (style == PromptStyle::Chat) {
    out += "<|im_start|>system\n";
    out += system;
    out += "<|im_end|>\n<|im_start|>user\n";
    out += user;
    out += "<|im_end|>\n<|im_start|>assistant\n<think>";
  } else {
    out += "System: ";
    out += system;
    out += "\n\nUser: ";
    out += user;
    out += "\n\nAssistant: <think>";
  }
  return out;
}

inline PromptBundle build_prompt(const Puzzle& p, MotivationVariant v, PromptStyle style = PromptStyle::Chat) {
  PromptBundle b;
  b.system_text = system_text(v);
  b.user_text = render_text(p);
  b.rendered = render_prompt(b.system_text, b.user_text, style);
  return b;
}

}  // namespace kkrl
