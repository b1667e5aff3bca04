#pragma once

// Verifiable reward: a format score for the <think>/<answer> tag structure
// plus a correctness score for the identities stated in the answer block.
//
//   correctness:  +2 correct, -1.5 complete but wrong, -2 unparsable/incomplete
//   format:       +1 exact tag structure, -1 otherwise

#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kkrl/error.hpp"
#include "kkrl/logic.hpp"

namespace kkrl::reward {

inline constexpr double kCorrectScore = 2.0;
inline constexpr double kWrongScore = -1.5;
inline constexpr double kUnparsableScore = -2.0;
inline constexpr double kFormatOkScore = 1.0;
inline constexpr double kFormatBadScore = -1.0;

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

enum class UnparsableReason { NoAnswerTag, MissingPerson, DuplicatePerson, UnknownName, MalformedLine };

/// Outcome of reading the answer block. `reason` is empty iff the answer is
/// complete, in which case `assignment` covers every person exactly once.
struct ParsedAnswer {
  std::optional<Assignment> assignment;
  std::optional<UnparsableReason> reason;

  bool complete() const { return assignment.has_value(); }
};

inline std::string_view outcome_name(const ParsedAnswer& p) {
  if (!p.reason) return "complete";
  switch (*p.reason) {
    case UnparsableReason::NoAnswerTag: return "no_answer_tag";
    case UnparsableReason::MissingPerson: return "missing_person";
    case UnparsableReason::DuplicatePerson: return "duplicate_person";
    case UnparsableReason::UnknownName: return "unknown_name";
    case UnparsableReason::MalformedLine: return "malformed_line";
  }
  return "?";
}

struct RewardBreakdown {
  double format_score = kFormatBadScore;
  double correctness_score = kUnparsableScore;
  double total = kFormatBadScore + kUnparsableScore;
  ParsedAnswer parsed;
};

/// Every total the grader can produce: {format} + {correctness}.
inline std::array<double, 6> attainable_totals() {
  std::array<double, 6> out{};
  std::size_t k = 0;
  for (double f : {kFormatOkScore, kFormatBadScore})
    for (double c : {kCorrectScore, kWrongScore, kUnparsableScore}) out[k++] = f + c;
  return out;
}

struct GradeOptions {
  // The prompt ends with an opening <think>, so generated continuations
  // usually lack it. When set, a response whose first non-space text is not
  // <think> gets one prepended before the format check.
  bool assume_primed_think = true;
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline bool only_space(std::string_view s) {
  for (char c : s)
    if (!is_space(c)) return false;
  return true;
}

inline std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

inline bool word_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '\'' || c == '-' || c == '_' || u >= 0x80;
}

inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !word_char(s[i])) ++i;
    std::size_t start = i;
    while (i < s.size() && word_char(s[i])) ++i;
    if (i > start) out.push_back(ascii_lower(s.substr(start, i - start)));
  }
  return out;
}

inline bool is_role_word(const std::string& w) {
  return w == "knight" || w == "knave" || w == "knights" || w == "knaves";
}

// Splits an answer block into items: lines, further split at "(k)" markers.
inline std::vector<std::string_view> answer_items(std::string_view block) {
  std::vector<std::string_view> items;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    if (end > start) items.push_back(block.substr(start, end - start));
  };
  std::size_t i = 0;
  while (i < block.size()) {
    if (block[i] == '\n') {
      flush(i);
      start = ++i;
      continue;
    }
    if (block[i] == '(') {
      std::size_t j = i + 1;
      while (j < block.size() && std::isdigit(static_cast<unsigned char>(block[j]))) ++j;
      if (j > i + 1 && j < block.size() && block[j] == ')') {
        flush(i);
        start = i = j + 1;
        continue;
      }
    }
    ++i;
  }
  flush(block.size());
  return items;
}

}  // namespace detail

/// Normalizes for the primed opening tag when requested.
inline std::string normalize_response(std::string_view response, const GradeOptions& opt = {}) {
  std::string out(response);
  if (!opt.assume_primed_think) return out;
  std::size_t first = 0;
  while (first < out.size() && detail::is_space(out[first])) ++first;
  if (std::string_view(out).substr(first).substr(0, kThinkOpen.size()) != kThinkOpen)
    out.insert(0, kThinkOpen);
  return out;
}

/// +1 iff the (normalized) response is exactly one think block followed by one
/// answer block, each tag appearing once, with only whitespace outside them.
inline double check_format(std::string_view response, const GradeOptions& opt = {}) {
  const std::string r = normalize_response(response, opt);
  const std::string_view v(r);
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose})
    if (detail::count_of(v, tag) != 1) return kFormatBadScore;
  const std::size_t to = v.find(kThinkOpen);
  const std::size_t tc = v.find(kThinkClose);
  const std::size_t ao = v.find(kAnswerOpen);
  const std::size_t ac = v.find(kAnswerClose);
  if (!(to < tc && tc < ao && ao < ac)) return kFormatBadScore;
  const std::size_t tc_end = tc + kThinkClose.size();
  const std::size_t ac_end = ac + kAnswerClose.size();
  if (!detail::only_space(v.substr(0, to)) || !detail::only_space(v.substr(tc_end, ao - tc_end)) ||
      !detail::only_space(v.substr(ac_end)))
    return kFormatBadScore;
  return kFormatOkScore;
}

/// Content of the innermost answer block: the last <answer> that is followed
/// by a </answer>, up to the first </answer> after it.
inline std::optional<std::string_view> answer_block(std::string_view response) {
  std::optional<std::size_t> open;
  for (std::size_t pos = response.find(kAnswerOpen); pos != std::string_view::npos;
       pos = response.find(kAnswerOpen, pos + 1)) {
    if (response.find(kAnswerClose, pos + kAnswerOpen.size()) == std::string_view::npos) break;
    open = pos;
  }
  if (!open) return std::nullopt;
  const std::size_t body = *open + kAnswerOpen.size();
  const std::size_t close = response.find(kAnswerClose, body);
  return response.substr(body, close - body);
}

/// Reads "Name is a knight|knave" fragments from the answer block.
///
/// Matching is case-insensitive and tolerant of whitespace, punctuation and
/// optional "(k)" markers. When the answer is not complete, the reason is the
/// first that applies in the order NoAnswerTag, UnknownName, DuplicatePerson,
/// MalformedLine, MissingPerson. An item that mentions a role word but holds
/// no fragment is malformed.
inline ParsedAnswer parse_answer(std::string_view response, const std::vector<std::string>& names) {
  auto block = answer_block(response);
  if (!block) return {std::nullopt, UnparsableReason::NoAnswerTag};

  std::vector<std::vector<std::string>> name_words;
  name_words.reserve(names.size());
  for (const auto& n : names) name_words.push_back(detail::words(n));

  std::vector<std::optional<Role>> roles(names.size());
  bool unknown = false, duplicate = false, malformed = false;

  for (std::string_view item : detail::answer_items(*block)) {
    const auto w = detail::words(item);
    bool has_fragment = false, has_role_word = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (detail::is_role_word(w[i])) has_role_word = true;
      if (!(i + 2 < w.size() && w[i] == "is" && w[i + 1] == "a" && (w[i + 2] == "knight" || w[i + 2] == "knave")))
        continue;
      if (i == 0) continue;  // no subject
      has_fragment = true;
      const Role role = w[i + 2] == "knight" ? Role::Knight : Role::Knave;
      // longest known name ending right before "is"
      std::optional<std::size_t> who;
      std::size_t best_len = 0;
      for (std::size_t k = 0; k < names.size(); ++k) {
        const auto& nw = name_words[k];
        if (nw.empty() || nw.size() > i || nw.size() <= best_len) continue;
        if (std::equal(nw.begin(), nw.end(), w.begin() + static_cast<std::ptrdiff_t>(i - nw.size()))) {
          who = k;
          best_len = nw.size();
        }
      }
      if (!who) {
        unknown = true;
      } else if (roles[*who]) {
        duplicate = true;
      } else {
        roles[*who] = role;
      }
    }
    if (has_role_word && !has_fragment) malformed = true;
  }

  if (unknown) return {std::nullopt, UnparsableReason::UnknownName};
  if (duplicate) return {std::nullopt, UnparsableReason::DuplicatePerson};
  if (malformed) return {std::nullopt, UnparsableReason::MalformedLine};
  std::vector<Role> out;
  out.reserve(names.size());
  for (const auto& r : roles) {
    if (!r) return {std::nullopt, UnparsableReason::MissingPerson};
    out.push_back(*r);
  }
  return {Assignment(std::move(out)), std::nullopt};
}

/// Grades one response against a puzzle with a stored solution. Format and
/// correctness are computed independently and summed.
inline RewardBreakdown score(std::string_view response, const Puzzle& p, const GradeOptions& opt = {}) {
  if (!p.solution()) throw StructuralError("cannot score against a puzzle without a stored solution");
  RewardBreakdown r;
  r.format_score = check_format(response, opt);
  r.parsed = parse_answer(response, p.names());
  if (!r.parsed.complete()) r.correctness_score = kUnparsableScore;
  else if (*r.parsed.assignment == *p.solution()) r.correctness_score = kCorrectScore;
  else r.correctness_score = kWrongScore;
  r.total = r.format_score + r.correctness_score;
  return r;
}

/// Wraps reasoning and answer text in the required tag structure.
inline std::string wrap_response(std::string_view think, std::string_view answer) {
  std::string out;
  out += kThinkOpen;
  out += '\n';
  out += think;
  out += '\n';
  out += kThinkClose;
  out += '\n';
  out += kAnswerOpen;
  out += '\n';
  out += answer;
  out += '\n';
  out += kAnswerClose;
  return out;
}

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;

  double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// Fraction of responses whose correctness score is the full +2.
inline Accuracy accuracy(std::span<const std::string> responses, std::span<const Puzzle> puzzles,
                         const GradeOptions& opt = {}) {
  if (responses.size() != puzzles.size())
    throw StructuralError("accuracy: " + std::to_string(responses.size()) + " responses for " +
                          std::to_string(puzzles.size()) + " puzzles");
  Accuracy acc;
  acc.total = responses.size();
  for (std::size_t i = 0; i < responses.size(); ++i)
    if (score(responses[i], puzzles[i], opt).correctness_score == kCorrectScore) ++acc.correct;
  return acc;
}

}  // namespace kkrl::reward
