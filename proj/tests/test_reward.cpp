#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"

namespace kkrl {
namespace {

using namespace reward;

const std::vector<std::string> kCaseStudyNames{"Evelyn", "Benjamin", "William"};

bool in_closure(double total) {
  // {+1, -1} + {+2, -1.5, -2}
  for (double t : {3.0, -0.5, -1.0, 1.0, -2.5, -3.0})
    if (total == t) return true;
  return false;
}

TEST(CheckFormat, CaseStudyResponseIsWellFormed) {
  EXPECT_EQ(check_format(test::read_file(test::source_path("tests/data/case_study_response.txt"))), 1.0);
}

TEST(CheckFormat, RejectsMissingOrRepeatedTags) {
  GradeOptions strict;
  strict.assume_primed_think = false;
  EXPECT_EQ(check_format("<answer>(1) A is a knight</answer>", strict), -1.0);
  EXPECT_EQ(check_format("<think>a</think><answer>x</answer><answer>y</answer>"), -1.0);
  EXPECT_EQ(check_format("<think>a</think> trailing <answer>x</answer>"), -1.0);
  EXPECT_EQ(check_format("<answer>x</answer><think>a</think>"), -1.0);
  EXPECT_EQ(check_format(" \n<think>a</think>\n\n<answer>x</answer>\n"), 1.0);
}

TEST(CheckFormat, PrimedThinkIsOptional) {
  const std::string continuation = "reasoning</think><answer>(1) A is a knight</answer>";
  EXPECT_EQ(check_format(continuation), 1.0);
  GradeOptions strict;
  strict.assume_primed_think = false;
  EXPECT_EQ(check_format(continuation, strict), -1.0);
  // a response that already opens with the tag is not double-prefixed
  EXPECT_EQ(normalize_response("  <think>x"), "  <think>x");
  EXPECT_EQ(normalize_response("x"), "<think>x");
}

TEST(ParseAnswer, CaseStudyAnswerBlock) {
  const auto p = parse_answer(
      "<answer>(1) Evelyn is a knight (2) Benjamin is a knight (3) William is a knight</answer>", kCaseStudyNames);
  ASSERT_TRUE(p.complete());
  EXPECT_EQ(*p.assignment, Assignment({Role::Knight, Role::Knight, Role::Knight}));
  EXPECT_EQ(outcome_name(p), "complete");
}

TEST(ParseAnswer, ReasonsInPriorityOrder) {
  const std::vector<std::string> names{"Zoey", "Ann", "Bo"};
  auto reason = [&](std::string_view r) { return parse_answer(r, names).reason; };
  EXPECT_EQ(reason("<answer>(1) Zoey is a knight (2) ...</answer>"), UnparsableReason::MissingPerson);
  EXPECT_EQ(reason("no tags here"), UnparsableReason::NoAnswerTag);
  EXPECT_EQ(reason("<answer>Zoey is a knight"), UnparsableReason::NoAnswerTag);
  // unknown beats duplicate beats malformed beats missing
  EXPECT_EQ(reason("<answer>Zed is a knight, Zoey is a knight, Zoey is a knave\nAnn: knave</answer>"),
            UnparsableReason::UnknownName);
  EXPECT_EQ(reason("<answer>Zoey is a knight, Zoey is a knave\nAnn: knave</answer>"),
            UnparsableReason::DuplicatePerson);
  EXPECT_EQ(reason("<answer>Zoey is a knight\nAnn: knave</answer>"), UnparsableReason::MalformedLine);
  EXPECT_EQ(reason("<answer>Zoey is a knight\nAnn is a knave</answer>"), UnparsableReason::MissingPerson);
}

TEST(ParseAnswer, LongestNameWins) {
  const std::vector<std::string> names{"Ann", "Mary Ann", "Lee"};
  const auto p = parse_answer("<answer>Mary Ann is a knave. Ann is a knight. LEE IS A KNIGHT</answer>", names);
  ASSERT_TRUE(p.complete()) << outcome_name(p);
  EXPECT_EQ(*p.assignment, Assignment({Role::Knight, Role::Knave, Role::Knight}));
}

TEST(ParseAnswer, UsesTheLastClosedAnswerBlock) {
  const std::vector<std::string> names{"A1", "B2"};
  const auto p = parse_answer(
      "<answer>A1 is a knave B2 is a knave</answer> <answer>A1 is a knight B2 is a knave</answer> <answer>junk",
      names);
  ASSERT_TRUE(p.complete());
  EXPECT_EQ(*p.assignment, Assignment({Role::Knight, Role::Knave}));
}

TEST(Score, WorkedExamples) {
  const Puzzle ap = test::case_study_puzzle();
  const auto case_study = score(test::read_file(test::source_path("tests/data/case_study_response.txt")), ap);
  EXPECT_EQ(case_study.format_score, 1.0);
  EXPECT_EQ(case_study.correctness_score, 2.0);
  EXPECT_EQ(case_study.total, 3.0);

  const auto wrong = score(wrap_response("hm", "(1) Evelyn is a knave (2) Benjamin is a knight (3) William is a knight"), ap);
  EXPECT_EQ(wrong.format_score, 1.0);
  EXPECT_EQ(wrong.correctness_score, -1.5);
  EXPECT_EQ(wrong.total, -0.5);

  const auto unclosed = score("<think>hm</think><answer>(1) Evelyn is a knight (2) Benjamin is a knight (3) William is a knight", ap);
  EXPECT_EQ(unclosed.format_score, -1.0);
  EXPECT_EQ(unclosed.correctness_score, -2.0);
  EXPECT_EQ(unclosed.total, -3.0);
}

TEST(Score, RequiresAStoredSolution) {
  const Puzzle bare = test::load_puzzle("tests/data/kk_example.json");
  EXPECT_THROW(score("x", bare), StructuralError);
}

TEST(Score, AttainableTotalsAreTheClosure) {
  auto totals = attainable_totals();
  std::sort(totals.begin(), totals.end());
  EXPECT_EQ(totals, (std::array<double, 6>{-3.0, -2.5, -1.0, -0.5, 1.0, 3.0}));
}

TEST(Accuracy, CountsFullCorrectnessOnly) {
  const Puzzle ap = test::case_study_puzzle();
  const std::string good = wrap_response("t", render_solution(*ap.solution(), ap.names()));
  const std::vector<std::string> one{good};
  const std::vector<Puzzle> p1{ap};
  EXPECT_EQ(accuracy(one, p1).value(), 1.0);
  const std::vector<std::string> five(5, "garbage");
  const std::vector<Puzzle> p5(5, ap);
  const auto a = accuracy(five, p5);
  EXPECT_EQ(a.correct, 0u);
  EXPECT_EQ(a.total, 5u);
  EXPECT_EQ(a.value(), 0.0);
  EXPECT_THROW(accuracy(one, p5), StructuralError);
}

// ---------------------------------------------------------------------------
// Golden transcript suite: hand-graded, frozen.

struct GoldenCase {
  std::string id;
  std::string puzzle;
  std::string response;
};

std::vector<GoldenCase> golden_cases() {
  std::vector<GoldenCase> out;
  for (const auto& line : test::read_lines(test::source_path("tests/data/golden_transcripts.jsonl"))) {
    const Json j = Json::parse(line);
    out.push_back({j.at("id"), j.at("puzzle"), j.at("response")});
  }
  return out;
}

Puzzle golden_puzzle(const std::string& which) {
  return which == "case_study" ? test::case_study_puzzle() : test::example_puzzle();
}

TEST(GoldenSuite, GraderMatchesFrozenGrades) {
  const auto cases = golden_cases();
  const auto expected = test::read_lines(test::source_path("tests/data/golden_grades.jsonl"));
  ASSERT_GE(cases.size(), 12u);
  ASSERT_EQ(cases.size(), expected.size());
  std::vector<std::string> responses;
  std::vector<Puzzle> puzzles;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Puzzle p = golden_puzzle(cases[i].puzzle);
    const corpus::GradeRow row{cases[i].id, 3, score(cases[i].response, p), std::nullopt};
    EXPECT_EQ(corpus::to_json(row).dump(), expected[i]) << cases[i].id;
    responses.push_back(cases[i].response);
    puzzles.push_back(p);
  }
  const auto acc = accuracy(responses, puzzles);
  EXPECT_EQ(acc.correct, 5u);
  EXPECT_EQ(acc.total, 16u);
}

TEST(GoldenSuite, CoversEveryReasonAndAttainableTotal) {
  std::set<std::string> outcomes;
  std::set<double> totals;
  for (const auto& line : test::read_lines(test::source_path("tests/data/golden_grades.jsonl"))) {
    const Json j = Json::parse(line);
    outcomes.insert(j.at("parse_outcome").get<std::string>());
    totals.insert(j.at("total").get<double>());
  }
  EXPECT_EQ(outcomes, (std::set<std::string>{"complete", "no_answer_tag", "missing_person", "duplicate_person",
                                             "unknown_name", "malformed_line"}));
  for (double t : attainable_totals()) EXPECT_TRUE(totals.contains(t)) << t;
}

// ---------------------------------------------------------------------------
// Properties

std::string random_bytes(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> kPieces{"<think>", "</think>", "<answer>", "</answer>", "(1) ", "(2)",
                                                " is a ", "knight", "knave", "Evelyn", "Benjamin", "William",
                                                "\n", " ", "<", ">", "/", "\xff", std::string(1, '\0')};
  std::string out;
  const std::size_t len = rng() % max_len;
  while (out.size() < len) {
    if (rng() % 3 == 0) out += kPieces[rng() % kPieces.size()];
    else out += static_cast<char>(rng() & 0xFF);
  }
  return out;
}

TEST(RewardProperties, TotalOnArbitraryBytes) {
  std::mt19937_64 rng(31337);
  const Puzzle ap = test::case_study_puzzle();
  for (int i = 0; i < 20000; ++i) {
    const std::string r = random_bytes(rng, 200);
    const auto g = score(r, ap);
    EXPECT_EQ(g.total, g.format_score + g.correctness_score);
    EXPECT_TRUE(in_closure(g.total)) << g.total;
    EXPECT_EQ(g.parsed.complete(), g.correctness_score != kUnparsableScore);
  }
}

TEST(RewardProperties, CorrectnessDependsOnlyOnTheAnswerBlock) {
  std::mt19937_64 rng(8);
  const Puzzle ap = test::case_study_puzzle();
  const std::vector<std::string> fragments{"Evelyn is a knight", "Evelyn is a knave", "Benjamin is a knight",
                                           "William is a knave", "William is a knight", "(1)", "\n", "Zed is a knave",
                                           "Benjamin knave", ", "};
  for (int i = 0; i < 2000; ++i) {
    std::string block;
    for (int k = 0, n = static_cast<int>(rng() % 6); k < n; ++k) block += fragments[rng() % fragments.size()] + " ";
    auto noise = [&] {
      std::string s;
      for (int k = 0, n = static_cast<int>(rng() % 40); k < n; ++k) s += "abc think/ knight\n"[rng() % 18];
      return s;
    };
    const std::string a = noise() + "<answer>" + block + "</answer>" + noise();
    const std::string b = "<think>" + noise() + "</think>\n<answer>" + block + "</answer>";
    EXPECT_EQ(score(a, ap).correctness_score, score(b, ap).correctness_score) << block;
  }
}

TEST(RewardProperties, RenderedTruthAlwaysScoresThree) {
  for (int level = 2; level <= 8; ++level) {
    GenConfig cfg;
    cfg.num_people = level;
    for (std::uint64_t i = 0; i < 10; ++i) {
      cfg.seed = puzzle_seed(77, i);
      const Puzzle p = generate(cfg);
      const std::string answer = render_solution(*p.solution(), p.names());
      EXPECT_EQ(score(wrap_response("Checked every claim.", answer), p).total, 3.0);
      // continuation form: the opening tag came from the prompt
      EXPECT_EQ(score("Checked.\n</think>\n<answer>\n" + answer + "\n</answer>", p).total, 3.0);
    }
  }
}

}  // namespace
}  // namespace kkrl
