#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace kkrl {
namespace {

using test::oracle_models;
using test::oracle_truth;

constexpr std::size_t Penelope = 0, David = 1, Zoey = 2;

Assignment roles(std::initializer_list<Role> r) { return Assignment(std::vector<Role>(r)); }

TEST(EvalStatement, SelfContradictoryIffIsAlwaysFalse) {
  const auto s = Statement::biconditional(Statement::atom(David, Role::Knight), Statement::atom(David, Role::Knave));
  for (std::uint64_t k = 0; k < 8; ++k) EXPECT_FALSE(eval_statement(s, Assignment::from_index(k, 3)));
}

TEST(EvalStatement, ZoeysImplicationHoldsInTheSolution) {
  const auto s = Statement::implication(Statement::atom(Penelope, Role::Knave), Statement::atom(David, Role::Knave));
  EXPECT_TRUE(eval_statement(s, roles({Role::Knave, Role::Knave, Role::Knight})));
  EXPECT_FALSE(eval_statement(s, roles({Role::Knave, Role::Knight, Role::Knight})));
}

TEST(EvalStatement, NegatedAtom) {
  EXPECT_TRUE(eval_statement(Statement::negation(Statement::atom(0, Role::Knave)), roles({Role::Knight})));
  EXPECT_FALSE(eval_statement(Statement::negation(Statement::atom(0, Role::Knave)), roles({Role::Knave})));
}

TEST(EvalStatement, TruthTables) {
  const auto p = Statement::atom(0, Role::Knight);
  const auto q = Statement::atom(1, Role::Knight);
  // index bits: person 0 knave = 1, person 1 knave = 2
  const bool imp[4] = {true, true, false, true};  // (p,q) = (T,T) (F,T) (T,F) (F,F)
  const bool iff[4] = {true, false, false, true};
  for (std::uint64_t k = 0; k < 4; ++k) {
    const auto a = Assignment::from_index(k, 2);
    EXPECT_EQ(eval_statement(Statement::implication(p, q), a), imp[k]) << k;
    EXPECT_EQ(eval_statement(Statement::biconditional(p, q), a), iff[k]) << k;
  }
}

TEST(EvalStatement, IndexOutOfRangeIsStructural) {
  EXPECT_THROW(eval_statement(Statement::atom(3, Role::Knight), roles({Role::Knight})), StructuralError);
}

TEST(CheckAssignment, ExamplePuzzle) {
  const Puzzle p = test::example_puzzle();
  EXPECT_TRUE(check_assignment(p, roles({Role::Knave, Role::Knave, Role::Knight})));
  EXPECT_FALSE(check_assignment(p, roles({Role::Knight, Role::Knight, Role::Knight})));
}

TEST(CheckAssignment, CaseStudyPuzzle) {
  EXPECT_TRUE(check_assignment(test::case_study_puzzle(), roles({Role::Knight, Role::Knight, Role::Knight})));
}

TEST(CheckAssignment, LengthMismatchIsStructural) {
  EXPECT_THROW(check_assignment(test::example_puzzle(), roles({Role::Knight})), StructuralError);
}

TEST(Solve, ExamplePuzzleHasOneModel) {
  const auto sols = solve(test::example_puzzle());
  ASSERT_EQ(sols.size(), 1u);
  EXPECT_EQ(sols[0], roles({Role::Knave, Role::Knave, Role::Knight}));
}

TEST(Solve, LiarHasNoModel) {
  Puzzle liar({"Ann"}, {Claim{0, Statement::atom(0, Role::Knave), 0}});
  EXPECT_TRUE(solve(liar).empty());
}

TEST(Solve, CaseStudyPuzzleIsAllKnights) {
  const auto sols = solve(test::case_study_puzzle());
  ASSERT_EQ(sols.size(), 1u);
  EXPECT_EQ(sols[0], roles({Role::Knight, Role::Knight, Role::Knight}));
}

TEST(Solve, LexicographicOrderKnightFirst) {
  // "I am a knight" is consistent for both roles
  Puzzle p({"Ann", "Bob"}, {Claim{0, Statement::atom(0, Role::Knight), 0}, Claim{1, Statement::atom(1, Role::Knight), 0}});
  const auto sols = solve(p);
  ASSERT_EQ(sols.size(), 4u);
  EXPECT_EQ(sols[0], roles({Role::Knight, Role::Knight}));
  EXPECT_EQ(sols[1], roles({Role::Knight, Role::Knave}));
  EXPECT_EQ(sols[2], roles({Role::Knave, Role::Knight}));
  EXPECT_EQ(sols[3], roles({Role::Knave, Role::Knave}));
  EXPECT_EQ(solve(p, 2).size(), 2u);
}

TEST(Solve, SixteenPeopleEnumerates) {
  std::vector<std::string> names;
  std::vector<Claim> claims;
  for (std::size_t i = 0; i < 16; ++i) {
    names.push_back("N" + std::to_string(i));
    claims.push_back(Claim{i, Statement::atom((i + 1) % 16, Role::Knight), 0});
  }
  // a ring of "my neighbour is a knight": all knights or all knaves
  const auto sols = solve(Puzzle(names, claims));
  ASSERT_EQ(sols.size(), 2u);
  EXPECT_EQ(sols[1].index(), 0xFFFFu);
}

TEST(AssignmentIndex, LittleEndianKnaveBits) {
  const auto a = Assignment::from_index(0b101, 3);
  EXPECT_EQ(a.at(0), Role::Knave);
  EXPECT_EQ(a.at(1), Role::Knight);
  EXPECT_EQ(a.at(2), Role::Knave);
  EXPECT_EQ(a.index(), 5u);
  EXPECT_THROW(a.at(3), StructuralError);
}

TEST(PuzzleValidation, RejectsBadConstruction) {
  const auto s = Statement::atom(0, Role::Knight);
  EXPECT_THROW(Puzzle({}, {}), StructuralError);
  EXPECT_THROW(Puzzle({"Ann", "ann"}, {Claim{0, s, 0}, Claim{1, s, 0}}), StructuralError);
  EXPECT_THROW(Puzzle({"Ann", ""}, {Claim{0, s, 0}, Claim{1, s, 0}}), StructuralError);
  EXPECT_THROW(Puzzle({"Ann", "Bob"}, {Claim{0, s, 0}}), StructuralError);
  EXPECT_THROW(Puzzle({"Ann", "Bob"}, {Claim{0, s, 0}, Claim{0, s, 0}}), StructuralError);
  EXPECT_THROW(Puzzle({"Ann"}, {Claim{0, Statement::atom(1, Role::Knight), 0}}), StructuralError);
  EXPECT_THROW(Puzzle({"Ann"}, {Claim{0, s, kClaimTemplateCount}}), StructuralError);
  std::vector<std::string> many(17, "x");
  for (std::size_t i = 0; i < many.size(); ++i) many[i] += std::to_string(i);
  EXPECT_THROW(Puzzle(many, {}), StructuralError);
}

TEST(PuzzleValidation, StoredSolutionMustBeTheUniqueModel) {
  const Puzzle p = test::example_puzzle();
  EXPECT_THROW(p.with_solution(roles({Role::Knight, Role::Knight, Role::Knight})), ValidationError);
  Puzzle two({"Ann"}, {Claim{0, Statement::atom(0, Role::Knight), 0}});
  EXPECT_THROW(two.with_solution(roles({Role::Knight})), ValidationError);
}

TEST(PuzzleValidation, ClaimsAreStoredInSpeakerOrder) {
  const auto s = Statement::atom(0, Role::Knight);
  Puzzle p({"Ann", "Bob"}, {Claim{1, s, 2}, Claim{0, s, 3}});
  EXPECT_EQ(p.claims()[0].speaker, 0u);
  EXPECT_EQ(p.claims()[0].template_id, 3);
}

// ---------------------------------------------------------------------------
// Properties

Statement xor_of(const Statement& p, const Statement& q) {
  return Statement::disjunction(Statement::conjunction(p, Statement::negation(q)),
                                Statement::conjunction(Statement::negation(p), q));
}

TEST(LogicProperties, AlgebraicIdentitiesHold) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const auto p = test::random_tree(rng, n, 3);
    const auto q = test::random_tree(rng, n, 3);
    const auto a = test::random_assignment(rng, n);
    const bool vp = eval_statement(p, a), vq = eval_statement(q, a);
    EXPECT_EQ(eval_statement(Statement::negation(Statement::negation(p)), a), vp);
    EXPECT_EQ(eval_statement(Statement::negation(Statement::conjunction(p, q)), a),
              eval_statement(Statement::disjunction(Statement::negation(p), Statement::negation(q)), a));
    EXPECT_EQ(eval_statement(Statement::negation(Statement::disjunction(p, q)), a),
              eval_statement(Statement::conjunction(Statement::negation(p), Statement::negation(q)), a));
    EXPECT_EQ(eval_statement(Statement::biconditional(p, q), a),
              eval_statement(Statement::negation(xor_of(p, q)), a));
    EXPECT_EQ(vp, oracle_truth(p, test::knave_mask(a)));
    EXPECT_EQ(vq, oracle_truth(q, test::knave_mask(a)));
  }
}

TEST(LogicProperties, CheckAssignmentIsConjunctionOfBiconditionals) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const Puzzle p = test::random_puzzle(rng, n, 2);
    const auto a = test::random_assignment(rng, n);
    std::optional<Statement> conj;
    for (const Claim& c : p.claims()) {
      auto b = Statement::biconditional(Statement::atom(c.speaker, Role::Knight), c.statement);
      conj = conj ? Statement::conjunction(*conj, b) : b;
    }
    EXPECT_EQ(check_assignment(p, a), eval_statement(*conj, a));
  }
}

TEST(LogicProperties, SolveIsSoundAndComplete) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 7;
    const Puzzle p = test::random_puzzle(rng, n, 2);
    const auto sols = solve(p);
    const auto expected = oracle_models(p);
    ASSERT_EQ(sols.size(), expected.size());
    std::vector<std::uint32_t> got;
    for (std::size_t i = 0; i < sols.size(); ++i) {
      EXPECT_TRUE(check_assignment(p, sols[i]));
      got.push_back(static_cast<std::uint32_t>(sols[i].index()));
      // lexicographic by person, Knight before Knave
      if (i) {
        EXPECT_TRUE(std::lexicographical_compare(sols[i - 1].roles().begin(), sols[i - 1].roles().end(),
                                                 sols[i].roles().begin(), sols[i].roles().end()));
      }
    }
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, expected);
    EXPECT_EQ(has_unique_solution(p), expected.size() == 1);
  }
}

TEST(Serialization, SexprCanonicalForm) {
  const auto s = Statement::biconditional(Statement::atom(1, Role::Knight), Statement::atom(1, Role::Knave));
  EXPECT_EQ(to_sexpr(s), "(iff (atom 1 knight) (atom 1 knave))");
  EXPECT_EQ(parse_sexpr("  ( iff (atom 1 knight)\n(atom 1 knave) ) "), s);
  EXPECT_EQ(to_sexpr(Statement::negation(Statement::atom(0, Role::Knave))), "(not (atom 0 knave))");
}

TEST(Serialization, RandomTreesRoundTripExactly) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = test::random_tree(rng, 8, 4);
    const std::string text = to_sexpr(s);
    EXPECT_EQ(parse_sexpr(text), s);
    EXPECT_EQ(to_sexpr(parse_sexpr(text)), text);
    const Json j = to_json(s);
    EXPECT_EQ(statement_from_json(j), s);
    EXPECT_EQ(to_json(statement_from_json(Json::parse(j.dump()))).dump(), j.dump());
  }
}

TEST(Serialization, PuzzleJsonRoundTrip) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Puzzle p = test::random_puzzle(rng, 1 + rng() % 5, 2);
    const Json j = to_json(p);
    const Puzzle back = puzzle_from_json(Json::parse(j.dump()));
    EXPECT_EQ(to_json(back).dump(), j.dump());
  }
  const Puzzle ex = test::example_puzzle();
  const Puzzle back = puzzle_from_json(to_json(ex));
  ASSERT_TRUE(back.solution().has_value());
  EXPECT_EQ(*back.solution(), *ex.solution());
}

TEST(Serialization, MalformedInputIsAParseError) {
  for (const char* bad : {"", "(", "(atom 1)", "(atom x knight)", "(atom 1 spy)", "(foo (atom 1 knight))",
                          "(not (atom 0 knight) (atom 1 knight))", "(and (atom 0 knight))", "(atom 0 knight) trailing",
                          "(atom -1 knight)"})
    EXPECT_THROW(parse_sexpr(bad), ParseError) << bad;
  std::string deep;
  for (int i = 0; i < 300; ++i) deep += "(not ";
  deep += "(atom 0 knight)";
  deep += std::string(300, ')');
  EXPECT_THROW(parse_sexpr(deep), ParseError);
  EXPECT_THROW(statement_from_json(Json::parse(R"({"op":"and","args":[{"op":"atom","person":0,"role":"knight"}]})")),
               ParseError);
}

}  // namespace
}  // namespace kkrl
