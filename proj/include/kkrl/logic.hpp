#pragma once

// Knights-and-knaves core: roles, claim formulas, assignments, puzzles and the
// exhaustive solver.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kkrl/error.hpp"

namespace kkrl {

enum class Role : std::uint8_t { Knight = 0, Knave = 1 };

inline std::string_view role_name(Role r) { return r == Role::Knight ? "knight" : "knave"; }

inline Role opposite(Role r) { return r == Role::Knight ? Role::Knave : Role::Knight; }

inline constexpr std::size_t kMaxPeople = 16;

// Number of frozen sentence templates a claim can be rendered with; the
// catalogue itself lives in genpuzzle.hpp.
inline constexpr int kClaimTemplateCount = 6;

enum class Op : std::uint8_t { Atom, Not, And, Or, Implies, Iff };

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::Atom: return "atom";
    case Op::Not: return "not";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Implies: return "implies";
    case Op::Iff: return "iff";
  }
  return "?";
}

inline bool is_binary(Op op) { return op != Op::Atom && op != Op::Not; }

/// Immutable propositional formula over atoms "person P is Role".
///
/// Nodes are shared, so copying a Statement is cheap and copies can be read
/// from any thread.
class Statement {
 public:
  static Statement atom(std::size_t person, Role role) {
    return Statement(std::make_shared<const Node>(Node{Op::Atom, person, role, {}, {}}));
  }
  static Statement negation(Statement s) { return unary(Op::Not, std::move(s)); }
  static Statement conjunction(Statement a, Statement b) {
    return binary(Op::And, std::move(a), std::move(b));
  }
  static Statement disjunction(Statement a, Statement b) {
    return binary(Op::Or, std::move(a), std::move(b));
  }
  static Statement implication(Statement a, Statement b) {
    return binary(Op::Implies, std::move(a), std::move(b));
  }
  static Statement biconditional(Statement a, Statement b) {
    return binary(Op::Iff, std::move(a), std::move(b));
  }
  static Statement binary(Op op, Statement a, Statement b) {
    if (!is_binary(op)) throw StructuralError("not a binary connective: " + std::string(op_name(op)));
    return Statement(
        std::make_shared<const Node>(Node{op, 0, Role::Knight, std::move(a.node_), std::move(b.node_)}));
  }

  Op op() const { return node_->op; }
  std::size_t person() const { return node_->person; }
  Role role() const { return node_->role; }

  // Sole operand of Not, left operand of binary connectives.
  Statement lhs() const { return Statement(node_->lhs); }
  Statement rhs() const { return Statement(node_->rhs); }

  /// Nesting of connectives; an atom has depth 0.
  std::size_t depth() const {
    switch (op()) {
      case Op::Atom: return 0;
      case Op::Not: return 1 + lhs().depth();
      default: return 1 + std::max(lhs().depth(), rhs().depth());
    }
  }

  /// Largest person index mentioned.
  std::size_t max_person() const {
    switch (op()) {
      case Op::Atom: return person();
      case Op::Not: return lhs().max_person();
      default: return std::max(lhs().max_person(), rhs().max_person());
    }
  }

  friend bool operator==(const Statement& a, const Statement& b) {
    if (a.node_ == b.node_) return true;
    if (a.op() != b.op()) return false;
    switch (a.op()) {
      case Op::Atom: return a.person() == b.person() && a.role() == b.role();
      case Op::Not: return a.lhs() == b.lhs();
      default: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    }
  }

 private:
  struct Node {
    Op op;
    std::size_t person;
    Role role;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit Statement(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static Statement unary(Op op, Statement s) {
    return Statement(std::make_shared<const Node>(Node{op, 0, Role::Knight, std::move(s.node_), {}}));
  }

  std::shared_ptr<const Node> node_;
};

/// Role per person, indexed by person.
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(std::vector<Role> roles) : roles_(std::move(roles)) {}

  /// Little-endian bit encoding: bit i is person i, Knight = 0, Knave = 1.
  static Assignment from_index(std::uint64_t code, std::size_t num_people) {
    std::vector<Role> roles(num_people);
    for (std::size_t i = 0; i < num_people; ++i)
      roles[i] = ((code >> i) & 1U) ? Role::Knave : Role::Knight;
    return Assignment(std::move(roles));
  }

  std::uint64_t index() const {
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < roles_.size(); ++i)
      if (roles_[i] == Role::Knave) code |= std::uint64_t{1} << i;
    return code;
  }

  std::size_t size() const { return roles_.size(); }
  bool empty() const { return roles_.empty(); }
  Role operator[](std::size_t i) const { return roles_[i]; }
  Role at(std::size_t i) const {
    if (i >= roles_.size()) throw StructuralError("person index " + std::to_string(i) + " out of range");
    return roles_[i];
  }
  const std::vector<Role>& roles() const { return roles_; }

  friend bool operator==(const Assignment&, const Assignment&) = default;
  friend auto operator<=>(const Assignment&, const Assignment&) = default;

 private:
  std::vector<Role> roles_;
};

inline bool eval_statement(const Statement& s, const Assignment& a) {
  switch (s.op()) {
    case Op::Atom: return a.at(s.person()) == s.role();
    case Op::Not: return !eval_statement(s.lhs(), a);
    case Op::And: return eval_statement(s.lhs(), a) && eval_statement(s.rhs(), a);
    case Op::Or: return eval_statement(s.lhs(), a) || eval_statement(s.rhs(), a);
    case Op::Implies: return !eval_statement(s.lhs(), a) || eval_statement(s.rhs(), a);
    case Op::Iff: return eval_statement(s.lhs(), a) == eval_statement(s.rhs(), a);
  }
  return false;
}

struct Claim {
  std::size_t speaker;
  Statement statement;
  int template_id;
};

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class Puzzle;
inline std::vector<Assignment> solve(const Puzzle& p);

/// A puzzle instance: one claim per inhabitant, plus the unique solution when
/// known. Construction validates structure and, if a solution is supplied,
/// that it is the only model.
class Puzzle {
 public:
  Puzzle(std::vector<std::string> names, std::vector<Claim> claims,
         std::optional<Assignment> solution = std::nullopt)
      : names_(std::move(names)), claims_(std::move(claims)) {
    const std::size_t n = names_.size();
    if (n == 0 || n > kMaxPeople)
      throw StructuralError("puzzle must have between 1 and 16 people, got " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (names_[i].empty()) throw StructuralError("empty person name");
      for (std::size_t j = 0; j < i; ++j)
        if (ascii_lower(names_[i]) == ascii_lower(names_[j]))
          throw StructuralError("duplicate person name: " + names_[i]);
    }
    if (claims_.size() != n)
      throw StructuralError("expected one claim per person (" + std::to_string(n) + "), got " +
                            std::to_string(claims_.size()));
    std::vector<bool> seen(n, false);
    for (const Claim& c : claims_) {
      if (c.speaker >= n) throw StructuralError("speaker index out of range");
      if (seen[c.speaker]) throw StructuralError("person " + names_[c.speaker] + " speaks twice");
      seen[c.speaker] = true;
      if (c.statement.max_person() >= n) throw StructuralError("statement mentions unknown person index");
      if (c.template_id < 0 || c.template_id >= kClaimTemplateCount)
        throw StructuralError("template id out of range: " + std::to_string(c.template_id));
    }
    std::sort(claims_.begin(), claims_.end(),
              [](const Claim& a, const Claim& b) { return a.speaker < b.speaker; });
    if (solution) {
      if (solution->size() != n) throw StructuralError("solution length does not match people count");
      auto models = solve(*this);
      if (models.size() != 1 || models.front() != *solution)
        throw ValidationError("stored solution is not the unique model (" + std::to_string(models.size()) +
                              " models)");
      solution_ = std::move(solution);
    }
  }

  std::size_t num_people() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Claim>& claims() const { return claims_; }
  const std::optional<Assignment>& solution() const { return solution_; }

  Puzzle with_solution(Assignment a) const { return Puzzle(names_, claims_, std::move(a)); }

 private:
  std::vector<std::string> names_;
  std::vector<Claim> claims_;  // sorted by speaker
  std::optional<Assignment> solution_;
};

/// True iff every speaker's claim is true exactly when the speaker is a knight.
inline bool check_assignment(const Puzzle& p, const Assignment& a) {
  if (a.size() != p.num_people())
    throw StructuralError("assignment has " + std::to_string(a.size()) + " roles, puzzle has " +
                          std::to_string(p.num_people()) + " people");
  return std::all_of(p.claims().begin(), p.claims().end(), [&](const Claim& c) {
    return eval_statement(c.statement, a) == (a[c.speaker] == Role::Knight);
  });
}

namespace detail {

// Assignment number k in lexicographic order (person 0 most significant,
// Knight < Knave).
inline Assignment lex_assignment(std::uint64_t k, std::size_t n) {
  std::vector<Role> roles(n);
  for (std::size_t i = 0; i < n; ++i) roles[i] = ((k >> (n - 1 - i)) & 1U) ? Role::Knave : Role::Knight;
  return Assignment(std::move(roles));
}

}  // namespace detail

/// Every satisfying assignment in lexicographic order, by full enumeration.
/// Stops after `limit` models when a limit is given.
inline std::vector<Assignment> solve(const Puzzle& p, std::optional<std::size_t> limit) {
  const std::size_t n = p.num_people();
  std::vector<Assignment> out;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t k = 0; k < total; ++k) {
    Assignment a = detail::lex_assignment(k, n);
    if (check_assignment(p, a)) {
      out.push_back(std::move(a));
      if (limit && out.size() >= *limit) break;
    }
  }
  return out;
}

inline std::vector<Assignment> solve(const Puzzle& p) { return solve(p, std::nullopt); }

inline bool has_unique_solution(const Puzzle& p) { return solve(p, 2).size() == 1; }

}  // namespace kkrl
