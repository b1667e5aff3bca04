#pragma once

// Text and JSON forms of statements, assignments and puzzles.
//
//   (iff (atom 1 knight) (atom 1 knave))
//   {"op":"iff","args":[{"op":"atom","person":1,"role":"knight"}, ...]}

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kkrl/error.hpp"
#include "kkrl/logic.hpp"

namespace kkrl {

using Json = nlohmann::ordered_json;

inline Role parse_role(std::string_view s) {
  if (s == "knight") return Role::Knight;
  if (s == "knave") return Role::Knave;
  throw ParseError("unknown role '" + std::string(s) + "'");
}

inline std::optional<Op> parse_op(std::string_view s) {
  for (Op op : {Op::Atom, Op::Not, Op::And, Op::Or, Op::Implies, Op::Iff})
    if (op_name(op) == s) return op;
  return std::nullopt;
}

inline void write_sexpr(const Statement& s, std::string& out) {
  out += '(';
  out += op_name(s.op());
  switch (s.op()) {
    case Op::Atom:
      out += ' ';
      out += std::to_string(s.person());
      out += ' ';
      out += role_name(s.role());
      break;
    case Op::Not:
      out += ' ';
      write_sexpr(s.lhs(), out);
      break;
    default:
      out += ' ';
      write_sexpr(s.lhs(), out);
      out += ' ';
      write_sexpr(s.rhs(), out);
  }
  out += ')';
}

inline std::string to_sexpr(const Statement& s) {
  std::string out;
  write_sexpr(s, out);
  return out;
}

namespace detail {

class SexprReader {
 public:
  explicit SexprReader(std::string_view text) : text_(text) {}

  Statement read_all() {
    Statement s = read();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return s;
  }

 private:
  Statement read() {
    if (++depth_ > kMaxDepth) fail("nesting too deep");
    expect('(');
    std::string head = word();
    auto op = parse_op(head);
    if (!op) fail("unknown operator '" + head + "'");
    std::optional<Statement> result;
    switch (*op) {
      case Op::Atom: {
        std::string idx = word();
        if (idx.empty() || idx.size() > 6 ||
            idx.find_first_not_of("0123456789") != std::string::npos)
          fail("bad person index '" + idx + "'");
        result = Statement::atom(std::stoul(idx), parse_role(word()));
        break;
      }
      case Op::Not: result = Statement::negation(read()); break;
      default: {
        Statement a = read();
        Statement b = read();
        result = Statement::binary(*op, std::move(a), std::move(b));
      }
    }
    expect(')');
    --depth_;
    return *result;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string word() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (start == pos_) fail("expected a word");
    return std::string(text_.substr(start, pos_ - start));
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("s-expression: " + msg + " at offset " + std::to_string(pos_));
  }

  static constexpr int kMaxDepth = 256;
  std::string_view text_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace detail

inline Statement parse_sexpr(std::string_view text) { return detail::SexprReader(text).read_all(); }

inline Json to_json(const Statement& s) {
  Json j;
  j["op"] = op_name(s.op());
  switch (s.op()) {
    case Op::Atom:
      j["person"] = s.person();
      j["role"] = role_name(s.role());
      break;
    case Op::Not: j["args"] = Json::array({to_json(s.lhs())}); break;
    default: j["args"] = Json::array({to_json(s.lhs()), to_json(s.rhs())});
  }
  return j;
}

inline Statement statement_from_json(const Json& j, int depth = 0) {
  if (depth > 256) throw ParseError("statement JSON nested too deep");
  try {
    auto op = parse_op(j.at("op").get<std::string>());
    if (!op) throw ParseError("unknown operator " + j.at("op").dump());
    if (*op == Op::Atom)
      return Statement::atom(j.at("person").get<std::size_t>(), parse_role(j.at("role").get<std::string>()));
    const Json& args = j.at("args");
    const std::size_t arity = *op == Op::Not ? 1 : 2;
    if (!args.is_array() || args.size() != arity)
      throw ParseError(std::string(op_name(*op)) + " expects " + std::to_string(arity) + " args");
    if (*op == Op::Not) return Statement::negation(statement_from_json(args[0], depth + 1));
    return Statement::binary(*op, statement_from_json(args[0], depth + 1), statement_from_json(args[1], depth + 1));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("statement JSON: ") + e.what());
  }
}

inline Json to_json(const Assignment& a) {
  Json j = Json::array();
  for (Role r : a.roles()) j.push_back(role_name(r));
  return j;
}

inline Assignment assignment_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("assignment must be an array of roles");
  std::vector<Role> roles;
  for (const auto& r : j) {
    if (!r.is_string()) throw ParseError("role must be a string");
    roles.push_back(parse_role(r.get<std::string>()));
  }
  return Assignment(std::move(roles));
}

inline Json to_json(const Puzzle& p) {
  Json j;
  j["names"] = p.names();
  Json claims = Json::array();
  for (const Claim& c : p.claims()) {
    Json cj;
    cj["speaker"] = c.speaker;
    cj["template"] = c.template_id;
    cj["statement"] = to_json(c.statement);
    claims.push_back(std::move(cj));
  }
  j["claims"] = std::move(claims);
  if (p.solution()) j["solution"] = to_json(*p.solution());
  return j;
}

/// Reads a puzzle object. A "statement" may be given as a JSON AST or as an
/// s-expression string. A present "solution" is re-verified.
inline Puzzle puzzle_from_json(const Json& j) {
  try {
    auto names = j.at("names").get<std::vector<std::string>>();
    std::vector<Claim> claims;
    for (const auto& cj : j.at("claims")) {
      const Json& sj = cj.at("statement");
      Statement s = sj.is_string() ? parse_sexpr(sj.get<std::string>()) : statement_from_json(sj);
      claims.push_back(Claim{cj.at("speaker").get<std::size_t>(), std::move(s), cj.value("template", 0)});
    }
    std::optional<Assignment> solution;
    if (j.contains("solution") && !j["solution"].is_null()) solution = assignment_from_json(j["solution"]);
    return Puzzle(std::move(names), std::move(claims), std::move(solution));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("puzzle JSON: ") + e.what());
  }
}

/// Canonical structural key: the claim formulas in speaker order, ignoring
/// names and sentence templates.
inline std::string structure_key(const Puzzle& p) {
  std::string key;
  for (const Claim& c : p.claims()) {
    write_sexpr(c.statement, key);
    key += ';';
  }
  return key;
}

}  // namespace kkrl
