#pragma once

// Seeded puzzle generation and English rendering.

#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kkrl/error.hpp"
#include "kkrl/logic.hpp"
#include "kkrl/parallel.hpp"
#include "kkrl/rng.hpp"

namespace kkrl {

struct OperatorWeights {
  double atom = 3.0;
  double negation = 1.0;
  double conjunction = 1.0;
  double disjunction = 1.0;
  double implication = 1.0;
  double biconditional = 1.0;

  std::array<double, 6> as_array() const {
    return {atom, negation, conjunction, disjunction, implication, biconditional};
  }
};

/// Parses "atom=3,not=1,and=1,or=1,implies=1,iff=1". Unlisted keys keep their
/// current value in `base`.
inline OperatorWeights parse_operator_weights(std::string_view text, OperatorWeights base = {}) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(pos, end - pos);
    std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) throw ParseError("weight entry without '=': " + std::string(item));
    std::string key(item.substr(0, eq));
    double value = 0;
    try {
      std::size_t used = 0;
      std::string num(item.substr(eq + 1));
      value = std::stod(num, &used);
      if (used != num.size()) throw ParseError("bad weight value: " + num);
    } catch (const std::logic_error&) {
      throw ParseError("bad weight value in '" + std::string(item) + "'");
    }
    if (key == "atom") base.atom = value;
    else if (key == "not") base.negation = value;
    else if (key == "and") base.conjunction = value;
    else if (key == "or") base.disjunction = value;
    else if (key == "implies") base.implication = value;
    else if (key == "iff") base.biconditional = value;
    else throw ParseError("unknown operator weight key: " + key);
    pos = end + 1;
  }
  return base;
}

struct GenConfig {
  int num_people = 3;
  int max_depth = 2;  // connective nesting bound; atoms have depth 0
  OperatorWeights operator_weights;
  std::uint64_t seed = kDefaultSeed;
  int max_rejections = 10000;

  void validate() const {
    if (num_people < 2 || num_people > 8)
      throw StructuralError("num_people must be in [2, 8], got " + std::to_string(num_people));
    if (max_depth < 1) throw StructuralError("max_depth must be >= 1");
    if (max_rejections < 1) throw StructuralError("max_rejections must be >= 1");
    double total = 0;
    for (double w : operator_weights.as_array()) {
      if (!(w >= 0) || w == std::numeric_limits<double>::infinity())
        throw StructuralError("operator weights must be finite and nonnegative");
      total += w;
    }
    if (total <= 0) throw StructuralError("operator weights are all zero");
  }
};

class NameBank {
 public:
  explicit NameBank(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 8) throw StructuralError("name bank needs at least 8 names");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const std::string& n = names_[i];
      if (n.empty()) throw StructuralError("empty name in name bank");
      for (char c : n)
        if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')')
          throw StructuralError("name bank entry contains whitespace or parentheses: '" + n + "'");
      for (std::size_t j = 0; j < i; ++j)
        if (ascii_lower(names_[j]) == ascii_lower(n)) throw StructuralError("duplicate name in bank: " + n);
    }
  }

  /// One name per line; blank lines and lines starting with '#' are skipped.
  static NameBank from_stream(std::istream& in) {
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      std::size_t start = 0;
      while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
      line.erase(0, start);
      if (line.empty() || line.front() == '#') continue;
      names.push_back(line);
    }
    return NameBank(std::move(names));
  }

  static NameBank from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open name bank file: " + path);
    return from_stream(in);
  }

  static const NameBank& default_bank() {
    static const NameBank bank({
        "Penelope", "David",    "Zoey",     "Evelyn",    "Benjamin", "William",   "Olivia",  "Liam",
        "Emma",     "Noah",     "Ava",      "Elijah",    "Sophia",   "James",     "Isabella", "Lucas",
        "Mia",      "Henry",    "Amelia",   "Alexander", "Harper",   "Michael",   "Abigail", "Daniel",
        "Emily",    "Jacob",    "Ella",     "Logan",     "Scarlett", "Jackson",   "Grace",   "Sebastian",
        "Chloe",    "Jack",     "Victoria", "Aiden",     "Riley",    "Owen",      "Aria",    "Samuel",
        "Lily",     "Matthew",  "Aurora",   "Joseph",    "Zoe",      "Luke",      "Nora",    "Gabriel",
    });
    return bank;
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

namespace detail {

inline Statement random_statement(Rng& rng, const GenConfig& cfg, int remaining_depth) {
  const auto n = static_cast<std::uint64_t>(cfg.num_people);
  auto atom = [&] {
    std::size_t person = uniform_below(rng, n);
    Role role = uniform_below(rng, 2) == 0 ? Role::Knight : Role::Knave;
    return Statement::atom(person, role);
  };
  if (remaining_depth <= 0) return atom();
  const auto w = cfg.operator_weights.as_array();
  double total = 0;
  for (double x : w) total += x;
  double u = uniform_unit(rng) * total;
  std::size_t pick = 0;
  for (; pick + 1 < w.size(); ++pick) {
    if (u < w[pick]) break;
    u -= w[pick];
  }
  // guard against landing on a trailing zero weight through rounding
  while (w[pick] == 0) --pick;
  static constexpr std::array<Op, 6> kOps{Op::Atom, Op::Not, Op::And, Op::Or, Op::Implies, Op::Iff};
  const Op op = kOps[pick];
  if (op == Op::Atom) return atom();
  if (op == Op::Not) return Statement::negation(random_statement(rng, cfg, remaining_depth - 1));
  Statement a = random_statement(rng, cfg, remaining_depth - 1);
  Statement b = random_statement(rng, cfg, remaining_depth - 1);
  return Statement::binary(op, std::move(a), std::move(b));
}

}  // namespace detail

/// Rejection-samples claims until the puzzle has exactly one model. The result
/// is a pure function of (cfg, bank).
inline Puzzle generate(const GenConfig& cfg, const NameBank& bank = NameBank::default_bank()) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.num_people);
  if (bank.size() < n) throw StructuralError("name bank smaller than num_people");
  Rng rng(cfg.seed);

  // partial Fisher-Yates over the bank
  std::vector<std::string> pool = bank.names();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::string> names(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));

  for (int attempt = 1; attempt <= cfg.max_rejections; ++attempt) {
    std::vector<Claim> claims;
    claims.reserve(n);
    for (std::size_t speaker = 0; speaker < n; ++speaker) {
      Statement s = detail::random_statement(rng, cfg, cfg.max_depth);
      int tmpl = static_cast<int>(uniform_below(rng, kClaimTemplateCount));
      claims.push_back(Claim{speaker, std::move(s), tmpl});
    }
    Puzzle candidate(names, claims);
    auto models = solve(candidate, 2);
    if (models.size() == 1) return Puzzle(std::move(names), std::move(claims), std::move(models.front()));
  }
  throw GenerationError("no unique-solution puzzle within " + std::to_string(cfg.max_rejections) +
                            " attempts (num_people=" + std::to_string(cfg.num_people) + ")",
                        static_cast<std::size_t>(cfg.max_rejections));
}

/// Seed of puzzle `index` in a batch drawn from master seed `seed`.
inline std::uint64_t puzzle_seed(std::uint64_t seed, std::uint64_t index) { return derive_seed(seed, {index}); }

inline std::vector<Puzzle> generate_batch(const GenConfig& cfg, std::size_t count,
                                          const NameBank& bank = NameBank::default_bank(), std::size_t jobs = 1) {
  cfg.validate();
  std::vector<std::optional<Puzzle>> slots(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    GenConfig c = cfg;
    c.seed = puzzle_seed(cfg.seed, i);
    slots[i] = generate(c, bank);
  });
  std::vector<Puzzle> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline bool is_simple(const Statement& s) { return s.op() == Op::Atom || (s.op() == Op::Not && s.lhs().op() == Op::Atom); }

inline std::string render_clause(const Statement& s, const std::vector<std::string>& names, bool top);

inline std::string render_operand(const Statement& s, const std::vector<std::string>& names) {
  if (is_simple(s)) return render_clause(s, names, false);
  return "(" + render_clause(s, names, false) + ")";
}

inline std::string render_clause(const Statement& s, const std::vector<std::string>& names, bool top) {
  switch (s.op()) {
    case Op::Atom: return names.at(s.person()) + " is a " + std::string(role_name(s.role()));
    case Op::Not: {
      Statement inner = s.lhs();
      if (inner.op() == Op::Atom)
        return names.at(inner.person()) + " is not a " + std::string(role_name(inner.role()));
      return "it is not the case that " + render_operand(inner, names);
    }
    case Op::And: return render_operand(s.lhs(), names) + " and " + render_operand(s.rhs(), names);
    case Op::Or: return render_operand(s.lhs(), names) + " or " + render_operand(s.rhs(), names);
    case Op::Implies:
      return std::string(top ? "If " : "if ") + render_operand(s.lhs(), names) + " then " +
             render_operand(s.rhs(), names);
    case Op::Iff: return render_operand(s.lhs(), names) + " if and only if " + render_operand(s.rhs(), names);
  }
  return {};
}

}  // namespace detail

/// English form of a claim, e.g. "If Penelope is a knave then David is a knave".
inline std::string render_statement(const Statement& s, const std::vector<std::string>& names) {
  return detail::render_clause(s, names, true);
}

/// The frozen sentence template catalogue, indexed by template id.
inline std::string render_claim(const std::string& speaker, const std::string& text, int template_id) {
  switch (template_id) {
    case 0: return speaker + " said that " + text + ".";
    case 1: return speaker + " told you that " + text + ".";
    case 2: return speaker + " noted, \"" + text + "\".";
    case 3: return "According to " + speaker + ", \"" + text + "\".";
    case 4: return speaker + " commented, \"" + text + "\".";
    case 5: return "In a statement by " + speaker + ": \"" + text + "\".";
    default: throw StructuralError("unknown template id " + std::to_string(template_id));
  }
}

inline constexpr std::string_view kPuzzlePreamble =
    "A very special island is inhabited only by knights and knaves. Knights always tell the truth, and knaves "
    "always lie.";
inline constexpr std::string_view kPuzzleQuestion = "So who is a knight and who is a knave?";

/// "A", "A and B", "A, B, and C".
inline std::string join_names(const std::vector<std::string>& names) {
  if (names.size() == 1) return names[0];
  if (names.size() == 2) return names[0] + " and " + names[1];
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i + 1 == names.size()) out += "and ";
    out += names[i];
    if (i + 1 < names.size()) out += ", ";
  }
  return out;
}

inline std::string render_text(const Puzzle& p) {
  const auto& names = p.names();
  std::string out(kPuzzlePreamble);
  out += " You meet " + std::to_string(names.size()) + (names.size() == 1 ? " inhabitant: " : " inhabitants: ");
  out += join_names(names) + ".";
  for (const Claim& c : p.claims()) {
    out += ' ';
    out += render_claim(names[c.speaker], render_statement(c.statement, names), c.template_id);
  }
  out += ' ';
  out += kPuzzleQuestion;
  return out;
}

/// "(1) Penelope is a knave\n(2) David is a knave\n(3) Zoey is a knight".
inline std::string render_solution(const Assignment& a, const std::vector<std::string>& names) {
  if (a.size() != names.size()) throw StructuralError("assignment and name list lengths differ");
  std::string out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) out += '\n';
    out += "(" + std::to_string(i + 1) + ") " + names[i] + " is a " + std::string(role_name(a[i]));
  }
  return out;
}

}  // namespace kkrl
