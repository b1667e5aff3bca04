#pragma once

// Dataset construction, transcript grading and evaluation reports.
//
// Dataset records and grade rows are JSON Lines (UTF-8, one object per line,
// LF). Record ids look like "train-L3-0007" / "eval-L8-0099".

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kkrl/error.hpp"
#include "kkrl/genpuzzle.hpp"
#include "kkrl/logic.hpp"
#include "kkrl/logic_io.hpp"
#include "kkrl/parallel.hpp"
#include "kkrl/prompts.hpp"
#include "kkrl/report.hpp"
#include "kkrl/reward.hpp"
#include "kkrl/rng.hpp"

namespace kkrl::corpus {

struct SplitSpec {
  std::set<int> train_levels{3, 4, 5, 6, 7};
  std::set<int> ood_levels{2, 8};
  std::size_t train_per_level = 900;
  std::size_t eval_per_level = 100;
  std::uint64_t seed = kDefaultSeed;

  /// Eval covers every train level plus the OOD levels.
  std::set<int> eval_levels() const {
    std::set<int> out = train_levels;
    out.insert(ood_levels.begin(), ood_levels.end());
    return out;
  }

  LevelSplit level_split() const { return LevelSplit{train_levels, ood_levels}; }

  void validate() const {
    for (int l : eval_levels())
      if (l < 2 || l > 8) throw StructuralError("levels must be in [2, 8], got " + std::to_string(l));
    for (int l : ood_levels)
      if (train_levels.contains(l)) throw StructuralError("level " + std::to_string(l) + " is both train and OOD");
  }
};

struct DatasetRecord {
  std::string id;
  Puzzle puzzle;
  std::string quiz;
  std::string solution_text;
  std::array<std::string, 4> prompts;  // indexed like kAllVariants

  int num_people() const { return static_cast<int>(puzzle.num_people()); }
  const std::string& prompt(MotivationVariant v) const { return prompts[static_cast<std::size_t>(v)]; }

  static DatasetRecord make(std::string id, Puzzle p) {
    if (!p.solution()) throw StructuralError("dataset puzzle must carry its solution");
    DatasetRecord r{std::move(id), std::move(p), {}, {}, {}};
    r.quiz = render_text(r.puzzle);
    r.solution_text = render_solution(*r.puzzle.solution(), r.puzzle.names());
    for (auto v : kAllVariants) r.prompts[static_cast<std::size_t>(v)] = build_prompt(r.puzzle, v).rendered;
    return r;
  }
};

inline std::string record_id(std::string_view split, int level, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*s-L%d-%04zu", static_cast<int>(split.size()), split.data(), level, index);
  return buf;
}

inline Json to_json(const DatasetRecord& r) {
  Json j;
  j["id"] = r.id;
  j["num_people"] = r.num_people();
  j["puzzle"] = to_json(r.puzzle);
  j["quiz"] = r.quiz;
  j["solution_text"] = r.solution_text;
  for (auto v : kAllVariants) j["prompt_" + std::string(variant_name(v))] = r.prompt(v);
  return j;
}

/// Reads a record. The puzzle's stored solution is re-verified as unique, and
/// in checked mode the rendered fields must match a fresh rendering.
inline DatasetRecord record_from_json(const Json& j, bool checked = true) {
  try {
    Puzzle p = puzzle_from_json(j.at("puzzle"));
    if (!p.solution()) throw ValidationError("record puzzle has no solution");
    if (j.at("num_people").get<std::size_t>() != p.num_people())
      throw ValidationError("num_people does not match the puzzle");
    DatasetRecord r{j.at("id").get<std::string>(), std::move(p), j.at("quiz").get<std::string>(),
                    j.at("solution_text").get<std::string>(), {}};
    for (auto v : kAllVariants)
      r.prompts[static_cast<std::size_t>(v)] = j.at("prompt_" + std::string(variant_name(v))).get<std::string>();
    if (checked) {
      DatasetRecord fresh = DatasetRecord::make(r.id, r.puzzle);
      if (fresh.quiz != r.quiz || fresh.solution_text != r.solution_text || fresh.prompts != r.prompts)
        throw ValidationError("record " + r.id + " does not re-render from its puzzle");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset record: ") + e.what());
  }
}

inline bool operator==(const DatasetRecord& a, const DatasetRecord& b) {
  return a.id == b.id && to_json(a.puzzle) == to_json(b.puzzle) && a.quiz == b.quiz &&
         a.solution_text == b.solution_text && a.prompts == b.prompts;
}

inline void write_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<DatasetRecord> read_jsonl(std::istream& in, bool checked = true) {
  std::vector<DatasetRecord> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    DatasetRecord r = record_from_json(j, checked);
    if (!ids.insert(r.id).second) throw ValidationError("duplicate record id " + r.id);
    out.push_back(std::move(r));
  }
  return out;
}

struct Dataset {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> eval;
};

namespace detail {

// Pulls `count` structurally distinct puzzles for one level from the seeded
// candidate stream, skipping any structure already in `taken`. Candidates are
// generated in parallel chunks but consumed in index order.
inline std::vector<Puzzle> draw_level(const GenConfig& level_cfg, std::size_t count, std::uint64_t stream_seed,
                                      std::unordered_set<std::string>& taken, const NameBank& bank,
                                      std::size_t jobs, std::size_t& next_index) {
  std::vector<Puzzle> out;
  out.reserve(count);
  const std::size_t budget = next_index + 20 * count + 1000;
  while (out.size() < count) {
    if (next_index >= budget)
      throw GenerationError("could not draw " + std::to_string(count) + " distinct puzzles at level " +
                                std::to_string(level_cfg.num_people),
                            next_index);
    const std::size_t chunk = std::max<std::size_t>(count - out.size(), 16);
    std::vector<std::optional<Puzzle>> slots(chunk);
    parallel_for(chunk, jobs, [&](std::size_t k) {
      GenConfig c = level_cfg;
      c.seed = puzzle_seed(stream_seed, next_index + k);
      slots[k] = generate(c, bank);
    });
    next_index += chunk;
    for (auto& s : slots) {
      if (out.size() == count) break;
      if (taken.insert(structure_key(*s)).second) out.push_back(std::move(*s));
    }
  }
  return out;
}

}  // namespace detail

/// Builds train and eval splits. Eval puzzles are drawn first; train puzzles
/// never share claim structure with eval puzzles (or with each other).
inline Dataset build_dataset(const SplitSpec& spec, const GenConfig& gen_template = {},
                             const NameBank& bank = NameBank::default_bank(), std::size_t jobs = 1) {
  spec.validate();
  Dataset ds;
  for (int level : spec.eval_levels()) {
    GenConfig cfg = gen_template;
    cfg.num_people = level;
    cfg.validate();
    std::unordered_set<std::string> taken;
    std::size_t next = 0;
    const std::uint64_t stream = derive_seed(spec.seed, {static_cast<std::uint64_t>(level)});
    auto eval = detail::draw_level(cfg, spec.eval_per_level, stream, taken, bank, jobs, next);
    for (std::size_t i = 0; i < eval.size(); ++i)
      ds.eval.push_back(DatasetRecord::make(record_id("eval", level, i), std::move(eval[i])));
    if (spec.train_levels.contains(level)) {
      auto train = detail::draw_level(cfg, spec.train_per_level, stream, taken, bank, jobs, next);
      for (std::size_t i = 0; i < train.size(); ++i)
        ds.train.push_back(DatasetRecord::make(record_id("train", level, i), std::move(train[i])));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Grading

struct Transcript {
  std::string id;
  std::string response;
  std::optional<std::string> variant;  // prompt variant the response was produced under
};

inline std::vector<Transcript> read_transcripts(std::istream& in) {
  std::vector<Transcript> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line);
      Transcript t{j.at("id").get<std::string>(), j.at("response").get<std::string>(), std::nullopt};
      if (j.contains("variant") && !j["variant"].is_null()) {
        auto v = j["variant"].get<std::string>();
        if (!parse_variant(v)) throw ParseError("unknown variant '" + v + "'");
        t.variant = v;
      }
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("transcript line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct GradeRow {
  std::string id;
  int num_people = 0;
  reward::RewardBreakdown grade;
  std::optional<std::string> variant;
};

inline Json to_json(const GradeRow& r) {
  Json j;
  j["id"] = r.id;
  j["format_score"] = r.grade.format_score;
  j["correctness_score"] = r.grade.correctness_score;
  j["total"] = r.grade.total;
  j["parse_outcome"] = reward::outcome_name(r.grade.parsed);
  if (r.variant) j["variant"] = *r.variant;
  return j;
}

struct GradeResult {
  std::vector<GradeRow> rows;  // sorted by id
  EvalReport report;
  std::size_t duplicates = 0;  // transcripts superseded by a later line with the same id
};

/// Report over grade rows. Every level present in `records` gets a bucket, so
/// an empty transcript set yields a report of zeros.
inline EvalReport report_from_grades(const std::vector<GradeRow>& rows, const std::vector<DatasetRecord>& records,
                                     const LevelSplit& split = {}) {
  std::map<int, BucketCounts> counts;
  for (const auto& r : records) counts[r.num_people()];
  for (const auto& g : rows) {
    auto& b = counts[g.num_people];
    ++b.total;
    if (g.grade.correctness_score == reward::kCorrectScore) ++b.correct;
  }
  return EvalReport::from_counts(counts, split);
}

inline GradeResult grade_transcripts(const std::vector<Transcript>& transcripts,
                                     const std::vector<DatasetRecord>& records, const LevelSplit& split = {},
                                     const reward::GradeOptions& opt = {}, std::size_t jobs = 1) {
  std::unordered_map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.id, &r);

  // last line wins for repeated ids
  std::map<std::string, const Transcript*> latest;
  GradeResult res;
  for (const auto& t : transcripts) {
    if (!by_id.contains(t.id)) throw ValidationError("transcript id not in dataset: " + t.id);
    auto [it, inserted] = latest.insert_or_assign(t.id, &t);
    if (!inserted) ++res.duplicates;
  }
  std::vector<const Transcript*> ordered;
  ordered.reserve(latest.size());
  for (const auto& [id, t] : latest) ordered.push_back(t);

  res.rows.resize(ordered.size());
  parallel_for(ordered.size(), jobs, [&](std::size_t i) {
    const Transcript& t = *ordered[i];
    const DatasetRecord& rec = *by_id.at(t.id);
    res.rows[i] = GradeRow{t.id, rec.num_people(), reward::score(t.response, rec.puzzle, opt), t.variant};
  });
  res.report = report_from_grades(res.rows, records, split);
  return res;
}

}  // namespace kkrl::corpus
