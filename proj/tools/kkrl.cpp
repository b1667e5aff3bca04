// Command-line entry point. Data goes to stdout, diagnostics to stderr.
// Exit codes: 0 ok, 1 other failure, 2 invalid input or failed validation,
// 3 generation budget exhausted, 64 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kkrl/kkrl.hpp"

namespace {

using namespace kkrl;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitBudget = 3;
constexpr int kExitUsage = 64;

class IoError : public Error {
 public:
  using Error::Error;
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

Json read_json_file(const std::string& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// A puzzle object, or a dataset record carrying one under "puzzle".
Puzzle puzzle_from_any(const Json& j) {
  if (j.is_object() && j.contains("quiz") && j.contains("puzzle")) return puzzle_from_json(j.at("puzzle"));
  return puzzle_from_json(j);
}

std::vector<Puzzle> read_puzzle_lines(const std::string& path) {
  auto in = open_in(path);
  std::vector<Puzzle> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(puzzle_from_any(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<corpus::DatasetRecord> read_dataset(const std::string& path, bool checked) {
  auto in = open_in(path);
  return corpus::read_jsonl(in, checked);
}

const std::vector<std::string> kVariantNames{"none", "ground_truth", "suboptimal", "adverse"};
const std::vector<std::string> kReportFormats{"text", "csv"};

MotivationVariant variant_of(const std::string& s) { return *parse_variant(s); }
ReportFormat report_format_of(const std::string& s) { return s == "csv" ? ReportFormat::Csv : ReportFormat::Text; }

CLI::Option* add_choice(CLI::App* cmd, const std::string& flag, std::string& value,
                        const std::vector<std::string>& choices, const std::string& help) {
  return cmd->add_option(flag, value, help)->check(CLI::IsMember(choices))->capture_default_str();
}

LevelSplit split_from(const std::vector<int>& ood) {
  LevelSplit s;
  s.ood = {ood.begin(), ood.end()};
  s.in_domain.clear();
  for (int l = 2; l <= 8; ++l)
    if (!s.ood.contains(l)) s.in_domain.insert(l);
  return s;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  int people = 3;
  std::size_t count = 1;
  int max_depth = 2;
  std::string weights;
  int max_rejections = 10000;
  std::string names;
  std::string format = "json";
};

GenConfig gen_config(int people, int max_depth, const std::string& weights, int max_rejections, std::uint64_t seed) {
  GenConfig cfg;
  cfg.num_people = people;
  cfg.max_depth = max_depth;
  if (!weights.empty()) cfg.operator_weights = parse_operator_weights(weights);
  cfg.max_rejections = max_rejections;
  cfg.seed = seed;
  return cfg;
}

NameBank name_bank(const std::string& path) {
  return path.empty() ? NameBank::default_bank() : NameBank::from_file(path);
}

void add_gen_flags(CLI::App* cmd, int& max_depth, std::string& weights, int& max_rejections, std::string& names) {
  cmd->add_option("--max-depth", max_depth, "Connective nesting bound per statement")->capture_default_str();
  cmd->add_option("--weights", weights, "Operator weights, e.g. atom=3,not=1,and=1,or=1,implies=1,iff=1");
  cmd->add_option("--max-rejections", max_rejections, "Rejected draws allowed per puzzle")->capture_default_str();
  cmd->add_option("--names", names, "Name bank file, one name per line")->check(CLI::ExistingFile);
}

int run_gen(const GenArgs& a, std::uint64_t seed, std::size_t jobs) {
  const GenConfig cfg = gen_config(a.people, a.max_depth, a.weights, a.max_rejections, seed);
  const NameBank bank = name_bank(a.names);
  const auto puzzles = generate_batch(cfg, a.count, bank, jobs);
  for (std::size_t i = 0; i < puzzles.size(); ++i) {
    if (a.format == "json") {
      std::cout << to_json(puzzles[i]).dump() << '\n';
    } else {
      if (i) std::cout << '\n';
      std::cout << render_text(puzzles[i]) << '\n';
    }
  }
  return kExitOk;
}

int run_solve(const std::string& path, const std::string& format) {
  const Puzzle p = puzzle_from_any(read_json_file(path));
  const auto models = solve(p, 2);
  if (models.size() != 1) {
    std::cerr << "kkrl: puzzle has " << (models.empty() ? "no" : "more than one") << " consistent assignment\n";
    return kExitInvalid;
  }
  if (format == "json")
    std::cout << to_json(models.front()).dump() << '\n';
  else
    std::cout << render_solution(models.front(), p.names()) << '\n';
  return kExitOk;
}

struct PromptArgs {
  std::string puzzle;
  std::string dataset;
  std::string id;
  std::string variant = "ground_truth";
  bool plain = false;
};

int run_prompt(const PromptArgs& a) {
  const PromptStyle style = a.plain ? PromptStyle::Plain : PromptStyle::Chat;
  if (!a.puzzle.empty()) {
    std::cout << build_prompt(puzzle_from_any(read_json_file(a.puzzle)), variant_of(a.variant), style).rendered;
    return kExitOk;
  }
  for (const auto& r : read_dataset(a.dataset, false)) {
    if (r.id != a.id) continue;
    std::cout << (a.plain ? build_prompt(r.puzzle, variant_of(a.variant), style).rendered : r.prompt(variant_of(a.variant)));
    return kExitOk;
  }
  throw ValidationError("no record with id " + a.id + " in " + a.dataset);
}

struct GradeArgs {
  std::string transcripts;
  std::string dataset;
  std::string report;
  std::string report_format = "text";
  std::string label = "model";
  std::vector<int> ood{2, 8};
  bool primed_think = false;
  bool no_primed_think = false;
};

int run_grade(const GradeArgs& a, std::size_t jobs) {
  const auto records = read_dataset(a.dataset, true);
  auto tin = open_in(a.transcripts);
  const auto transcripts = corpus::read_transcripts(tin);
  reward::GradeOptions opt;
  opt.assume_primed_think = !a.no_primed_think;
  const auto res = corpus::grade_transcripts(transcripts, records, split_from(a.ood), opt, jobs);
  if (res.duplicates)
    std::cerr << "kkrl: warning: " << res.duplicates << " transcript(s) superseded by a later line with the same id\n";
  for (const auto& row : res.rows) std::cout << corpus::to_json(row).dump() << '\n';
  if (!a.report.empty()) open_out(a.report) << render_report(res.report, a.label, report_format_of(a.report_format));
  return kExitOk;
}

struct DatasetArgs {
  std::string out_dir;
  std::vector<int> train_levels{3, 4, 5, 6, 7};
  std::vector<int> ood_levels{2, 8};
  std::size_t train_per_level = 900;
  std::size_t eval_per_level = 100;
  int max_depth = 2;
  std::string weights;
  int max_rejections = 10000;
  std::string names;
};

int run_dataset(const DatasetArgs& a, std::uint64_t seed, std::size_t jobs) {
  corpus::SplitSpec spec;
  spec.train_levels = {a.train_levels.begin(), a.train_levels.end()};
  spec.ood_levels = {a.ood_levels.begin(), a.ood_levels.end()};
  spec.train_per_level = a.train_per_level;
  spec.eval_per_level = a.eval_per_level;
  spec.seed = seed;
  const GenConfig tmpl = gen_config(3, a.max_depth, a.weights, a.max_rejections, seed);
  const auto ds = corpus::build_dataset(spec, tmpl, name_bank(a.names), jobs);
  std::filesystem::create_directories(a.out_dir);
  const auto dir = std::filesystem::path(a.out_dir);
  {
    auto out = open_out((dir / "train.jsonl").string());
    corpus::write_jsonl(out, ds.train);
  }
  {
    auto out = open_out((dir / "eval.jsonl").string());
    corpus::write_jsonl(out, ds.eval);
  }
  std::cerr << "kkrl: wrote " << ds.train.size() << " train and " << ds.eval.size() << " eval records to "
            << a.out_dir << '\n';
  return kExitOk;
}

// Puzzle set for the toy policy: a puzzle file, or a fresh seeded draw.
struct ToySet {
  std::string puzzles;
  std::size_t count = 50;
  std::vector<int> levels{2, 3};
};

std::vector<Puzzle> toy_set(const ToySet& s, std::uint64_t seed, std::size_t jobs) {
  if (!s.puzzles.empty()) {
    auto p = read_puzzle_lines(s.puzzles);
    for (const Puzzle& q : p)
      if (!q.solution()) throw ValidationError("toy puzzles must carry their solution");
    return p;
  }
  return toy::toy_puzzles(s.count, s.levels, seed, {}, jobs);
}

void add_toy_set_flags(CLI::App* cmd, ToySet& s) {
  cmd->add_option("--puzzles", s.puzzles, "JSONL of puzzles or dataset records (overrides --count/--levels)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--count", s.count, "Number of generated puzzles")->capture_default_str();
  cmd->add_option("--levels", s.levels, "People counts, cycled over the generated puzzles")
      ->delimiter(',')
      ->capture_default_str();
}

struct TrainArgs {
  ToySet set;
  int steps = 500;
  int eval_every = 50;
  std::size_t batch_size = 16;
  std::size_t group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.001;
  double lr = 0.1;
  int inner_epochs = 2;
  double std_epsilon = 0.0;
  double temperature = 1.0;
  std::string variant = "ground_truth";
  std::string policy_out;
  std::string report;
  std::string report_format = "text";
};

int run_train(const TrainArgs& a, std::uint64_t seed, std::size_t jobs) {
  toy::RunSpec spec;
  spec.puzzles = toy_set(a.set, seed, jobs);
  spec.grpo.group_size = a.group_size;
  spec.grpo.clip_eps = a.clip_eps;
  spec.grpo.kl_beta = a.kl_beta;
  spec.grpo.learning_rate = a.lr;
  spec.grpo.inner_epochs = a.inner_epochs;
  spec.grpo.std_epsilon = a.std_epsilon;
  spec.total_steps = a.steps;
  spec.eval_every = a.eval_every;
  spec.batch_size = a.batch_size;
  spec.seed = seed;
  spec.temperature = a.temperature;
  spec.variant = variant_of(a.variant);
  const auto rep = toy::train(spec);
  std::cout << rep.csv();
  if (!a.policy_out.empty()) open_out(a.policy_out) << toy::to_json(rep.final_policy, spec.variant).dump() << '\n';
  if (!a.report.empty()) open_out(a.report) << render_report(rep.final_eval, a.variant, report_format_of(a.report_format));
  return kExitOk;
}

struct EvalArgs {
  std::string policy;
  ToySet set;
  std::string format = "text";
  std::string label = "toy";
};

int run_eval(const EvalArgs& a, std::uint64_t seed, std::size_t jobs) {
  const auto policy = toy::toy_policy_from_json(read_json_file(a.policy));
  const auto puzzles = toy_set(a.set, seed, jobs);
  if (puzzles.size() != policy.rule.num_rows()) throw ValidationError("policy rows do not match the puzzle count");
  for (std::size_t r = 0; r < puzzles.size(); ++r)
    if (puzzles[r].num_people() != policy.rule.row_people(r))
      throw ValidationError("policy row " + std::to_string(r) + " does not match its puzzle's size");
  std::cout << render_report(toy::evaluate(policy.rule, policy.params.values, puzzles), a.label, report_format_of(a.format));
  return kExitOk;
}

struct ReportArgs {
  std::string grades;
  std::string dataset;
  std::string accuracies;
  std::string format = "text";
  std::string label = "model";
  std::vector<int> ood{2, 8};
};

std::map<int, double> parse_accuracies(const std::string& text) {
  std::map<int, double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto eq = item.find('=');
    try {
      if (eq == std::string::npos) throw std::invalid_argument("missing '='");
      std::size_t used = 0;
      const int level = std::stoi(item.substr(0, eq));
      const double acc = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1 || !(acc >= 0 && acc <= 1)) throw std::invalid_argument("bad value");
      out[level] = acc;
    } catch (const std::logic_error&) {
      throw ParseError("bad accuracy entry '" + item + "', expected LEVEL=VALUE with VALUE in [0, 1]");
    }
  }
  return out;
}

int run_report(const ReportArgs& a) {
  const LevelSplit split = split_from(a.ood);
  EvalReport rep;
  if (!a.accuracies.empty()) {
    rep = EvalReport::from_accuracies(parse_accuracies(a.accuracies), split);
  } else {
    if (a.dataset.empty()) throw StructuralError("--grades needs --dataset");
    const auto records = read_dataset(a.dataset, false);
    std::unordered_map<std::string, int> level_of;
    for (const auto& r : records) level_of.emplace(r.id, r.num_people());
    auto in = open_in(a.grades);
    std::vector<corpus::GradeRow> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const Json j = Json::parse(line);
        corpus::GradeRow row;
        row.id = j.at("id").get<std::string>();
        const auto it = level_of.find(row.id);
        if (it == level_of.end()) throw ValidationError("grade id not in dataset: " + row.id);
        row.num_people = it->second;
        row.grade.correctness_score = j.at("correctness_score").get<double>();
        rows.push_back(std::move(row));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(a.grades + ": " + e.what());
      }
    }
    rep = corpus::report_from_grades(rows, records, split);
  }
  std::cout << render_report(rep, a.label, report_format_of(a.format));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knights-and-Knaves RLVR toolkit: puzzles, rewards, motivation prompts, GRPO toy training"};
  app.name("kkrl");
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = kDefaultSeed;
  std::size_t jobs = 1;
  app.add_option("--seed", seed, "Master seed for every random stage")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads for batch stages; output does not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.set_config("--config", "", "INI/TOML file; [section] names a subcommand, command-line flags win");
  app.allow_config_extras(false);
  app.footer("Exit codes: 0 ok, 1 other failure, 2 invalid input or failed validation, 3 generation budget\n"
             "exhausted, 64 usage error.");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate puzzles with unique solutions");
  gen_cmd->add_option("--people", gen.people, "People per puzzle, 2 to 8")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of puzzles")->capture_default_str();
  add_gen_flags(gen_cmd, gen.max_depth, gen.weights, gen.max_rejections, gen.names);
  gen_cmd->add_option("--format", gen.format, "Output format")
      ->check(CLI::IsMember({"json", "text"}))
      ->capture_default_str();

  std::string solve_path, solve_format = "text";
  auto* solve_cmd = app.add_subcommand("solve", "Solve a puzzle by enumeration and print its unique solution");
  solve_cmd->add_option("--puzzle", solve_path, "Puzzle JSON or dataset record")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--format", solve_format, "Output format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  GradeArgs grade;
  auto* grade_cmd = app.add_subcommand("grade", "Score transcripts against a dataset; grade rows go to stdout");
  grade_cmd->add_option("--transcripts", grade.transcripts, "Transcript JSONL")->required()->check(CLI::ExistingFile);
  grade_cmd->add_option("--dataset", grade.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  grade_cmd->add_option("--report", grade.report, "Also write the accuracy report to this file");
  add_choice(grade_cmd, "--report-format", grade.report_format, kReportFormats, "Report format");
  grade_cmd->add_option("--label", grade.label, "Row label in the report")->capture_default_str();
  grade_cmd->add_option("--ood", grade.ood, "Levels reported as OOD")->delimiter(',')->capture_default_str();
  auto* primed = grade_cmd->add_flag("--assume-primed-think", grade.primed_think,
                                     "Prepend <think> to responses that lack it (the default)");
  grade_cmd->add_flag("--no-assume-primed-think", grade.no_primed_think, "Grade responses exactly as given")
      ->excludes(primed);

  PromptArgs prompt;
  auto* prompt_cmd = app.add_subcommand("prompt", "Print the training prompt for a puzzle");
  auto* p_puzzle = prompt_cmd->add_option("--puzzle", prompt.puzzle, "Puzzle JSON or dataset record")
                       ->check(CLI::ExistingFile);
  auto* p_dataset = prompt_cmd->add_option("--dataset", prompt.dataset, "Dataset JSONL (with --id)")
                        ->check(CLI::ExistingFile);
  auto* p_id = prompt_cmd->add_option("--id", prompt.id, "Record id in --dataset");
  p_puzzle->excludes(p_dataset)->excludes(p_id);
  p_dataset->needs(p_id);
  p_id->needs(p_dataset);
  add_choice(prompt_cmd, "--variant", prompt.variant, kVariantNames, "Motivation variant");
  prompt_cmd->add_flag("--plain", prompt.plain, "Role-prefixed text instead of chat markers");

  DatasetArgs dataset;
  auto* dataset_cmd = app.add_subcommand("dataset", "Build train.jsonl and eval.jsonl");
  dataset_cmd->add_option("--out-dir", dataset.out_dir, "Output directory")->required();
  dataset_cmd->add_option("--train-levels", dataset.train_levels, "In-domain levels")
      ->delimiter(',')
      ->capture_default_str();
  dataset_cmd->add_option("--ood-levels", dataset.ood_levels, "Eval-only levels")->delimiter(',')->capture_default_str();
  dataset_cmd->add_option("--train-per-level", dataset.train_per_level, "Train records per level")
      ->capture_default_str();
  dataset_cmd->add_option("--eval-per-level", dataset.eval_per_level, "Eval records per level")->capture_default_str();
  add_gen_flags(dataset_cmd, dataset.max_depth, dataset.weights, dataset.max_rejections, dataset.names);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Greedy accuracy report for a saved toy policy");
  eval_cmd->add_option("--policy", eval.policy, "Policy JSON from train-toy")->required()->check(CLI::ExistingFile);
  add_toy_set_flags(eval_cmd, eval.set);
  add_choice(eval_cmd, "--format", eval.format, kReportFormats, "Report format");
  eval_cmd->add_option("--label", eval.label, "Row label")->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train the tabular toy policy with GRPO; telemetry CSV to stdout");
  add_toy_set_flags(train_cmd, train.set);
  train_cmd->add_option("--steps", train.steps, "Total update steps")->capture_default_str();
  train_cmd->add_option("--eval-every", train.eval_every, "Telemetry interval; must divide --steps")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", train.batch_size, "Puzzles per step")->capture_default_str();
  train_cmd->add_option("--group-size", train.group_size, "Samples per puzzle")->capture_default_str();
  train_cmd->add_option("--clip-eps", train.clip_eps, "Ratio clip range")->capture_default_str();
  train_cmd->add_option("--kl-beta", train.kl_beta, "KL penalty weight")->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--inner-epochs", train.inner_epochs, "Updates per sampled batch")->capture_default_str();
  train_cmd->add_option("--std-epsilon", train.std_epsilon, "0 zeroes degenerate groups; > 0 adds to the std")
      ->capture_default_str();
  train_cmd->add_option("--temperature", train.temperature, "Softmax temperature")->capture_default_str();
  add_choice(train_cmd, "--variant", train.variant, kVariantNames, "Prompt variant recorded with the policy");
  train_cmd->add_option("--policy-out", train.policy_out, "Write the final policy JSON here");
  train_cmd->add_option("--report", train.report, "Write the final accuracy report here");
  add_choice(train_cmd, "--report-format", train.report_format, kReportFormats, "Report format");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Render an accuracy table from grades or given accuracies");
  auto* r_grades = report_cmd->add_option("--grades", report.grades, "Grade JSONL from the grade command")
                       ->check(CLI::ExistingFile);
  report_cmd->add_option("--dataset", report.dataset, "Dataset JSONL the grades refer to")->check(CLI::ExistingFile);
  auto* r_acc = report_cmd->add_option("--accuracies", report.accuracies, "LEVEL=VALUE list, e.g. 3=0.78,4=0.73");
  r_grades->excludes(r_acc);
  add_choice(report_cmd, "--format", report.format, kReportFormats, "Report format");
  report_cmd->add_option("--label", report.label, "Row label")->capture_default_str();
  report_cmd->add_option("--ood", report.ood, "Levels reported as OOD")->delimiter(',')->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  if (prompt_cmd->parsed() && prompt.puzzle.empty() && prompt.dataset.empty()) {
    std::cerr << "kkrl prompt: one of --puzzle or --dataset/--id is required\n";
    return kExitUsage;
  }
  if (report_cmd->parsed() && report.grades.empty() && report.accuracies.empty()) {
    std::cerr << "kkrl report: one of --grades or --accuracies is required\n";
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen, seed, jobs);
    if (solve_cmd->parsed()) return run_solve(solve_path, solve_format);
    if (grade_cmd->parsed()) return run_grade(grade, jobs);
    if (prompt_cmd->parsed()) return run_prompt(prompt);
    if (dataset_cmd->parsed()) return run_dataset(dataset, seed, jobs);
    if (eval_cmd->parsed()) return run_eval(eval, seed, jobs);
    if (train_cmd->parsed()) return run_train(train, seed, jobs);
    if (report_cmd->parsed()) return run_report(report);
  } catch (const GenerationError& e) {
    std::cerr << "kkrl: generation budget exhausted after " << e.attempts() << " attempts: " << e.what() << '\n';
    return kExitBudget;
  } catch (const ValidationError& e) {
    std::cerr << "kkrl: validation failed: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const StructuralError& e) {
    std::cerr << "kkrl: invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "kkrl: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
