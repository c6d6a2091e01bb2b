// Command-line front end: gen-data, train, eval, inspect.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nsm/checkpoint.hpp"
#include "nsm/datagen.hpp"
#include "nsm/dataset.hpp"
#include "nsm/learning.hpp"
#include "nsm/metrics.hpp"

namespace fs = std::filesystem;
using namespace nsm;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reads `key = value` lines into `--key value` arguments.
std::vector<std::string> config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

// Splices config-file flags in right after the subcommand, so explicit
// flags (parsed later, last value wins) take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" || args[i].starts_with("--config=")) {
      std::string path;
      std::size_t erase_count = 1;
      if (args[i] == "--config") {
        if (i + 1 >= args.size()) throw UsageError("--config needs a path");
        path = args[i + 1];
        erase_count = 2;
      } else {
        path = args[i].substr(9);
      }
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + erase_count));
      auto extra = config_args(path);
      args.insert(args.begin() + 2, extra.begin(), extra.end());
      break;
    }
  }
  return args;
}

std::string format_values(const KnowledgeBase& kb, const ValueSet& values, std::size_t limit = 5) {
  std::string out;
  for (std::size_t i = 0; i < values.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += kb.format_value(values[i]);
  }
  if (values.size() > limit) out += ", ... +" + std::to_string(values.size() - limit);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExecutionError("cannot write " + path.string());
  out << text;
}

// ---- gen-data --------------------------------------------------------------

struct GenOptions {
  BenchmarkSpec spec;
  std::string out;
};

void add_gen_options(CLI::App& cmd, GenOptions& o) {
  cmd.add_option("--out", o.out, "Benchmark directory to write")->required();
  cmd.add_option("--seed", o.spec.seed, "Generator seed");
  cmd.add_option("--entities", o.spec.entities, "Number of entities")->check(CLI::PositiveNumber);
  cmd.add_option("--properties", o.spec.properties, "Number of properties")->check(CLI::PositiveNumber);
  cmd.add_option("--questions", o.spec.questions, "Number of questions")->check(CLI::PositiveNumber);
  cmd.add_option("--fanout", o.spec.fanout, "Max objects per multi-valued property")->check(CLI::PositiveNumber);
}

int run_gen(const GenOptions& o) {
  auto g = generate_benchmark(o.spec);
  write_benchmark(g, o.out);
  std::printf("wrote %s: %zu triples, %zu/%zu/%zu questions\n", o.out.c_str(), g.bench.kb.triples().size(),
              g.bench.train.size(), g.bench.valid.size(), g.bench.test.size());
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainOptions {
  TrainConfig cfg;
  std::string data;
  std::string out;
  std::string mode = "augmented";
  std::string embeddings;
  bool resume = false;
};

void add_train_options(CLI::App& cmd, TrainOptions& o) {
  auto& c = o.cfg;
  cmd.add_option("--data", o.data, "Benchmark directory")->required();
  cmd.add_option("--out", o.out, "Run directory for logs and checkpoints")->required();
  cmd.add_option("--mode", o.mode, "augmented | iml-only | reinforce")
      ->check(CLI::IsMember({"augmented", "iml-only", "reinforce"}));
  cmd.add_option("--alpha", c.alpha, "Pseudo-gold mix ratio")->check(CLI::Range(0.0, 1.0));
  cmd.add_option("--n-ml", c.n_ml, "Iterative-ML rounds");
  cmd.add_option("--stage1-iterations", c.stage1_iterations, "Rounds in curriculum stage 1");
  cmd.add_option("--n-rl", c.n_rl, "REINFORCE iterations");
  cmd.add_option("--beam-ml", c.beam_ml, "Beam size for iterative ML");
  cmd.add_option("--beam-rl", c.beam_rl, "Beam size for REINFORCE");
  cmd.add_option("--eval-beam", c.eval_beam, "Beam size for evaluation");
  cmd.add_option("--epochs", c.epochs_per_ml_round, "Epochs per ML round");
  cmd.add_option("--lr", c.g0, "Initial learning rate");
  cmd.add_option("--decay-base", c.beta, "Learning-rate decay base");
  cmd.add_option("--decay-steps", c.decay_steps, "Learning-rate decay step scale");
  cmd.add_option("--decay-start", c.lr_decay_start_iteration, "REINFORCE iteration where decay starts");
  cmd.add_option("--batch-size", c.batch_size, "Questions per update");
  cmd.add_option("--curriculum", c.curriculum, "Two-stage curriculum (true/false)");
  cmd.add_option("--superlatives", c.superlatives, "Allow ArgMax/ArgMin (true/false)");
  cmd.add_option("--max-expressions", c.max_expressions, "Expression cap after the curriculum");
  cmd.add_option("--max-tokens", c.max_tokens, "Program token cap");
  cmd.add_option("--dropout", c.model.dropout, "Dropout rate");
  cmd.add_option("--word-dim", c.model.word_dim, "Word embedding size");
  cmd.add_option("--hidden-dim", c.model.hidden_dim, "Hidden size");
  cmd.add_option("--seed", c.seed, "Training seed");
  cmd.add_option("--workers", c.workers, "Decode workers")->check(CLI::PositiveNumber);
  cmd.add_option("--eval-each-iteration", c.eval_each_iteration, "Log validation F1 every iteration");
  cmd.add_option("--embeddings", o.embeddings, "Pretrained word vectors (word v1 ... vD)");
  cmd.add_flag("--resume", o.resume, "Continue from the last checkpoint in --out");
}

TrainMode parse_mode(const std::string& m) {
  if (m == "iml-only") return TrainMode::ImlOnly;
  if (m == "reinforce") return TrainMode::Reinforce;
  return TrainMode::Augmented;
}

nlohmann::json config_json(const TrainOptions& o) {
  const auto& c = o.cfg;
  return {{"data", o.data},
          {"mode", mode_name(c.mode)},
          {"alpha", c.alpha},
          {"n_ml", c.n_ml},
          {"stage1_iterations", c.stage1_iterations},
          {"n_rl", c.n_rl},
          {"beam_ml", c.beam_ml},
          {"beam_rl", c.beam_rl},
          {"eval_beam", c.eval_beam},
          {"epochs", c.epochs_per_ml_round},
          {"lr", c.g0},
          {"decay_base", c.beta},
          {"decay_steps", c.decay_steps},
          {"decay_start", c.lr_decay_start_iteration},
          {"batch_size", c.batch_size},
          {"curriculum", c.curriculum},
          {"superlatives", c.superlatives},
          {"max_expressions", c.max_expressions},
          {"max_tokens", c.max_tokens},
          {"dropout", c.model.dropout},
          {"word_dim", c.model.word_dim},
          {"hidden_dim", c.model.hidden_dim},
          {"seed", c.seed}};
}

void save_checkpoint(const fs::path& dir, const ModelParams& p, const PseudoGoldCache& cache,
                     const KnowledgeBase& kb, const std::vector<TrainLogRecord>& log) {
  fs::create_directories(dir);
  save_model(p, dir / "model.json");
  save_cache(cache, kb, dir / "cache.jsonl");
  std::ofstream out(dir / "log.jsonl", std::ios::binary);
  for (const auto& r : log) out << to_json(r).dump() << '\n';
}

std::vector<TrainLogRecord> load_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<TrainLogRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(log_record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

int run_train(TrainOptions& o) {
  o.cfg.mode = parse_mode(o.mode);
  o.cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const fs::path out(o.out);
  const auto ckpt = out / "checkpoints";
  if (o.resume && fs::exists(ckpt / "final" / "model.json")) {
    std::printf("run in %s is already complete\n", o.out.c_str());
    return 0;
  }

  auto bench = load_benchmark(o.data);
  auto vocab = build_vocabulary(bench.kb, bench.lexicon, bench.train);
  auto train = prepare_questions(bench.kb, bench.lexicon, vocab, bench.train);
  auto valid = prepare_questions(bench.kb, bench.lexicon, vocab, bench.valid);
  auto init = make_model(o.cfg.model, vocab, bench.kb, o.cfg.seed, o.embeddings);

  std::optional<MlPhaseState> resume;
  if (o.resume && o.cfg.mode != TrainMode::Reinforce && fs::exists(ckpt / "ml" / "model.json")) {
    MlPhaseState s{load_model(ckpt / "ml" / "model.json"), load_cache(bench.kb, ckpt / "ml" / "cache.jsonl"),
                   load_log(ckpt / "ml" / "log.jsonl")};
    check_model_matches(s.params, bench.kb);
    resume = std::move(s);
    std::printf("resuming after the iterative-ML phase\n");
  }

  fs::create_directories(out);
  {
    std::ofstream cfg_out(out / "config.json", std::ios::binary);
    cfg_out << config_json(o).dump(2) << '\n';
  }
  std::ofstream log_out(out / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (resume) {
    for (const auto& r : resume->log) log_out << to_json(r).dump() << '\n';
  }

  std::vector<TrainLogRecord> seen;
  if (resume) seen = resume->log;
  TrainHooks hooks;
  hooks.on_log = [&](const TrainLogRecord& r) {
    log_out << to_json(r).dump() << '\n';
    log_out.flush();
    seen.push_back(r);
    std::printf("iter %3d %-9s train_f1 %.4f valid_f1 %.4f coverage %.3f lr %.6g\n", r.iteration, r.phase.c_str(),
                r.train_f1, r.valid_f1, r.cache_coverage, r.lr);
    std::fflush(stdout);
  };
  hooks.on_phase_end = [&](const std::string& phase, const ModelParams& p, const PseudoGoldCache& cache) {
    save_checkpoint(ckpt / phase, p, cache, bench.kb, seen);
  };

  TrainData data{&bench.kb, train, valid};
  auto result = run_iml_reinforce(data, init, o.cfg, hooks, std::move(resume));
  save_checkpoint(ckpt / "final", result.params, result.cache, bench.kb, result.log);

  auto report = evaluate(result.params, bench.kb, valid, static_cast<std::size_t>(o.cfg.eval_beam),
                         full_constraints(o.cfg), o.cfg.workers);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto metrics = nlohmann::json{{"valid", to_json(report)},
                                {"pseudo_gold_train_f1", pseudo_gold_f1(result.cache, train)},
                                {"seconds", seconds}};
  write_text(out / "metrics.json", metrics.dump(2) + "\n");
  std::printf("valid avg F1 %.4f, accuracy %.4f (%.1f s)\n", report.avg_f1, report.accuracy, seconds);
  return 0;
}

// ---- shared by eval and inspect ---------------------------------------------

struct DecodeOptions {
  std::string data;
  std::string model;
  std::size_t beam = 5;
  int max_expressions = 3;
  int max_tokens = 30;
  bool superlatives = true;
  int workers = 1;

  CurriculumConstraints constraints() const {
    TrainConfig c;
    c.max_expressions = max_expressions;
    c.max_tokens = max_tokens;
    c.superlatives = superlatives;
    return full_constraints(c);
  }
};

void add_decode_options(CLI::App& cmd, DecodeOptions& o) {
  cmd.add_option("--data", o.data, "Benchmark directory")->required();
  cmd.add_option("--model", o.model, "Checkpoint directory or model.json")->required();
  cmd.add_option("--beam", o.beam, "Beam size")->check(CLI::PositiveNumber);
  cmd.add_option("--max-expressions", o.max_expressions, "Expression cap");
  cmd.add_option("--max-tokens", o.max_tokens, "Program token cap");
  cmd.add_option("--superlatives", o.superlatives, "Allow ArgMax/ArgMin (true/false)");
  cmd.add_option("--workers", o.workers, "Decode workers")->check(CLI::PositiveNumber);
}

ModelParams load_checkpoint(const std::string& path, const KnowledgeBase& kb) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "model.json";
  if (!fs::exists(p)) throw LoadError("missing checkpoint " + p.string());
  auto params = load_model(p);
  check_model_matches(params, kb);
  return params;
}

// ---- eval ------------------------------------------------------------------

struct EvalOptions {
  DecodeOptions decode;
  std::string split = "valid";
  std::string out;
};

int run_eval(const EvalOptions& o) {
  auto bench = load_benchmark(o.decode.data);
  auto params = load_checkpoint(o.decode.model, bench.kb);
  auto questions = prepare_questions(bench.kb, bench.lexicon, params.vocab, bench.split(o.split));
  const auto constraints = o.decode.constraints();

  std::vector<std::vector<DecodedProgram>> beams(questions.size());
  parallel_for(questions.size(), o.decode.workers, [&](std::size_t i) {
    Executor exec(bench.kb);
    beams[i] = beam_decode(params, exec, questions[i], o.decode.beam, constraints);
  });
  std::vector<QuestionScore> scores;
  for (std::size_t i = 0; i < questions.size(); ++i) scores.push_back(score_question(bench.kb, questions[i], beams[i].front()));
  auto report = summarize(std::move(scores));

  const fs::path out(o.out);
  fs::create_directories(out);
  write_text(out / ("report_" + o.split + ".json"), to_json(report).dump(2) + "\n");
  write_text(out / ("report_" + o.split + ".txt"), to_text(report));
  std::ostringstream per_q, beam_lines;
  for (const auto& s : report.per_question) per_q << to_json(s).dump() << '\n';
  for (std::size_t i = 0; i < questions.size(); ++i) {
    beam_lines << beam_to_json(bench.kb, questions[i].id, beams[i], questions[i].gold).dump() << '\n';
  }
  write_text(out / ("per_question_" + o.split + ".jsonl"), per_q.str());
  write_text(out / ("beams_" + o.split + ".jsonl"), beam_lines.str());
  std::printf("split %s\n%s", o.split.c_str(), to_text(report).c_str());
  return 0;
}

// ---- inspect -----------------------------------------------------------------

struct InspectOptions {
  DecodeOptions decode;
  std::string id;
  std::string question;
  bool trace = true;
};

// Program text with each variable's value in parentheses, plus the valid
// token set before every step.
void print_program(const KnowledgeBase& kb, const Question& q, Executor& exec, const CurriculumConstraints& constraints,
                   const DecodedProgram& d, bool trace) {
  Session session(exec, q.linked, constraints);
  std::string text;
  std::vector<std::string> steps;
  for (std::size_t t = 0; t < d.tokens.size(); ++t) {
    const auto valid = session.valid_tokens();
    if (trace) {
      std::string line = "    step " + std::to_string(t) + " valid {";
      for (std::size_t k = 0; k < valid.size(); ++k) line += (k ? " " : "") + format_token(kb, valid[k]);
      line += "} -> " + format_token(kb, d.tokens[t]);
      steps.push_back(std::move(line));
    }
    const auto& tok = d.tokens[t];
    session.apply(tok);
    if (!text.empty()) text += ' ';
    text += format_token(kb, tok);
    if (tok.kind == TokenKind::Variable) text += "(" + format_values(kb, session.store().value(tok.arg), 3) + ")";
    if (auto created = session.created_variable()) {
      text += " => R" + std::to_string(*created + 1) + "(" + format_values(kb, session.store().value(*created)) + ")";
    }
  }
  std::printf("  %s\n", text.c_str());
  for (const auto& s : steps) std::printf("%s\n", s.c_str());
}

int run_inspect(const InspectOptions& o) {
  if (o.id.empty() == o.question.empty()) throw UsageError("give exactly one of --id or --question");
  auto bench = load_benchmark(o.decode.data);
  auto params = load_checkpoint(o.decode.model, bench.kb);
  std::optional<Question> q;
  if (!o.id.empty()) {
    for (const auto* split : {&bench.train, &bench.valid, &bench.test}) {
      for (const auto& ex : *split) {
        if (ex.id == o.id) q = prepare_question(bench.kb, bench.lexicon, params.vocab, ex);
      }
    }
    if (!q) throw ExecutionError("unknown question id " + o.id);
  } else {
    q = link_question(bench.kb, bench.lexicon, params.vocab, "input", o.question);
  }

  const auto constraints = o.decode.constraints();
  Executor exec(bench.kb);
  auto beam = beam_decode(params, exec, *q, o.decode.beam, constraints);

  std::string anonymized;
  for (const auto& w : q->words) anonymized += (anonymized.empty() ? "" : " ") + w;
  std::printf("question %s: %s\nanonymized: %s\n", q->id.c_str(), q->text.c_str(), anonymized.c_str());
  for (std::size_t i = 0; i < q->linked.size(); ++i) {
    std::printf("R%zu = (%s)\n", i + 1, format_values(bench.kb, q->linked.value(i)).c_str());
  }
  if (!q->gold.empty()) std::printf("gold: (%s)\n", format_values(bench.kb, q->gold, 10).c_str());
  for (std::size_t i = 0; i < beam.size(); ++i) {
    const auto& d = beam[i];
    if (q->gold.empty()) {
      std::printf("#%zu log_prob %.6f\n", i + 1, d.log_prob);
    } else {
      std::printf("#%zu log_prob %.6f reward %.4f\n", i + 1, d.log_prob, reward(d.answer, q->gold));
    }
    print_program(bench.kb, *q, exec, constraints, d, o.trace);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural program induction over a knowledge base"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic benchmark");
  add_gen_options(*gen_cmd, gen);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Iterative ML followed by augmented REINFORCE");
  add_train_options(*train_cmd, train);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_decode_options(*eval_cmd, ev.decode);
  eval_cmd->add_option("--split", ev.split, "train | valid | test")->check(CLI::IsMember({"train", "valid", "test"}));
  eval_cmd->add_option("--out", ev.out, "Report directory")->required();

  InspectOptions ins;
  auto* inspect_cmd = app.add_subcommand("inspect", "Show the decoded beam for one question");
  add_decode_options(*inspect_cmd, ins.decode);
  inspect_cmd->add_option("--id", ins.id, "Question id from the benchmark");
  inspect_cmd->add_option("--question", ins.question, "Free-text question");
  inspect_cmd->add_option("--trace", ins.trace, "Print per-step valid token sets (true/false)");

  try {
    auto args = expand_config(argc, argv);
    std::vector<char*> ptrs;
    for (auto& a : args) ptrs.push_back(a.data());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(ev);
    if (*inspect_cmd) return run_inspect(ins);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
