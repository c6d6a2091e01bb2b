#pragma once

#include <array>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/parallel.hpp"
#include "nsm/question.hpp"
#include "nsm/reward.hpp"
#include "nsm/search.hpp"

namespace nsm {

struct QuestionScore {
  std::string id;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool exact = false;
  std::size_t expressions = 0;
  std::string program;
};

struct ComplexityBucket {
  std::size_t count = 0;
  double fraction = 0.0;
  double avg_f1 = 0.0;
};

// Buckets by expression count: 0, 1, 2, 3 or more.
inline constexpr std::size_t kComplexityBuckets = 4;

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double avg_f1 = 0.0;
  double accuracy = 0.0;
  std::array<ComplexityBucket, kComplexityBuckets> per_complexity{};
  std::vector<QuestionScore> per_question;
};

// Unweighted means over questions.
inline EvalReport summarize(std::vector<QuestionScore> scores) {
  EvalReport r;
  r.per_question = std::move(scores);
  const auto n = r.per_question.size();
  if (n == 0) return r;
  for (const auto& s : r.per_question) {
    r.precision += s.precision;
    r.recall += s.recall;
    r.avg_f1 += s.f1;
    r.accuracy += s.exact ? 1.0 : 0.0;
    auto& b = r.per_complexity[std::min(s.expressions, kComplexityBuckets - 1)];
    ++b.count;
    b.avg_f1 += s.f1;
  }
  const auto dn = static_cast<double>(n);
  r.precision /= dn;
  r.recall /= dn;
  r.avg_f1 /= dn;
  r.accuracy /= dn;
  for (auto& b : r.per_complexity) {
    b.fraction = static_cast<double>(b.count) / dn;
    if (b.count) b.avg_f1 /= static_cast<double>(b.count);
  }
  return r;
}

inline QuestionScore score_question(const KnowledgeBase& kb, const Question& q, const DecodedProgram& top) {
  QuestionScore s;
  s.id = q.id;
  auto pr = score_answer(top.answer, q.gold);
  s.precision = pr.precision;
  s.recall = pr.recall;
  s.f1 = pr.f1;
  s.exact = top.answer == q.gold;
  s.expressions = count_expressions(top.tokens);
  s.program = format_program(kb, top.tokens);
  return s;
}

// Top-1 program per question from beam search (dropout off), executed and
// scored against the gold answer.
inline EvalReport evaluate(const ModelParams& params, const KnowledgeBase& kb, std::span<const Question> questions,
                           std::size_t beam, const CurriculumConstraints& constraints, int workers = 1) {
  std::vector<QuestionScore> scores(questions.size());
  parallel_for(questions.size(), workers, [&](std::size_t i) {
    Executor exec(kb);
    auto programs = beam_decode(params, exec, questions[i], beam, constraints);
    scores[i] = score_question(kb, questions[i], programs.front());
  });
  return summarize(std::move(scores));
}

inline std::string bucket_label(std::size_t i) {
  return i + 1 == kComplexityBuckets ? std::to_string(i) + "+" : std::to_string(i);
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["avg_f1"] = r.avg_f1;
  j["accuracy"] = r.accuracy;
  j["questions"] = r.per_question.size();
  auto& pc = j["per_complexity"];
  for (std::size_t i = 0; i < kComplexityBuckets; ++i) {
    const auto& b = r.per_complexity[i];
    pc[bucket_label(i)] = {{"count", b.count}, {"fraction", b.fraction}, {"avg_f1", b.avg_f1}};
  }
  return j;
}

inline nlohmann::json to_json(const QuestionScore& s) {
  return {{"id", s.id},       {"precision", s.precision},     {"recall", s.recall}, {"f1", s.f1},
          {"exact", s.exact}, {"expressions", s.expressions}, {"program", s.program}};
}

inline std::string to_text(const EvalReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "questions  %zu\nprecision  %.4f\nrecall     %.4f\navg F1     %.4f\naccuracy   %.4f\n",
                r.per_question.size(), r.precision, r.recall, r.avg_f1, r.accuracy);
  out << line << "\n#expressions  count  fraction  avg F1\n";
  for (std::size_t i = 0; i < kComplexityBuckets; ++i) {
    const auto& b = r.per_complexity[i];
    std::snprintf(line, sizeof line, "%-12s  %5zu  %8.4f  %6.4f\n", bucket_label(i).c_str(), b.count, b.fraction,
                  b.avg_f1);
    out << line;
  }
  return out.str();
}

}  // namespace nsm
