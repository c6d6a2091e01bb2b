#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsm/errors.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/kb.hpp"
#include "nsm/model.hpp"
#include "nsm/question.hpp"

namespace nsm {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Whitespace tokenization; strips surrounding punctuation such as "?".
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) && c != '_' && c != '\''; };
    while (!w.empty() && is_punct(w.back())) w.pop_back();
    while (!w.empty() && is_punct(w.front())) w.erase(w.begin());
    if (!w.empty()) out.push_back(std::move(w));
  }
  return out;
}

// Case-insensitive surface form -> entity. Surface forms are stored as
// lowercased, single-space-joined words.
class Lexicon {
 public:
  void add(std::string_view surface, EntityId e) {
    auto words = tokenize(to_lower(surface));
    if (words.empty()) throw ContractViolation("empty lexicon surface form");
    std::string key = join(words);
    if (key == to_lower(Vocabulary::kEntWord)) throw ContractViolation("surface form collides with the ENT token");
    auto [it, inserted] = forms_.try_emplace(key, e);
    if (!inserted && it->second != e) throw ContractViolation("duplicate surface form: " + key);
    max_words_ = std::max(max_words_, words.size());
  }

  std::optional<EntityId> find(const std::vector<std::string>& lowered_words) const {
    auto it = forms_.find(join(lowered_words));
    if (it == forms_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t max_words() const { return max_words_; }
  std::size_t size() const { return forms_.size(); }
  const std::map<std::string, EntityId>& forms() const { return forms_; }

 private:
  static std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  }

  std::map<std::string, EntityId> forms_;
  std::size_t max_words_ = 0;
};

// Rows of `surface<TAB>entity`; every entity must exist in the KB.
inline Lexicon parse_lexicon(std::istream& in, const KnowledgeBase& kb, const std::string& source = "<stream>") {
  Lexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
    auto fields = split_tabs(line);
    if (fields.size() != 2) throw LoadError(where() + "expected 2 tab-separated fields");
    auto e = kb.find_entity(fields[1]);
    if (!e) throw LoadError(where() + "unknown entity " + std::string(fields[1]));
    try {
      lex.add(fields[0], *e);
    } catch (const ContractViolation& err) {
      throw LoadError(where() + err.what());
    }
  }
  return lex;
}

inline Lexicon load_lexicon(const std::string& path, const KnowledgeBase& kb) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  return parse_lexicon(in, kb, path);
}

inline void write_lexicon(const Lexicon& lex, const KnowledgeBase& kb, std::ostream& out) {
  for (const auto& [surface, e] : lex.forms()) out << surface << '\t' << kb.entity_name(e) << '\n';
}

struct LinkedQuestion {
  std::vector<std::string> words;  // original words with ENT substituted
  std::vector<EntitySpan> spans;
};

// Greedy longest match, left to right.
inline LinkedQuestion anonymize_and_link(const std::vector<std::string>& words, const Lexicon& lex) {
  LinkedQuestion out;
  out.words = words;
  std::vector<std::string> lowered;
  for (const auto& w : words) lowered.push_back(to_lower(w));
  std::size_t i = 0;
  while (i < words.size()) {
    bool matched = false;
    const auto longest = std::min(lex.max_words(), words.size() - i);
    for (std::size_t len = longest; len >= 1; --len) {
      std::vector<std::string> cand(lowered.begin() + static_cast<std::ptrdiff_t>(i),
                                    lowered.begin() + static_cast<std::ptrdiff_t>(i + len));
      if (auto e = lex.find(cand)) {
        out.spans.push_back({i, i + len - 1, *e});
        for (std::size_t j = i; j < i + len; ++j) out.words[j] = std::string(Vocabulary::kEntWord);
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

inline LinkedQuestion anonymize_and_link(std::string_view text, const Lexicon& lex) {
  return anonymize_and_link(tokenize(text), lex);
}

// One line of a dataset file.
struct Example {
  std::string id;
  std::string question;
  std::vector<std::string> answer;  // typed value text
  std::optional<std::vector<EntitySpan>> entities;
  std::optional<std::string> gold_program;
};

inline nlohmann::json to_json(const Example& e, const KnowledgeBase& kb) {
  nlohmann::json j{{"id", e.id}, {"question", e.question}, {"answer", e.answer}};
  if (e.entities) {
    auto& arr = j["entities"] = nlohmann::json::array();
    for (const auto& s : *e.entities) arr.push_back({{"start", s.start}, {"end", s.end}, {"entity", kb.entity_name(s.entity)}});
  }
  if (e.gold_program) j["gold_program"] = *e.gold_program;
  return j;
}

inline Example example_from_json(const nlohmann::json& j, const KnowledgeBase& kb) {
  Example e;
  e.id = j.at("id").get<std::string>();
  e.question = j.at("question").get<std::string>();
  e.answer = j.at("answer").get<std::vector<std::string>>();
  if (j.contains("entities")) {
    std::vector<EntitySpan> spans;
    for (const auto& s : j.at("entities")) {
      const auto name = s.at("entity").get<std::string>();
      auto ent = kb.find_entity(name);
      if (!ent) throw LoadError("unknown entity " + name);
      spans.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(), *ent});
    }
    e.entities = std::move(spans);
  }
  if (j.contains("gold_program")) e.gold_program = j.at("gold_program").get<std::string>();
  return e;
}

inline std::vector<Example> load_examples(const std::string& path, const KnowledgeBase& kb) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(example_from_json(nlohmann::json::parse(line), kb));
    } catch (const nlohmann::json::exception& err) {
      throw LoadError(path + ":" + std::to_string(line_no) + ": " + err.what());
    } catch (const LoadError& err) {
      throw LoadError(path + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  return out;
}

inline void write_examples(const std::vector<Example>& examples, const KnowledgeBase& kb, std::ostream& out) {
  for (const auto& e : examples) out << to_json(e, kb).dump() << '\n';
}

// Anonymized words, linked spans, and one singleton variable per span.
// Pre-linked spans, when given, bypass the lexicon.
inline Question link_question(const KnowledgeBase& kb, const Lexicon& lex, const Vocabulary& vocab, std::string id,
                              std::string text, const std::optional<std::vector<EntitySpan>>& spans = {}) {
  Question q;
  q.id = std::move(id);
  q.text = std::move(text);
  auto words = tokenize(q.text);
  if (spans) {
    q.spans = *spans;
    q.words = words;
    for (const auto& s : q.spans) {
      if (s.end >= words.size() || s.start > s.end) throw LoadError("question " + q.id + ": entity span out of range");
      for (std::size_t j = s.start; j <= s.end; ++j) q.words[j] = std::string(Vocabulary::kEntWord);
    }
  } else {
    auto linked = anonymize_and_link(words, lex);
    q.words = std::move(linked.words);
    q.spans = std::move(linked.spans);
  }
  for (const auto& w : q.words) {
    q.word_ids.push_back(w == Vocabulary::kEntWord ? Vocabulary::kEnt : vocab.id(to_lower(w)));
  }
  for (const auto& s : q.spans) q.linked.push(kb, make_value_set({s.entity}));
  return q;
}

// Builds the programmer's view of an example. Returns nullopt (with a
// warning) when the gold answer is empty.
inline std::optional<Question> prepare_question(const KnowledgeBase& kb, const Lexicon& lex, const Vocabulary& vocab,
                                                const Example& ex, std::ostream* warn = &std::clog) {
  std::vector<Value> gold;
  for (const auto& a : ex.answer) {
    auto v = kb.parse_value(a);
    if (!v) throw LoadError("example " + ex.id + ": unparseable answer value " + a);
    gold.push_back(*v);
  }
  if (gold.empty()) {
    if (warn) *warn << "warning: dropping example " << ex.id << " with empty gold answer\n";
    return std::nullopt;
  }
  Question q = link_question(kb, lex, vocab, ex.id, ex.question, ex.entities);
  q.gold = make_value_set(std::move(gold));
  q.gold_program = ex.gold_program;
  return q;
}

inline std::vector<Question> prepare_questions(const KnowledgeBase& kb, const Lexicon& lex, const Vocabulary& vocab,
                                               const std::vector<Example>& examples,
                                               std::ostream* warn = &std::clog) {
  std::vector<Question> out;
  for (const auto& ex : examples) {
    if (auto q = prepare_question(kb, lex, vocab, ex, warn)) out.push_back(std::move(*q));
  }
  return out;
}

// Words of the (anonymized) training questions plus every property word.
inline Vocabulary build_vocabulary(const KnowledgeBase& kb, const Lexicon& lex, const std::vector<Example>& train) {
  Vocabulary v;
  for (const auto& ex : train) {
    for (const auto& w : anonymize_and_link(ex.question, lex).words) {
      if (w != Vocabulary::kEntWord) v.add(to_lower(w));
    }
  }
  add_property_words(v, kb);
  return v;
}

struct Benchmark {
  KnowledgeBase kb;
  Lexicon lexicon;
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;

  const std::vector<Example>& split(std::string_view name) const {
    if (name == "train") return train;
    if (name == "valid") return valid;
    if (name == "test") return test;
    throw ContractViolation("unknown split " + std::string(name));
  }
};

inline Benchmark load_benchmark(const std::filesystem::path& dir) {
  Benchmark b;
  b.kb = load_triples((dir / "kb.tsv").string());
  b.lexicon = load_lexicon((dir / "lexicon.tsv").string(), b.kb);
  b.train = load_examples((dir / "train.jsonl").string(), b.kb);
  b.valid = load_examples((dir / "valid.jsonl").string(), b.kb);
  b.test = load_examples((dir / "test.jsonl").string(), b.kb);
  return b;
}

}  // namespace nsm
