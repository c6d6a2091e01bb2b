#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nsm/dataset.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/kb.hpp"
#include "nsm/model.hpp"
#include "nsm/question.hpp"

namespace nsm::testing {

// USA -city-> NYC, SF; NYC/SF -pop-> numbers; USA -capital-> DC.
inline KnowledgeBase kb0() {
  std::istringstream in(
      "USA\tcity\tNYC\n"
      "USA\tcity\tSF\n"
      "NYC\tpop\tn:8.6\n"
      "SF\tpop\tn:0.9\n"
      "USA\tcapital\tDC\n");
  return parse_triples(in, "kb0");
}

inline EntityId ent(const KnowledgeBase& kb, const std::string& name) { return *kb.find_entity(name); }
inline PropertyId prop(const KnowledgeBase& kb, const std::string& name) { return *kb.find_property(name); }

inline ValueSet ents(const KnowledgeBase& kb, std::initializer_list<const char*> names) {
  std::vector<Value> v;
  for (const auto* n : names) v.push_back(ent(kb, n));
  return make_value_set(std::move(v));
}

inline VariableStore store_of(const KnowledgeBase& kb, std::initializer_list<ValueSet> sets) {
  VariableStore s;
  for (const auto& v : sets) s.push(kb, v);
  return s;
}

// Question whose words are given literally; `spans` are (start, end, entity).
inline Question make_question(const KnowledgeBase& kb, Vocabulary& vocab, const std::string& text,
                              std::vector<EntitySpan> spans, ValueSet gold = {}) {
  Question q;
  q.id = text;
  q.text = text;
  q.words = tokenize(text);
  for (auto& w : q.words) q.word_ids.push_back(vocab.add(w));
  q.spans = std::move(spans);
  for (const auto& s : q.spans) {
    for (auto t = s.start; t <= s.end; ++t) q.word_ids[t] = Vocabulary::kEnt;
    q.linked.push(kb, make_value_set({s.entity}));
  }
  q.gold = std::move(gold);
  return q;
}

// Random KB over `n_entities` entities and `n_props` properties, mixing
// entity, number and date objects.
inline KnowledgeBase random_kb(std::mt19937_64& rng, int n_entities, int n_props, int edges) {
  KbBuilder b;
  std::vector<EntityId> es;
  for (int i = 0; i < n_entities; ++i) es.push_back(b.intern_entity("e" + std::to_string(i)));
  std::vector<PropertyId> ps;
  for (int i = 0; i < n_props; ++i) ps.push_back(b.intern_property("p" + std::to_string(i)));
  std::uniform_int_distribution<int> pe(0, n_entities - 1), pp(0, n_props - 1), kind(0, 5), small(0, 9);
  for (int i = 0; i < edges; ++i) {
    const auto s = es[static_cast<std::size_t>(pe(rng))];
    const auto p = ps[static_cast<std::size_t>(pp(rng))];
    // Property index decides its value kind so that most properties are
    // single-typed; property 0 mixes numbers and dates.
    const int k = p.index == 0 ? kind(rng) % 2 + 4 : (p.index % 3 == 1 ? 4 : (p.index % 3 == 2 ? 5 : 0));
    if (k < 4) {
      b.add(s, p, es[static_cast<std::size_t>(pe(rng))]);
    } else if (k == 4) {
      b.add(s, p, Number{static_cast<double>(small(rng))});
    } else {
      b.add(s, p, Date{2000 + small(rng), 1 + small(rng), 1 + small(rng)});
    }
  }
  return std::move(b).build();
}

// Set-semantics interpreter that scans the triple list directly.
struct OracleError {};

inline ValueSet oracle_expression(const KnowledgeBase& kb, const std::vector<ValueSet>& vars, const Expression& e) {
  if (e.var1 >= vars.size() || (e.function == Function::Filter && e.var2 >= vars.size())) throw OracleError{};
  const auto& r1 = vars[e.var1];
  std::vector<Value> out;
  if (e.function == Function::Hop) {
    for (const auto& t : kb.triples()) {
      if (t.property == e.property && set_contains(r1, Value{t.subject})) out.push_back(t.object);
    }
    return make_value_set(out);
  }
  if (e.function == Function::Filter) {
    const auto& r2 = vars[e.var2];
    for (const auto& t : kb.triples()) {
      if (t.property == e.property && set_contains(r1, Value{t.subject}) && set_contains(r2, t.object)) {
        out.push_back(t.subject);
      }
    }
    return make_value_set(out);
  }
  // Every (member, comparable value) pair.
  const bool maximize = e.function == Function::ArgMax;
  std::vector<std::pair<EntityId, Value>> pairs;
  bool numbers = false;
  bool dates = false;
  for (const auto& t : kb.triples()) {
    if (t.property != e.property || !set_contains(r1, Value{t.subject}) || is_entity(t.object)) continue;
    pairs.emplace_back(t.subject, t.object);
    numbers |= std::holds_alternative<Number>(t.object);
    dates |= std::holds_alternative<Date>(t.object);
  }
  if (numbers && dates) throw OracleError{};
  if (pairs.empty()) return {};
  auto better = [&](const Value& a, const Value& b) { return maximize ? b < a : a < b; };
  Value global = pairs.front().second;
  for (const auto& pr : pairs) {
    if (better(pr.second, global)) global = pr.second;
  }
  for (const auto& [member, value] : pairs) {
    if (value != global) continue;
    // The member's own extreme must be the global one.
    bool beaten = false;
    for (const auto& [m2, v2] : pairs) beaten |= m2 == member && better(v2, value);
    if (!beaten) out.push_back(member);
  }
  return make_value_set(out);
}

inline ValueSet oracle_program(const KnowledgeBase& kb, std::vector<ValueSet> vars, const std::vector<Expression>& exprs) {
  ValueSet last;
  for (const auto& e : exprs) {
    last = oracle_expression(kb, vars, e);
    vars.push_back(last);
  }
  return last;
}

// Grammatical program with uniformly random variables, functions and
// properties; it may well fail at run time.
inline std::vector<Expression> random_expressions(std::mt19937_64& rng, const KnowledgeBase& kb,
                                                  std::size_t linked, int max_expressions) {
  std::uniform_int_distribution<int> count(0, max_expressions), fn(0, 3);
  std::uniform_int_distribution<std::uint32_t> pp(0, static_cast<std::uint32_t>(kb.num_properties() - 1));
  std::vector<Expression> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> var(0, linked + out.size() - 1);
    Expression e;
    e.function = kAllFunctions[static_cast<std::size_t>(fn(rng))];
    e.var1 = var(rng);
    e.var2 = var(rng);
    e.property = PropertyId{pp(rng)};
    out.push_back(e);
  }
  return out;
}

inline TokenSeq to_tokens(const std::vector<Expression>& exprs) {
  TokenSeq out;
  for (const auto& e : exprs) {
    out.push_back(Token::open());
    out.push_back(Token::function(e.function));
    out.push_back(Token::variable(e.var1));
    if (e.function == Function::Filter) out.push_back(Token::variable(e.var2));
    out.push_back(Token::property(e.property));
    out.push_back(Token::close());
  }
  out.push_back(Token::ret());
  return out;
}

// Random linked variables: 1-2 entity sets of 1-3 members each.
inline std::vector<ValueSet> random_linked(std::mt19937_64& rng, const KnowledgeBase& kb) {
  std::uniform_int_distribution<int> nvars(1, 2), nmem(1, 3);
  std::uniform_int_distribution<std::uint32_t> pe(0, static_cast<std::uint32_t>(kb.num_entities() - 1));
  std::vector<ValueSet> out;
  const int n = nvars(rng);
  for (int i = 0; i < n; ++i) {
    std::vector<Value> v;
    const int m = nmem(rng);
    for (int j = 0; j < m; ++j) v.push_back(EntityId{pe(rng)});
    out.push_back(make_value_set(v));
  }
  return out;
}

// Samples uniformly from the valid tokens until Return.
inline TokenSeq random_rollout(std::mt19937_64& rng, Executor& exec, const VariableStore& linked,
                               const CurriculumConstraints& constraints) {
  Session s(exec, linked, constraints);
  TokenSeq out;
  while (!s.finished()) {
    auto valid = s.valid_tokens();
    std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
    out.push_back(valid[pick(rng)]);
    s.apply(out.back());
  }
  return out;
}

}  // namespace nsm::testing
