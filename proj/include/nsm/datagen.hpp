#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsm/dataset.hpp"
#include "nsm/errors.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/kb.hpp"

namespace nsm {

enum class EntityType { Person, City, Country, Company, Film };
inline constexpr std::size_t kNumEntityTypes = 5;

struct GenProperty {
  enum class Range { Entity, Number, Date };
  std::string name;
  EntityType domain;
  Range range;
  EntityType target = EntityType::Person;  // when range is Entity
  bool multi = false;
  std::string noun;
  int inverse_of = -1;  // catalog index of the forward property
  double lo = 0.0, hi = 0.0;
  int decimals = 0;
};

// Ordered so that any prefix mixes domains and value kinds, and every
// inverse property follows its forward property.
inline std::vector<GenProperty> property_catalog() {
  using R = GenProperty::Range;
  using T = EntityType;
  return {
      {"/people/person/place_of_birth", T::Person, R::Entity, T::City, false, "birthplace"},
      {"/location/city/population", T::City, R::Number, T::Person, false, "population", -1, 1000, 9000000},
      {"/location/city/country", T::City, R::Entity, T::Country, false, "country"},
      {"/people/person/employer", T::Person, R::Entity, T::Company, false, "employer"},
      {"/business/company/headquarters", T::Company, R::Entity, T::City, false, "headquarters"},
      {"/location/country/capital", T::Country, R::Entity, T::City, false, "capital"},
      {"/people/person/age", T::Person, R::Number, T::Person, false, "age", -1, 18, 95},
      {"/film/film/director", T::Film, R::Entity, T::Person, false, "director"},
      {"/location/country/area", T::Country, R::Number, T::Person, false, "area", -1, 1000, 9000000},
      {"/business/company/revenue", T::Company, R::Number, T::Person, false, "revenue", -1, 10000, 90000000},
      {"/film/film/budget", T::Film, R::Number, T::Person, false, "budget", -1, 100000, 300000000},
      {"/people/person/nationality", T::Person, R::Entity, T::Country, true, "nationality"},
      {"/location/city/mayor", T::City, R::Entity, T::Person, false, "mayor"},
      {"/business/company/founder", T::Company, R::Entity, T::Person, false, "founder"},
      {"/film/film/release_date", T::Film, R::Date, T::Person, false, "release date"},
      {"/film/film/country", T::Film, R::Entity, T::Country, true, "production country"},
      {"/people/person/height", T::Person, R::Number, T::Person, false, "height", -1, 1.45, 2.10, 2},
      {"/location/city/people_born_here", T::City, R::Entity, T::Person, true, "natives", 0},
      {"/location/country/cities", T::Country, R::Entity, T::City, true, "cities", 2},
      {"/business/company/employees", T::Company, R::Entity, T::Person, true, "employees", 3},
  };
}

inline std::string_view type_path(EntityType t) {
  switch (t) {
    case EntityType::Person: return "/people/person";
    case EntityType::City: return "/location/city";
    case EntityType::Country: return "/location/country";
    case EntityType::Company: return "/business/company";
    case EntityType::Film: return "/film/film";
  }
  return "";
}

// Catalog prefix, extended with numeric "metric" properties past its end.
inline std::vector<GenProperty> select_properties(std::size_t count) {
  auto cat = property_catalog();
  std::vector<GenProperty> out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i < cat.size()) {
      out.push_back(cat[i]);
      continue;
    }
    const auto k = i + 1;
    const auto domain = static_cast<EntityType>(i % kNumEntityTypes);
    GenProperty p{std::string(type_path(domain)) + "/metric_" + std::to_string(k), domain,
                  GenProperty::Range::Number, EntityType::Person, false, "metric " + std::to_string(k)};
    p.lo = 0;
    p.hi = 1000;
    out.push_back(std::move(p));
  }
  return out;
}

struct TemplateMix {
  double one_hop = 0.45;
  double two_hop = 0.25;
  double filter = 0.15;
  double superlative = 0.15;
};

struct BenchmarkSpec {
  std::uint64_t seed = 1;
  std::size_t entities = 200;
  std::size_t properties = 20;
  std::size_t questions = 500;
  std::size_t fanout = 3;
  TemplateMix mix;
  int max_retries = 100;  // per template instance

  void validate() const {
    if (entities < 1 || properties < 1 || questions < 1 || fanout < 1) {
      throw ContractViolation("benchmark sizes must be >= 1");
    }
    if (mix.one_hop < 0 || mix.two_hop < 0 || mix.filter < 0 || mix.superlative < 0 ||
        mix.one_hop + mix.two_hop + mix.filter + mix.superlative <= 0) {
      throw ContractViolation("template mix must be non-negative with a positive sum");
    }
  }
};

inline nlohmann::json to_json(const BenchmarkSpec& s) {
  return {{"seed", s.seed},
          {"entities", s.entities},
          {"properties", s.properties},
          {"questions", s.questions},
          {"fanout", s.fanout},
          {"mix",
           {{"one_hop", s.mix.one_hop},
            {"two_hop", s.mix.two_hop},
            {"filter", s.mix.filter},
            {"superlative", s.mix.superlative}}}};
}

struct GeneratedBenchmark {
  Benchmark bench;
  BenchmarkSpec spec;
  std::array<std::size_t, 4> template_counts{};  // one-hop, two-hop, filter, superlative
};

namespace detail {

// Person, city, country, company, film.
inline constexpr std::array<double, kNumEntityTypes> kTypeShare{0.40, 0.20, 0.08, 0.15, 0.17};

// Largest-remainder apportionment of n over the type shares.
inline std::array<std::size_t, kNumEntityTypes> apportion(std::size_t n) {
  std::array<std::size_t, kNumEntityTypes> out{};
  std::array<std::pair<double, std::size_t>, kNumEntityTypes> rem{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < kNumEntityTypes; ++i) {
    const double exact = kTypeShare[i] * static_cast<double>(n);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rem[i] = {exact - std::floor(exact), i};
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++out[rem[i % kNumEntityTypes].second];
  return out;
}

class NameMaker {
 public:
  explicit NameMaker(std::set<std::string> reserved) : used_(std::move(reserved)) {}

  std::string make(std::mt19937_64& rng, bool two_words) {
    for (int tries = 0; tries < 10000; ++tries) {
      std::string name = word(rng);
      if (two_words) name += " " + word(rng);
      if (used_.insert(name).second) return name;
    }
    throw ExecutionError("name space exhausted");
  }

 private:
  std::string word(std::mt19937_64& rng) {
    static constexpr std::array<std::string_view, 24> kSyllables{
        "ka", "lo", "mi", "ra", "to", "ne", "su", "vi", "do", "ba", "ze", "ri",
        "po", "la", "gu", "fe", "ny", "ho", "ta", "me", "zu", "qui", "ro", "sa"};
    std::uniform_int_distribution<int> len(2, 3);
    std::uniform_int_distribution<std::size_t> pick(0, kSyllables.size() - 1);
    std::string w;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) w += kSyllables[pick(rng)];
    return w;
  }

  std::set<std::string> used_;
};

struct GenEntity {
  std::string id;
  std::string surface;
  EntityType type;
};

struct Draft {
  std::string question;
  std::string program;
  std::vector<EntityId> mentions;  // in text order
  ValueSet answer;
};

class Generator {
 public:
  Generator(const BenchmarkSpec& spec, std::ostream* warn) : spec_(spec), warn_(warn), rng_(spec.seed) {}

  GeneratedBenchmark run() {
    spec_.validate();
    props_ = select_properties(spec_.properties);
    make_entities();
    make_triples();
    GeneratedBenchmark out;
    out.spec = spec_;
    out.bench.kb = std::move(kb_);
    out.bench.lexicon = make_lexicon(out.bench.kb);
    make_questions(out);
    return out;
  }

 private:
  std::set<std::string> reserved_words() const {
    std::set<std::string> r{"ent", "what", "is", "the", "of", "which", "have", "has", "largest", "smallest",
                            "latest", "earliest", "are", "who", "tell", "me"};
    for (const auto& p : props_) {
      for (const auto& w : tokenize(p.noun)) r.insert(w);
      for (const auto& part : split_property_id(p.name)) {
        for (const auto& w : part) r.insert(w);
      }
    }
    return r;
  }

  void make_entities() {
    NameMaker names(reserved_words());
    const auto counts = apportion(spec_.entities);
    std::bernoulli_distribution two_words(0.3);
    for (std::size_t t = 0; t < kNumEntityTypes; ++t) {
      const auto type = static_cast<EntityType>(t);
      const bool may_pair = type == EntityType::Person || type == EntityType::Film;
      for (std::size_t i = 0; i < counts[t]; ++i) {
        auto surface = names.make(rng_, may_pair && two_words(rng_));
        std::string id = "m." + surface;
        std::replace(id.begin(), id.end(), ' ', '_');
        by_type_[t].push_back(entities_.size());
        entities_.push_back({std::move(id), std::move(surface), type});
      }
    }
  }

  Value random_scalar(const GenProperty& p) {
    if (p.range == GenProperty::Range::Date) {
      std::uniform_int_distribution<int> y(1950, 2020), m(1, 12), d(1, 28);
      const int yy = y(rng_), mm = m(rng_), dd = d(rng_);
      return Date{yy, mm, dd};
    }
    std::uniform_real_distribution<double> u(p.lo, p.hi);
    const double scale = std::pow(10.0, p.decimals);
    return Number{std::round(u(rng_) * scale) / scale};
  }

  void make_triples() {
    KbBuilder b;
    std::vector<EntityId> ids;
    for (const auto& e : entities_) ids.push_back(b.intern_entity(e.id));
    std::vector<PropertyId> pids;
    for (const auto& p : props_) pids.push_back(b.intern_property(p.name));
    // Forward edges by (catalog index, subject) for building inverses.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> forward(props_.size());

    for (std::size_t pi = 0; pi < props_.size(); ++pi) {
      const auto& p = props_[pi];
      if (p.inverse_of >= 0) continue;
      for (auto s : by_type_[static_cast<std::size_t>(p.domain)]) {
        if (p.range != GenProperty::Range::Entity) {
          b.add(ids[s], pids[pi], random_scalar(p));
          continue;
        }
        std::vector<std::size_t> pool;
        for (auto o : by_type_[static_cast<std::size_t>(p.target)]) {
          if (o != s) pool.push_back(o);
        }
        if (pool.empty()) continue;
        std::size_t n = 1;
        if (p.multi) n = std::uniform_int_distribution<std::size_t>(1, std::min(spec_.fanout, pool.size()))(rng_);
        std::vector<std::size_t> chosen;
        std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), n, rng_);
        std::shuffle(chosen.begin(), chosen.end(), rng_);
        for (auto o : chosen) {
          b.add(ids[s], pids[pi], Value{ids[o]});
          forward[pi].emplace_back(s, o);
        }
      }
    }
    for (std::size_t pi = 0; pi < props_.size(); ++pi) {
      const int src = props_[pi].inverse_of;
      if (src < 0 || static_cast<std::size_t>(src) >= props_.size()) continue;
      for (auto [s, o] : forward[static_cast<std::size_t>(src)]) b.add(ids[o], pids[pi], Value{ids[s]});
    }
    kb_ = std::move(b).build();
  }

  // Only entities that appear in some triple survive a round trip through
  // kb.tsv, so only those get surface forms.
  Lexicon make_lexicon(const KnowledgeBase& kb) {
    std::vector<bool> present(kb.num_entities(), false);
    for (const auto& t : kb.triples()) {
      present[t.subject.index] = true;
      if (const auto* e = std::get_if<EntityId>(&t.object)) present[e->index] = true;
    }
    Lexicon lex;
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      auto e = kb.find_entity(entities_[i].id);
      linkable_.push_back(e && present[e->index]);
      if (linkable_.back()) lex.add(entities_[i].surface, *e);
    }
    return lex;
  }

  std::optional<std::size_t> random_entity(std::size_t type) {
    std::vector<std::size_t> pool;
    for (auto i : by_type_[type]) {
      if (linkable_[i]) pool.push_back(i);
    }
    if (pool.empty()) return std::nullopt;
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
  }

  std::optional<std::size_t> random_property(const std::function<bool(const GenProperty&)>& ok) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < props_.size(); ++i) {
      if (ok(props_[i]) && kb_of().find_property(props_[i].name)) pool.push_back(i);
    }
    if (pool.empty()) return std::nullopt;
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
  }

  const KnowledgeBase& kb_of() const { return *current_kb_; }
  PropertyId pid(std::size_t pi) const { return *kb_of().find_property(props_[pi].name); }
  EntityId eid(std::size_t ei) const { return *kb_of().find_entity(entities_[ei].id); }

  static bool is_entity_range(const GenProperty& p) { return p.range == GenProperty::Range::Entity; }

  // True when one property is the inverse of the other.
  bool reverses(const GenProperty& p, std::size_t other) const {
    const auto self = static_cast<int>(&p - props_.data());
    return p.inverse_of == static_cast<int>(other) || props_[other].inverse_of == self;
  }

  std::optional<Draft> one_hop() {
    auto pi = random_property([](const GenProperty&) { return true; });
    if (!pi) return std::nullopt;
    auto e = random_entity(static_cast<std::size_t>(props_[*pi].domain));
    if (!e) return std::nullopt;
    auto ans = forward(kb_of(), make_value_set({eid(*e)}), pid(*pi));
    if (ans.empty()) return std::nullopt;
    return Draft{"what is the " + props_[*pi].noun + " of " + entities_[*e].surface,
                 "( Hop R1 " + props_[*pi].name + " ) Return", {eid(*e)}, std::move(ans)};
  }

  std::optional<Draft> two_hop() {
    auto p1 = random_property(is_entity_range);
    if (!p1) return std::nullopt;
    const auto mid = props_[*p1].target;
    auto p2 = random_property([&](const GenProperty& p) { return p.domain == mid && !reverses(p, *p1); });
    if (!p2) return std::nullopt;
    auto e = random_entity(static_cast<std::size_t>(props_[*p1].domain));
    if (!e) return std::nullopt;
    auto r2 = forward(kb_of(), make_value_set({eid(*e)}), pid(*p1));
    auto ans = forward(kb_of(), r2, pid(*p2));
    if (ans.empty()) return std::nullopt;
    return Draft{"what is the " + props_[*p2].noun + " of the " + props_[*p1].noun + " of " + entities_[*e].surface,
                 "( Hop R1 " + props_[*p1].name + " ) ( Hop R2 " + props_[*p2].name + " ) Return",
                 {eid(*e)},
                 std::move(ans)};
  }

  std::optional<Draft> filter() {
    auto p1 = random_property([](const GenProperty& p) { return is_entity_range(p) && p.multi; });
    if (!p1) return std::nullopt;
    const auto mid = props_[*p1].target;
    auto p2 = random_property(
        [&](const GenProperty& p) { return p.domain == mid && is_entity_range(p) && !reverses(p, *p1); });
    if (!p2) return std::nullopt;
    auto e1 = random_entity(static_cast<std::size_t>(props_[*p1].domain));
    if (!e1) return std::nullopt;
    auto r3 = forward(kb_of(), make_value_set({eid(*e1)}), pid(*p1));
    if (r3.size() < 2) return std::nullopt;
    auto objects = forward(kb_of(), r3, pid(*p2));
    if (objects.empty()) return std::nullopt;
    const auto& pick = objects[std::uniform_int_distribution<std::size_t>(0, objects.size() - 1)(rng_)];
    const auto e2 = std::get<EntityId>(pick);
    const auto* e2_entry = find_entity_index(e2);
    if (!e2_entry || e2 == eid(*e1)) return std::nullopt;
    auto ans = eval_filter(kb_of(), r3, make_value_set({e2}), pid(*p2));
    if (ans.empty() || ans.size() == r3.size()) return std::nullopt;
    return Draft{"which " + props_[*p1].noun + " of " + entities_[*e1].surface + " have " + props_[*p2].noun + " " +
                     entities_[*e2_entry].surface,
                 "( Hop R1 " + props_[*p1].name + " ) ( Filter R3 R2 " + props_[*p2].name + " ) Return",
                 {eid(*e1), e2},
                 std::move(ans)};
  }

  std::optional<Draft> superlative() {
    auto p1 = random_property([](const GenProperty& p) { return is_entity_range(p) && p.multi; });
    if (!p1) return std::nullopt;
    const auto mid = props_[*p1].target;
    auto p2 = random_property([&](const GenProperty& p) { return p.domain == mid && !is_entity_range(p); });
    if (!p2) return std::nullopt;
    auto e = random_entity(static_cast<std::size_t>(props_[*p1].domain));
    if (!e) return std::nullopt;
    auto r2 = forward(kb_of(), make_value_set({eid(*e)}), pid(*p1));
    std::size_t with_value = 0;
    for (const auto& v : r2) with_value += !forward(kb_of(), make_value_set({v}), pid(*p2)).empty();
    if (with_value < 2) return std::nullopt;
    const bool maximize = std::bernoulli_distribution(0.5)(rng_);
    const bool numeric = props_[*p2].range == GenProperty::Range::Number;
    const std::string adj = maximize ? (numeric ? "largest" : "latest") : (numeric ? "smallest" : "earliest");
    auto ans = eval_extremum(kb_of(), r2, pid(*p2), maximize);
    if (ans.empty()) return std::nullopt;
    return Draft{"which " + props_[*p1].noun + " of " + entities_[*e].surface + " has the " + adj + " " +
                     props_[*p2].noun,
                 std::string("( Hop R1 ") + props_[*p1].name + " ) ( " + (maximize ? "ArgMax" : "ArgMin") +
                     " R2 " + props_[*p2].name + " ) Return",
                 {eid(*e)},
                 std::move(ans)};
  }

  const std::size_t* find_entity_index(EntityId e) {
    const auto& name = kb_of().entity_name(e);
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      if (entities_[i].id == name && linkable_[i]) {
        scratch_ = i;
        return &scratch_;
      }
    }
    return nullptr;
  }

  // Checks that linking recovers exactly the intended mentions and that the
  // program reproduces the answer.
  bool consistent(const Draft& d, const Lexicon& lex) {
    auto linked = anonymize_and_link(d.question, lex);
    if (linked.spans.size() != d.mentions.size()) return false;
    VariableStore store;
    for (std::size_t i = 0; i < d.mentions.size(); ++i) {
      if (linked.spans[i].entity != d.mentions[i]) return false;
      store.push(kb_of(), make_value_set({d.mentions[i]}));
    }
    const auto gold = parse_program(kb_of(), d.program);
    auto got = execute_program(kb_of(), store, gold);
    if (got != d.answer) throw ExecutionError("generator produced an inconsistent gold program: " + d.program);
    return !has_rival(store, gold, d.answer);
  }

  // True when some other program no longer than `gold` also yields exactly
  // `answer`. Such questions would let search settle on a coincidental
  // program with full reward.
  bool has_rival(const VariableStore& store, const TokenSeq& gold, const ValueSet& answer) {
    auto limits = CurriculumConstraints::all(static_cast<int>(count_expressions(gold)));
    limits.max_tokens = static_cast<int>(gold.size());
    Executor exec(kb_of());
    TokenSeq prefix;
    std::function<bool(const Session&)> search = [&](const Session& s) {
      if (s.finished()) return prefix != gold && s.result() == answer;
      if (prefix.size() >= gold.size()) return false;
      for (const auto& t : s.valid_tokens()) {
        Session next = s;
        next.apply(t);
        prefix.push_back(t);
        const bool found = search(next);
        prefix.pop_back();
        if (found) return true;
      }
      return false;
    };
    return search(Session(exec, store, limits));
  }

  void make_questions(GeneratedBenchmark& out) {
    current_kb_ = &out.bench.kb;
    const auto& m = spec_.mix;
    std::discrete_distribution<int> kind({m.one_hop, m.two_hop, m.filter, m.superlative});
    std::vector<Example> all;
    std::set<std::string> seen;
    const std::size_t budget = spec_.questions * static_cast<std::size_t>(spec_.max_retries);
    std::size_t attempts = 0;
    while (all.size() < spec_.questions && attempts < budget) {
      const int k = kind(rng_);
      std::optional<Draft> d;
      for (int r = 0; r < spec_.max_retries && !d; ++r, ++attempts) {
        switch (k) {
          case 0: d = one_hop(); break;
          case 1: d = two_hop(); break;
          case 2: d = filter(); break;
          default: d = superlative(); break;
        }
        if (d && (seen.count(d->question) || !consistent(*d, out.bench.lexicon))) d.reset();
      }
      if (!d) continue;
      seen.insert(d->question);
      ++out.template_counts[static_cast<std::size_t>(k)];
      char id[32];
      std::snprintf(id, sizeof id, "q%05zu", all.size() + 1);
      Example ex;
      ex.id = id;
      ex.question = d->question;
      for (const auto& v : d->answer) ex.answer.push_back(kb_of().format_value(v));
      ex.gold_program = d->program;
      all.push_back(std::move(ex));
    }
    if (all.size() < spec_.questions && warn_) {
      *warn_ << "warning: generated " << all.size() << " of " << spec_.questions
             << " questions before exhausting retries\n";
    }
    if (all.size() < 3) throw ExecutionError("could not generate enough questions for three splits");

    std::shuffle(all.begin(), all.end(), rng_);
    const auto n = all.size();
    auto n_valid = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n))));
    auto n_test = n_valid;
    auto n_train = n - n_valid - n_test;
    if (n_train == 0) throw ExecutionError("too few questions for a training split");
    auto by_id = [](const Example& a, const Example& b) { return a.id < b.id; };
    auto take = [&](std::size_t from, std::size_t count) {
      std::vector<Example> v(all.begin() + static_cast<std::ptrdiff_t>(from),
                             all.begin() + static_cast<std::ptrdiff_t>(from + count));
      std::sort(v.begin(), v.end(), by_id);
      return v;
    };
    out.bench.train = take(0, n_train);
    out.bench.valid = take(n_train, n_valid);
    out.bench.test = take(n_train + n_valid, n_test);
  }

  BenchmarkSpec spec_;
  std::ostream* warn_;
  std::mt19937_64 rng_;
  std::vector<GenProperty> props_;
  std::vector<GenEntity> entities_;
  std::array<std::vector<std::size_t>, kNumEntityTypes> by_type_;
  std::vector<bool> linkable_;
  KnowledgeBase kb_;
  const KnowledgeBase* current_kb_ = nullptr;
  std::size_t scratch_ = 0;
};

}  // namespace detail

inline GeneratedBenchmark generate_benchmark(const BenchmarkSpec& spec, std::ostream* warn = &std::clog) {
  return detail::Generator(spec, warn).run();
}

inline void write_benchmark(const GeneratedBenchmark& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ExecutionError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("kb.tsv");
    write_triples(g.bench.kb, f);
  }
  {
    auto f = open("lexicon.tsv");
    write_lexicon(g.bench.lexicon, g.bench.kb, f);
  }
  for (const char* split : {"train", "valid", "test"}) {
    auto f = open((std::string(split) + ".jsonl").c_str());
    write_examples(g.bench.split(split), g.bench.kb, f);
  }
  auto meta = to_json(g.spec);
  meta["splits"] = {{"train", g.bench.train.size()}, {"valid", g.bench.valid.size()}, {"test", g.bench.test.size()}};
  meta["templates"] = {{"one_hop", g.template_counts[0]},
                       {"two_hop", g.template_counts[1]},
                       {"filter", g.template_counts[2]},
                       {"superlative", g.template_counts[3]}};
  meta["triples"] = g.bench.kb.triples().size();
  auto f = open("spec.json");
  f << meta.dump(2) << '\n';
}

}  // namespace nsm
