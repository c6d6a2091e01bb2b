#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "nsm/errors.hpp"
#include "nsm/kb.hpp"
#include "nsm/value.hpp"

namespace nsm {

enum class Function : std::uint8_t { Hop = 0, ArgMax = 1, ArgMin = 2, Filter = 3 };
inline constexpr std::array<Function, 4> kAllFunctions = {Function::Hop, Function::ArgMax, Function::ArgMin,
                                                          Function::Filter};

inline std::string_view function_name(Function f) {
  switch (f) {
    case Function::Hop: return "Hop";
    case Function::ArgMax: return "ArgMax";
    case Function::ArgMin: return "ArgMin";
    case Function::Filter: return "Filter";
  }
  return "?";
}

// Declaration order is the tie-break order used by beam search.
enum class TokenKind : std::uint8_t { Open, Close, Function, Property, Variable, Return, Go };

struct Token {
  TokenKind kind = TokenKind::Return;
  std::uint32_t arg = 0;  // Function code, PropertyId index, or variable index

  auto operator<=>(const Token&) const = default;

  static Token open() { return {TokenKind::Open, 0}; }
  static Token close() { return {TokenKind::Close, 0}; }
  static Token ret() { return {TokenKind::Return, 0}; }
  static Token go() { return {TokenKind::Go, 0}; }
  static Token function(Function f) { return {TokenKind::Function, static_cast<std::uint32_t>(f)}; }
  static Token property(PropertyId p) { return {TokenKind::Property, p.index}; }
  static Token variable(std::size_t i) { return {TokenKind::Variable, static_cast<std::uint32_t>(i)}; }

  Function as_function() const { return static_cast<Function>(arg); }
  PropertyId as_property() const { return PropertyId{arg}; }
};

// Embedding-table rows for the tokens that are not properties or variables.
inline constexpr int kNumStaticTokens = 8;
inline int static_token_index(const Token& t) {
  switch (t.kind) {
    case TokenKind::Open: return 0;
    case TokenKind::Close: return 1;
    case TokenKind::Function: return 2 + static_cast<int>(t.arg);
    case TokenKind::Return: return 6;
    case TokenKind::Go: return 7;
    default: return -1;
  }
}

using TokenSeq = std::vector<Token>;

inline std::string format_token(const KnowledgeBase& kb, const Token& t) {
  switch (t.kind) {
    case TokenKind::Open: return "(";
    case TokenKind::Close: return ")";
    case TokenKind::Function: return std::string(function_name(t.as_function()));
    case TokenKind::Property: return kb.property_name(t.as_property());
    case TokenKind::Variable: return "R" + std::to_string(t.arg + 1);
    case TokenKind::Return: return "Return";
    case TokenKind::Go: return "Go";
  }
  return "?";
}

// Canonical text: tokens separated by single spaces.
inline std::string format_program(const KnowledgeBase& kb, std::span<const Token> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += format_token(kb, t);
  }
  return out;
}

inline TokenSeq parse_program(const KnowledgeBase& kb, std::string_view text) {
  TokenSeq out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    if (word == "(") {
      out.push_back(Token::open());
    } else if (word == ")") {
      out.push_back(Token::close());
    } else if (word == "Return") {
      out.push_back(Token::ret());
    } else if (word == "Hop") {
      out.push_back(Token::function(Function::Hop));
    } else if (word == "ArgMax") {
      out.push_back(Token::function(Function::ArgMax));
    } else if (word == "ArgMin") {
      out.push_back(Token::function(Function::ArgMin));
    } else if (word == "Filter") {
      out.push_back(Token::function(Function::Filter));
    } else if (word.size() > 1 && word[0] == 'R' &&
               word.find_first_not_of("0123456789", 1) == std::string::npos) {
      auto n = std::stoul(word.substr(1));
      if (n == 0) throw ParseError("variable numbering starts at R1: " + word);
      out.push_back(Token::variable(n - 1));
    } else if (auto p = kb.find_property(word)) {
      out.push_back(Token::property(*p));
    } else {
      throw ParseError("unknown token '" + word + "'");
    }
  }
  return out;
}

struct Expression {
  Function function = Function::Hop;
  std::size_t var1 = 0;
  std::size_t var2 = 0;  // Filter only
  PropertyId property;
};

// program := expr* Return
inline std::vector<Expression> parse_expressions(std::span<const Token> tokens) {
  std::vector<Expression> out;
  std::size_t i = 0;
  auto expect = [&](TokenKind kind, const char* what) -> const Token& {
    if (i >= tokens.size() || tokens[i].kind != kind) {
      throw ParseError(std::string("expected ") + what + " at token " + std::to_string(i));
    }
    return tokens[i++];
  };
  while (i < tokens.size() && tokens[i].kind == TokenKind::Open) {
    ++i;
    Expression e;
    e.function = expect(TokenKind::Function, "function").as_function();
    e.var1 = expect(TokenKind::Variable, "variable").arg;
    if (e.function == Function::Filter) e.var2 = expect(TokenKind::Variable, "variable").arg;
    e.property = expect(TokenKind::Property, "property").as_property();
    expect(TokenKind::Close, "')'");
    out.push_back(e);
  }
  expect(TokenKind::Return, "Return");
  if (i != tokens.size()) throw ParseError("tokens after Return");
  return out;
}

inline std::size_t count_expressions(std::span<const Token> tokens) {
  std::size_t n = 0;
  for (const auto& t : tokens) n += t.kind == TokenKind::Open;
  return n;
}

// ---------------------------------------------------------------------------
// Function semantics
// ---------------------------------------------------------------------------

inline ValueSet eval_hop(const KnowledgeBase& kb, const ValueSet& r, PropertyId p) { return forward(kb, r, p); }

inline ValueSet eval_filter(const KnowledgeBase& kb, const ValueSet& r1, const ValueSet& r2, PropertyId p) {
  ValueSet out;
  for (const auto& v : r1) {
    const auto* e = std::get_if<EntityId>(&v);
    if (!e) continue;
    auto objs = kb.objects(*e, p);
    bool hit = std::any_of(objs.begin(), objs.end(), [&](const Value& o) { return set_contains(r2, o); });
    if (hit) out.push_back(v);
  }
  return out;  // subset of a sorted set, still sorted
}

// Members of r whose own best p-value (max for ArgMax, min for ArgMin)
// equals the best over all members. Entity-valued objects are ignored;
// members without a comparable p-value are excluded; ties all survive.
inline ValueSet eval_extremum(const KnowledgeBase& kb, const ValueSet& r, PropertyId p, bool maximize) {
  bool saw_number = false;
  bool saw_date = false;
  std::vector<std::pair<Value, Value>> best;  // (member, its own extreme value)
  for (const auto& v : r) {
    const auto* e = std::get_if<EntityId>(&v);
    if (!e) continue;
    std::optional<Value> own;
    for (const auto& o : kb.objects(*e, p)) {
      if (is_entity(o)) continue;
      saw_number |= std::holds_alternative<Number>(o);
      saw_date |= std::holds_alternative<Date>(o);
      if (!own || (maximize ? *own < o : o < *own)) own = o;
    }
    if (own) best.emplace_back(v, *own);
  }
  if (saw_number && saw_date) throw ExecutionError("incomparable types");
  if (best.empty()) return {};
  Value target = best.front().second;
  for (const auto& [m, val] : best) {
    if (maximize ? target < val : val < target) target = val;
  }
  ValueSet out;
  for (const auto& [m, val] : best) {
    if (val == target) out.push_back(m);
  }
  return out;
}

// A variable's value plus the property lists code assistance needs.
struct Denotation {
  ValueSet values;
  std::vector<PropertyId> reachable;   // properties with at least one edge from a member
  std::vector<PropertyId> comparable;  // reachable properties safe and nonempty for ArgMax/ArgMin
};

inline std::shared_ptr<const Denotation> make_denotation(const KnowledgeBase& kb, ValueSet values) {
  auto d = std::make_shared<Denotation>();
  d->reachable = reachable_properties(kb, values);
  for (auto p : d->reachable) {
    bool num = false;
    bool date = false;
    for (const auto& v : values) {
      if (const auto* e = std::get_if<EntityId>(&v)) {
        for (const auto& o : kb.objects(*e, p)) {
          num |= std::holds_alternative<Number>(o);
          date |= std::holds_alternative<Date>(o);
        }
      }
    }
    if (num != date) d->comparable.push_back(p);
  }
  d->values = std::move(values);
  return d;
}

// Ordered variables R1..Rn. Entries are shared immutable snapshots, so
// copying a store (one per beam branch) never aliases mutable state.
class VariableStore {
 public:
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Denotation& at(std::size_t i) const {
    if (i >= entries_.size()) throw ExecutionError("unknown variable R" + std::to_string(i + 1));
    return *entries_[i];
  }
  const ValueSet& value(std::size_t i) const { return at(i).values; }
  const std::shared_ptr<const Denotation>& entry(std::size_t i) const { return entries_.at(i); }
  void push(std::shared_ptr<const Denotation> d) { entries_.push_back(std::move(d)); }
  void push(const KnowledgeBase& kb, ValueSet values) { push(make_denotation(kb, std::move(values))); }

 private:
  std::vector<std::shared_ptr<const Denotation>> entries_;
};

// Runs expressions with per-question memoization of (function, property,
// argument values). One executor per question per thread; not thread-safe.
class Executor {
 public:
  explicit Executor(const KnowledgeBase& kb) : kb_(&kb) {}

  const KnowledgeBase& kb() const { return *kb_; }

  std::shared_ptr<const Denotation> run(const Expression& e, const VariableStore& store) {
    const auto& r1 = store.value(e.var1);
    static const ValueSet kEmpty;
    const auto& r2 = e.function == Function::Filter ? store.value(e.var2) : kEmpty;
    Key key{static_cast<int>(e.function), e.property.index, r1, r2};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    ValueSet result;
    switch (e.function) {
      case Function::Hop: result = eval_hop(*kb_, r1, e.property); break;
      case Function::Filter: result = eval_filter(*kb_, r1, r2, e.property); break;
      case Function::ArgMax: result = eval_extremum(*kb_, r1, e.property, true); break;
      case Function::ArgMin: result = eval_extremum(*kb_, r1, e.property, false); break;
    }
    auto d = make_denotation(*kb_, std::move(result));
    memo_.emplace(std::move(key), d);
    return d;
  }

  std::size_t memo_size() const { return memo_.size(); }

 private:
  using Key = std::tuple<int, std::uint32_t, ValueSet, ValueSet>;
  const KnowledgeBase* kb_;
  std::map<Key, std::shared_ptr<const Denotation>> memo_;
};

// Appends the result to `store` and returns it.
inline const ValueSet& execute_expression(const KnowledgeBase& kb, VariableStore& store, const Expression& e) {
  Executor exec(kb);
  store.push(exec.run(e, store));
  return store.value(store.size() - 1);
}

// Value of the last computed variable; empty when the program has no
// expressions.
inline ValueSet execute_program(const KnowledgeBase& kb, const VariableStore& linked, std::span<const Token> program) {
  auto exprs = parse_expressions(program);
  VariableStore store = linked;
  Executor exec(kb);
  for (const auto& e : exprs) store.push(exec.run(e, store));
  if (exprs.empty()) return {};
  return store.value(store.size() - 1);
}

struct CurriculumConstraints {
  std::array<bool, 4> allowed_functions{true, true, true, true};
  int max_expressions = 3;
  // Restricts Hop's property slot when set.
  std::optional<std::vector<PropertyId>> allowed_properties;
  // Open is offered only while a longest expression plus Return still fits;
  // 0 disables the cap.
  int max_tokens = 30;

  bool allows(Function f) const { return allowed_functions[static_cast<int>(f)]; }

  static CurriculumConstraints all(int max_expressions = 3) {
    CurriculumConstraints c;
    c.max_expressions = max_expressions;
    return c;
  }
  static CurriculumConstraints only(std::initializer_list<Function> fs, int max_expressions) {
    CurriculumConstraints c;
    c.allowed_functions = {false, false, false, false};
    for (auto f : fs) c.allowed_functions[static_cast<int>(f)] = true;
    c.max_expressions = max_expressions;
    return c;
  }
};

// Longest expression: ( Filter Ri Rj p ) = 6 tokens.
inline constexpr int kMaxExpressionTokens = 6;

// Incremental program builder. valid_tokens() offers exactly the tokens
// that keep the program grammatical, respect the constraints, and can
// still be completed without a run-time error.
class Session {
 public:
  // `exec` and `constraints` must outlive the session and its copies.
  Session(Executor& exec, VariableStore linked, const CurriculumConstraints& constraints)
      : exec_(&exec), constraints_(&constraints), store_(std::move(linked)) {}

  const VariableStore& store() const { return store_; }
  bool finished() const { return slot_ == Slot::Done; }
  int expression_count() const { return expressions_; }
  int token_count() const { return tokens_; }
  // Index of the variable created by the most recent apply(), if any.
  std::optional<std::size_t> created_variable() const { return created_; }

  ValueSet result() const {
    if (expressions_ == 0) return {};
    return store_.value(store_.size() - 1);
  }

  std::vector<Token> valid_tokens() const {
    std::vector<Token> out;
    switch (slot_) {
      case Slot::TopLevel:
        if (can_open()) out.push_back(Token::open());
        out.push_back(Token::ret());
        break;
      case Slot::Function:
        for (auto f : kAllFunctions) {
          if (constraints_->allows(f) && completable(f)) out.push_back(Token::function(f));
        }
        break;
      case Slot::FirstVar:
        for (std::size_t i = 0; i < store_.size(); ++i) {
          if (!options(function_, i).empty()) out.push_back(Token::variable(i));
        }
        break;
      case Slot::SecondVar:
        for (std::size_t i = 0; i < store_.size(); ++i) out.push_back(Token::variable(i));
        break;
      case Slot::Property:
        for (auto p : options(function_, var1_)) out.push_back(Token::property(p));
        break;
      case Slot::Close:
        out.push_back(Token::close());
        break;
      case Slot::Done:
        break;
    }
    return out;
  }

  void apply(const Token& t) {
    auto valid = valid_tokens();
    if (std::find(valid.begin(), valid.end(), t) == valid.end()) {
      throw ContractViolation("token not valid at position " + std::to_string(tokens_));
    }
    created_.reset();
    ++tokens_;
    switch (slot_) {
      case Slot::TopLevel:
        slot_ = t.kind == TokenKind::Open ? Slot::Function : Slot::Done;
        break;
      case Slot::Function:
        function_ = t.as_function();
        slot_ = Slot::FirstVar;
        break;
      case Slot::FirstVar:
        var1_ = t.arg;
        slot_ = function_ == Function::Filter ? Slot::SecondVar : Slot::Property;
        break;
      case Slot::SecondVar:
        var2_ = t.arg;
        slot_ = Slot::Property;
        break;
      case Slot::Property:
        property_ = t.as_property();
        slot_ = Slot::Close;
        break;
      case Slot::Close: {
        Expression e{function_, var1_, var2_, property_};
        store_.push(exec_->run(e, store_));
        created_ = store_.size() - 1;
        ++expressions_;
        slot_ = Slot::TopLevel;
        break;
      }
      case Slot::Done:
        break;
    }
  }

 private:
  enum class Slot { TopLevel, Function, FirstVar, SecondVar, Property, Close, Done };

  std::vector<PropertyId> options(Function f, std::size_t var) const {
    const auto& d = store_.at(var);
    switch (f) {
      case Function::Hop: {
        if (!constraints_->allowed_properties) return d.reachable;
        std::vector<PropertyId> out;
        const auto& allowed = *constraints_->allowed_properties;
        std::set_intersection(d.reachable.begin(), d.reachable.end(), allowed.begin(), allowed.end(),
                              std::back_inserter(out));
        return out;
      }
      case Function::ArgMax:
      case Function::ArgMin: return d.comparable;
      case Function::Filter: return d.reachable;
    }
    return {};
  }

  bool completable(Function f) const {
    for (std::size_t i = 0; i < store_.size(); ++i) {
      if (!options(f, i).empty()) return true;
    }
    return false;
  }

  bool can_open() const {
    if (expressions_ >= constraints_->max_expressions) return false;
    if (constraints_->max_tokens > 0 && tokens_ + kMaxExpressionTokens + 1 > constraints_->max_tokens) return false;
    for (auto f : kAllFunctions) {
      if (constraints_->allows(f) && completable(f)) return true;
    }
    return false;
  }

  Executor* exec_;
  const CurriculumConstraints* constraints_;
  VariableStore store_;
  Slot slot_ = Slot::TopLevel;
  Function function_ = Function::Hop;
  std::size_t var1_ = 0;
  std::size_t var2_ = 0;
  PropertyId property_;
  int expressions_ = 0;
  int tokens_ = 0;
  std::optional<std::size_t> created_;
};

// Code assistance for a prefix; throws ContractViolation if the prefix
// itself is not reachable through valid tokens.
inline std::vector<Token> valid_tokens(const KnowledgeBase& kb, const VariableStore& store,
                                       std::span<const Token> prefix, const CurriculumConstraints& constraints) {
  Executor exec(kb);
  Session s(exec, store, constraints);
  for (const auto& t : prefix) s.apply(t);
  return s.valid_tokens();
}

}  // namespace nsm
