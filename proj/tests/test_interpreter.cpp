#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "nsm/interpreter.hpp"

using namespace nsm;
using namespace nsm::testing;

namespace {

std::set<std::string> texts(const KnowledgeBase& kb, const std::vector<Token>& tokens) {
  std::set<std::string> out;
  for (const auto& t : tokens) out.insert(format_token(kb, t));
  return out;
}

}  // namespace

TEST(Expression, HopFilterArgMaxOnSmallKb) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"USA"})});
  EXPECT_EQ(execute_expression(kb, store, {Function::Hop, 0, 0, prop(kb, "city")}), ents(kb, {"NYC", "SF"}));
  store.push(kb, ValueSet{Number{8.6}});
  EXPECT_EQ(execute_expression(kb, store, {Function::Filter, 1, 2, prop(kb, "pop")}), ents(kb, {"NYC"}));
  EXPECT_EQ(execute_expression(kb, store, {Function::ArgMax, 1, 0, prop(kb, "pop")}), ents(kb, {"NYC"}));
  EXPECT_EQ(execute_expression(kb, store, {Function::ArgMin, 1, 0, prop(kb, "pop")}), ents(kb, {"SF"}));
  EXPECT_EQ(store.size(), 6u);
}

TEST(Expression, UnknownVariableIsAnExecutionError) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"USA"})});
  EXPECT_THROW(execute_expression(kb, store, {Function::Hop, 3, 0, prop(kb, "city")}), ExecutionError);
}

TEST(Expression, MixedNumberAndDatePopulationIsIncomparable) {
  std::istringstream in("a\tv\tn:1\nb\tv\td:2000-01-01\n");
  auto kb = parse_triples(in);
  auto store = store_of(kb, {ents(kb, {"a", "b"})});
  try {
    execute_expression(kb, store, {Function::ArgMax, 0, 0, prop(kb, "v")});
    FAIL();
  } catch (const ExecutionError& e) {
    EXPECT_STREQ(e.what(), "incomparable types");
  }
}

TEST(Expression, ExtremaUseEachMembersOwnBestAndKeepTies) {
  std::istringstream in(
      "a\tv\tn:1\na\tv\tn:9\n"
      "b\tv\tn:9\n"
      "c\tv\tn:5\n"
      "d\tv\tx\n");
  auto kb = parse_triples(in);
  auto store = store_of(kb, {ents(kb, {"a", "b", "c", "d"})});
  EXPECT_EQ(execute_expression(kb, store, {Function::ArgMax, 0, 0, prop(kb, "v")}), ents(kb, {"a", "b"}));
  EXPECT_EQ(execute_expression(kb, store, {Function::ArgMin, 0, 0, prop(kb, "v")}), ents(kb, {"a"}));
}

TEST(Expression, DatesCompareChronologically) {
  std::istringstream in("a\tborn\td:1999-12-31\nb\tborn\td:2000-01-01\n");
  auto kb = parse_triples(in);
  auto store = store_of(kb, {ents(kb, {"a", "b"})});
  EXPECT_EQ(execute_expression(kb, store, {Function::ArgMax, 0, 0, prop(kb, "born")}), ents(kb, {"b"}));
}

TEST(Program, Examples) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"USA"})});
  EXPECT_EQ(execute_program(kb, store, parse_program(kb, "( Hop R1 city ) Return")), ents(kb, {"NYC", "SF"}));
  EXPECT_EQ(execute_program(kb, store, parse_program(kb, "( Hop R1 city ) ( ArgMax R2 pop ) Return")),
            ents(kb, {"NYC"}));
  EXPECT_TRUE(execute_program(kb, store, parse_program(kb, "Return")).empty());
}

TEST(Program, TextRoundTrips) {
  auto kb = kb0();
  for (const char* text : {"Return", "( Hop R1 city ) Return", "( Hop R1 city ) ( Filter R2 R1 pop ) Return",
                           "( ArgMin R12 capital ) Return"}) {
    EXPECT_EQ(format_program(kb, parse_program(kb, text)), text);
  }
}

TEST(Program, IllFormedTextIsAParseError) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"USA"})});
  EXPECT_THROW(parse_program(kb, "( Hop R1 nosuch ) Return"), ParseError);
  EXPECT_THROW(parse_program(kb, "( Hop R0 city ) Return"), ParseError);
  for (const char* text : {"( Hop R1 city )", "( Hop city R1 ) Return", "( Hop R1 city Return", "Return Return",
                           "( Filter R1 city ) Return", ""}) {
    EXPECT_THROW(execute_program(kb, store, parse_program(kb, text)), ParseError) << text;
  }
}

TEST(CodeAssistance, Examples) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"USA"})});
  auto all = CurriculumConstraints::all();
  EXPECT_EQ(texts(kb, valid_tokens(kb, store, {}, all)), (std::set<std::string>{"(", "Return"}));
  EXPECT_EQ(texts(kb, valid_tokens(kb, store, parse_program(kb, "("), all)),
            (std::set<std::string>{"Hop", "Filter"}));
  EXPECT_EQ(texts(kb, valid_tokens(kb, store, parse_program(kb, "( Hop R1"), all)),
            (std::set<std::string>{"city", "capital"}));
}

TEST(CodeAssistance, AllFunctionsOfferedWhenEachIsCompletable) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"NYC", "SF"})});
  EXPECT_EQ(texts(kb, valid_tokens(kb, store, parse_program(kb, "("), CurriculumConstraints::all())),
            (std::set<std::string>{"Hop", "ArgMax", "ArgMin", "Filter"}));
}

TEST(CodeAssistance, ConstraintCaps) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"NYC", "SF"})});
  auto hop_only = CurriculumConstraints::only({Function::Hop}, 1);
  EXPECT_EQ(texts(kb, valid_tokens(kb, store, parse_program(kb, "("), hop_only)), (std::set<std::string>{"Hop"}));
  EXPECT_EQ(texts(kb, valid_tokens(kb, store, parse_program(kb, "( Hop R1 pop )"), hop_only)),
            (std::set<std::string>{"Return"}));

  auto usa = store_of(kb, {ents(kb, {"USA"})});
  auto restricted = CurriculumConstraints::all();
  restricted.allowed_properties = std::vector<PropertyId>{prop(kb, "capital")};
  EXPECT_EQ(texts(kb, valid_tokens(kb, usa, parse_program(kb, "( Hop R1"), restricted)),
            (std::set<std::string>{"capital"}));
  // The restriction touches Hop only.
  EXPECT_EQ(texts(kb, valid_tokens(kb, usa, parse_program(kb, "( Filter R1 R1"), restricted)),
            (std::set<std::string>{"city", "capital"}));

  auto short_programs = CurriculumConstraints::all();
  short_programs.max_tokens = 11;
  EXPECT_EQ(texts(kb, valid_tokens(kb, usa, parse_program(kb, "( Hop R1 city )"), short_programs)),
            (std::set<std::string>{"Return"}));
}

TEST(CodeAssistance, InvalidPrefixIsAContractViolation) {
  auto kb = kb0();
  auto store = store_of(kb, {ents(kb, {"USA"})});
  EXPECT_THROW(valid_tokens(kb, store, parse_program(kb, "( Hop R1 pop"), CurriculumConstraints::all()),
               ContractViolation);
  EXPECT_THROW(valid_tokens(kb, store, parse_program(kb, "Return )"), CurriculumConstraints::all()),
               ContractViolation);
}

TEST(CodeAssistance, HopOffersOnlyPropertiesWithResults) {
  std::mt19937_64 rng(5);
  const auto all = CurriculumConstraints::all();
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    auto kb = random_kb(rng, 30, 6, 90);
    VariableStore store;
    for (const auto& v : random_linked(rng, kb)) store.push(kb, v);
    const auto open = valid_tokens(kb, store, TokenSeq{}, all);
    if (std::find(open.begin(), open.end(), Token::open()) == open.end()) continue;
    TokenSeq prefix{Token::open()};
    const auto functions = valid_tokens(kb, store, prefix, all);
    if (std::find(functions.begin(), functions.end(), Token::function(Function::Hop)) == functions.end()) continue;
    prefix.push_back(Token::function(Function::Hop));
    for (const auto& var : valid_tokens(kb, store, prefix, all)) {
      auto with_var = prefix;
      with_var.push_back(var);
      auto props = valid_tokens(kb, store, with_var, all);
      EXPECT_FALSE(props.empty());
      for (const auto& t : props) {
        auto copy = store;
        EXPECT_FALSE(execute_expression(kb, copy, {Function::Hop, var.arg, 0, t.as_property()}).empty());
      }
      EXPECT_EQ(props.size(), reachable_properties(kb, store.value(var.arg)).size());
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Executor, MatchesBruteForceOracle) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(99);
  int agreed = 0;
  int errors = 0;
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<int> ne(2, 50), np(1, 6), ned(10, 200);
    auto kb = random_kb(rng, ne(rng), np(rng), ned(rng));
    auto linked = random_linked(rng, kb);
    auto exprs = random_expressions(rng, kb, linked.size(), 4);
    VariableStore store;
    for (const auto& v : linked) store.push(kb, v);
    std::optional<ValueSet> expected;
    try {
      expected = oracle_program(kb, linked, exprs);
    } catch (const OracleError&) {
    }
    if (expected) {
      ASSERT_EQ(execute_program(kb, store, to_tokens(exprs)), *expected) << "program " << i;
    } else {
      EXPECT_THROW(execute_program(kb, store, to_tokens(exprs)), ExecutionError) << "program " << i;
      ++errors;
    }
    ++agreed;
  }
  EXPECT_EQ(agreed, 1000);
  EXPECT_GT(errors, 0);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 30.0);
}

TEST(CodeAssistance, RandomRolloutsNeverFail) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> ne(2, 40), np(1, 6);
  std::optional<KnowledgeBase> kb;
  int multi = 0;
  for (int i = 0; i < 10000; ++i) {
    if (i % 100 == 0) kb = random_kb(rng, ne(rng), np(rng), 120);
    VariableStore linked;
    for (const auto& v : random_linked(rng, *kb)) linked.push(*kb, v);
    Executor exec(*kb);
    auto program = random_rollout(rng, exec, linked, CurriculumConstraints::all());
    ASSERT_NO_THROW(execute_program(*kb, linked, program)) << format_program(*kb, program);
    multi += count_expressions(program) >= 2;
  }
  EXPECT_GT(multi, 0);
}

TEST(Session, CopiesDoNotShareState) {
  auto kb = kb0();
  Executor exec(kb);
  auto c = CurriculumConstraints::all();
  Session a(exec, store_of(kb, {ents(kb, {"USA"})}), c);
  for (const auto& t : parse_program(kb, "( Hop R1 city )")) a.apply(t);
  Session b = a;
  for (const auto& t : parse_program(kb, "( ArgMax R2 pop )")) b.apply(t);
  EXPECT_EQ(a.store().size(), 2u);
  EXPECT_EQ(b.store().size(), 3u);
  EXPECT_EQ(a.result(), ents(kb, {"NYC", "SF"}));
  EXPECT_EQ(b.result(), ents(kb, {"NYC"}));
}

TEST(Executor, MemoizesRepeatedExpressions) {
  auto kb = kb0();
  Executor exec(kb);
  auto store = store_of(kb, {ents(kb, {"USA"}), ents(kb, {"USA"})});
  auto first = exec.run({Function::Hop, 0, 0, prop(kb, "city")}, store);
  auto second = exec.run({Function::Hop, 1, 0, prop(kb, "city")}, store);
  EXPECT_EQ(first.get(), second.get());
  EXPECT_EQ(exec.memo_size(), 1u);
}
