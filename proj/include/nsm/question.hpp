#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nsm/interpreter.hpp"
#include "nsm/value.hpp"

namespace nsm {

// Word range [start, end] (inclusive) linked to one KB entity.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityId entity;
  bool operator==(const EntitySpan&) const = default;
};

// A question ready for the programmer: anonymized words, linked spans, the
// variables those spans bind, and the gold answer used for rewards.
struct Question {
  std::string id;
  std::string text;
  std::vector<std::string> words;
  std::vector<int> word_ids;
  std::vector<EntitySpan> spans;
  VariableStore linked;
  ValueSet gold;
  std::optional<std::string> gold_program;
};

}  // namespace nsm
