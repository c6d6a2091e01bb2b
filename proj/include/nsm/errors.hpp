#pragma once

#include <stdexcept>
#include <string>

namespace nsm {

// Malformed input files (triples, datasets, lexicons, checkpoints).
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ill-formed program text or token sequence.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Run-time failure while executing an expression against the KB.
struct ExecutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace nsm
