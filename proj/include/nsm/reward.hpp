#pragma once

#include "nsm/value.hpp"

namespace nsm {

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Empty predictions score zero; an empty gold set is excluded upstream.
inline PrecisionRecall score_answer(const ValueSet& predicted, const ValueSet& gold) {
  PrecisionRecall s;
  if (predicted.empty() || gold.empty()) return s;
  const auto hit = static_cast<double>(set_intersection(predicted, gold).size());
  if (hit == 0.0) return s;
  s.precision = hit / static_cast<double>(predicted.size());
  s.recall = hit / static_cast<double>(gold.size());
  s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// F1 between the executed answer and the gold answer.
inline double reward(const ValueSet& predicted, const ValueSet& gold) { return score_answer(predicted, gold).f1; }

}  // namespace nsm
