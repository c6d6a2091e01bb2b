#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsm/interpreter.hpp"
#include "nsm/network.hpp"
#include "nsm/question.hpp"

namespace nsm {

struct DecodedProgram {
  TokenSeq tokens;
  double log_prob = 0.0;
  ValueSet answer;  // denotation of the last computed variable
};

// Per-step record of the beam cut, for checking that every kept expansion
// scores at least as high as every pruned one.
struct BeamTrace {
  struct Step {
    double min_kept = std::numeric_limits<double>::infinity();
    double max_pruned = -std::numeric_limits<double>::infinity();
    std::size_t kept = 0;
    std::size_t pruned = 0;
  };
  std::vector<Step> steps;
};

namespace detail {

struct Hypothesis {
  TokenSeq tokens;
  Session session;
  DecoderState state;
  double log_prob = 0.0;
};

// Descending log-prob; ties broken by ascending token sequence.
inline bool ranks_before(double lp_a, const TokenSeq& a, double lp_b, const TokenSeq& b) {
  if (lp_a != lp_b) return lp_a > lp_b;
  return a < b;
}

}  // namespace detail

// Beam search under code assistance. Every expansion comes from the
// session's valid tokens, so every returned program executes cleanly.
// Returns up to k distinct finished programs, best first.
inline std::vector<DecodedProgram> beam_decode(const ModelParams& p, Executor& exec, const Question& q,
                                               std::size_t k, const CurriculumConstraints& constraints,
                                               BeamTrace* trace = nullptr) {
  using detail::Hypothesis;
  if (k == 0) throw ContractViolation("beam size must be at least 1");
  Encoding enc = encode(p, q, nullptr);

  std::vector<Hypothesis> active;
  active.push_back(Hypothesis{{}, Session(exec, q.linked, constraints), initial_state(enc), 0.0});
  std::vector<DecodedProgram> pool;

  struct Candidate {
    std::size_t hyp;
    std::size_t choice;
    double log_prob;
    TokenSeq tokens;
  };

  while (!active.empty()) {
    if (pool.size() >= k) {
      std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k - 1), pool.end(),
                       [](const DecodedProgram& a, const DecodedProgram& b) { return a.log_prob > b.log_prob; });
      const double kth = pool[k - 1].log_prob;
      double best_active = -std::numeric_limits<double>::infinity();
      for (const auto& h : active) best_active = std::max(best_active, h.log_prob);
      // Scores only fall as sequences grow.
      if (best_active < kth) break;
    }

    std::vector<std::vector<Token>> valids(active.size());
    std::vector<StepOutput> outs(active.size());
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < active.size(); ++h) {
      valids[h] = active[h].session.valid_tokens();
      outs[h] = decode_step(p, enc, active[h].state, valids[h], nullptr);
      for (std::size_t j = 0; j < valids[h].size(); ++j) {
        TokenSeq seq = active[h].tokens;
        seq.push_back(valids[h][j]);
        cands.push_back({h, j, active[h].log_prob + outs[h].log_probs[j], std::move(seq)});
      }
    }
    const std::size_t keep = std::min(k, cands.size());
    auto order = [](const Candidate& a, const Candidate& b) {
      return detail::ranks_before(a.log_prob, a.tokens, b.log_prob, b.tokens);
    };
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), order);

    if (trace) {
      BeamTrace::Step s;
      s.kept = keep;
      s.pruned = cands.size() - keep;
      for (std::size_t i = 0; i < keep; ++i) s.min_kept = std::min(s.min_kept, cands[i].log_prob);
      for (std::size_t i = keep; i < cands.size(); ++i) s.max_pruned = std::max(s.max_pruned, cands[i].log_prob);
      trace->steps.push_back(s);
    }

    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      auto& c = cands[i];
      const Hypothesis& parent = active[c.hyp];
      const Token tok = valids[c.hyp][c.choice];
      Hypothesis child{std::move(c.tokens), parent.session, parent.state, c.log_prob};
      child.session.apply(tok);
      if (tok.kind == TokenKind::Return) {
        pool.push_back({std::move(child.tokens), child.log_prob, child.session.result()});
        continue;
      }
      child.state.hidden = outs[c.hyp].hidden;
      child.state.last_token = tok;
      ++child.state.step;
      if (auto created = child.session.created_variable()) {
        child.state.memory.add(outs[c.hyp].hidden, Token::variable(*created));
      }
      next.push_back(std::move(child));
    }
    active = std::move(next);
  }

  std::sort(pool.begin(), pool.end(), [](const DecodedProgram& a, const DecodedProgram& b) {
    return detail::ranks_before(a.log_prob, a.tokens, b.log_prob, b.tokens);
  });
  std::vector<DecodedProgram> out;
  for (auto& d : pool) {
    if (out.size() == k) break;
    bool dup = std::any_of(out.begin(), out.end(), [&](const DecodedProgram& o) { return o.tokens == d.tokens; });
    if (!dup) out.push_back(std::move(d));
  }
  return out;
}

struct PseudoGold {
  TokenSeq program;
  double reward = 0.0;
  std::size_t length = 0;
};

// Best program found so far per question: highest reward, then shortest.
class PseudoGoldCache {
 public:
  const PseudoGold* find(const std::string& id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  // Returns true if the candidate replaced (or created) the entry.
  bool offer(const std::string& id, const TokenSeq& program, double reward) {
    if (!(reward > 0.0)) return false;
    auto it = entries_.find(id);
    if (it != entries_.end()) {
      const auto& cur = it->second;
      const bool better = reward > cur.reward || (reward == cur.reward && program.size() < cur.length);
      if (!better) return false;
    }
    entries_[id] = PseudoGold{program, reward, program.size()};
    return true;
  }

  void set(const std::string& id, PseudoGold entry) { entries_[id] = std::move(entry); }

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, PseudoGold>& entries() const { return entries_; }
  bool operator==(const PseudoGoldCache& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (const auto& [id, e] : entries_) {
      const auto* other = o.find(id);
      if (!other || other->program != e.program || other->reward != e.reward) return false;
    }
    return true;
  }

 private:
  std::map<std::string, PseudoGold> entries_;
};

inline PseudoGoldCache& update_pseudo_gold(PseudoGoldCache& cache, const std::string& id,
                                           std::span<const TokenSeq> candidates,
                                           const std::function<double(const TokenSeq&)>& reward_fn) {
  for (const auto& c : candidates) cache.offer(id, c, reward_fn(c));
  return cache;
}

}  // namespace nsm
