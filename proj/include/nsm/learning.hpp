#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/metrics.hpp"
#include "nsm/model.hpp"
#include "nsm/network.hpp"
#include "nsm/parallel.hpp"
#include "nsm/question.hpp"
#include "nsm/reward.hpp"
#include "nsm/search.hpp"

namespace nsm {

enum class TrainMode { Augmented, ImlOnly, Reinforce };

inline std::string_view mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Augmented: return "augmented";
    case TrainMode::ImlOnly: return "iml-only";
    case TrainMode::Reinforce: return "reinforce";
  }
  return "?";
}

struct TrainConfig {
  ModelConfig model;
  TrainMode mode = TrainMode::Augmented;
  double alpha = 0.1;             // mix ratio for the pseudo-gold program
  int n_ml = 20;                  // iterative-ML rounds over all curriculum stages
  int stage1_iterations = 10;
  int n_rl = 200;                 // REINFORCE passes over the training set
  int beam_ml = 100;
  int beam_rl = 5;
  int eval_beam = 5;
  int epochs_per_ml_round = 20;
  double g0 = 0.001;
  double beta = 0.5;
  double decay_steps = 1000.0;    // m
  int lr_decay_start_iteration = 200;
  int batch_size = 32;
  bool curriculum = true;
  bool superlatives = true;       // ArgMax/ArgMin from curriculum stage 2 on
  int max_expressions = 3;
  int max_tokens = 30;
  int workers = 1;
  bool eval_each_iteration = true;
  std::uint64_t seed = 1;

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ContractViolation("alpha must lie in [0, 1]");
    if (beam_ml < 1 || beam_rl < 1 || eval_beam < 1) throw ContractViolation("beam sizes must be >= 1");
    if (!(g0 > 0.0)) throw ContractViolation("initial learning rate must be positive");
    if (!(beta > 0.0 && beta <= 1.0)) throw ContractViolation("decay base must lie in (0, 1]");
    if (!(decay_steps > 0.0)) throw ContractViolation("decay step scale must be positive");
    if (batch_size < 1 || workers < 1) throw ContractViolation("batch size and workers must be >= 1");
    if (n_ml < 0 || n_rl < 0 || stage1_iterations < 0 || epochs_per_ml_round < 0) {
      throw ContractViolation("iteration counts must be non-negative");
    }
  }
};

// splitmix64 over a sequence of words
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (auto p : parts) {
    h ^= p + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    std::uint64_t z = (h += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    h = z ^ (z >> 31);
  }
  return h;
}

// g_t = g0 * beta^(max(0, t - t_s) / m)
inline double lr_at(long t, const TrainConfig& c, long t_s) {
  const double over = static_cast<double>(std::max(0L, t - t_s));
  return c.g0 * std::pow(c.beta, over / c.decay_steps);
}

// Adam with default moments. Steps move weights *up* the gradient, since
// every gradient here is of an objective to maximize.
class Adam {
 public:
  explicit Adam(const Weights& shape) : m_(shape.zeros_like()), v_(shape.zeros_like()) {}

  void ascend(Weights& w, const Weights& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    std::vector<MatrixXd*> ms, vs;
    std::vector<const MatrixXd*> gs;
    m_.for_each([&](const std::string&, MatrixXd& x) { ms.push_back(&x); });
    v_.for_each([&](const std::string&, MatrixXd& x) { vs.push_back(&x); });
    grad.for_each([&](const std::string&, const MatrixXd& x) { gs.push_back(&x); });
    std::size_t i = 0;
    w.for_each([&](const std::string&, MatrixXd& x) {
      auto& m = *ms[i];
      auto& v = *vs[i];
      const auto& g = *gs[i];
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
      x.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
      ++i;
    });
  }

  long steps() const { return t_; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Weights m_;
  Weights v_;
  long t_ = 0;
};

// Constraints for REINFORCE, evaluation, and curriculum-free search.
inline CurriculumConstraints full_constraints(const TrainConfig& c) {
  auto out = c.superlatives
                 ? CurriculumConstraints::all(c.max_expressions)
                 : CurriculumConstraints::only({Function::Hop, Function::Filter}, c.max_expressions);
  out.max_tokens = c.max_tokens;
  return out;
}

struct CurriculumStage {
  std::string name;
  CurriculumConstraints constraints;
  int iterations = 0;
  // Restrict Hop's properties per question to those in its stage-1
  // pseudo-gold program (questions without one stay unrestricted).
  bool restrict_hop_properties = false;
};

inline std::vector<CurriculumStage> curriculum_stages(const TrainConfig& c) {
  if (!c.curriculum) return {{"ml", full_constraints(c), c.n_ml, false}};
  const int first = std::min(c.stage1_iterations, c.n_ml);
  auto stage1 = CurriculumConstraints::only({Function::Hop}, 2);
  stage1.max_tokens = c.max_tokens;
  auto stage2 = full_constraints(c);
  std::vector<CurriculumStage> out;
  out.push_back({"ml-stage1", stage1, first, false});
  if (c.n_ml > first) out.push_back({"ml-stage2", stage2, c.n_ml - first, true});
  return out;
}

inline std::vector<PropertyId> program_properties(std::span<const Token> program) {
  std::vector<PropertyId> out;
  for (const auto& t : program) {
    if (t.kind == TokenKind::Property) out.push_back(t.as_property());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// p_hat_j = (1 - alpha) * p_j / sum p, plus alpha on the pseudo-gold
// program. Without a pseudo-gold program alpha is not applied, so the
// weights always sum to one. Inputs are log-probabilities.
inline std::vector<double> mix_weights(std::span<const double> log_probs, std::optional<std::size_t> best,
                                       double alpha) {
  std::vector<double> w(log_probs.size(), 0.0);
  if (log_probs.empty()) return w;
  const double mx = *std::max_element(log_probs.begin(), log_probs.end());
  double z = 0.0;
  for (double lp : log_probs) z += std::exp(lp - mx);
  const double a = best ? alpha : 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = (1.0 - a) * std::exp(log_probs[j] - mx) / z;
  if (best) w[*best] += a;
  return w;
}

inline double expected_reward(std::span<const double> weights, std::span<const double> rewards) {
  double b = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) b += weights[j] * rewards[j];
  return b;
}

struct WeightedProgram {
  TokenSeq program;
  double weight = 0.0;
  double reward = 0.0;
};

// Beam programs plus the pseudo-gold program (when alpha > 0 and one
// exists), weighted as above. `best_log_prob` scores the pseudo-gold
// program when it fell off the beam.
inline std::vector<WeightedProgram> reinforce_candidates(std::span<const DecodedProgram> beam, const ValueSet& gold,
                                                         const PseudoGold* best, double alpha,
                                                         const std::function<double(const TokenSeq&)>& best_log_prob) {
  std::vector<WeightedProgram> out;
  std::vector<double> lps;
  for (const auto& d : beam) {
    out.push_back({d.tokens, 0.0, reward(d.answer, gold)});
    lps.push_back(d.log_prob);
  }
  std::optional<std::size_t> best_index;
  if (best && alpha > 0.0) {
    auto it = std::find_if(out.begin(), out.end(), [&](const WeightedProgram& w) { return w.program == best->program; });
    if (it == out.end()) {
      out.push_back({best->program, 0.0, best->reward});
      lps.push_back(best_log_prob(best->program));
      best_index = out.size() - 1;
    } else {
      best_index = static_cast<std::size_t>(it - out.begin());
    }
  }
  auto w = mix_weights(lps, best_index, alpha);
  for (std::size_t j = 0; j < out.size(); ++j) out[j].weight = w[j];
  return out;
}

// Accumulates sum_j p_hat_j (R_j - B) d log P(C_j) into grad, with
// B = sum_j p_hat_j R_j. Returns B.
inline double reinforce_question_gradient(const ModelParams& p, Executor& exec, const Question& q,
                                          std::span<const WeightedProgram> cands,
                                          const CurriculumConstraints& constraints, double dropout_rate,
                                          std::uint64_t seed, Weights& grad) {
  double baseline = 0.0;
  for (const auto& c : cands) baseline += c.weight * c.reward;
  for (std::size_t j = 0; j < cands.size(); ++j) {
    const double adv = cands[j].weight * (cands[j].reward - baseline);
    if (adv == 0.0) continue;
    Dropout dropout(dropout_rate, mix_seed({seed, j}));
    program_log_prob(p, q, exec, cands[j].program, constraints, dropout_rate > 0 ? &dropout : nullptr, &grad, adv);
  }
  return baseline;
}

struct TrainLogRecord {
  int iteration = 0;
  std::string phase;
  double train_f1 = 0.0;
  double valid_f1 = 0.0;
  double cache_coverage = 0.0;
  double lr = 0.0;
  std::vector<std::tuple<std::string, double, std::size_t>> cache;  // (id, reward, length)
};

inline nlohmann::json to_json(const TrainLogRecord& r) {
  nlohmann::json cache = nlohmann::json::array();
  for (const auto& [id, reward, len] : r.cache) cache.push_back({id, reward, len});
  return {{"iteration", r.iteration}, {"phase", r.phase},       {"train_f1", r.train_f1},
          {"valid_f1", r.valid_f1},   {"cache_coverage", r.cache_coverage}, {"lr", r.lr},
          {"cache", std::move(cache)}};
}

inline TrainLogRecord log_record_from_json(const nlohmann::json& j) {
  TrainLogRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.phase = j.at("phase").get<std::string>();
  r.train_f1 = j.at("train_f1").get<double>();
  r.valid_f1 = j.at("valid_f1").get<double>();
  r.cache_coverage = j.at("cache_coverage").get<double>();
  r.lr = j.at("lr").get<double>();
  for (const auto& e : j.at("cache")) {
    r.cache.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>(), e.at(2).get<std::size_t>());
  }
  return r;
}

struct TrainHooks {
  std::function<void(const TrainLogRecord&)> on_log;
  std::function<void(const std::string& phase, const ModelParams&, const PseudoGoldCache&)> on_phase_end;
  // Called after each ML epoch with the epoch index and the cached-program
  // log-likelihood (dropout off); only invoked when set.
  std::function<void(int round, int epoch, double log_likelihood)> on_ml_epoch;
};

struct TrainResult {
  ModelParams ml_params;        // after iterative ML (or the random init if skipped)
  PseudoGoldCache ml_cache;
  ModelParams params;           // final
  PseudoGoldCache cache;
  std::vector<TrainLogRecord> log;
};

// Everything a training run reads but does not own.
struct TrainData {
  const KnowledgeBase* kb = nullptr;
  std::span<const Question> train;
  std::span<const Question> valid;
};

namespace detail {

inline std::vector<std::vector<DecodedProgram>> decode_questions(
    const ModelParams& p, const KnowledgeBase& kb, std::span<const Question> questions,
    std::span<const std::size_t> indices, std::size_t beam,
    const std::function<const CurriculumConstraints&(std::size_t)>& constraints_for, int workers) {
  std::vector<std::vector<DecodedProgram>> out(indices.size());
  parallel_for(indices.size(), workers, [&](std::size_t i) {
    Executor exec(kb);
    const auto qi = indices[i];
    out[i] = beam_decode(p, exec, questions[qi], beam, constraints_for(qi));
  });
  return out;
}

inline double cache_coverage(const PseudoGoldCache& cache, std::span<const Question> qs) {
  if (qs.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& q : qs) n += cache.find(q.id) != nullptr;
  return static_cast<double>(n) / static_cast<double>(qs.size());
}

inline Weights sum_gradients(const Weights& shape, std::span<const Weights> grads, double scale) {
  Weights total = shape.zeros_like();
  for (const auto& g : grads) total.add_scaled(g, scale);
  return total;
}

class Run {
 public:
  Run(const TrainData& data, const TrainConfig& cfg, const TrainHooks& hooks)
      : data_(data), kb_(*data.kb), cfg_(cfg), hooks_(hooks), full_(full_constraints(cfg)) {}

  std::vector<TrainLogRecord>& log() { return log_; }
  int& iteration() { return iteration_; }

  void emit(const std::string& phase, double train_f1, double lr, const ModelParams& p,
            const PseudoGoldCache& cache) {
    TrainLogRecord r;
    r.iteration = ++iteration_;
    r.phase = phase;
    r.train_f1 = train_f1;
    r.lr = lr;
    r.cache_coverage = cache_coverage(cache, data_.train);
    if (cfg_.eval_each_iteration && !data_.valid.empty()) {
      r.valid_f1 = evaluate(p, kb_, data_.valid, static_cast<std::size_t>(cfg_.eval_beam), full_, cfg_.workers).avg_f1;
    }
    for (const auto& [id, e] : cache.entries()) r.cache.emplace_back(id, e.reward, e.length);
    if (hooks_.on_log) hooks_.on_log(r);
    log_.push_back(std::move(r));
  }

  // Cached-program log-likelihood over the full program space, dropout off.
  double cached_log_likelihood(const ModelParams& p, const PseudoGoldCache& cache) const {
    const auto& qs = data_.train;
    std::vector<double> lls(qs.size(), 0.0);
    parallel_for(qs.size(), cfg_.workers, [&](std::size_t i) {
      const auto* e = cache.find(qs[i].id);
      if (!e) return;
      Executor exec(kb_);
      lls[i] = program_log_prob(p, qs[i], exec, e->program, full_);
    });
    return std::accumulate(lls.begin(), lls.end(), 0.0);
  }

  // Maximizes the summed log-likelihood of cached programs with minibatch
  // Adam at the initial learning rate. The curriculum narrows the search
  // only; the likelihood is normalized over the full program space.
  void ml_train(ModelParams& p, Adam& adam, const PseudoGoldCache& cache, int epochs, std::uint64_t seed,
                int round) {
    const auto& qs = data_.train;
    std::vector<std::size_t> items;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      if (cache.find(qs[i].id)) items.push_back(i);
    }
    if (items.empty()) return;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    for (int e = 0; e < epochs; ++e) {
      std::mt19937_64 rng(mix_seed({seed, static_cast<std::uint64_t>(e)}));
      std::shuffle(items.begin(), items.end(), rng);
      for (std::size_t start = 0; start < items.size(); start += bs) {
        const auto n = std::min(bs, items.size() - start);
        std::vector<Weights> grads(n, p.w.zeros_like());
        parallel_for(n, cfg_.workers, [&](std::size_t b) {
          const auto qi = items[start + b];
          Executor exec(kb_);
          Dropout dropout(cfg_.model.dropout, mix_seed({seed, static_cast<std::uint64_t>(e), qi}));
          const auto& prog = cache.find(qs[qi].id)->program;
          program_log_prob(p, qs[qi], exec, prog, full_, cfg_.model.dropout > 0 ? &dropout : nullptr,
                           &grads[b], 1.0);
        });
        adam.ascend(p.w, sum_gradients(p.w, grads, 1.0 / static_cast<double>(n)), cfg_.g0);
      }
      if (hooks_.on_ml_epoch) hooks_.on_ml_epoch(round, e, cached_log_likelihood(p, cache));
    }
  }

  // One decode sweep (beam B_ML) plus cache update and ML epochs. Returns
  // the mean top-1 reward of the sweep.
  double ml_round(ModelParams& p, PseudoGoldCache& cache, Adam& adam,
                  std::span<const CurriculumConstraints> constraints, int epochs, std::uint64_t seed, int round) {
    const auto& qs = data_.train;
    std::vector<std::size_t> all(qs.size());
    std::iota(all.begin(), all.end(), 0);
    auto beams = decode_questions(p, kb_, qs, all, static_cast<std::size_t>(cfg_.beam_ml),
                                  [&](std::size_t i) -> const CurriculumConstraints& { return constraints[i]; },
                                  cfg_.workers);
    double f1 = 0.0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      for (const auto& d : beams[i]) cache.offer(qs[i].id, d.tokens, reward(d.answer, qs[i].gold));
      f1 += reward(beams[i].front().answer, qs[i].gold);
    }
    ml_train(p, adam, cache, epochs, seed, round);
    return qs.empty() ? 0.0 : f1 / static_cast<double>(qs.size());
  }

  void ml_phase(ModelParams& p, PseudoGoldCache& cache) {
    Adam adam(p.w);
    const auto& qs = data_.train;
    int round = 0;
    for (const auto& stage : curriculum_stages(cfg_)) {
      std::vector<CurriculumConstraints> per_q(qs.size(), stage.constraints);
      if (stage.restrict_hop_properties) {
        for (std::size_t i = 0; i < qs.size(); ++i) {
          if (const auto* e = cache.find(qs[i].id)) per_q[i].allowed_properties = program_properties(e->program);
        }
      }
      for (int it = 0; it < stage.iterations; ++it, ++round) {
        const auto seed = mix_seed({cfg_.seed, 0x4d4cULL, static_cast<std::uint64_t>(round)});
        const double f1 = ml_round(p, cache, adam, per_q, cfg_.epochs_per_ml_round, seed, round);
        emit(stage.name, f1, cfg_.g0, p, cache);
      }
    }
  }

  void rl_phase(ModelParams& p, PseudoGoldCache& cache, double alpha) {
    initialize_weights(p.w, mix_seed({cfg_.seed, 0x524cULL}));
    Adam adam(p.w);
    const auto& qs = data_.train;
    if (qs.empty()) return;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    const long batches_per_iteration = static_cast<long>((qs.size() + bs - 1) / bs);
    const long t_s = batches_per_iteration * cfg_.lr_decay_start_iteration;
    long step = 0;
    std::vector<std::size_t> order(qs.size());
    std::iota(order.begin(), order.end(), 0);
    auto full = [this](std::size_t) -> const CurriculumConstraints& { return full_; };

    for (int it = 0; it < cfg_.n_rl; ++it) {
      const auto seed = mix_seed({cfg_.seed, 0x524cULL, static_cast<std::uint64_t>(it)});
      std::mt19937_64 rng(seed);
      std::shuffle(order.begin(), order.end(), rng);
      double f1 = 0.0;
      double lr = lr_at(step, cfg_, t_s);
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const auto n = std::min(bs, order.size() - start);
        std::span<const std::size_t> batch(order.data() + start, n);
        auto beams = decode_questions(p, kb_, qs, batch, static_cast<std::size_t>(cfg_.beam_rl), full, cfg_.workers);
        for (std::size_t b = 0; b < n; ++b) {
          const auto& q = qs[batch[b]];
          for (const auto& d : beams[b]) cache.offer(q.id, d.tokens, reward(d.answer, q.gold));
          f1 += reward(beams[b].front().answer, q.gold);
        }
        std::vector<Weights> grads(n, p.w.zeros_like());
        parallel_for(n, cfg_.workers, [&](std::size_t b) {
          const auto& q = qs[batch[b]];
          Executor exec(kb_);
          auto cands = reinforce_candidates(beams[b], q.gold, cache.find(q.id), alpha, [&](const TokenSeq& prog) {
            return program_log_prob(p, q, exec, prog, full_);
          });
          reinforce_question_gradient(p, exec, q, cands, full_, cfg_.model.dropout,
                                      mix_seed({seed, batch[b]}), grads[b]);
        });
        lr = lr_at(step, cfg_, t_s);
        adam.ascend(p.w, sum_gradients(p.w, grads, 1.0 / static_cast<double>(n)), lr);
        ++step;
      }
      emit("rl", f1 / static_cast<double>(qs.size()), lr, p, cache);
    }
  }

 private:
  const TrainData& data_;
  const KnowledgeBase& kb_;
  const TrainConfig& cfg_;
  const TrainHooks& hooks_;
  CurriculumConstraints full_;
  std::vector<TrainLogRecord> log_;
  int iteration_ = 0;
};

}  // namespace detail

// State carried out of the iterative-ML phase, for resuming a run.
struct MlPhaseState {
  ModelParams params;
  PseudoGoldCache cache;
  std::vector<TrainLogRecord> log;
};

// Phase 1: random init, iterative ML through the curriculum. Phase 2:
// re-initialize, then REINFORCE over beam programs with the pseudo-gold
// program mixed in at weight alpha. Mode selects which phases run; plain
// REINFORCE skips phase 1 and uses alpha = 0.
inline TrainResult run_iml_reinforce(const TrainData& data, const ModelParams& init, const TrainConfig& cfg,
                                     const TrainHooks& hooks = {}, std::optional<MlPhaseState> resume = {}) {
  cfg.validate();
  detail::Run run(data, cfg, hooks);
  TrainResult result;
  ModelParams p = init;
  initialize_weights(p.w, mix_seed({cfg.seed, 0x4d4cULL}));
  PseudoGoldCache cache;

  if (resume) {
    p = std::move(resume->params);
    cache = std::move(resume->cache);
    run.log() = std::move(resume->log);
    run.iteration() = static_cast<int>(run.log().size());
  } else if (cfg.mode != TrainMode::Reinforce) {
    run.ml_phase(p, cache);
    if (hooks.on_phase_end) hooks.on_phase_end("ml", p, cache);
  }
  result.ml_params = p;
  result.ml_cache = cache;

  if (cfg.mode != TrainMode::ImlOnly && cfg.n_rl > 0) {
    const double alpha = cfg.mode == TrainMode::Reinforce ? 0.0 : cfg.alpha;
    run.rl_phase(p, cache, alpha);
    if (hooks.on_phase_end) hooks.on_phase_end("rl", p, cache);
  }
  result.params = std::move(p);
  result.cache = std::move(cache);
  result.log = std::move(run.log());
  return result;
}

// Mean cached reward over the questions (zero where nothing is cached).
inline double pseudo_gold_f1(const PseudoGoldCache& cache, std::span<const Question> qs) {
  if (qs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& q : qs) {
    if (const auto* e = cache.find(q.id)) total += e->reward;
  }
  return total / static_cast<double>(qs.size());
}

}  // namespace nsm
