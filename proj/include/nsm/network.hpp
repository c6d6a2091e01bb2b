#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsm/errors.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/model.hpp"
#include "nsm/question.hpp"

namespace nsm {

// Inverted dropout: kept units are scaled by 1/(1-rate). Masks come from a
// seeded stream so a training step is reproducible.
class Dropout {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

  VectorXd mask(Eigen::Index n) {
    VectorXd m(n);
    if (rate_ <= 0.0) {
      m.setOnes();
      return m;
    }
    std::bernoulli_distribution keep(1.0 - rate_);
    const double scale = 1.0 / (1.0 - rate_);
    for (Eigen::Index i = 0; i < n; ++i) m[i] = keep(rng_) ? scale : 0.0;
    return m;
  }

 private:
  double rate_;
  std::mt19937_64 rng_;
};

inline VectorXd sigmoid(const VectorXd& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

inline std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

struct GruCache {
  VectorXd x, h_prev, z, r, c;
};

//   z = s(Wz x + Uz h + bz)   r = s(Wr x + Ur h + br)
//   c = tanh(Wh x + Uh (r*h) + bh)   h' = (1-z)*h + z*c
inline VectorXd gru_step(const GruWeights& g, const VectorXd& x, const VectorXd& h, GruCache* cache) {
  VectorXd z = sigmoid(g.wz * x + g.uz * h + g.bz.col(0));
  VectorXd r = sigmoid(g.wr * x + g.ur * h + g.br.col(0));
  VectorXd c = (g.wh * x + g.uh * r.cwiseProduct(h) + g.bh.col(0)).array().tanh().matrix();
  VectorXd out = h + z.cwiseProduct(c - h);
  if (cache) *cache = GruCache{x, h, std::move(z), std::move(r), std::move(c)};
  return out;
}

inline void gru_backward(const GruWeights& g, const GruCache& k, const VectorXd& dh_out, GruWeights& grad,
                         VectorXd& dx, VectorXd& dh_prev) {
  VectorXd dz = dh_out.cwiseProduct(k.c - k.h_prev);
  VectorXd dc = dh_out.cwiseProduct(k.z);
  dh_prev = dh_out - dh_out.cwiseProduct(k.z);

  VectorXd dac = (dc.array() * (1.0 - k.c.array().square())).matrix();
  VectorXd rh = k.r.cwiseProduct(k.h_prev);
  grad.wh.noalias() += dac * k.x.transpose();
  grad.uh.noalias() += dac * rh.transpose();
  grad.bh.col(0) += dac;
  dx = g.wh.transpose() * dac;
  VectorXd drh = g.uh.transpose() * dac;
  dh_prev += drh.cwiseProduct(k.r);

  VectorXd dar = (drh.array() * k.h_prev.array() * k.r.array() * (1.0 - k.r.array())).matrix();
  grad.wr.noalias() += dar * k.x.transpose();
  grad.ur.noalias() += dar * k.h_prev.transpose();
  grad.br.col(0) += dar;
  dx.noalias() += g.wr.transpose() * dar;
  dh_prev.noalias() += g.ur.transpose() * dar;

  VectorXd daz = (dz.array() * k.z.array() * (1.0 - k.z.array())).matrix();
  grad.wz.noalias() += daz * k.x.transpose();
  grad.uz.noalias() += daz * k.h_prev.transpose();
  grad.bz.col(0) += daz;
  dx.noalias() += g.wz.transpose() * daz;
  dh_prev.noalias() += g.uz.transpose() * daz;
}

// Entry i holds key v_i and variable token R_{i+1}. Linked-entity entries
// come first, then one entry per executed expression.
struct KeyVariableMemory {
  std::vector<VectorXd> keys;
  std::vector<Token> tokens;

  std::size_t size() const { return keys.size(); }

  void add(VectorXd key, Token token) {
    if (token.kind != TokenKind::Variable) throw ContractViolation("memory tokens must be variables");
    if (std::find(tokens.begin(), tokens.end(), token) != tokens.end()) {
      throw ContractViolation("variable already registered in memory");
    }
    keys.push_back(std::move(key));
    tokens.push_back(token);
  }
};

inline KeyVariableMemory register_result_variable(KeyVariableMemory memory, VectorXd key, Token token) {
  memory.add(std::move(key), token);
  return memory;
}

struct Encoding {
  std::vector<VectorXd> hidden;     // raw encoder states h_1..h_T
  MatrixXd attention_states;        // H x T, states after output dropout
  MatrixXd property_embeddings;     // H x P, projected
  KeyVariableMemory memory;         // one entry per linked span
  // backward caches
  std::vector<GruCache> gru;
  std::vector<VectorXd> in_masks;
  std::vector<VectorXd> out_masks;
};

inline void check_spans(const Question& q) {
  const auto n = q.word_ids.size();
  if (q.spans.size() != q.linked.size()) throw ContractViolation("one linked variable per entity span required");
  std::size_t next_free = 0;
  for (const auto& s : q.spans) {
    if (s.start > s.end || s.end >= n) throw ContractViolation("entity span out of range");
    if (s.start < next_free) throw ContractViolation("entity spans overlap or are unordered");
    next_free = s.end + 1;
  }
}

inline Encoding encode(const ModelParams& p, const Question& q, Dropout* dropout) {
  if (q.word_ids.empty()) throw ContractViolation("cannot encode an empty question");
  check_spans(q);
  const int h_dim = p.hidden_dim();
  Encoding enc;
  const auto steps = q.word_ids.size();
  enc.hidden.reserve(steps);
  enc.gru.resize(steps);
  enc.attention_states.resize(h_dim, static_cast<Eigen::Index>(steps));
  VectorXd h = VectorXd::Zero(h_dim);
  for (std::size_t t = 0; t < steps; ++t) {
    VectorXd x = p.w.enc_in * p.word_emb.col(q.word_ids[t]);
    if (dropout) {
      enc.in_masks.push_back(dropout->mask(h_dim));
      x = x.cwiseProduct(enc.in_masks.back());
    }
    h = gru_step(p.w.enc, x, h, &enc.gru[t]);
    enc.hidden.push_back(h);
    if (dropout) {
      enc.out_masks.push_back(dropout->mask(h_dim));
      enc.attention_states.col(static_cast<Eigen::Index>(t)) = h.cwiseProduct(enc.out_masks.back());
    } else {
      enc.attention_states.col(static_cast<Eigen::Index>(t)) = h;
    }
  }
  for (std::size_t i = 0; i < q.spans.size(); ++i) {
    const auto& s = q.spans[i];
    VectorXd key = VectorXd::Zero(h_dim);
    for (auto t = s.start; t <= s.end; ++t) key += enc.hidden[t];
    key /= static_cast<double>(s.end - s.start + 1);
    enc.memory.add(std::move(key), Token::variable(i));
  }
  enc.property_embeddings = p.w.prop_proj * p.prop_raw;
  return enc;
}

struct DecoderState {
  VectorXd hidden;
  Token last_token = Token::go();
  KeyVariableMemory memory;
  int step = 0;
};

inline DecoderState initial_state(const Encoding& enc) {
  return DecoderState{enc.hidden.back(), Token::go(), enc.memory, 0};
}

inline VectorXd token_embedding(const ModelParams& p, const Encoding& enc, const KeyVariableMemory& memory,
                                const Token& t) {
  switch (t.kind) {
    case TokenKind::Property:
      if (t.arg >= enc.property_embeddings.cols()) throw ContractViolation("property outside model table");
      return enc.property_embeddings.col(t.arg);
    case TokenKind::Variable:
      if (t.arg >= memory.size()) throw ContractViolation("variable token without a memory entry");
      return memory.keys[t.arg];
    default:
      return p.w.tok_emb.col(static_token_index(t));
  }
}

struct StepCache {
  VectorXd in_mask, out_mask, sm_mask;
  GruCache gru;
  VectorXd o, alpha, cat, y, yd;
};

struct StepOutput {
  VectorXd hidden;                 // u_t
  std::vector<double> log_probs;   // aligned with the valid tokens
};

// One decoder step: advance the GRU with the last token's embedding, attend
// over the encoder, and score each valid token against the output vector.
// Static and property tokens score by their embeddings, variables by their
// memory keys; the softmax is taken over the valid set only.
inline StepOutput decode_step(const ModelParams& p, const Encoding& enc, const DecoderState& state,
                              std::span<const Token> valid, Dropout* dropout, StepCache* cache = nullptr) {
  if (valid.empty()) throw ContractViolation("decode_step needs a nonempty valid set");
  const int h_dim = p.hidden_dim();
  StepCache local;
  StepCache& c = cache ? *cache : local;

  VectorXd input = token_embedding(p, enc, state.memory, state.last_token);
  if (dropout) {
    c.in_mask = dropout->mask(h_dim);
    input = input.cwiseProduct(c.in_mask);
  }
  StepOutput out;
  out.hidden = gru_step(p.w.dec, input, state.hidden, cache ? &c.gru : nullptr);
  c.o = out.hidden;
  if (dropout) {
    c.out_mask = dropout->mask(h_dim);
    c.o = c.o.cwiseProduct(c.out_mask);
  }
  VectorXd scores = enc.attention_states.transpose() * c.o;
  scores = (scores.array() - scores.maxCoeff()).exp().matrix();
  c.alpha = scores / scores.sum();
  c.cat.resize(2 * h_dim);
  c.cat.head(h_dim) = c.o;
  c.cat.tail(h_dim) = enc.attention_states * c.alpha;
  c.y = (p.w.out_w * c.cat + p.w.out_b.col(0)).array().tanh().matrix();
  c.yd = c.y;
  if (dropout) {
    c.sm_mask = dropout->mask(h_dim);
    c.yd = c.yd.cwiseProduct(c.sm_mask);
  }
  std::vector<double> logits(valid.size());
  for (std::size_t k = 0; k < valid.size(); ++k) {
    logits[k] = c.yd.dot(token_embedding(p, enc, state.memory, valid[k]));
  }
  out.log_probs = log_softmax(logits);
  return out;
}

inline std::vector<double> token_distribution(const StepOutput& out) {
  std::vector<double> probs(out.log_probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(out.log_probs[i]);
  return probs;
}

// log P(program | question) under teacher forcing, with valid sets supplied
// by code assistance. When `grad` is set, accumulates
// scale * d log P / d weights into it. `program` may be a prefix.
inline double program_log_prob(const ModelParams& p, const Question& q, Executor& exec,
                               std::span<const Token> program, const CurriculumConstraints& constraints,
                               Dropout* dropout = nullptr, Weights* grad = nullptr, double scale = 1.0) {
  Encoding enc = encode(p, q, dropout);
  Session session(exec, q.linked, constraints);
  DecoderState state = initial_state(enc);

  const std::size_t n = program.size();
  std::vector<StepCache> caches(grad ? n : 0);
  std::vector<std::vector<Token>> valids(grad ? n : 0);
  std::vector<std::vector<double>> step_log_probs(grad ? n : 0);
  std::vector<std::size_t> chosen(n, 0);
  std::vector<int> key_created_at(n, -1);  // step -> memory index created there

  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    auto valid = session.valid_tokens();
    auto it = std::find(valid.begin(), valid.end(), program[t]);
    if (it == valid.end()) {
      throw ContractViolation("program token not valid at step " + std::to_string(t));
    }
    chosen[t] = static_cast<std::size_t>(it - valid.begin());
    auto out = decode_step(p, enc, state, valid, dropout, grad ? &caches[t] : nullptr);
    total += out.log_probs[chosen[t]];
    session.apply(program[t]);
    state.hidden = out.hidden;
    state.last_token = program[t];
    ++state.step;
    if (auto created = session.created_variable()) {
      key_created_at[t] = static_cast<int>(state.memory.size());
      state.memory.add(out.hidden, Token::variable(*created));
    }
    if (grad) {
      valids[t] = std::move(valid);
      step_log_probs[t] = std::move(out.log_probs);
    }
  }
  if (!grad) return total;

  // Reverse pass. Keys created at decoder step s receive gradient from every
  // later step that reads them, so by the time the loop reaches s their
  // accumulated gradient is complete and joins du_s.
  Weights& g = *grad;
  const int h_dim = p.hidden_dim();
  const auto& memory = state.memory;
  std::vector<VectorXd> dkeys(memory.size(), VectorXd::Zero(h_dim));
  MatrixXd dprop = MatrixXd::Zero(h_dim, enc.property_embeddings.cols());
  MatrixXd datt = MatrixXd::Zero(h_dim, enc.attention_states.cols());
  auto route = [&](const Token& t, const VectorXd& d) {
    switch (t.kind) {
      case TokenKind::Property: dprop.col(t.arg) += d; break;
      case TokenKind::Variable: dkeys[t.arg] += d; break;
      default: g.tok_emb.col(static_token_index(t)) += d; break;
    }
  };

  VectorXd du_next = VectorXd::Zero(h_dim);
  for (std::size_t step = n; step-- > 0;) {
    const auto& c = caches[step];
    const auto& valid = valids[step];
    VectorXd du = du_next;
    if (key_created_at[step] >= 0) du += dkeys[static_cast<std::size_t>(key_created_at[step])];

    VectorXd dyd = VectorXd::Zero(h_dim);
    for (std::size_t k = 0; k < valid.size(); ++k) {
      const double dl = scale * ((k == chosen[step] ? 1.0 : 0.0) - std::exp(step_log_probs[step][k]));
      dyd += dl * token_embedding(p, enc, memory, valid[k]);
      route(valid[k], dl * c.yd);
    }
    VectorXd dy = c.sm_mask.size() ? VectorXd(dyd.cwiseProduct(c.sm_mask)) : dyd;
    VectorXd da = (dy.array() * (1.0 - c.y.array().square())).matrix();
    g.out_w.noalias() += da * c.cat.transpose();
    g.out_b.col(0) += da;
    VectorXd dcat = p.w.out_w.transpose() * da;
    VectorXd d_o = dcat.head(h_dim);
    VectorXd dctx = dcat.tail(h_dim);
    VectorXd dalpha = enc.attention_states.transpose() * dctx;
    datt.noalias() += dctx * c.alpha.transpose();
    VectorXd ds = c.alpha.cwiseProduct((dalpha.array() - c.alpha.dot(dalpha)).matrix());
    d_o.noalias() += enc.attention_states * ds;
    datt.noalias() += c.o * ds.transpose();
    du += c.out_mask.size() ? VectorXd(d_o.cwiseProduct(c.out_mask)) : d_o;

    VectorXd dinput, du_prev;
    gru_backward(p.w.dec, c.gru, du, g.dec, dinput, du_prev);
    du_next = std::move(du_prev);
    if (c.in_mask.size()) dinput = dinput.cwiseProduct(c.in_mask);
    route(step == 0 ? Token::go() : program[step - 1], dinput);
  }

  // Encoder: attention reads, linked keys (span means), and the decoder's
  // initial state all feed back into the encoder states.
  const auto steps = enc.hidden.size();
  std::vector<VectorXd> dh(steps, VectorXd::Zero(h_dim));
  for (std::size_t t = 0; t < steps; ++t) {
    VectorXd col = datt.col(static_cast<Eigen::Index>(t));
    dh[t] += enc.out_masks.empty() ? col : VectorXd(col.cwiseProduct(enc.out_masks[t]));
  }
  for (std::size_t i = 0; i < q.spans.size(); ++i) {
    const auto& s = q.spans[i];
    const double inv = 1.0 / static_cast<double>(s.end - s.start + 1);
    for (auto t = s.start; t <= s.end; ++t) dh[t] += inv * dkeys[i];
  }
  dh[steps - 1] += du_next;
  VectorXd carry = VectorXd::Zero(h_dim);
  for (std::size_t t = steps; t-- > 0;) {
    VectorXd total_dh = dh[t] + carry;
    VectorXd dx, dprev;
    gru_backward(p.w.enc, enc.gru[t], total_dh, g.enc, dx, dprev);
    carry = std::move(dprev);
    if (!enc.in_masks.empty()) dx = dx.cwiseProduct(enc.in_masks[t]);
    g.enc_in.noalias() += dx * p.word_emb.col(q.word_ids[t]).transpose();
  }
  g.prop_proj.noalias() += dprop * p.prop_raw.transpose();
  return total;
}

}  // namespace nsm
