#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "nsm/errors.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/kb.hpp"

namespace nsm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ModelConfig {
  int word_dim = 16;
  int hidden_dim = 32;
  double dropout = 0.5;
};

// Word list with two reserved entries: the unknown-word token and the
// anonymized-entity token.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kEnt = 1;
  static constexpr std::string_view kUnkWord = "<unk>";
  static constexpr std::string_view kEntWord = "ENT";

  Vocabulary() {
    add(std::string(kUnkWord));
    add(std::string(kEntWord));
  }

  int add(const std::string& w) {
    auto [it, inserted] = ids_.try_emplace(w, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }
  int id(const std::string& w) const {
    auto it = ids_.find(w);
    return it == ids_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& w) const { return ids_.count(w) != 0; }
  std::size_t size() const { return words_.size(); }
  const std::string& word(int i) const { return words_.at(i); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
};

// Splits "/domain/type/property" into its three parts, each a list of
// underscore-separated words. Empty result when malformed.
inline std::vector<std::vector<std::string>> split_property_id(std::string_view id) {
  if (id.empty() || id.front() != '/') return {};
  std::vector<std::vector<std::string>> parts;
  std::size_t start = 1;
  while (start <= id.size()) {
    auto pos = id.find('/', start);
    auto part = id.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (part.empty()) return {};
    std::vector<std::string> words;
    std::size_t ws = 0;
    while (ws <= part.size()) {
      auto wp = part.find('_', ws);
      auto w = part.substr(ws, wp == std::string_view::npos ? std::string_view::npos : wp - ws);
      if (!w.empty()) words.emplace_back(w);
      if (wp == std::string_view::npos) break;
      ws = wp + 1;
    }
    if (words.empty()) return {};
    parts.push_back(std::move(words));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 3) return {};
  return parts;
}

// Pre-projection property vector of size 2*D_w: mean embedding of the
// domain and type words, then mean embedding of the property words.
// Unknown words use the UNK column; malformed ids fill both halves with UNK.
inline VectorXd build_property_embedding(const MatrixXd& word_embeddings, const Vocabulary& vocab,
                                         std::string_view property_id, std::ostream* warn = &std::clog) {
  const auto dim = word_embeddings.rows();
  VectorXd out(2 * dim);
  auto parts = split_property_id(property_id);
  if (parts.empty()) {
    if (warn) *warn << "warning: malformed property id '" << property_id << "', using UNK embedding\n";
    out.head(dim) = word_embeddings.col(Vocabulary::kUnk);
    out.tail(dim) = word_embeddings.col(Vocabulary::kUnk);
    return out;
  }
  auto mean_of = [&](std::initializer_list<const std::vector<std::string>*> groups) {
    VectorXd acc = VectorXd::Zero(dim);
    int n = 0;
    for (const auto* g : groups) {
      for (const auto& w : *g) {
        acc += word_embeddings.col(vocab.id(w));
        ++n;
      }
    }
    return VectorXd(acc / n);
  };
  out.head(dim) = mean_of({&parts[0], &parts[1]});
  out.tail(dim) = mean_of({&parts[2]});
  return out;
}

struct GruWeights {
  MatrixXd wz, wr, wh;  // input -> gate
  MatrixXd uz, ur, uh;  // hidden -> gate
  MatrixXd bz, br, bh;  // column vectors

  template <class F>
  void for_each(const std::string& prefix, F&& f) {
    f(prefix + "wz", wz), f(prefix + "wr", wr), f(prefix + "wh", wh);
    f(prefix + "uz", uz), f(prefix + "ur", ur), f(prefix + "uh", uh);
    f(prefix + "bz", bz), f(prefix + "br", br), f(prefix + "bh", bh);
  }
};

// Trainable parameter blocks. The same struct holds gradients.
struct Weights {
  MatrixXd enc_in;     // H x W word projection
  GruWeights enc;
  GruWeights dec;
  MatrixXd out_w;      // H x 2H
  MatrixXd out_b;      // H x 1
  MatrixXd tok_emb;    // H x kNumStaticTokens
  MatrixXd prop_proj;  // H x 2W

  template <class F>
  void for_each(F&& f) {
    f(std::string("enc_in"), enc_in);
    enc.for_each("enc.", f);
    dec.for_each("dec.", f);
    f(std::string("out_w"), out_w);
    f(std::string("out_b"), out_b);
    f(std::string("tok_emb"), tok_emb);
    f(std::string("prop_proj"), prop_proj);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<Weights*>(this)->for_each([&](const std::string& n, MatrixXd& m) { f(n, std::as_const(m)); });
  }

  Weights zeros_like() const {
    Weights z = *this;
    z.for_each([](const std::string&, MatrixXd& m) { m.setZero(); });
    return z;
  }

  // this += scale * other
  void add_scaled(const Weights& other, double scale) {
    std::vector<const MatrixXd*> src;
    other.for_each([&](const std::string&, const MatrixXd& m) { src.push_back(&m); });
    std::size_t i = 0;
    for_each([&](const std::string&, MatrixXd& m) { m += scale * *src[i++]; });
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const MatrixXd& m) { ok = ok && m.allFinite(); });
    return ok;
  }
};

struct ModelParams {
  ModelConfig config;
  Vocabulary vocab;
  std::vector<std::string> property_names;  // indexed by PropertyId
  MatrixXd word_emb;  // W x V, frozen
  MatrixXd prop_raw;  // 2W x P, frozen, built from word_emb
  Weights w;

  int hidden_dim() const { return config.hidden_dim; }
};

inline GruWeights make_gru(int in, int hidden) {
  GruWeights g;
  for (auto* m : {&g.wz, &g.wr, &g.wh}) m->setZero(hidden, in);
  for (auto* m : {&g.uz, &g.ur, &g.uh}) m->setZero(hidden, hidden);
  for (auto* m : {&g.bz, &g.br, &g.bh}) m->setZero(hidden, 1);
  return g;
}

inline Weights make_weights(const ModelConfig& c) {
  const int h = c.hidden_dim;
  const int w = c.word_dim;
  Weights out;
  out.enc_in.setZero(h, w);
  out.enc = make_gru(h, h);
  out.dec = make_gru(h, h);
  out.out_w.setZero(h, 2 * h);
  out.out_b.setZero(h, 1);
  out.tok_emb.setZero(h, kNumStaticTokens);
  out.prop_proj.setZero(h, 2 * w);
  return out;
}

inline double truncated_normal(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  while (true) {
    double x = dist(rng);
    if (std::abs(x) <= 2.0 * stddev) return x;
  }
}

inline bool is_bias_block(std::string_view name) {
  return name == "out_b" || name.ends_with(".bz") || name.ends_with(".br") || name.ends_with(".bh");
}

// Weight matrices ~ U[-sqrt(3)/d, sqrt(3)/d] with d the input dimension;
// biases zero; special-token embeddings ~ truncated N(0, 0.1).
inline void initialize_weights(Weights& w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  w.for_each([&](const std::string& name, MatrixXd& m) {
    if (name == "tok_emb") {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = truncated_normal(rng, 0.1);
    } else if (is_bias_block(name)) {
      m.setZero();
    } else {
      const double bound = std::sqrt(3.0) / static_cast<double>(m.cols());
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    }
  });
}

// Rows of `word v1 ... vD`. Returns the number of vocabulary words found.
inline std::size_t load_word_embeddings(const std::string& path, const Vocabulary& vocab, MatrixXd& emb) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open embedding file " + path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t found = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> v;
    double x = 0.0;
    while (ss >> x) v.push_back(x);
    if (static_cast<Eigen::Index>(v.size()) != emb.rows()) {
      throw LoadError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(emb.rows()) +
                      " values");
    }
    if (!vocab.contains(word)) continue;
    emb.col(vocab.id(word)) = Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    ++found;
  }
  return found;
}

inline void rebuild_property_inputs(ModelParams& p, std::ostream* warn = &std::clog) {
  p.prop_raw.resize(2 * p.config.word_dim, static_cast<Eigen::Index>(p.property_names.size()));
  for (std::size_t i = 0; i < p.property_names.size(); ++i) {
    p.prop_raw.col(static_cast<Eigen::Index>(i)) =
        build_property_embedding(p.word_emb, p.vocab, p.property_names[i], warn);
  }
}

// Adds every word of every property id to the vocabulary.
inline void add_property_words(Vocabulary& vocab, const KnowledgeBase& kb) {
  for (const auto& name : kb.property_names()) {
    for (const auto& part : split_property_id(name)) {
      for (const auto& w : part) vocab.add(w);
    }
  }
}

inline ModelParams make_model(const ModelConfig& config, Vocabulary vocab, const KnowledgeBase& kb,
                              std::uint64_t seed, const std::string& embedding_file = {},
                              std::ostream* warn = &std::clog) {
  ModelParams p;
  p.config = config;
  p.vocab = std::move(vocab);
  p.property_names = kb.property_names();
  std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
  std::normal_distribution<double> normal(0.0, 0.1);
  p.word_emb.resize(config.word_dim, static_cast<Eigen::Index>(p.vocab.size()));
  for (Eigen::Index i = 0; i < p.word_emb.size(); ++i) p.word_emb.data()[i] = normal(rng);
  if (!embedding_file.empty()) load_word_embeddings(embedding_file, p.vocab, p.word_emb);
  rebuild_property_inputs(p, warn);
  p.w = make_weights(config);
  initialize_weights(p.w, seed);
  return p;
}

}  // namespace nsm
