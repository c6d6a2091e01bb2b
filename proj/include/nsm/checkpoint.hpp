#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nsm/errors.hpp"
#include "nsm/interpreter.hpp"
#include "nsm/kb.hpp"
#include "nsm/model.hpp"
#include "nsm/reward.hpp"
#include "nsm/search.hpp"

namespace nsm {

namespace detail {

// JSON numbers round-trip doubles exactly.
inline nlohmann::json matrix_to_json(const MatrixXd& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw LoadError("tensor " + name + " has wrong size");
  MatrixXd m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExecutionError("cannot write " + path.string());
  return out;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ModelParams& p) {
  nlohmann::json tensors;
  p.w.for_each([&](const std::string& name, const MatrixXd& m) { tensors[name] = detail::matrix_to_json(m); });
  tensors["word_emb"] = detail::matrix_to_json(p.word_emb);
  return {{"config",
           {{"word_dim", p.config.word_dim}, {"hidden_dim", p.config.hidden_dim}, {"dropout", p.config.dropout}}},
          {"vocab", p.vocab.words()},
          {"properties", p.property_names},
          {"tensors", std::move(tensors)}};
}

// Property inputs are rebuilt from the stored word embeddings.
inline ModelParams model_from_json(const nlohmann::json& j) {
  ModelParams p;
  const auto& c = j.at("config");
  p.config.word_dim = c.at("word_dim").get<int>();
  p.config.hidden_dim = c.at("hidden_dim").get<int>();
  p.config.dropout = c.at("dropout").get<double>();
  const auto words = j.at("vocab").get<std::vector<std::string>>();
  for (const auto& w : words) p.vocab.add(w);
  if (p.vocab.size() != words.size()) throw LoadError("checkpoint vocabulary has duplicate or reserved words");
  p.property_names = j.at("properties").get<std::vector<std::string>>();
  const auto& t = j.at("tensors");
  p.word_emb = detail::matrix_from_json(t.at("word_emb"), "word_emb");
  if (p.word_emb.rows() != p.config.word_dim || p.word_emb.cols() != static_cast<Eigen::Index>(p.vocab.size())) {
    throw LoadError("word embedding shape does not match the config");
  }
  p.w = make_weights(p.config);
  p.w.for_each([&](const std::string& name, MatrixXd& m) {
    if (!t.contains(name)) throw LoadError("checkpoint lacks tensor " + name);
    MatrixXd loaded = detail::matrix_from_json(t.at(name), name);
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) throw LoadError("tensor " + name + " has wrong shape");
    m = std::move(loaded);
  });
  rebuild_property_inputs(p, nullptr);
  return p;
}

inline void save_model(const ModelParams& p, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << model_to_json(p).dump() << '\n';
}

inline ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

// Checks that the model's property list matches the KB it is used with.
inline void check_model_matches(const ModelParams& p, const KnowledgeBase& kb) {
  if (p.property_names != kb.property_names()) {
    throw LoadError("checkpoint properties do not match the knowledge base");
  }
}

// One JSON line per entry: {id, reward, program}.
inline void save_cache(const PseudoGoldCache& cache, const KnowledgeBase& kb, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  for (const auto& [id, e] : cache.entries()) {
    out << nlohmann::json{{"id", id}, {"reward", e.reward}, {"program", format_program(kb, e.program)}}.dump()
        << '\n';
  }
}

inline PseudoGoldCache load_cache(const KnowledgeBase& kb, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  PseudoGoldCache cache;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    auto program = parse_program(kb, j.at("program").get<std::string>());
    const auto n = program.size();
    cache.set(j.at("id").get<std::string>(), PseudoGold{std::move(program), j.at("reward").get<double>(), n});
  }
  return cache;
}

inline nlohmann::json beam_to_json(const KnowledgeBase& kb, const std::string& question_id,
                                   const std::vector<DecodedProgram>& beam, const ValueSet& gold) {
  nlohmann::json programs = nlohmann::json::array();
  for (const auto& d : beam) {
    programs.push_back(
        {{"text", format_program(kb, d.tokens)}, {"log_prob", d.log_prob}, {"reward", reward(d.answer, gold)}});
  }
  return {{"question_id", question_id}, {"programs", std::move(programs)}};
}

}  // namespace nsm
