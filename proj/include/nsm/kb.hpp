#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nsm/errors.hpp"
#include "nsm/value.hpp"

namespace nsm {

struct Triple {
  EntityId subject;
  PropertyId property;
  Value object;
  auto operator<=>(const Triple&) const = default;
};

class KbBuilder;

// Immutable triple store. Entity and property names are interned in
// first-seen order, so ids are stable for a given input file.
class KnowledgeBase {
 public:
  struct Edge {
    PropertyId property;
    ValueSet objects;
  };

  KnowledgeBase() = default;

  std::size_t num_entities() const { return entity_names_.size(); }
  std::size_t num_properties() const { return property_names_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }

  std::optional<EntityId> find_entity(std::string_view name) const {
    auto it = entity_ids_.find(std::string(name));
    if (it == entity_ids_.end()) return std::nullopt;
    return EntityId{it->second};
  }
  std::optional<PropertyId> find_property(std::string_view name) const {
    auto it = property_ids_.find(std::string(name));
    if (it == property_ids_.end()) return std::nullopt;
    return PropertyId{it->second};
  }
  const std::string& entity_name(EntityId e) const { return entity_names_.at(e.index); }
  const std::string& property_name(PropertyId p) const { return property_names_.at(p.index); }
  const std::vector<std::string>& property_names() const { return property_names_; }

  // Objects of (subject, p); empty when absent.
  std::span<const Value> objects(EntityId subject, PropertyId p) const {
    if (subject.index >= edges_.size()) return {};
    const auto& edges = edges_[subject.index];
    auto it = std::lower_bound(edges.begin(), edges.end(), p,
                               [](const Edge& e, PropertyId q) { return e.property < q; });
    if (it == edges.end() || it->property != p) return {};
    return it->objects;
  }

  std::span<const Edge> edges(EntityId subject) const {
    if (subject.index >= edges_.size()) return {};
    return edges_[subject.index];
  }

  std::span<const PropertyId> properties_of(EntityId subject) const {
    if (subject.index >= out_properties_.size()) return {};
    return out_properties_[subject.index];
  }

  // Typed text form: `n:<number>`, `d:<date>`, otherwise an entity name.
  std::string format_value(const Value& v) const {
    return std::visit(
        [this](const auto& x) -> std::string {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, EntityId>) {
            return entity_name(x);
          } else if constexpr (std::is_same_v<T, Number>) {
            return "n:" + format_number(x);
          } else {
            return "d:" + format_date(x);
          }
        },
        v);
  }

  // Parses a typed value; entity names must already exist in the KB.
  std::optional<Value> parse_value(std::string_view text) const {
    if (text.starts_with("n:")) {
      if (auto n = parse_number(text.substr(2))) return Value{*n};
      return std::nullopt;
    }
    if (text.starts_with("d:")) {
      if (auto d = parse_date(text.substr(2))) return Value{*d};
      return std::nullopt;
    }
    if (auto e = find_entity(text)) return Value{*e};
    return std::nullopt;
  }

 private:
  friend class KbBuilder;

  std::vector<std::string> entity_names_;
  std::unordered_map<std::string, std::uint32_t> entity_ids_;
  std::vector<std::string> property_names_;
  std::unordered_map<std::string, std::uint32_t> property_ids_;
  std::vector<Triple> triples_;
  std::vector<std::vector<Edge>> edges_;
  std::vector<std::vector<PropertyId>> out_properties_;
};

class KbBuilder {
 public:
  EntityId intern_entity(std::string_view name) {
    auto [it, inserted] = kb_.entity_ids_.try_emplace(std::string(name),
                                                      static_cast<std::uint32_t>(kb_.entity_names_.size()));
    if (inserted) kb_.entity_names_.emplace_back(name);
    return EntityId{it->second};
  }

  PropertyId intern_property(std::string_view name) {
    auto [it, inserted] = kb_.property_ids_.try_emplace(std::string(name),
                                                        static_cast<std::uint32_t>(kb_.property_names_.size()));
    if (inserted) kb_.property_names_.emplace_back(name);
    return PropertyId{it->second};
  }

  // Returns nullopt if the object text is a malformed number or date.
  std::optional<Value> intern_object(std::string_view text) {
    if (text.starts_with("n:")) {
      if (auto n = parse_number(text.substr(2))) return Value{*n};
      return std::nullopt;
    }
    if (text.starts_with("d:")) {
      if (auto d = parse_date(text.substr(2))) return Value{*d};
      return std::nullopt;
    }
    if (text.empty()) return std::nullopt;
    return Value{intern_entity(text)};
  }

  void add(EntityId s, PropertyId p, Value o) { kb_.triples_.push_back(Triple{s, p, o}); }

  void add(std::string_view subject, std::string_view property, std::string_view object) {
    auto o = intern_object(object);
    if (!o) throw LoadError("malformed object value '" + std::string(object) + "'");
    add(intern_entity(subject), intern_property(property), *o);
  }

  KnowledgeBase build() && {
    auto& t = kb_.triples_;
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());

    kb_.edges_.assign(kb_.entity_names_.size(), {});
    kb_.out_properties_.assign(kb_.entity_names_.size(), {});
    // Triples are sorted by (subject, property, object), so each edge's
    // object list comes out sorted and unique.
    for (const auto& tr : t) {
      auto& edges = kb_.edges_[tr.subject.index];
      if (edges.empty() || edges.back().property != tr.property) {
        edges.push_back({tr.property, {}});
        kb_.out_properties_[tr.subject.index].push_back(tr.property);
      }
      edges.back().objects.push_back(tr.object);
    }
    return std::move(kb_);
  }

 private:
  KnowledgeBase kb_;
};

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline KnowledgeBase parse_triples(std::istream& in, const std::string& source = "<stream>") {
  KbBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_tabs(line);
    auto where = source + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != 3) {
      throw LoadError(where + "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) throw LoadError(where + "empty subject or property");
    if (fields[0].starts_with("n:") || fields[0].starts_with("d:")) {
      throw LoadError(where + "subject must be an entity");
    }
    auto object = builder.intern_object(fields[2]);
    if (!object) throw LoadError(where + "unparseable object '" + std::string(fields[2]) + "'");
    builder.add(builder.intern_entity(fields[0]), builder.intern_property(fields[1]), *object);
  }
  return std::move(builder).build();
}

inline KnowledgeBase load_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open triple file " + path);
  return parse_triples(in, path);
}

// Rows sorted by their text, so the output does not depend on id order.
inline void write_triples(const KnowledgeBase& kb, std::ostream& out) {
  std::vector<std::array<std::string, 3>> rows;
  rows.reserve(kb.triples().size());
  for (const auto& t : kb.triples()) {
    rows.push_back({kb.entity_name(t.subject), kb.property_name(t.property), kb.format_value(t.object)});
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& r : rows) out << r[0] << '\t' << r[1] << '\t' << r[2] << '\n';
}

// {o | s in source, (s, p, o) in K}
inline ValueSet forward(const KnowledgeBase& kb, const ValueSet& source, PropertyId p) {
  std::vector<Value> out;
  for (const auto& v : source) {
    if (const auto* e = std::get_if<EntityId>(&v)) {
      auto objs = kb.objects(*e, p);
      out.insert(out.end(), objs.begin(), objs.end());
    }
  }
  return make_value_set(std::move(out));
}

inline std::vector<PropertyId> reachable_properties(const KnowledgeBase& kb, const ValueSet& source) {
  std::vector<PropertyId> out;
  for (const auto& v : source) {
    if (const auto* e = std::get_if<EntityId>(&v)) {
      auto props = kb.properties_of(*e);
      out.insert(out.end(), props.begin(), props.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace nsm
