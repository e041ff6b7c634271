// Copyright 2026 The dcekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Corpus loading and statistics. Source-corpus field names are not baked in:
// they come from a versioned mapping file (configs/source_fields.json) so
// upstream schema drift is a config edit. The engine's own canonical
// JSON-lines format is fixed here and is a load/export fixed point.

#pragma once

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dce/core.hpp"
#include "dce/response_parser.hpp"

namespace dce {

// ---------------------------------------------------------------------------
// Source field mapping

struct DrugCombFields {
  std::string id, sentence, context, spans, span_id, span_text;
  std::string relations, relation_class, relation_spans;
  std::map<std::string, EffectLabel> class_map;
};

struct Ddi13Fields {
  std::string id, sentence, entities, entity_id, entity_text;
  std::string pairs, pair_e1, pair_e2, pair_entities, pair_type;
  std::map<std::string, EffectLabel> type_map;
};

struct FieldMapping {
  DrugCombFields drugcomb;
  Ddi13Fields ddi13;

  static FieldMapping from_json(const nlohmann::json& j) {
    const auto need = [](const nlohmann::json& o, const char* key) -> std::string {
      if (!o.contains(key) || !o.at(key).is_string())
        throw ParseError(std::string("field mapping: missing key '") + key + "'");
      return o.at(key).get<std::string>();
    };
    const auto label_map = [](const nlohmann::json& o,
                              const char* key) -> std::map<std::string, EffectLabel> {
      if (!o.contains(key) || !o.at(key).is_object())
        throw ParseError(std::string("field mapping: missing map '") + key + "'");
      std::map<std::string, EffectLabel> out;
      for (auto it = o.at(key).begin(); it != o.at(key).end(); ++it) {
        const auto label = label_from_string(it.value().get<std::string>());
        if (!label)
          throw ParseError("field mapping: unknown label '" +
                           it.value().get<std::string>() + "'");
        out[it.key()] = *label;
      }
      return out;
    };

    FieldMapping m;
    const auto& dc = j.at("drugcomb");
    m.drugcomb.id = need(dc, "id");
    m.drugcomb.sentence = need(dc, "sentence");
    m.drugcomb.context = need(dc, "context");
    m.drugcomb.spans = need(dc, "spans");
    m.drugcomb.span_id = need(dc, "span_id");
    m.drugcomb.span_text = need(dc, "span_text");
    m.drugcomb.relations = need(dc, "relations");
    m.drugcomb.relation_class = need(dc, "relation_class");
    m.drugcomb.relation_spans = need(dc, "relation_spans");
    m.drugcomb.class_map = label_map(dc, "class_map");

    const auto& dd = j.at("ddi13");
    m.ddi13.id = need(dd, "id");
    m.ddi13.sentence = need(dd, "sentence");
    m.ddi13.entities = need(dd, "entities");
    m.ddi13.entity_id = need(dd, "entity_id");
    m.ddi13.entity_text = need(dd, "entity_text");
    m.ddi13.pairs = need(dd, "pairs");
    m.ddi13.pair_e1 = need(dd, "pair_e1");
    m.ddi13.pair_e2 = need(dd, "pair_e2");
    m.ddi13.pair_entities = need(dd, "pair_entities");
    m.ddi13.pair_type = need(dd, "pair_type");
    m.ddi13.type_map = label_map(dd, "type_map");
    return m;
  }

  static FieldMapping from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open field mapping file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("field mapping " + path + ": " + e.what());
    }
    return from_json(j);
  }
};

namespace detail {

// JSON ids may be numbers or strings; keys are canonicalized to strings.
inline std::string id_key(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                                     const std::string& where) {
  if (!obj.contains(key))
    throw ParseError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline std::string require_string(const nlohmann::json& obj, const std::string& key,
                                  const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(where + ": field '" + key + "' is not a string");
  return v.get<std::string>();
}

template <typename Fn>
inline void for_each_jsonl_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path + ":" + std::to_string(line_no) + ": invalid JSON");
    fn(j, line_no);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Source loaders

inline std::vector<Instance> load_drugcomb(const std::string& path,
                                           const DrugCombFields& fields,
                                           const NormalizationPolicy& policy = {},
                                           std::vector<std::string>* warnings = nullptr) {
  std::vector<Instance> out;
  std::set<std::string> seen_ids;

  detail::for_each_jsonl_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
    const std::string where = path + ":" + std::to_string(line_no);
    Instance inst;
    inst.task_mode = TaskMode::DRUGCOMB;
    inst.id = detail::id_key(detail::require(j, fields.id, where));
    if (!seen_ids.insert(inst.id).second)
      throw DuplicateIdError(where + ": duplicate document id '" + inst.id + "'");
    inst.sentence = detail::require_string(j, fields.sentence, where);
    if (j.contains(fields.context) && j.at(fields.context).is_string())
      inst.context = j.at(fields.context).get<std::string>();

    // Span id -> normalized drug name, flagging surface forms that collide.
    std::map<std::string, std::string> span_names;
    std::map<std::string, std::set<std::string>> surface_forms;
    for (const auto& span : detail::require(j, fields.spans, where)) {
      const std::string sid = detail::id_key(detail::require(span, fields.span_id, where));
      const std::string text = detail::require_string(span, fields.span_text, where);
      const auto name = try_normalize_drug_name(text, policy);
      if (!name)
        throw ParseError(where + ": span '" + sid + "' text normalizes to empty");
      span_names[sid] = *name;
      surface_forms[*name].insert(text);
    }
    if (warnings != nullptr) {
      for (const auto& [name, forms] : surface_forms) {
        if (forms.size() > 1)
          warnings->push_back("doc " + inst.id + ": " + std::to_string(forms.size()) +
                              " distinct span texts normalize to '" + name + "'");
      }
    }

    if (j.contains(fields.relations)) {
      for (const auto& rel : j.at(fields.relations)) {
        const std::string cls = detail::require_string(rel, fields.relation_class, where);
        const auto mapped = fields.class_map.find(cls);
        if (mapped == fields.class_map.end())
          throw ParseError(where + ": unknown relation class '" + cls + "'");
        Combination c;
        c.label = mapped->second;
        for (const auto& ref : detail::require(rel, fields.relation_spans, where)) {
          const std::string sid = detail::id_key(ref);
          const auto it = span_names.find(sid);
          if (it == span_names.end())
            throw ParseError(where + ": relation references unknown span '" + sid + "'");
          c.drugs.insert(it->second);
        }
        if (c.drugs.size() < 2)
          throw ParseError(where + ": relation resolves to " +
                           std::to_string(c.drugs.size()) + " distinct drugs (need >=2)");
        inst.gold.insert(std::move(c));
      }
    }
    out.push_back(std::move(inst));
  });
  return out;
}

inline std::vector<Instance> load_ddi13(const std::string& path,
                                        const Ddi13Fields& fields,
                                        const NormalizationPolicy& policy = {}) {
  std::vector<Instance> out;
  std::set<std::string> seen_ids;

  detail::for_each_jsonl_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
    const std::string where = path + ":" + std::to_string(line_no);
    Instance inst;
    inst.task_mode = TaskMode::DDI13;
    inst.id = detail::id_key(detail::require(j, fields.id, where));
    if (!seen_ids.insert(inst.id).second)
      throw DuplicateIdError(where + ": duplicate sentence id '" + inst.id + "'");
    inst.sentence = detail::require_string(j, fields.sentence, where);

    std::map<std::string, std::string> entity_names;  // id -> normalized text
    if (j.contains(fields.entities)) {
      DrugSet hints;
      for (const auto& ent : j.at(fields.entities)) {
        const std::string text = detail::require_string(ent, fields.entity_text, where);
        const auto name = try_normalize_drug_name(text, policy);
        if (!name)
          throw ParseError(where + ": entity text normalizes to empty");
        hints.insert(*name);
        if (ent.contains(fields.entity_id))
          entity_names[detail::id_key(ent.at(fields.entity_id))] = *name;
      }
      if (!hints.empty()) inst.entity_hints = std::move(hints);
    }

    // A pair reference is an entity id when it resolves, literal text otherwise.
    const auto resolve = [&](const nlohmann::json& ref) -> std::string {
      const std::string key = detail::id_key(ref);
      if (const auto it = entity_names.find(key); it != entity_names.end())
        return it->second;
      const auto name = try_normalize_drug_name(key, policy);
      if (!name) throw ParseError(where + ": pair entity normalizes to empty");
      return *name;
    };

    if (j.contains(fields.pairs)) {
      for (const auto& pair : j.at(fields.pairs)) {
        Combination c;
        if (pair.contains(fields.pair_entities)) {
          const auto& list = pair.at(fields.pair_entities);
          if (!list.is_array() || list.size() != 2)
            throw ArityViolationError(where + ": pair record lists " +
                                      std::to_string(list.is_array() ? list.size() : 0) +
                                      " entities (need exactly 2)");
          for (const auto& ref : list) c.drugs.insert(resolve(ref));
        } else {
          c.drugs.insert(resolve(detail::require(pair, fields.pair_e1, where)));
          c.drugs.insert(resolve(detail::require(pair, fields.pair_e2, where)));
        }
        if (c.drugs.size() != 2)
          throw ArityViolationError(where + ": pair resolves to " +
                                    std::to_string(c.drugs.size()) +
                                    " distinct drugs (need exactly 2)");
        const std::string type = detail::require_string(pair, fields.pair_type, where);
        auto mapped = fields.type_map.find(type);
        if (mapped == fields.type_map.end()) {
          // tolerate case drift relative to the mapping file
          for (auto it = fields.type_map.begin(); it != fields.type_map.end(); ++it) {
            if (ascii_lower(it->first) == ascii_lower(type)) {
              mapped = it;
              break;
            }
          }
        }
        if (mapped == fields.type_map.end())
          throw ParseError(where + ": unknown pair type '" + type + "'");
        c.label = mapped->second;
        inst.gold.insert(std::move(c));
      }
    }
    out.push_back(std::move(inst));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Canonical JSON-lines format

inline nlohmann::json instance_to_json(const Instance& inst) {
  nlohmann::json j;
  j["id"] = inst.id;
  j["sentence"] = inst.sentence;
  j["context"] = inst.context ? nlohmann::json(*inst.context) : nlohmann::json(nullptr);
  j["mode"] = task_mode_name(inst.task_mode);
  j["gold"] = combinations_to_json(inst.gold);
  if (inst.entity_hints) j["entities"] = *inst.entity_hints;
  return j;
}

inline Instance instance_from_json(const nlohmann::json& j, const std::string& where,
                                   const NormalizationPolicy& policy = {}) {
  Instance inst;
  inst.id = detail::id_key(detail::require(j, "id", where));
  inst.sentence = detail::require_string(j, "sentence", where);
  if (j.contains("context") && j.at("context").is_string())
    inst.context = j.at("context").get<std::string>();

  const std::string mode = detail::require_string(j, "mode", where);
  const auto parsed_mode = task_mode_from_string(mode);
  if (!parsed_mode) throw ParseError(where + ": unknown mode '" + mode + "'");
  inst.task_mode = *parsed_mode;

  const nlohmann::json* combos = nullptr;
  for (const char* key : {"gold", "combinations", "predictions"}) {
    if (j.contains(key)) {
      combos = &j.at(key);
      break;
    }
  }
  if (combos == nullptr) throw ParseError(where + ": missing 'gold' list");
  if (!combos->is_array()) throw ParseError(where + ": 'gold' is not an array");

  for (const auto& rec : *combos) {
    Combination c;
    const std::string label_str = detail::require_string(rec, "label", where);
    const auto label = label_from_string(label_str);
    if (!label) throw InvalidLabelError(where + ": unknown label '" + label_str + "'");
    if (*label == EffectLabel::NO_COMB)
      throw InvalidLabelError(where + ": NO_COMB is encoded as an empty list");
    if (inst.task_mode == TaskMode::DRUGCOMB && !is_nary_label(*label))
      throw InvalidLabelError(where + ": label '" + label_str + "' is not an n-ary label");
    if (inst.task_mode == TaskMode::DDI13 && !is_ddi_label(*label))

      throw InvalidLabelError(where + ": label '" + label_str + "' is not a DDI type");
    c.label = *label;

    const auto& drugs = detail::require(rec, "drugs", where);
    if (!drugs.is_array()) throw ParseError(where + ": 'drugs' is not an array");
    for (const auto& d : drugs) {
      if (!d.is_string()) throw ParseError(where + ": drug name is not a string");
      const auto name = try_normalize_drug_name(d.get<std::string>(), policy);
      if (!name) throw EmptyNameError(where + ": drug name normalizes to empty");
      c.drugs.insert(*name);
    }
    if (inst.task_mode == TaskMode::DDI13 && c.drugs.size() != 2)
      throw ArityViolationError(where + ": pair has " + std::to_string(c.drugs.size()) +
                                " distinct drugs (need exactly 2)");
    if (c.drugs.size() < 2)
      throw ArityViolationError(where + ": combination has " +
                                std::to_string(c.drugs.size()) +
                                " distinct drugs (need >=2)");
    inst.gold.insert(std::move(c));
  }

  if (j.contains("entities")) {
    const auto& ents = j.at("entities");
    if (!ents.is_array()) throw ParseError(where + ": 'entities' is not an array");
    DrugSet hints;
    for (const auto& e : ents) {
      if (!e.is_string()) throw ParseError(where + ": entity name is not a string");
      const auto name = try_normalize_drug_name(e.get<std::string>(), policy);
      if (!name) throw EmptyNameError(where + ": entity name normalizes to empty");
      hints.insert(*name);
    }
    inst.entity_hints = std::move(hints);
  }
  return inst;
}

inline std::vector<Instance> load_canonical(const std::string& path,
                                            const NormalizationPolicy& policy = {}) {
  std::vector<Instance> out;
  std::set<std::string> seen_ids;
  detail::for_each_jsonl_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
    const std::string where = path + ":" + std::to_string(line_no);
    Instance inst = instance_from_json(j, where, policy);
    if (!seen_ids.insert(inst.id).second)
      throw DuplicateIdError(where + ": duplicate id '" + inst.id + "'");
    out.push_back(std::move(inst));
  });
  return out;
}

inline void export_canonical(const std::vector<Instance>& instances,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open file for writing: " + path);
  for (const auto& inst : instances) {
    out << instance_to_json(inst).dump() << '\n';
    if (!out) throw Error("write failed: " + path);
  }
}

// ---------------------------------------------------------------------------
// Corpus statistics

struct CorpusStats {
  TaskMode mode = TaskMode::DRUGCOMB;
  std::size_t instance_count = 0;
  std::size_t docs_no_relation = 0;
  std::size_t docs_one_relation = 0;
  std::size_t docs_multi_relation = 0;
  std::map<std::string, std::size_t> relation_counts;  // uncollapsed labels
  std::map<std::string, std::size_t> arity_counts;     // "2", "3", "4", "5+"
};

inline CorpusStats compute_stats(const std::vector<Instance>& instances, TaskMode mode) {
  CorpusStats s;
  s.mode = mode;
  s.instance_count = instances.size();
  if (mode == TaskMode::DRUGCOMB) {
    for (const char* l : {"POS", "NEG", "COMB"}) s.relation_counts[l] = 0;
    for (const char* a : {"2", "3", "4", "5+"}) s.arity_counts[a] = 0;
  } else {
    for (const char* l : {"ADVICE", "EFFECT", "INT", "MECHANISM"})
      s.relation_counts[l] = 0;
    s.arity_counts["2"] = 0;
  }

  for (const auto& inst : instances) {
    if (inst.gold.empty())
      ++s.docs_no_relation;
    else if (inst.gold.size() == 1)
      ++s.docs_one_relation;
    else
      ++s.docs_multi_relation;
    for (const auto& c : inst.gold) {
      ++s.relation_counts[label_name(c.label)];
      const std::size_t arity = c.drugs.size();
      ++s.arity_counts[arity >= 5 ? "5+" : std::to_string(arity)];
    }
  }
  return s;
}

inline nlohmann::json stats_json(const CorpusStats& s) {
  return nlohmann::json{
      {"mode", task_mode_name(s.mode)},
      {"instances", s.instance_count},
      {"documents",
       {{"no_relation", s.docs_no_relation},
        {"one_relation", s.docs_one_relation},
        {"multi_relation", s.docs_multi_relation}}},
      {"relations", s.relation_counts},
      {"arity", s.arity_counts}};
}

inline std::string stats_table(const CorpusStats& s) {
  std::ostringstream out;
  const auto row = [&](const std::string& name, std::size_t count, int indent = 2) {
    out << std::string(indent, ' ') << std::left << std::setw(28 - indent) << name
        << std::right << std::setw(8) << count << '\n';
  };
  out << std::left << std::setw(28) << "Statistic" << std::right << std::setw(8)
      << "Count" << '\n';
  out << std::string(36, '-') << '\n';

  if (s.mode == TaskMode::DRUGCOMB) {
    out << "Document-level\n";
    row("No relation", s.docs_no_relation);
    row("One relation", s.docs_one_relation);
    row("More than one relation", s.docs_multi_relation);
    out << "Relation-level\n";
    for (const char* l : {"POS", "NEG", "COMB"})
      if (s.relation_counts.count(l)) row(l, s.relation_counts.at(l));
    for (const auto& [label, count] : s.relation_counts)
      if (label != "POS" && label != "NEG" && label != "COMB") row(label, count);
    out << "Combination-level\n";
    if (s.arity_counts.count("2")) row("Binary", s.arity_counts.at("2"));
    if (s.arity_counts.count("3")) row("3-ary", s.arity_counts.at("3"));
    if (s.arity_counts.count("4")) row("4-ary", s.arity_counts.at("4"));
    if (s.arity_counts.count("5+")) row("5-ary or more", s.arity_counts.at("5+"));
    row("Documents", s.instance_count, 0);
  } else {
    row("Sentences", s.instance_count, 0);
    out << "Pairs by type\n";
    for (const auto& [label, count] : s.relation_counts) row(label, count);
    out << "Document-level\n";
    row("No pair", s.docs_no_relation);
    row("One pair", s.docs_one_relation);
    row("More than one pair", s.docs_multi_relation);
  }
  return out.str();
}

}  // namespace dce
