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

// Decomposes raw model output into a think block, a think-structure report,
// and an answer payload. Everything here is total: malformed input produces
// flags and diagnostics, never an exception.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dce/core.hpp"

namespace dce {

enum class AnswerFormat { STANDARD, EXTENDED };

// Structural audit of the think block: the four numbered sections, their
// order, and "- " bullet counts per section. word_count is reported but
// deliberately unscored.
struct ThinkStructureReport {
  std::array<bool, 4> sections_present{};
  bool sections_in_order = true;
  std::array<int, 4> bullets_per_section{};
  std::size_t word_count = 0;

  int present_count() const {
    int n = 0;
    for (bool b : sections_present) n += b ? 1 : 0;
    return n;
  }
  bool every_present_section_has_bullets() const {
    for (int i = 0; i < 4; ++i)
      if (sections_present[i] && bullets_per_section[i] == 0) return false;
    return true;
  }
};

struct AnswerPayload {
  std::optional<CombinationSet> combinations;
  std::optional<DrugSet> ner_entities;
  bool json_valid = false;
  std::vector<std::string> notes;
};

struct ParsedResponse {
  bool has_think = false;
  bool has_answer = false;
  std::optional<std::string> think_text;
  std::optional<ThinkStructureReport> think_report;
  std::optional<CombinationSet> combinations;  // only when has_answer && answer_json_valid
  std::optional<DrugSet> ner_entities;         // only when extended markers parsed
  bool answer_json_valid = false;
  std::vector<std::string> parse_notes;
};

namespace detail {

struct TagRegion {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// First open tag paired with the first close after it. Extra or nested
// blocks only produce diagnostics; the first pair always wins.
inline std::optional<TagRegion> find_tag_region(std::string_view text,
                                                std::string_view open,
                                                std::string_view close,
                                                std::vector<std::string>& notes) {
  const std::size_t o = text.find(open);
  if (o == std::string_view::npos) {
    if (text.find(close) != std::string_view::npos)
      notes.push_back(std::string(close) + " without matching " + std::string(open));
    return std::nullopt;
  }
  const std::size_t content_begin = o + open.size();
  const std::size_t c = text.find(close, content_begin);
  if (c == std::string_view::npos) {
    notes.push_back("unclosed " + std::string(open));
    return std::nullopt;
  }
  const std::size_t next_open = text.find(open, content_begin);
  if (next_open != std::string_view::npos && next_open < c)
    notes.push_back("nested " + std::string(open) + " inside the first block; using first pair");
  else if (text.find(open, c + close.size()) != std::string_view::npos)
    notes.push_back("multiple " + std::string(open) + " blocks; using first pair");
  return TagRegion{content_begin, c};
}

inline std::string_view ltrim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  return s;
}

// "[k]" at line start for k in 1..4, tolerating "[1]", "[1].", "[1]:" and
// trailing text. Returns 0 when the line is not a section header.
inline int section_header_of(std::string_view line) {
  const std::string_view t = ltrim_view(line);
  if (t.size() < 3 || t[0] != '[' || t[2] != ']') return 0;
  if (t[1] < '1' || t[1] > '4') return 0;
  return t[1] - '0';
}

// Case-insensitive lookup over tolerated key spellings, in synonym order.
inline const nlohmann::json* find_key(const nlohmann::json& obj,
                                      std::initializer_list<std::string_view> synonyms) {
  for (std::string_view want : synonyms) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (ascii_lower(it.key()) == want) return &it.value();
    }
  }
  return nullptr;
}

// One combination object, read tolerantly. Returns nullopt for dropped
// entries (a NO_COMB object counts as "nothing to add" and is not an error).
inline std::optional<Combination> read_combination_object(
    const nlohmann::json& obj, const NormalizationPolicy& policy,
    std::vector<std::string>& notes) {
  const nlohmann::json* label_val =
      find_key(obj, {"label", "relation", "class", "effect"});
  if (label_val == nullptr || !label_val->is_string()) {
    notes.push_back("dropped: missing or non-string label");
    return std::nullopt;
  }
  const auto label = label_from_string(label_val->get<std::string>());
  if (!label) {
    notes.push_back("dropped: unknown label '" + label_val->get<std::string>() + "'");
    return std::nullopt;
  }
  if (*label == EffectLabel::NO_COMB) {
    // NO_COMB maps to the empty set; any attached drugs are ignored.
    const nlohmann::json* d = find_key(obj, {"drugs", "combination", "entities"});
    if (d != nullptr && d->is_array() && !d->empty())
      notes.push_back("NO_COMB object with a drug list; drugs ignored");
    return std::nullopt;
  }

  const nlohmann::json* drugs_val = find_key(obj, {"drugs", "combination", "entities"});
  if (drugs_val == nullptr || !drugs_val->is_array()) {
    notes.push_back("dropped: missing or non-array drug list");
    return std::nullopt;
  }
  Combination c;
  c.label = *label;
  for (const auto& item : *drugs_val) {
    if (!item.is_string()) {
      notes.push_back("skipped non-string drug entry");
      continue;
    }
    if (auto name = try_normalize_drug_name(item.get<std::string>(), policy)) {
      c.drugs.insert(*name);
    } else {
      notes.push_back("skipped drug name that normalizes to empty");
    }
  }
  if (c.drugs.size() < 2) {
    notes.push_back("dropped: arity<2 after normalization");
    return std::nullopt;
  }
  return c;
}

// A JSON array of combination objects (or the tolerated bare NO_COMB
// object). Returns nullopt when the region is structurally invalid.
inline std::optional<CombinationSet> read_combination_region(
    std::string_view text, const NormalizationPolicy& policy,
    std::vector<std::string>& notes) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    notes.push_back("relation payload is not valid JSON");
    return std::nullopt;
  }
  CombinationSet out;
  if (j.is_object()) {
    const nlohmann::json* label_val =
        find_key(j, {"label", "relation", "class", "effect"});
    if (label_val != nullptr && label_val->is_string() &&
        label_from_string(label_val->get<std::string>()) == EffectLabel::NO_COMB) {
      return out;  // bare NO_COMB object == empty set
    }
    notes.push_back("relation payload must be a JSON array");
    return std::nullopt;
  }
  if (!j.is_array()) {
    notes.push_back("relation payload must be a JSON array");
    return std::nullopt;
  }
  for (const auto& el : j) {
    if (!el.is_object()) {
      notes.push_back("skipped non-object array element");
      continue;
    }
    if (auto c = read_combination_object(el, policy, notes)) out.insert(std::move(*c));
  }
  return out;
}

inline std::optional<DrugSet> read_entity_region(std::string_view text,
                                                 const NormalizationPolicy& policy,
                                                 std::vector<std::string>& notes) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    notes.push_back("entity payload is not a JSON array");
    return std::nullopt;
  }
  DrugSet out;
  for (const auto& el : j) {
    if (!el.is_string()) {
      notes.push_back("skipped non-string entity entry");
      continue;
    }
    if (auto name = try_normalize_drug_name(el.get<std::string>(), policy))
      out.insert(*name);
    else
      notes.push_back("skipped entity name that normalizes to empty");
  }
  return out;
}

inline std::optional<std::string_view> marker_region(std::string_view text,
                                                     std::string_view open,
                                                     std::string_view close) {
  const std::size_t o = text.find(open);
  if (o == std::string_view::npos) return std::nullopt;
  const std::size_t b = o + open.size();
  const std::size_t c = text.find(close, b);
  if (c == std::string_view::npos) return std::nullopt;
  return text.substr(b, c - b);
}

}  // namespace detail

inline ThinkStructureReport analyze_think(std::string_view think_text) {
  ThinkStructureReport rep;

  // Whitespace-token word count over the whole block.
  bool in_token = false;
  for (char ch : think_text) {
    if (detail::is_space(ch)) {
      in_token = false;
    } else if (!in_token) {
      ++rep.word_count;
      in_token = true;
    }
  }

  std::array<int, 4> first_line{-1, -1, -1, -1};
  int current = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= think_text.size()) {
    const std::size_t nl = think_text.find('\n', pos);
    const std::string_view line = think_text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (const int k = detail::section_header_of(line); k != 0) {
      if (!rep.sections_present[k - 1]) first_line[k - 1] = line_no;
      rep.sections_present[k - 1] = true;
      current = k;
    } else if (detail::ltrim_view(line).substr(0, 2) == "- " && current != 0) {
      ++rep.bullets_per_section[current - 1];
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
    ++line_no;
  }

  // In order iff first occurrences of present headers ascend in k.
  int last_seen = -1;
  std::vector<std::pair<int, int>> by_pos;  // (first line, k)
  for (int k = 0; k < 4; ++k)
    if (rep.sections_present[k]) by_pos.emplace_back(first_line[k], k);
  std::sort(by_pos.begin(), by_pos.end());
  for (const auto& [line, k] : by_pos) {
    if (k < last_seen) {
      rep.sections_in_order = false;
      break;
    }
    last_seen = k;
  }
  return rep;
}

inline AnswerPayload parse_answer_payload(std::string_view answer_text,
                                          const NormalizationPolicy& policy = {},
                                          AnswerFormat format = AnswerFormat::STANDARD) {
  AnswerPayload p;
  if (format == AnswerFormat::STANDARD) {
    p.combinations = detail::read_combination_region(answer_text, policy, p.notes);
    p.json_valid = p.combinations.has_value();
    return p;
  }

  // Extended format: both marker regions must be present and valid.
  const auto ner_region = detail::marker_region(answer_text, "@ner#", "#ner@");
  const auto re_region = detail::marker_region(answer_text, "@re#", "#re@");
  if (ner_region)
    p.ner_entities = detail::read_entity_region(*ner_region, policy, p.notes);
  else
    p.notes.push_back("missing @ner# ... #ner@ region");
  if (re_region)
    p.combinations = detail::read_combination_region(*re_region, policy, p.notes);
  else
    p.notes.push_back("missing @re# ... #re@ region");
  p.json_valid = p.ner_entities.has_value() && p.combinations.has_value();
  return p;
}

// Total decomposition of a raw model response. Tag detection requires a
// matched open/close pair; answer content comes from the first matched pair.
inline ParsedResponse parse_response(std::string_view raw,
                                     const NormalizationPolicy& policy = {},
                                     AnswerFormat format = AnswerFormat::STANDARD) {
  ParsedResponse r;

  const auto think =
      detail::find_tag_region(raw, "<think>", "</think>", r.parse_notes);
  if (think) {
    r.has_think = true;
    r.think_text = std::string(raw.substr(think->begin, think->end - think->begin));
    r.think_report = analyze_think(*r.think_text);
  } else {
    r.parse_notes.push_back("no <think> block");
  }

  const auto answer =
      detail::find_tag_region(raw, "<answer>", "</answer>", r.parse_notes);
  if (answer) {
    r.has_answer = true;
    AnswerPayload p = parse_answer_payload(
        raw.substr(answer->begin, answer->end - answer->begin), policy, format);
    r.answer_json_valid = p.json_valid;
    r.ner_entities = std::move(p.ner_entities);
    if (p.json_valid) r.combinations = std::move(p.combinations);
    for (auto& n : p.notes) r.parse_notes.push_back(std::move(n));
  } else {
    r.parse_notes.push_back("no <answer> block");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Canonical serialization (the inverse of the tolerant readers above)

inline nlohmann::json combination_to_json(const Combination& c) {
  nlohmann::json o;
  o["drugs"] = nlohmann::json::array();
  for (const auto& d : c.drugs) o["drugs"].push_back(d);
  o["label"] = label_name(c.label);
  return o;
}

inline nlohmann::json combinations_to_json(const CombinationSet& combos) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : combos) arr.push_back(combination_to_json(c));
  return arr;
}

inline std::string to_answer_json(const CombinationSet& combos) {
  return combinations_to_json(combos).dump();
}

inline std::string to_extended_answer(const DrugSet& entities,
                                      const CombinationSet& combos) {
  nlohmann::json ents = nlohmann::json::array();
  for (const auto& e : entities) ents.push_back(e);
  return "@ner# " + ents.dump() + " #ner@\n@re# " + to_answer_json(combos) + " #re@";
}

inline void to_json(nlohmann::json& j, const ThinkStructureReport& r) {
  j = nlohmann::json{{"sections_present", r.sections_present},
                     {"sections_in_order", r.sections_in_order},
                     {"bullets_per_section", r.bullets_per_section},
                     {"word_count", r.word_count}};
}

inline void to_json(nlohmann::json& j, const ParsedResponse& r) {
  j = nlohmann::json{{"has_think", r.has_think},
                     {"has_answer", r.has_answer},
                     {"answer_json_valid", r.answer_json_valid},
                     {"parse_notes", r.parse_notes}};
  if (r.think_report) j["think_report"] = *r.think_report;
  if (r.combinations) j["combinations"] = combinations_to_json(*r.combinations);
  if (r.ner_entities) j["ner_entities"] = *r.ner_entities;
}

}  // namespace dce
