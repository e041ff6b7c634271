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

// Domain model shared by every dcekit module: effect labels, normalized drug
// names, combinations, scoring instances, and the error hierarchy. All types
// are immutable values; nothing here owns external state.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dce {

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyNameError : Error { using Error::Error; };
struct InvalidLabelError : Error { using Error::Error; };
struct ArityViolationError : Error { using Error::Error; };
struct EmptyCorpusError : Error { using Error::Error; };
struct EmptyGroupError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct DuplicateIdError : Error { using Error::Error; };
struct IdMismatchError : Error { using Error::Error; };
struct BackendError : Error { using Error::Error; };
struct ReviewParseError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Labels

// POS/NEG/COMB/OTHER/NO_COMB belong to the n-ary combination task;
// MECHANISM/EFFECT/ADVICE/INT are the binary interaction types. NO_COMB is
// shared by both modes but is only ever a *convention* for the empty set --
// it never labels a combination with drugs in it.
enum class EffectLabel {
  POS,
  NEG,
  COMB,
  OTHER,
  NO_COMB,
  MECHANISM,
  EFFECT,
  ADVICE,
  INT,
};

enum class TaskMode { DRUGCOMB, DDI13 };

inline constexpr const char* label_name(EffectLabel l) {
  switch (l) {
    case EffectLabel::POS: return "POS";
    case EffectLabel::NEG: return "NEG";
    case EffectLabel::COMB: return "COMB";
    case EffectLabel::OTHER: return "OTHER";
    case EffectLabel::NO_COMB: return "NO_COMB";
    case EffectLabel::MECHANISM: return "MECHANISM";
    case EffectLabel::EFFECT: return "EFFECT";
    case EffectLabel::ADVICE: return "ADVICE";
    case EffectLabel::INT: return "INT";
  }
  return "?";
}

inline constexpr bool is_nary_label(EffectLabel l) {
  switch (l) {
    case EffectLabel::POS:
    case EffectLabel::NEG:
    case EffectLabel::COMB:
    case EffectLabel::OTHER:
    case EffectLabel::NO_COMB:
      return true;
    default:
      return false;
  }
}

inline constexpr bool is_ddi_label(EffectLabel l) {
  switch (l) {
    case EffectLabel::MECHANISM:
    case EffectLabel::EFFECT:
    case EffectLabel::ADVICE:
    case EffectLabel::INT:
      return true;
    default:
      return false;
  }
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

// Case-insensitive label lookup; nullopt for unknown names.
inline std::optional<EffectLabel> label_from_string(std::string_view name) {
  static constexpr std::array<EffectLabel, 9> kAll = {
      EffectLabel::POS,       EffectLabel::NEG,    EffectLabel::COMB,
      EffectLabel::OTHER,     EffectLabel::NO_COMB, EffectLabel::MECHANISM,
      EffectLabel::EFFECT,    EffectLabel::ADVICE, EffectLabel::INT,
  };
  const std::string lower = ascii_lower(name);
  for (EffectLabel l : kAll) {
    if (lower == ascii_lower(label_name(l))) return l;
  }
  return std::nullopt;
}

// Evaluation view of the n-ary labels: NEG and COMB merge into OTHER.
// DDI labels are not collapsible and raise InvalidLabelError.
inline EffectLabel collapse_label(EffectLabel l) {
  switch (l) {
    case EffectLabel::POS: return EffectLabel::POS;
    case EffectLabel::NEG: return EffectLabel::OTHER;
    case EffectLabel::COMB: return EffectLabel::OTHER;
    case EffectLabel::OTHER: return EffectLabel::OTHER;
    case EffectLabel::NO_COMB: return EffectLabel::NO_COMB;
    default:
      throw InvalidLabelError(std::string("collapse_label: not an n-ary label: ") +
                              label_name(l));
  }
}

// Total variant used inside matching: DDI labels pass through unchanged so
// pair scoring never throws.
inline constexpr EffectLabel collapse_for_matching(EffectLabel l) {
  switch (l) {
    case EffectLabel::NEG:
    case EffectLabel::COMB:
      return EffectLabel::OTHER;
    default:
      return l;
  }
}

// ---------------------------------------------------------------------------
// Drug-name normalization

// Entity identity is by normalized surface string. The default policy folds
// ASCII case, trims, collapses internal whitespace runs, and strips
// leading/trailing punctuation from the set {.,;:!?()[]"'}. Non-ASCII bytes
// pass through untouched.
struct NormalizationPolicy {
  bool case_fold = true;
  bool trim_whitespace = true;
  bool collapse_internal_whitespace = true;
  bool strip_surrounding_punctuation = true;
};

namespace detail {

inline constexpr std::string_view kStrippablePunct = ".,;:!?()[]\"'";

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string_view strip_punct_view(std::string_view s) {
  while (!s.empty() && kStrippablePunct.find(s.front()) != std::string_view::npos)
    s.remove_prefix(1);
  while (!s.empty() && kStrippablePunct.find(s.back()) != std::string_view::npos)
    s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Total form: returns nullopt instead of throwing when the name vanishes.
// Steps: case fold, then trim/strip-punctuation to a fixed point, then
// collapse internal whitespace; the fixed-point loop is what makes the
// whole pipeline idempotent.
inline std::optional<std::string> try_normalize_drug_name(
    std::string_view raw, const NormalizationPolicy& policy = {}) {
  std::string s = policy.case_fold ? ascii_lower(raw) : std::string(raw);

  std::string_view v = s;
  for (;;) {
    const std::string_view before = v;
    if (policy.trim_whitespace) v = detail::trim_view(v);
    if (policy.strip_surrounding_punctuation) v = detail::strip_punct_view(v);
    if (v == before) break;
  }
  std::string out(v);

  if (policy.collapse_internal_whitespace) {
    std::string collapsed;
    collapsed.reserve(out.size());
    bool in_run = false;
    for (char c : out) {
      if (detail::is_space(c)) {
        if (!in_run) collapsed.push_back(' ');
        in_run = true;
      } else {
        collapsed.push_back(c);
        in_run = false;
      }
    }
    out = std::move(collapsed);
  }

  if (out.empty()) return std::nullopt;
  return out;
}

inline std::string normalize_drug_name(std::string_view raw,
                                       const NormalizationPolicy& policy = {}) {
  if (detail::trim_view(raw).empty())
    throw EmptyNameError("normalize_drug_name: empty input");
  auto out = try_normalize_drug_name(raw, policy);
  if (!out)
    throw EmptyNameError("normalize_drug_name: name '" + std::string(raw) +
                         "' normalizes to the empty string");
  return *out;
}

// ---------------------------------------------------------------------------
// Combinations and instances

using DrugSet = std::set<std::string>;

// A set of >=2 normalized drug names plus an effect label. Order-independent
// equality falls out of the std::set representation.
struct Combination {
  DrugSet drugs;
  EffectLabel label = EffectLabel::OTHER;

  auto operator<=>(const Combination&) const = default;
};

using CombinationSet = std::set<Combination>;

inline Combination make_combination(const std::vector<std::string>& raw_drugs,
                                    EffectLabel label,
                                    const NormalizationPolicy& policy = {}) {
  Combination c;
  c.label = label;
  for (const auto& d : raw_drugs) c.drugs.insert(normalize_drug_name(d, policy));
  if (c.drugs.size() < 2)
    throw ArityViolationError("combination needs >=2 distinct drugs, got " +
                              std::to_string(c.drugs.size()));
  if (label == EffectLabel::NO_COMB)
    throw InvalidLabelError("NO_COMB cannot label a combination; use the empty set");
  return c;
}

// One scoring unit. An empty gold set encodes NO_COMB.
struct Instance {
  std::string id;
  std::string sentence;
  std::optional<std::string> context;
  CombinationSet gold;
  std::optional<DrugSet> entity_hints;  // classification mode with given entities
  TaskMode task_mode = TaskMode::DRUGCOMB;
};

inline const char* task_mode_name(TaskMode m) {
  return m == TaskMode::DRUGCOMB ? "DRUGCOMB" : "DDI13";
}

inline std::optional<TaskMode> task_mode_from_string(std::string_view s) {
  const std::string lower = ascii_lower(s);
  if (lower == "drugcomb") return TaskMode::DRUGCOMB;
  if (lower == "ddi13") return TaskMode::DDI13;
  return std::nullopt;
}

}  // namespace dce
