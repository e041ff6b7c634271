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

// Exact and Partial matching between predicted and gold combination sets,
// corpus-level Positive/Any F1, typed-pair micro F1 for the binary task, and
// set-based NER F1.
//
// Matching is max-based: each prediction is credited with its best gold and
// each gold with its best prediction, with no one-to-one assignment. Because
// those two credit sums differ under PARTIAL scoring, PRF keeps them apart
// (tp_mass_pred feeds precision, tp_mass_gold feeds recall); the two masses
// coincide under EXACT.
//
// Empty-set conventions: preds=∅ ∧ golds=∅ scores P=R=F1=1 at instance level
// and contributes nothing to corpus sums (a correct NO_COMB call is not
// penalized and not rewarded twice); a one-sided empty set scores 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dce/core.hpp"

namespace dce {

enum class MatchScope { POS_ONLY, ANY };
enum class MatchKind { EXACT, PARTIAL };

struct MatchConfig {
  MatchScope scope = MatchScope::ANY;
  MatchKind match_kind = MatchKind::EXACT;
  int partial_min_shared = 2;
  bool label_sensitive = false;
};

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double tp_mass_pred = 0.0;
  double tp_mass_gold = 0.0;
  double pred_count = 0.0;
  double gold_count = 0.0;
};

namespace detail {

inline std::size_t intersection_size(const DrugSet& a, const DrugSet& b) {
  const DrugSet& small = a.size() <= b.size() ? a : b;
  const DrugSet& large = a.size() <= b.size() ? b : a;
  std::size_t n = 0;
  for (const auto& x : small) n += large.count(x);
  return n;
}

inline PRF finish_prf(double pmass, double rmass, double preds, double golds) {
  PRF out;
  out.tp_mass_pred = pmass;
  out.tp_mass_gold = rmass;
  out.pred_count = preds;
  out.gold_count = golds;
  out.precision = preds > 0 ? pmass / preds : 0.0;
  out.recall = golds > 0 ? rmass / golds : 0.0;
  out.f1 = (out.precision + out.recall > 0)
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

inline constexpr PRF perfect_empty_prf() { return PRF{1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0}; }

}  // namespace detail

// Soft score of one prediction against one gold. EXACT: 1 iff the drug sets
// are identical and the label condition holds. PARTIAL: Jaccard overlap
// gated on >= partial_min_shared shared drugs and the label condition.
// With label_sensitive, labels compare after the NEG/COMB -> OTHER collapse.
inline double pair_score(const Combination& p, const Combination& g,
                         const MatchConfig& cfg) {
  if (cfg.scope == MatchScope::POS_ONLY &&
      (p.label != EffectLabel::POS || g.label != EffectLabel::POS))
    return 0.0;
  if (cfg.label_sensitive &&
      collapse_for_matching(p.label) != collapse_for_matching(g.label))
    return 0.0;

  if (cfg.match_kind == MatchKind::EXACT) return p.drugs == g.drugs ? 1.0 : 0.0;

  const std::size_t inter = detail::intersection_size(p.drugs, g.drugs);
  if (inter < static_cast<std::size_t>(cfg.partial_min_shared)) return 0.0;
  const std::size_t uni = p.drugs.size() + g.drugs.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// POS_ONLY restricts the metric to POS-labeled combinations on both sides:
// non-POS tuples neither score nor count in the denominators, so correct
// OTHER predictions cannot deflate Positive F1.
inline PRF instance_prf(const CombinationSet& preds, const CombinationSet& golds,
                        const MatchConfig& cfg) {
  const auto pos_only = [](const CombinationSet& s) {
    CombinationSet out;
    for (const auto& c : s)
      if (c.label == EffectLabel::POS) out.insert(c);
    return out;
  };
  CombinationSet p_filtered, g_filtered;
  const CombinationSet* p_view = &preds;
  const CombinationSet* g_view = &golds;
  if (cfg.scope == MatchScope::POS_ONLY) {
    p_filtered = pos_only(preds);
    g_filtered = pos_only(golds);
    p_view = &p_filtered;
    g_view = &g_filtered;
  }

  if (p_view->empty() && g_view->empty()) return detail::perfect_empty_prf();

  double pmass = 0.0;
  for (const auto& p : *p_view) {
    double best = 0.0;
    for (const auto& g : *g_view) best = std::max(best, pair_score(p, g, cfg));
    pmass += best;
  }
  double rmass = 0.0;
  for (const auto& g : *g_view) {
    double best = 0.0;
    for (const auto& p : *p_view) best = std::max(best, pair_score(p, g, cfg));
    rmass += best;
  }
  return detail::finish_prf(pmass, rmass, static_cast<double>(p_view->size()),
                            static_cast<double>(g_view->size()));
}

using ScoredPair = std::pair<CombinationSet, CombinationSet>;  // (preds, golds)

// Micro aggregation: masses and counts sum across instances, skipping
// empty-empty instances entirely, then P/R/F1 are computed once.
inline PRF corpus_f1(const std::vector<ScoredPair>& instances, const MatchConfig& cfg) {
  if (instances.empty()) throw EmptyCorpusError("corpus_f1: zero instances");

  double pmass = 0.0, rmass = 0.0, preds = 0.0, golds = 0.0;
  for (const auto& [p, g] : instances) {
    if (p.empty() && g.empty()) continue;
    const PRF one = instance_prf(p, g, cfg);
    pmass += one.tp_mass_pred;
    rmass += one.tp_mass_gold;
    preds += one.pred_count;
    golds += one.gold_count;
  }
  // Nothing in scope anywhere (all instances empty-empty, or no POS content
  // under POS_ONLY) is a vacuously perfect corpus.
  if (preds == 0.0 && golds == 0.0) return detail::perfect_empty_prf();
  return detail::finish_prf(pmass, rmass, preds, golds);
}

// Binary-task micro F1: a predicted pair is a true positive iff its unordered
// normalized drug pair and its type both equal a gold pair. Set semantics
// make gold consumption one-to-one by construction.
inline PRF ddi_micro_f1(const std::vector<ScoredPair>& instances) {
  double tp = 0.0, preds = 0.0, golds = 0.0;
  for (const auto& [p, g] : instances) {
    for (const auto& c : p)
      if (c.drugs.size() != 2)
        throw ArityViolationError("ddi_micro_f1: prediction with arity " +
                                  std::to_string(c.drugs.size()));
    for (const auto& c : g)
      if (c.drugs.size() != 2)
        throw ArityViolationError("ddi_micro_f1: gold pair with arity " +
                                  std::to_string(c.drugs.size()));
    for (const auto& c : p) tp += g.count(c) ? 1.0 : 0.0;
    preds += static_cast<double>(p.size());
    golds += static_cast<double>(g.size());
  }
  if (preds == 0.0 && golds == 0.0) return detail::perfect_empty_prf();
  return detail::finish_prf(tp, tp, preds, golds);
}

inline PRF ner_f1(const DrugSet& pred_entities, const DrugSet& gold_entities) {
  if (pred_entities.empty() && gold_entities.empty())
    return detail::perfect_empty_prf();
  const double inter =
      static_cast<double>(detail::intersection_size(pred_entities, gold_entities));
  return detail::finish_prf(inter, inter, static_cast<double>(pred_entities.size()),
                            static_cast<double>(gold_entities.size()));
}

inline void to_json(nlohmann::json& j, const PRF& p) {
  j = nlohmann::json{{"precision", p.precision},
                     {"recall", p.recall},
                     {"f1", p.f1},
                     {"tp_mass_pred", p.tp_mass_pred},
                     {"tp_mass_gold", p.tp_mass_gold},
                     {"pred_count", p.pred_count},
                     {"gold_count", p.gold_count}};
}

inline void to_json(nlohmann::json& j, const MatchConfig& c) {
  j = nlohmann::json{
      {"scope", c.scope == MatchScope::POS_ONLY ? "POS_ONLY" : "ANY"},
      {"match_kind", c.match_kind == MatchKind::EXACT ? "EXACT" : "PARTIAL"},
      {"partial_min_shared", c.partial_min_shared},
      {"label_sensitive", c.label_sensitive}};
}

}  // namespace dce
