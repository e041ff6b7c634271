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

// Multi-dimensional rollout rewards and group-relative advantage
// normalization. Three signals compose the total: structural format,
// combination coverage (with the empty-prediction penalty), and the
// Exact/Partial-F1 metric blend. An optional fourth term rewards entity
// recognition in the extended joint format.

#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dce/core.hpp"
#include "dce/metrics.hpp"
#include "dce/response_parser.hpp"

namespace dce {

struct RewardWeights {
  double alpha_format = 0.2;
  double alpha_cover = 0.1;
  double alpha_metric = 0.7;
  double metric_exact_weight = 2.0 / 3.0;
  double metric_partial_weight = 1.0 / 3.0;
  // Entity-recognition term for the extended joint task. 0 disables it; when
  // enabled the three alphas are renormalized by (1 - alpha_ner) so the total
  // still spans the same range.
  double alpha_ner = 0.0;

  void validate() const {
    const auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0))
        throw Error(std::string("RewardWeights: ") + name + " must be >= 0");
    };
    nonneg(alpha_format, "alpha_format");
    nonneg(alpha_cover, "alpha_cover");
    nonneg(alpha_metric, "alpha_metric");
    nonneg(metric_exact_weight, "metric_exact_weight");
    nonneg(metric_partial_weight, "metric_partial_weight");
    nonneg(alpha_ner, "alpha_ner");
    if (std::abs(alpha_format + alpha_cover + alpha_metric - 1.0) > 1e-9)
      throw Error("RewardWeights: alpha_format+alpha_cover+alpha_metric must sum to 1");
    if (std::abs(metric_exact_weight + metric_partial_weight - 1.0) > 1e-9)
      throw Error("RewardWeights: metric weights must sum to 1");
    if (alpha_ner > 1.0)
      throw Error("RewardWeights: alpha_ner must be <= 1");
  }
};

struct FormatScore {
  double r_format = 0.0;
  double s_t = 0.0;
  double s_a = 0.0;
  bool i_tag = false;
};

// Gate on complete <think> and <answer> tags; without them everything is 0.
// With them, the base is 0.5 and two sub-scores of up to 0.25 each reward
// the four-section reasoning structure and a machine-readable answer, so
// r_format covers exactly {0} ∪ [0.5, 1.0].
inline FormatScore format_reward(const ParsedResponse& parsed) {
  FormatScore fs;
  fs.i_tag = parsed.has_think && parsed.has_answer;
  if (!fs.i_tag) return fs;

  const ThinkStructureReport& rep = *parsed.think_report;
  double s_t = 0.25 * (rep.present_count() / 4.0);
  if (!rep.sections_in_order) s_t *= 0.5;
  if (!rep.every_present_section_has_bullets()) s_t *= 0.5;
  fs.s_t = s_t;
  fs.s_a = parsed.answer_json_valid ? 0.25 : 0.0;
  fs.r_format = 0.5 + fs.s_t + fs.s_a;
  return fs;
}

// Conventions for the cases the coverage formula leaves undefined.
struct CoverageConvention {
  double empty_empty = 1.0;             // preds=∅ ∧ golds=∅
  double nonempty_vs_empty_gold = 0.0;  // preds≠∅ ∧ golds=∅
};

// Average over predictions of the best fractional coverage of any gold drug
// set, minus 1 when the model wrongly predicts empty. Labels are ignored;
// coverage is purely over entity sets.
inline double coverage_reward(const CombinationSet& preds, const CombinationSet& golds,
                              const CoverageConvention& convention = {}) {
  if (preds.empty()) return golds.empty() ? convention.empty_empty : -1.0;
  if (golds.empty()) return convention.nonempty_vs_empty_gold;

  double sum = 0.0;
  for (const auto& p : preds) {
    double best = 0.0;
    for (const auto& g : golds) {
      const double cov = static_cast<double>(detail::intersection_size(p.drugs, g.drugs)) /
                         static_cast<double>(g.drugs.size());
      best = std::max(best, cov);
    }
    sum += best;
  }
  return sum / static_cast<double>(preds.size());
}

// Per-sample metric blend. n-ary mode: 2/3·F1_exact + 1/3·F1_partial over the
// ANY scope with collapsed labels required to match. Binary mode: typed-pair
// micro F1, computed totally — a predicted combination that is not a binary
// pair can never equal a gold pair and simply counts as a false positive,
// unlike the strict corpus-level ddi_micro_f1.
inline double metric_reward(const CombinationSet& preds, const CombinationSet& golds,
                            const RewardWeights& weights = {},
                            TaskMode mode = TaskMode::DRUGCOMB) {
  if (mode == TaskMode::DDI13) {
    if (preds.empty() && golds.empty()) return 1.0;
    double tp = 0.0;
    for (const auto& p : preds) tp += golds.count(p) ? 1.0 : 0.0;
    const double precision =
        preds.empty() ? 0.0 : tp / static_cast<double>(preds.size());
    const double recall = golds.empty() ? 0.0 : tp / static_cast<double>(golds.size());
    return precision + recall > 0.0
               ? 2.0 * precision * recall / (precision + recall)
               : 0.0;
  }

  MatchConfig cfg;
  cfg.scope = MatchScope::ANY;
  cfg.label_sensitive = true;
  cfg.match_kind = MatchKind::EXACT;
  const double f1_exact = instance_prf(preds, golds, cfg).f1;
  cfg.match_kind = MatchKind::PARTIAL;
  const double f1_partial = instance_prf(preds, golds, cfg).f1;
  return weights.metric_exact_weight * f1_exact +
         weights.metric_partial_weight * f1_partial;
}

struct RewardBreakdown {
  double r_format = 0.0;
  double r_cover = 0.0;
  double r_metric = 0.0;
  double r_ner = 0.0;
  double r_total = 0.0;
  double s_t = 0.0;
  double s_a = 0.0;
  bool i_tag = false;
  std::vector<std::string> diagnostics;
};

// Weighted composition of the sub-rewards. A response without a valid answer
// payload scores as the empty prediction set. gold_entities feeds the
// optional NER term; when absent, the union of gold combination drugs stands
// in.
inline RewardBreakdown combined_reward(
    const ParsedResponse& parsed, const CombinationSet& golds,
    const RewardWeights& weights = {}, TaskMode mode = TaskMode::DRUGCOMB,
    const std::optional<DrugSet>& gold_entities = std::nullopt,
    const CoverageConvention& convention = {}) {
  RewardBreakdown b;
  const FormatScore fs = format_reward(parsed);
  b.r_format = fs.r_format;
  b.s_t = fs.s_t;
  b.s_a = fs.s_a;
  b.i_tag = fs.i_tag;

  static const CombinationSet kEmpty;
  const CombinationSet& preds = parsed.combinations ? *parsed.combinations : kEmpty;
  b.r_cover = coverage_reward(preds, golds, convention);
  b.r_metric = metric_reward(preds, golds, weights, mode);

  double total = weights.alpha_format * b.r_format +
                 weights.alpha_cover * b.r_cover +
                 weights.alpha_metric * b.r_metric;
  if (weights.alpha_ner > 0.0) {
    DrugSet gold_ents;
    if (gold_entities) {
      gold_ents = *gold_entities;
    } else {
      for (const auto& g : golds) gold_ents.insert(g.drugs.begin(), g.drugs.end());
    }
    static const DrugSet kNoEntities;
    const DrugSet& pred_ents = parsed.ner_entities ? *parsed.ner_entities : kNoEntities;
    b.r_ner = ner_f1(pred_ents, gold_ents).f1;
    total = (1.0 - weights.alpha_ner) * total + weights.alpha_ner * b.r_ner;
  }
  b.r_total = total;

  std::ostringstream sub;
  sub << "r_format=" << b.r_format << " (s_t=" << b.s_t << ", s_a=" << b.s_a
      << ", i_tag=" << (b.i_tag ? "true" : "false") << ") r_cover=" << b.r_cover
      << " r_metric=" << b.r_metric;
  if (weights.alpha_ner > 0.0) sub << " r_ner=" << b.r_ner;
  b.diagnostics.push_back(sub.str());
  for (const auto& n : parsed.parse_notes) b.diagnostics.push_back(n);
  return b;
}

// Group-relative standardization with the population standard deviation.
// Degenerate groups (std below epsilon_std) map to all zeros.
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            double epsilon_std = 1e-8) {
  if (rewards.empty()) throw EmptyGroupError("group_advantages: empty group");

  const double k = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= k;

  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= k;
  const double std_dev = std::sqrt(var);

  std::vector<double> out(rewards.size(), 0.0);
  if (std_dev < epsilon_std || std_dev == 0.0) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i)
    out[i] = (rewards[i] - mean) / std_dev;
  return out;
}

inline void to_json(nlohmann::json& j, const RewardBreakdown& b) {
  j = nlohmann::json{{"r_format", b.r_format}, {"r_cover", b.r_cover},
                     {"r_metric", b.r_metric}, {"r_ner", b.r_ner},
                     {"r_total", b.r_total},   {"s_t", b.s_t},
                     {"s_a", b.s_a},           {"i_tag", b.i_tag},
                     {"diagnostics", b.diagnostics}};
}

inline void to_json(nlohmann::json& j, const RewardWeights& w) {
  j = nlohmann::json{{"alpha_format", w.alpha_format},
                     {"alpha_cover", w.alpha_cover},
                     {"alpha_metric", w.alpha_metric},
                     {"metric_exact_weight", w.metric_exact_weight},
                     {"metric_partial_weight", w.metric_partial_weight},
                     {"alpha_ner", w.alpha_ner}};
}

inline void from_json(const nlohmann::json& j, RewardWeights& w) {
  if (j.contains("alpha_format")) j.at("alpha_format").get_to(w.alpha_format);
  if (j.contains("alpha_cover")) j.at("alpha_cover").get_to(w.alpha_cover);
  if (j.contains("alpha_metric")) j.at("alpha_metric").get_to(w.alpha_metric);
  if (j.contains("metric_exact_weight"))
    j.at("metric_exact_weight").get_to(w.metric_exact_weight);
  if (j.contains("metric_partial_weight"))
    j.at("metric_partial_weight").get_to(w.metric_partial_weight);
  if (j.contains("alpha_ner")) j.at("alpha_ner").get_to(w.alpha_ner);
}

}  // namespace dce
