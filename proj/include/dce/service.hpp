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

// Stateless HTTP scoring service and the request handlers behind it. Every
// handler is a pure function from a JSON body to a JSON reply, so trainers
// can embed them directly and the server layer stays a thin adapter. Schema
// violations surface as 400s with machine-readable codes; malformed response
// text is a legitimate zero-reward input, never a server error.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dce/core.hpp"
#include "dce/dataset.hpp"
#include "dce/metrics.hpp"
#include "dce/response_parser.hpp"
#include "dce/rewards.hpp"

namespace dce {

inline constexpr const char* kVersion = "0.1.0";

struct ServiceConfig {
  RewardWeights weights;
  double epsilon_std = 1e-8;
  NormalizationPolicy policy;
};

// Carries an HTTP status and a stable machine-readable code.
struct RequestError : Error {
  int status;
  std::string code;
  RequestError(int status_, std::string code_, const std::string& message)
      : Error(message), status(status_), code(std::move(code_)) {}
};

namespace detail {

inline std::string error_code_for(const Error& e) {
  if (dynamic_cast<const ArityViolationError*>(&e)) return "ArityViolation";
  if (dynamic_cast<const InvalidLabelError*>(&e)) return "InvalidLabel";
  if (dynamic_cast<const EmptyNameError*>(&e)) return "EmptyName";
  if (dynamic_cast<const EmptyGroupError*>(&e)) return "EmptyGroup";
  if (dynamic_cast<const EmptyCorpusError*>(&e)) return "EmptyCorpus";
  if (dynamic_cast<const IdMismatchError*>(&e)) return "IdMismatch";
  if (dynamic_cast<const DuplicateIdError*>(&e)) return "DuplicateId";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  return "InvalidRequest";
}

inline TaskMode mode_from_body(const nlohmann::json& body) {
  if (!body.contains("mode")) return TaskMode::DRUGCOMB;
  if (!body.at("mode").is_string())
    throw RequestError(400, "InvalidRequest", "'mode' must be a string");
  const auto mode = task_mode_from_string(body.at("mode").get<std::string>());
  if (!mode)
    throw RequestError(400, "InvalidRequest",
                       "unknown mode '" + body.at("mode").get<std::string>() + "'");
  return *mode;
}

// Strict gold-record parsing for score requests. Gold records must obey the
// mode's label set and arity rules; NO_COMB is the empty list, never a record.
inline CombinationSet parse_gold_records(const nlohmann::json& gold, TaskMode mode,
                                         const NormalizationPolicy& policy) {
  if (!gold.is_array())
    throw RequestError(400, "InvalidRequest", "'gold' must be an array");
  CombinationSet out;
  for (const auto& rec : gold) {
    if (!rec.is_object())
      throw RequestError(400, "InvalidRequest", "gold records must be objects");
    if (!rec.contains("drugs") || !rec.at("drugs").is_array())
      throw RequestError(400, "InvalidRequest", "gold record needs a 'drugs' array");
    if (!rec.contains("label") || !rec.at("label").is_string())
      throw RequestError(400, "InvalidRequest", "gold record needs a 'label' string");

    const std::string label_str = rec.at("label").get<std::string>();
    const auto label = label_from_string(label_str);
    if (!label) throw InvalidLabelError("unknown label '" + label_str + "'");
    if (*label == EffectLabel::NO_COMB)
      throw InvalidLabelError("NO_COMB is encoded as an empty gold list");
    if (mode == TaskMode::DRUGCOMB && !is_nary_label(*label))
      throw InvalidLabelError("label '" + label_str + "' is not an n-ary label");
    if (mode == TaskMode::DDI13 && !is_ddi_label(*label))
      throw InvalidLabelError("label '" + label_str + "' is not a DDI type");

    Combination c;
    c.label = *label;
    for (const auto& d : rec.at("drugs")) {
      if (!d.is_string())
        throw RequestError(400, "InvalidRequest", "drug names must be strings");
      c.drugs.insert(normalize_drug_name(d.get<std::string>(), policy));
    }
    if (c.drugs.size() < 2)
      throw ArityViolationError("gold combination has " +
                                std::to_string(c.drugs.size()) +
                                " distinct drugs (need >=2)");
    if (mode == TaskMode::DDI13 && c.drugs.size() != 2)
      throw ArityViolationError("DDI13 gold pair has " +
                                std::to_string(c.drugs.size()) + " drugs (need 2)");
    out.insert(std::move(c));
  }
  return out;
}

inline RewardWeights weights_from_body(const nlohmann::json& body,
                                       const RewardWeights& defaults) {
  RewardWeights w = defaults;
  if (body.contains("weights")) {
    if (!body.at("weights").is_object())
      throw RequestError(400, "InvalidRequest", "'weights' must be an object");
    from_json(body.at("weights"), w);
  }
  try {
    w.validate();
  } catch (const Error& e) {
    throw RequestError(400, "InvalidWeights", e.what());
  }
  return w;
}

struct ScoreInputs {
  std::string response_text;
  CombinationSet gold;
  std::optional<DrugSet> gold_entities;
  TaskMode mode = TaskMode::DRUGCOMB;
  AnswerFormat format = AnswerFormat::STANDARD;
  RewardWeights weights;
};

inline ScoreInputs common_score_inputs(const nlohmann::json& body,
                                       const ServiceConfig& cfg) {
  if (!body.is_object())
    throw RequestError(400, "InvalidRequest", "request body must be a JSON object");
  ScoreInputs in;
  in.mode = mode_from_body(body);
  if (body.contains("extended")) {
    if (!body.at("extended").is_boolean())
      throw RequestError(400, "InvalidRequest", "'extended' must be a boolean");
    if (body.at("extended").get<bool>()) in.format = AnswerFormat::EXTENDED;
  }
  if (!body.contains("gold"))
    throw RequestError(400, "InvalidRequest", "missing 'gold'");
  in.gold = parse_gold_records(body.at("gold"), in.mode, cfg.policy);
  if (body.contains("gold_entities")) {
    if (!body.at("gold_entities").is_array())
      throw RequestError(400, "InvalidRequest", "'gold_entities' must be an array");
    DrugSet ents;
    for (const auto& e : body.at("gold_entities")) {
      if (!e.is_string())
        throw RequestError(400, "InvalidRequest", "entity names must be strings");
      if (auto name = try_normalize_drug_name(e.get<std::string>(), cfg.policy))
        ents.insert(*name);
    }
    in.gold_entities = std::move(ents);
  }
  in.weights = weights_from_body(body, cfg.weights);
  return in;
}

inline nlohmann::json score_one(const std::string& response_text,
                                const ScoreInputs& in, const ServiceConfig& cfg) {
  const ParsedResponse parsed = parse_response(response_text, cfg.policy, in.format);
  const RewardBreakdown breakdown =
      combined_reward(parsed, in.gold, in.weights, in.mode, in.gold_entities);
  return nlohmann::json{{"reward", breakdown}, {"parsed", parsed}};
}

}  // namespace detail

// POST /v1/score
inline nlohmann::json handle_score(const nlohmann::json& body, const ServiceConfig& cfg) {
  const auto in = detail::common_score_inputs(body, cfg);
  if (!body.contains("response_text") || !body.at("response_text").is_string())
    throw RequestError(400, "InvalidRequest", "missing 'response_text' string");
  return detail::score_one(body.at("response_text").get<std::string>(), in, cfg);
}

// POST /v1/score/group: identical per-response scoring plus group-relative
// advantages; response order is preserved.
inline nlohmann::json handle_group_score(const nlohmann::json& body,
                                         const ServiceConfig& cfg) {
  const auto in = detail::common_score_inputs(body, cfg);
  if (!body.contains("responses") || !body.at("responses").is_array())
    throw RequestError(400, "InvalidRequest", "missing 'responses' array");
  const auto& responses = body.at("responses");
  if (responses.empty())
    throw RequestError(400, "EmptyGroup", "'responses' must contain at least one item");

  double epsilon_std = cfg.epsilon_std;
  if (body.contains("epsilon_std")) {
    if (!body.at("epsilon_std").is_number() ||
        body.at("epsilon_std").get<double>() <= 0.0)
      throw RequestError(400, "InvalidRequest", "'epsilon_std' must be > 0");
    epsilon_std = body.at("epsilon_std").get<double>();
  }

  std::vector<nlohmann::json> scored;
  std::vector<double> rewards;
  scored.reserve(responses.size());
  for (const auto& r : responses) {
    if (!r.is_string())
      throw RequestError(400, "InvalidRequest", "'responses' must contain strings");
    scored.push_back(detail::score_one(r.get<std::string>(), in, cfg));
    rewards.push_back(scored.back().at("reward").at("r_total").get<double>());
  }
  const std::vector<double> advantages = group_advantages(rewards, epsilon_std);

  nlohmann::json results = nlohmann::json::array();
  for (std::size_t i = 0; i < scored.size(); ++i) {
    scored[i]["advantage"] = advantages[i];
    results.push_back(std::move(scored[i]));
  }
  return nlohmann::json{{"results", results}};
}

namespace detail {

inline std::vector<Instance> instances_from_spec(const nlohmann::json& v,
                                                 const ServiceConfig& cfg,
                                                 const std::string& which) {
  if (v.is_string()) return load_canonical(v.get<std::string>(), cfg.policy);
  if (v.is_array()) {
    std::vector<Instance> out;
    std::set<std::string> seen;
    std::size_t i = 0;
    for (const auto& rec : v) {
      Instance inst =
          instance_from_json(rec, which + "[" + std::to_string(i++) + "]", cfg.policy);
      if (!seen.insert(inst.id).second)
        throw DuplicateIdError(which + ": duplicate id '" + inst.id + "'");
      out.push_back(std::move(inst));
    }
    return out;
  }
  throw RequestError(400, "InvalidRequest",
                     "'" + which + "' must be a file path or an array of records");
}

}  // namespace detail

// POST /v1/evaluate: corpus metrics between aligned prediction and gold
// files (or inline record arrays) in the canonical JSON-lines format.
inline nlohmann::json handle_evaluate(const nlohmann::json& body,
                                      const ServiceConfig& cfg) {
  if (!body.is_object())
    throw RequestError(400, "InvalidRequest", "request body must be a JSON object");
  if (!body.contains("predictions") || !body.contains("gold"))
    throw RequestError(400, "InvalidRequest", "need 'predictions' and 'gold'");

  const auto preds = detail::instances_from_spec(body.at("predictions"), cfg, "predictions");
  const auto golds = detail::instances_from_spec(body.at("gold"), cfg, "gold");

  std::map<std::string, const Instance*> pred_by_id;
  for (const auto& p : preds) pred_by_id[p.id] = &p;
  std::map<std::string, const Instance*> gold_by_id;
  for (const auto& g : golds) gold_by_id[g.id] = &g;

  std::vector<std::string> only_pred, only_gold;
  for (const auto& [id, _] : pred_by_id)
    if (!gold_by_id.count(id)) only_pred.push_back(id);
  for (const auto& [id, _] : gold_by_id)
    if (!pred_by_id.count(id)) only_gold.push_back(id);
  if (!only_pred.empty() || !only_gold.empty()) {
    std::string msg = "misaligned ids;";
    if (!only_pred.empty()) {
      msg += " only in predictions:";
      for (std::size_t i = 0; i < only_pred.size() && i < 10; ++i)
        msg += " " + only_pred[i];
    }
    if (!only_gold.empty()) {
      msg += " only in gold:";
      for (std::size_t i = 0; i < only_gold.size() && i < 10; ++i)
        msg += " " + only_gold[i];
    }
    throw IdMismatchError(msg);
  }

  TaskMode mode = detail::mode_from_body(body);
  if (!body.contains("mode")) {
    if (golds.empty())
      throw RequestError(400, "InvalidRequest", "empty gold corpus");
    mode = golds.front().task_mode;
    for (const auto& g : golds)
      if (g.task_mode != mode)
        throw RequestError(400, "InvalidRequest",
                           "gold corpus mixes task modes; pass 'mode' explicitly");
  }

  bool any_label_sensitive = false;
  if (body.contains("any_label_sensitive"))
    any_label_sensitive = body.at("any_label_sensitive").get<bool>();
  int partial_min_shared = 2;
  if (body.contains("partial_min_shared"))
    partial_min_shared = body.at("partial_min_shared").get<int>();

  std::vector<ScoredPair> pairs;
  pairs.reserve(golds.size());
  for (const auto& g : golds)
    pairs.emplace_back(pred_by_id.at(g.id)->gold, g.gold);

  nlohmann::json report;
  report["mode"] = task_mode_name(mode);
  report["instances"] = golds.size();

  if (mode == TaskMode::DRUGCOMB) {
    const auto run = [&](MatchScope scope, MatchKind kind, bool label_sensitive) {
      MatchConfig mc{scope, kind, partial_min_shared, label_sensitive};
      nlohmann::json entry = corpus_f1(pairs, mc);
      entry["config"] = mc;
      return entry;
    };
    report["metrics"] = {
        {"pos_exact", run(MatchScope::POS_ONLY, MatchKind::EXACT, true)},
        {"pos_partial", run(MatchScope::POS_ONLY, MatchKind::PARTIAL, true)},
        {"any_exact", run(MatchScope::ANY, MatchKind::EXACT, any_label_sensitive)},
        {"any_partial", run(MatchScope::ANY, MatchKind::PARTIAL, any_label_sensitive)}};
  } else {
    nlohmann::json entry = ddi_micro_f1(pairs);
    entry["config"] = {{"match", "typed unordered pair, one-to-one"}};
    report["metrics"] = {{"ddi_micro", entry}};
  }

  // Entity F1 when either side carries entity lists; a missing side counts
  // as the empty set.
  double inter = 0.0, pred_n = 0.0, gold_n = 0.0;
  bool any_entities = false;
  for (const auto& g : golds) {
    const Instance* p = pred_by_id.at(g.id);
    if (!p->entity_hints && !g.entity_hints) continue;
    any_entities = true;
    static const DrugSet kEmpty;
    const DrugSet& ps = p->entity_hints ? *p->entity_hints : kEmpty;
    const DrugSet& gs = g.entity_hints ? *g.entity_hints : kEmpty;
    inter += static_cast<double>(detail::intersection_size(ps, gs));
    pred_n += static_cast<double>(ps.size());
    gold_n += static_cast<double>(gs.size());
  }
  if (any_entities) {
    report["ner"] = (pred_n == 0.0 && gold_n == 0.0)
                        ? nlohmann::json(detail::perfect_empty_prf())
                        : nlohmann::json(detail::finish_prf(inter, inter, pred_n, gold_n));
  }
  return report;
}

inline nlohmann::json config_json(const ServiceConfig& cfg) {
  return nlohmann::json{
      {"version", kVersion},
      {"weights", cfg.weights},
      {"epsilon_std", cfg.epsilon_std},
      {"normalization",
       {{"case_fold", cfg.policy.case_fold},
        {"trim_whitespace", cfg.policy.trim_whitespace},
        {"collapse_internal_whitespace", cfg.policy.collapse_internal_whitespace},
        {"strip_surrounding_punctuation", cfg.policy.strip_surrounding_punctuation}}},
      {"endpoints",
       {"/v1/score", "/v1/score/group", "/v1/evaluate", "/v1/health", "/v1/config"}}};
}

namespace detail {

using Handler = nlohmann::json (*)(const nlohmann::json&, const ServiceConfig&);

inline void reply_json(httplib::Response& res, int status, const nlohmann::json& j) {
  res.status = status;
  res.set_content(j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                  "application/json");
}

inline void wire_post(httplib::Server& server, const std::string& route,
                      const ServiceConfig& cfg, Handler handler) {
  server.Post(route, [&cfg, handler](const httplib::Request& req,
                                     httplib::Response& res) {
    const nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      reply_json(res, 400,
                 {{"error", {{"code", "InvalidJson"}, {"message", "body is not JSON"}}}});
      return;
    }
    try {
      reply_json(res, 200, handler(body, cfg));
    } catch (const RequestError& e) {
      reply_json(res, e.status,
                 {{"error", {{"code", e.code}, {"message", e.what()}}}});
    } catch (const Error& e) {
      reply_json(res, 400,
                 {{"error", {{"code", error_code_for(e)}, {"message", e.what()}}}});
    } catch (const std::exception& e) {
      reply_json(res, 500,
                 {{"error", {{"code", "Internal"}, {"message", e.what()}}}});
    }
  });
}

}  // namespace detail

// Configures all routes on a fresh server. The caller owns listening; cfg
// must outlive the server.
inline std::unique_ptr<httplib::Server> make_server(const ServiceConfig& cfg) {
  auto server = std::make_unique<httplib::Server>();
  detail::wire_post(*server, "/v1/score", cfg, &handle_score);
  detail::wire_post(*server, "/v1/score/group", cfg, &handle_group_score);
  detail::wire_post(*server, "/v1/evaluate", cfg, &handle_evaluate);
  server->Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    detail::reply_json(res, 200, {{"status", "ok"}, {"version", kVersion}});
  });
  server->Get("/v1/config", [&cfg](const httplib::Request&, httplib::Response& res) {
    detail::reply_json(res, 200, config_json(cfg));
  });
  return server;
}

}  // namespace dce
