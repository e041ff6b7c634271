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

// Analyst/Reviewer generation-review-feedback orchestration over a pluggable
// chat-completion backend. The Analyst drafts a reasoning trace anchored on
// the gold labels; the Reviewer scores it on six 0-5 rubric criteria; traces
// are accepted only when every criterion reaches the threshold, with reviewer
// comments threaded back into the next Analyst prompt for up to
// max_iterations rounds.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dce/core.hpp"
#include "dce/response_parser.hpp"

namespace dce {

// ---------------------------------------------------------------------------
// Rubric

struct RubricScores {
  int format_compliance = 0;
  int medical_validity = 0;
  int semantic_consistency = 0;
  int factual_consistency = 0;
  int narrative_naturalness = 0;
  int logical_completeness = 0;
  std::map<std::string, std::string> comments;  // criterion -> reviewer comment
  std::vector<std::string> diagnostics;         // e.g. clamped out-of-range values

  static constexpr std::array<const char*, 6> criteria() {
    return {"format_compliance",     "medical_validity",
            "semantic_consistency",  "factual_consistency",
            "narrative_naturalness", "logical_completeness"};
  }

  int get(std::string_view criterion) const {
    if (criterion == "format_compliance") return format_compliance;
    if (criterion == "medical_validity") return medical_validity;
    if (criterion == "semantic_consistency") return semantic_consistency;
    if (criterion == "factual_consistency") return factual_consistency;
    if (criterion == "narrative_naturalness") return narrative_naturalness;
    if (criterion == "logical_completeness") return logical_completeness;
    throw Error("unknown rubric criterion: " + std::string(criterion));
  }

  void set(std::string_view criterion, int value) {
    if (criterion == "format_compliance") format_compliance = value;
    else if (criterion == "medical_validity") medical_validity = value;
    else if (criterion == "semantic_consistency") semantic_consistency = value;
    else if (criterion == "factual_consistency") factual_consistency = value;
    else if (criterion == "narrative_naturalness") narrative_naturalness = value;
    else if (criterion == "logical_completeness") logical_completeness = value;
    else throw Error("unknown rubric criterion: " + std::string(criterion));
  }

  int min_score() const {
    int m = 5;
    for (const char* c : criteria()) m = std::min(m, get(c));
    return m;
  }
};

inline bool accept(const RubricScores& scores, int threshold) {
  return scores.min_score() >= threshold;
}

namespace detail {

// Key canonicalization for tolerant rubric matching: lower-case, spaces and
// hyphens become underscores.
inline std::string rubric_key(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (c == ' ' || c == '-')
      out.push_back('_');
    else
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

// Balanced top-level {...} regions, string-aware. Fenced code blocks fall out
// naturally since the scan ignores everything outside braces.
inline std::vector<std::string> json_object_candidates(const std::string& text) {
  std::vector<std::string> out;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"' && depth > 0) {
      in_string = true;
    } else if (c == '{') {
      if (depth == 0) start = i;
      ++depth;
    } else if (c == '}') {
      if (depth > 0 && --depth == 0) out.push_back(text.substr(start, i - start + 1));
    }
  }
  return out;
}

inline std::optional<int> score_from(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float())
    return static_cast<int>(std::lround(v.get<double>()));
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(v.get<std::string>(), &used);
      if (used == v.get<std::string>().size()) return n;
    } catch (...) {
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Extracts the first JSON object carrying all six criteria from possibly
// prose-wrapped reviewer output. Criterion values may be bare numbers or
// {"score": n, "comment": "..."} objects; an optional "comments" map is also
// read. Out-of-range numbers are clamped into 0-5 with a diagnostic.
inline RubricScores parse_review(const std::string& reviewer_output) {
  for (const std::string& candidate : detail::json_object_candidates(reviewer_output)) {
    const nlohmann::json j = nlohmann::json::parse(candidate, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;

    std::map<std::string, const nlohmann::json*> by_key;
    for (auto it = j.begin(); it != j.end(); ++it)
      by_key[detail::rubric_key(it.key())] = &it.value();

    RubricScores scores;
    bool all_present = true;
    for (const char* criterion : RubricScores::criteria()) {
      const auto found = by_key.find(criterion);
      if (found == by_key.end()) {
        all_present = false;
        break;
      }
      const nlohmann::json& v = *found->second;
      std::optional<int> n;
      if (v.is_object()) {
        if (const auto* s = detail::find_key(v, {"score", "value", "rating"}))
          n = detail::score_from(*s);
        if (const auto* c = detail::find_key(v, {"comment", "comments", "feedback"}))
          if (c->is_string()) scores.comments[criterion] = c->get<std::string>();
      } else {
        n = detail::score_from(v);
      }
      if (!n) {
        all_present = false;
        break;
      }
      int value = *n;
      if (value < 0 || value > 5) {
        scores.diagnostics.push_back(std::string(criterion) + ": clamped " +
                                     std::to_string(value) + " into 0-5");
        value = std::clamp(value, 0, 5);
      }
      scores.set(criterion, value);
    }
    if (!all_present) continue;

    if (const auto* comments = detail::find_key(j, {"comments", "feedback"})) {
      if (comments->is_object()) {
        for (auto it = comments->begin(); it != comments->end(); ++it) {
          if (it.value().is_string())
            scores.comments[detail::rubric_key(it.key())] = it.value().get<std::string>();
        }
      } else if (comments->is_string()) {
        scores.comments["overall"] = comments->get<std::string>();
      }
    }
    return scores;
  }
  throw ReviewParseError(
      "no JSON object with all six rubric criteria found in reviewer output");
}

// ---------------------------------------------------------------------------
// Orchestration

// One backend serves both agents; the role field lets an HTTP implementation
// route to per-role models and sampling parameters.
struct ChatRequest {
  std::string system;
  std::string user;
  std::string role;  // "analyst" or "reviewer"
};

using ChatBackend = std::function<std::string(const ChatRequest&)>;

struct SynthesisConfig {
  int max_iterations = 3;
  int accept_threshold = 4;
  std::string analyst_prompt_template;   // placeholders: {sentence} {context} {gold_labels} {feedback}
  std::string reviewer_prompt_template;  // additionally {trace}
  std::string analyst_system;
  std::string reviewer_system;

  std::string backend_endpoint;  // chat-completions URL
  std::string analyst_model;
  std::string reviewer_model;
  std::optional<double> analyst_temperature;
  std::optional<double> reviewer_temperature;
  std::string api_key_env = "DCEKIT_API_KEY";
  double request_timeout_s = 60.0;
  int retry_limit = 3;
  double backoff_base_s = 0.5;
  int max_concurrent_requests = 4;

  void validate() const {
    if (max_iterations < 1) throw Error("SynthesisConfig: max_iterations must be >= 1");
    if (accept_threshold < 0 || accept_threshold > 5)
      throw Error("SynthesisConfig: accept_threshold must be in 0..5");
    if (max_concurrent_requests < 1)
      throw Error("SynthesisConfig: max_concurrent_requests must be >= 1");
  }
};

enum class SynthesisStatus { ACCEPTED, REJECTED };

struct TranscriptEntry {
  std::string role;
  std::string message;
};

struct SynthesisOutcome {
  SynthesisStatus status = SynthesisStatus::REJECTED;
  int iterations_used = 0;
  std::optional<std::string> trace_text;
  std::optional<RubricScores> final_scores;
  std::vector<TranscriptEntry> transcript;
};

inline std::string render_template(std::string tpl,
                                   const std::map<std::string, std::string>& vars) {
  for (const auto& [key, value] : vars) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = tpl.find(needle, pos)) != std::string::npos) {
      tpl.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return tpl;
}

namespace detail {

inline std::string feedback_digest(const RubricScores& scores) {
  std::ostringstream out;
  for (const char* criterion : RubricScores::criteria()) {
    out << criterion << "=" << scores.get(criterion);
    const auto it = scores.comments.find(criterion);
    if (it != scores.comments.end() && !it->second.empty())
      out << " (" << it->second << ")";
    out << "; ";
  }
  const auto overall = scores.comments.find("overall");
  if (overall != scores.comments.end()) out << overall->second;
  return out.str();
}

}  // namespace detail

// One instance through the generation-review-feedback loop. Reviewer output
// that fails to parse gets exactly one re-ask before the error propagates.
inline SynthesisOutcome run_synthesis(const Instance& instance,
                                      const SynthesisConfig& cfg,
                                      const ChatBackend& backend) {
  cfg.validate();
  SynthesisOutcome outcome;
  std::string feedback;

  const std::map<std::string, std::string> base_vars = {
      {"sentence", instance.sentence},
      {"context", instance.context.value_or("")},
      {"gold_labels", to_answer_json(instance.gold)},
  };

  for (int iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
    auto vars = base_vars;
    vars["feedback"] = feedback;
    const std::string analyst_user = render_template(cfg.analyst_prompt_template, vars);
    outcome.transcript.push_back({"analyst_prompt", analyst_user});
    const std::string trace =
        backend({cfg.analyst_system, analyst_user, "analyst"});
    outcome.transcript.push_back({"analyst", trace});

    vars["trace"] = trace;
    const std::string reviewer_user =
        render_template(cfg.reviewer_prompt_template, vars);
    outcome.transcript.push_back({"reviewer_prompt", reviewer_user});
    std::string review_raw = backend({cfg.reviewer_system, reviewer_user, "reviewer"});
    outcome.transcript.push_back({"reviewer", review_raw});

    RubricScores scores;
    try {
      scores = parse_review(review_raw);
    } catch (const ReviewParseError&) {
      outcome.transcript.push_back({"reviewer_prompt", reviewer_user});
      review_raw = backend({cfg.reviewer_system, reviewer_user, "reviewer"});
      outcome.transcript.push_back({"reviewer", review_raw});
      scores = parse_review(review_raw);  // second failure propagates
    }

    outcome.iterations_used = iteration;
    outcome.final_scores = scores;
    if (accept(scores, cfg.accept_threshold)) {
      outcome.status = SynthesisStatus::ACCEPTED;
      outcome.trace_text = trace;
      return outcome;
    }
    feedback = detail::feedback_digest(scores);
  }
  outcome.status = SynthesisStatus::REJECTED;
  return outcome;
}

// Corpus-level driver with bounded concurrency. Per-instance failures
// (backend exhaustion, unparseable reviews) become REJECTED outcomes with an
// error transcript entry instead of aborting the batch; results keep corpus
// order. backend_errors reports how many instances died on transport.
inline std::vector<SynthesisOutcome> run_corpus_synthesis(
    const std::vector<Instance>& instances, const SynthesisConfig& cfg,
    const ChatBackend& backend, std::size_t* backend_errors = nullptr) {
  cfg.validate();
  std::vector<SynthesisOutcome> outcomes(instances.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> backend_failures{0};

  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(cfg.max_concurrent_requests), std::max<std::size_t>(instances.size(), 1));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= instances.size()) return;
        try {
          outcomes[i] = run_synthesis(instances[i], cfg, backend);
        } catch (const BackendError& e) {
          backend_failures.fetch_add(1);
          outcomes[i].status = SynthesisStatus::REJECTED;
          outcomes[i].transcript.push_back({"error", e.what()});
        } catch (const ReviewParseError& e) {
          outcomes[i].status = SynthesisStatus::REJECTED;
          outcomes[i].transcript.push_back({"error", e.what()});
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (backend_errors != nullptr) *backend_errors = backend_failures.load();
  return outcomes;
}

// ---------------------------------------------------------------------------
// SFT dataset assembly

struct SftSummary {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::string acceptance_rate;  // e.g. "80.61%"
};

// Truncates (not rounds) to two decimals: 1098/1362 reports as 80.61%.
inline std::string format_acceptance_rate(std::size_t accepted, std::size_t total) {
  const double pct =
      total == 0 ? 0.0 : 100.0 * static_cast<double>(accepted) / static_cast<double>(total);
  const double truncated = std::floor(pct * 100.0) / 100.0;
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << truncated << "%";
  return out.str();
}

// Emits {"instruction", "input", "output"} JSON-lines for accepted traces;
// output wraps the trace and the canonical gold answer in think/answer tags.
inline SftSummary build_sft_dataset(const std::vector<SynthesisOutcome>& outcomes,
                                    const std::vector<Instance>& instances,
                                    const std::string& instruction,
                                    std::ostream& out) {
  if (outcomes.size() != instances.size())
    throw Error("build_sft_dataset: one outcome per instance required");

  SftSummary summary;
  summary.total = outcomes.size();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].status != SynthesisStatus::ACCEPTED) continue;
    ++summary.accepted;
    const Instance& inst = instances[i];
    std::string input = inst.sentence;
    if (inst.context) input += "\n\n" + *inst.context;
    nlohmann::json rec{
        {"instruction", instruction},
        {"input", input},
        {"output", "<think>" + outcomes[i].trace_text.value_or("") + "</think><answer>" +
                       to_answer_json(inst.gold) + "</answer>"}};
    out << rec.dump() << '\n';
  }
  summary.acceptance_rate = format_acceptance_rate(summary.accepted, summary.total);
  return summary;
}

inline void to_json(nlohmann::json& j, const RubricScores& s) {
  j = nlohmann::json{{"format_compliance", s.format_compliance},
                     {"medical_validity", s.medical_validity},
                     {"semantic_consistency", s.semantic_consistency},
                     {"factual_consistency", s.factual_consistency},
                     {"narrative_naturalness", s.narrative_naturalness},
                     {"logical_completeness", s.logical_completeness}};
  if (!s.comments.empty()) j["comments"] = s.comments;
  if (!s.diagnostics.empty()) j["diagnostics"] = s.diagnostics;
}

inline void to_json(nlohmann::json& j, const SynthesisOutcome& o) {
  j = nlohmann::json{
      {"status", o.status == SynthesisStatus::ACCEPTED ? "ACCEPTED" : "REJECTED"},
      {"iterations_used", o.iterations_used}};
  if (o.trace_text) j["trace"] = *o.trace_text;
  if (o.final_scores) j["final_scores"] = *o.final_scores;
  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& entry : o.transcript)
    transcript.push_back({{"role", entry.role}, {"message", entry.message}});
  j["transcript"] = transcript;
}

}  // namespace dce
