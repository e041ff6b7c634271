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

// dcekit command line: corpus evaluation, reward scoring, the HTTP scoring
// service, reasoning-trace synthesis, dataset statistics, and source-format
// conversion. Exit codes: 0 success, 1 usage error, 2 data error, 3 backend
// error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dce/dataset.hpp"
#include "dce/http_backend.hpp"
#include "dce/service.hpp"
#include "dce/synthesis.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dce::Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string slurp_stdin() {
  std::ostringstream ss;
  ss << std::cin.rdbuf();
  return ss.str();
}

struct WeightOptions {
  dce::RewardWeights weights;
  double epsilon_std = 1e-8;

  void attach(CLI::App& cmd) {
    cmd.add_option("--alpha-format", weights.alpha_format,
                   "format reward weight")
        ->envname("DCEKIT_ALPHA_FORMAT")
        ->capture_default_str();
    cmd.add_option("--alpha-cover", weights.alpha_cover,
                   "coverage reward weight")
        ->envname("DCEKIT_ALPHA_COVER")
        ->capture_default_str();
    cmd.add_option("--alpha-metric", weights.alpha_metric,
                   "metric reward weight")
        ->envname("DCEKIT_ALPHA_METRIC")
        ->capture_default_str();
    cmd.add_option("--metric-exact-weight", weights.metric_exact_weight,
                   "exact-F1 share inside the metric reward")
        ->envname("DCEKIT_METRIC_EXACT_WEIGHT")
        ->capture_default_str();
    cmd.add_option("--metric-partial-weight", weights.metric_partial_weight,
                   "partial-F1 share inside the metric reward")
        ->envname("DCEKIT_METRIC_PARTIAL_WEIGHT")
        ->capture_default_str();
    cmd.add_option("--alpha-ner", weights.alpha_ner,
                   "entity-recognition reward weight (0 disables)")
        ->envname("DCEKIT_ALPHA_NER")
        ->capture_default_str();
    cmd.add_option("--epsilon-std", epsilon_std,
                   "variance guard for group advantages")
        ->envname("DCEKIT_EPSILON_STD")
        ->capture_default_str();
  }

  dce::ServiceConfig service_config() const {
    weights.validate();
    if (epsilon_std <= 0.0) throw dce::Error("--epsilon-std must be > 0");
    dce::ServiceConfig cfg;
    cfg.weights = weights;
    cfg.epsilon_std = epsilon_std;
    return cfg;
  }
};

dce::TaskMode parse_mode_flag(const std::string& mode) {
  const auto parsed = dce::task_mode_from_string(mode);
  if (!parsed) throw dce::Error("unknown mode '" + mode + "'");
  return *parsed;
}

void print_metrics_text(const nlohmann::json& report, std::ostream& out) {
  out << "mode: " << report.at("mode").get<std::string>()
      << "  instances: " << report.at("instances").get<std::size_t>() << "\n";
  out << std::left << std::setw(14) << "metric" << std::right << std::setw(12)
      << "precision" << std::setw(12) << "recall" << std::setw(12) << "f1" << "\n";
  out << std::string(50, '-') << "\n";
  out << std::setprecision(9);
  const auto row = [&out](const std::string& name, const nlohmann::json& m) {
    out << std::left << std::setw(14) << name << std::right << std::setw(12)
        << m.at("precision").get<double>() << std::setw(12)
        << m.at("recall").get<double>() << std::setw(12) << m.at("f1").get<double>()
        << "\n";
  };
  for (const auto& [name, metric] : report.at("metrics").items()) row(name, metric);
  if (report.contains("ner")) row("ner", report.at("ner"));
}

int run_eval(const std::string& predictions, const std::string& gold,
             const std::string& mode, bool any_label_sensitive,
             int partial_min_shared, const std::string& json_out,
             const WeightOptions& wopts) {
  const dce::ServiceConfig cfg = wopts.service_config();
  nlohmann::json body{{"predictions", predictions},
                      {"gold", gold},
                      {"any_label_sensitive", any_label_sensitive},
                      {"partial_min_shared", partial_min_shared}};
  if (!mode.empty()) body["mode"] = dce::task_mode_name(parse_mode_flag(mode));
  const nlohmann::json report = dce::handle_evaluate(body, cfg);
  print_metrics_text(report, std::cout);
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    if (!out) throw dce::Error("cannot open file for writing: " + json_out);
    out << report.dump(2) << '\n';
  }
  return kExitOk;
}

int run_reward(const std::string& response, const std::string& response_file,
               const std::string& gold, const std::string& gold_file,
               const std::string& mode, bool extended,
               const std::string& gold_entities, const WeightOptions& wopts) {
  const dce::ServiceConfig cfg = wopts.service_config();

  std::string response_text = response;
  if (!response_file.empty())
    response_text = response_file == "-" ? slurp_stdin() : slurp(response_file);
  else if (response.empty())
    response_text = slurp_stdin();

  nlohmann::json gold_json = nlohmann::json::array();
  const std::string gold_source = !gold_file.empty() ? slurp(gold_file) : gold;
  if (!gold_source.empty()) {
    gold_json = nlohmann::json::parse(gold_source, nullptr, false);
    if (gold_json.is_discarded())
      throw dce::ParseError("--gold is not valid JSON");
  }

  nlohmann::json body{{"response_text", response_text},
                      {"gold", gold_json},
                      {"mode", dce::task_mode_name(parse_mode_flag(mode))},
                      {"extended", extended}};
  if (!gold_entities.empty()) {
    const auto ents = nlohmann::json::parse(gold_entities, nullptr, false);
    if (ents.is_discarded())
      throw dce::ParseError("--gold-entities is not valid JSON");
    body["gold_entities"] = ents;
  }
  std::cout << dce::handle_score(body, cfg).dump(2) << "\n";
  return kExitOk;
}

int run_serve(const std::string& host, int port, const WeightOptions& wopts) {
  const dce::ServiceConfig cfg = wopts.service_config();
  auto server = dce::make_server(cfg);
  std::cerr << "dcekit " << dce::kVersion << " listening on http://" << host << ":"
            << port << "\n";
  if (!server->listen(host, port)) {
    std::cerr << "failed to bind " << host << ":" << port << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

int run_stats(const std::string& input, const std::string& format,
              const std::string& fields_path, bool as_json) {
  std::vector<dce::Instance> instances;
  std::vector<std::string> warnings;
  dce::TaskMode mode = dce::TaskMode::DRUGCOMB;
  if (format == "drugcomb") {
    const auto mapping = dce::FieldMapping::from_file(fields_path);
    instances = dce::load_drugcomb(input, mapping.drugcomb, {}, &warnings);
  } else if (format == "ddi13") {
    const auto mapping = dce::FieldMapping::from_file(fields_path);
    instances = dce::load_ddi13(input, mapping.ddi13);
    mode = dce::TaskMode::DDI13;
  } else if (format == "canonical") {
    instances = dce::load_canonical(input);
    if (!instances.empty()) mode = instances.front().task_mode;
    for (const auto& inst : instances)
      if (inst.task_mode != mode)
        throw dce::ParseError("canonical corpus mixes task modes");
  } else {
    throw dce::Error("unknown --format '" + format + "'");
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  const dce::CorpusStats stats = dce::compute_stats(instances, mode);
  if (as_json)
    std::cout << dce::stats_json(stats).dump(2) << "\n";
  else
    std::cout << dce::stats_table(stats);
  return kExitOk;
}

int run_convert(const std::string& input, const std::string& format,
                const std::string& output, const std::string& fields_path) {
  std::vector<dce::Instance> instances;
  std::vector<std::string> warnings;
  const auto mapping = dce::FieldMapping::from_file(fields_path);
  if (format == "drugcomb")
    instances = dce::load_drugcomb(input, mapping.drugcomb, {}, &warnings);
  else if (format == "ddi13")
    instances = dce::load_ddi13(input, mapping.ddi13);
  else
    throw dce::Error("unknown --format '" + format + "'");
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  dce::export_canonical(instances, output);
  std::cerr << "wrote " << instances.size() << " instances to " << output << "\n";
  return kExitOk;
}

struct SynthesizeOptions {
  std::string corpus;
  std::string out_dir;
  dce::SynthesisConfig cfg;
  std::string analyst_template_path = "prompts/analyst.txt";
  std::string reviewer_template_path = "prompts/reviewer.txt";
  std::string instruction_path = "prompts/instruction.txt";
};

int run_synthesize(SynthesizeOptions& opts) {
  opts.cfg.analyst_prompt_template = slurp(opts.analyst_template_path);
  opts.cfg.reviewer_prompt_template = slurp(opts.reviewer_template_path);
  const std::string instruction = slurp(opts.instruction_path);
  opts.cfg.validate();

  const auto instances = dce::load_canonical(opts.corpus);
  std::filesystem::create_directories(opts.out_dir);

  const dce::ChatBackend backend = dce::make_http_chat_backend(opts.cfg);
  std::size_t backend_errors = 0;
  const auto outcomes =
      dce::run_corpus_synthesis(instances, opts.cfg, backend, &backend_errors);

  const std::string outcomes_path = opts.out_dir + "/outcomes.jsonl";
  std::ofstream outcomes_out(outcomes_path);
  if (!outcomes_out) throw dce::Error("cannot open file for writing: " + outcomes_path);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    nlohmann::json rec = outcomes[i];
    rec["id"] = instances[i].id;
    outcomes_out << rec.dump() << '\n';
  }

  const std::string sft_path = opts.out_dir + "/sft.jsonl";
  std::ofstream sft_out(sft_path);
  if (!sft_out) throw dce::Error("cannot open file for writing: " + sft_path);
  const dce::SftSummary summary =
      dce::build_sft_dataset(outcomes, instances, instruction, sft_out);

  const nlohmann::json summary_json{{"total", summary.total},
                                    {"accepted", summary.accepted},
                                    {"acceptance_rate", summary.acceptance_rate},
                                    {"backend_errors", backend_errors},
                                    {"sft_dataset", sft_path},
                                    {"outcomes", outcomes_path}};
  std::cout << summary_json.dump(2) << "\n";
  if (backend_errors > 0) {
    std::cerr << backend_errors << " instance(s) failed on the backend\n";
    return kExitBackend;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"n-ary drug-combination extraction scoring engine"};
  app.set_version_flag("--version", dce::kVersion);
  app.set_config("--config", "", "TOML config file; flags > env > file");
  app.require_subcommand(1);

  // eval
  auto* eval = app.add_subcommand("eval", "corpus metrics between prediction and gold files");
  std::string eval_pred, eval_gold, eval_mode, eval_json_out;
  bool eval_any_label_sensitive = false;
  int eval_partial_min_shared = 2;
  WeightOptions eval_weights;
  eval->add_option("--predictions", eval_pred, "canonical JSON-lines predictions")
      ->required();
  eval->add_option("--gold", eval_gold, "canonical JSON-lines gold")->required();
  eval->add_option("--mode", eval_mode, "drugcomb|ddi13 (default: from records)");
  eval->add_flag("--any-label-sensitive", eval_any_label_sensitive,
                 "require collapsed-label agreement in Any-F1");
  eval->add_option("--partial-min-shared", eval_partial_min_shared,
                   "minimum shared drugs for partial credit")
      ->check(CLI::Range(2, 1000));
  eval->add_option("--json", eval_json_out, "also write the JSON report here");
  eval_weights.attach(*eval);

  // reward
  auto* reward = app.add_subcommand("reward", "score one response (stdin by default)");
  std::string reward_response, reward_response_file, reward_gold, reward_gold_file;
  std::string reward_mode = "drugcomb", reward_gold_entities;
  bool reward_extended = false;
  WeightOptions reward_weights;
  reward->add_option("--response", reward_response, "response text inline");
  reward->add_option("--response-file", reward_response_file,
                     "response text file ('-' for stdin)");
  reward->add_option("--gold", reward_gold, "gold combinations as a JSON array");
  reward->add_option("--gold-file", reward_gold_file,
                     "file holding the gold JSON array");
  reward->add_option("--mode", reward_mode, "drugcomb|ddi13")
      ->capture_default_str();
  reward->add_flag("--extended", reward_extended,
                   "parse the joint entity+relation answer format");
  reward->add_option("--gold-entities", reward_gold_entities,
                     "gold entity names as a JSON array (NER reward)");
  reward_weights.attach(*reward);

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP scoring service");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  WeightOptions serve_weights;
  serve->add_option("--host", serve_host, "bind address")->capture_default_str();
  serve->add_option("--port", serve_port, "bind port")
      ->capture_default_str()
      ->envname("DCEKIT_PORT");
  serve_weights.attach(*serve);

  // synthesize
  auto* synth = app.add_subcommand("synthesize",
                                   "run the analyst/reviewer loop over a corpus");
  SynthesizeOptions sopts;
  synth->add_option("--corpus", sopts.corpus, "canonical JSON-lines corpus")
      ->required();
  synth->add_option("--out-dir", sopts.out_dir, "output directory")->required();
  synth->add_option("--endpoint", sopts.cfg.backend_endpoint,
                    "chat-completions URL")
      ->required()
      ->envname("DCEKIT_ENDPOINT");
  synth->add_option("--analyst-model", sopts.cfg.analyst_model, "analyst model name")
      ->envname("DCEKIT_ANALYST_MODEL");
  synth->add_option("--reviewer-model", sopts.cfg.reviewer_model,
                    "reviewer model name")
      ->envname("DCEKIT_REVIEWER_MODEL");
  synth->add_option("--analyst-temperature", sopts.cfg.analyst_temperature,
                    "analyst sampling temperature");
  synth->add_option("--reviewer-temperature", sopts.cfg.reviewer_temperature,
                    "reviewer sampling temperature");
  synth->add_option("--analyst-template", sopts.analyst_template_path,
                    "analyst prompt template file")
      ->capture_default_str();
  synth->add_option("--reviewer-template", sopts.reviewer_template_path,
                    "reviewer prompt template file")
      ->capture_default_str();
  synth->add_option("--instruction", sopts.instruction_path,
                    "task instruction file for SFT records")
      ->capture_default_str();
  synth->add_option("--max-iterations", sopts.cfg.max_iterations,
                    "generation-review-feedback rounds")
      ->capture_default_str();
  synth->add_option("--accept-threshold", sopts.cfg.accept_threshold,
                    "minimum rubric score on every criterion")
      ->capture_default_str();
  synth->add_option("--concurrency", sopts.cfg.max_concurrent_requests,
                    "instances synthesized in parallel")
      ->capture_default_str();
  synth->add_option("--timeout", sopts.cfg.request_timeout_s,
                    "per-request timeout in seconds")
      ->capture_default_str();
  synth->add_option("--retries", sopts.cfg.retry_limit, "transport retries")
      ->capture_default_str();
  synth->add_option("--backoff", sopts.cfg.backoff_base_s,
                    "base backoff in seconds (exponential, jittered)")
      ->capture_default_str();
  synth->add_option("--api-key-env", sopts.cfg.api_key_env,
                    "environment variable holding the bearer token")
      ->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "dataset statistics tables");
  std::string stats_input, stats_format = "canonical";
  std::string stats_fields = "configs/source_fields.json";
  bool stats_json_flag = false;
  stats->add_option("--input", stats_input, "corpus file")->required();
  stats->add_option("--format", stats_format, "drugcomb|ddi13|canonical")
      ->capture_default_str();
  stats->add_option("--fields", stats_fields, "source field mapping file")
      ->capture_default_str()
      ->envname("DCEKIT_FIELDS");
  stats->add_flag("--json", stats_json_flag, "emit machine-readable JSON");

  // convert
  auto* convert = app.add_subcommand("convert",
                                     "convert a source corpus to canonical JSON-lines");
  std::string conv_input, conv_format, conv_output;
  std::string conv_fields = "configs/source_fields.json";
  convert->add_option("--input", conv_input, "source corpus file")->required();
  convert->add_option("--format", conv_format, "drugcomb|ddi13")->required();
  convert->add_option("--output", conv_output, "canonical output path")->required();
  convert->add_option("--fields", conv_fields, "source field mapping file")
      ->capture_default_str()
      ->envname("DCEKIT_FIELDS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (eval->parsed())
      return run_eval(eval_pred, eval_gold, eval_mode, eval_any_label_sensitive,
                      eval_partial_min_shared, eval_json_out, eval_weights);
    if (reward->parsed())
      return run_reward(reward_response, reward_response_file, reward_gold,
                        reward_gold_file, reward_mode, reward_extended,
                        reward_gold_entities, reward_weights);
    if (serve->parsed()) return run_serve(serve_host, serve_port, serve_weights);
    if (synth->parsed()) return run_synthesize(sopts);
    if (stats->parsed())
      return run_stats(stats_input, stats_format, stats_fields, stats_json_flag);
    if (convert->parsed())
      return run_convert(conv_input, conv_format, conv_output, conv_fields);
  } catch (const dce::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const dce::RequestError& e) {
    std::cerr << "error [" << e.code << "]: " << e.what() << "\n";
    return kExitData;
  } catch (const dce::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
