// propsel: batch toolkit for proposal selection runs, composite-reward
// scoring, benchmark reports, dataset curation, and the three-role
// draft/review/implement pipeline.

#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "propsel/bench.hpp"
#include "propsel/core.hpp"
#include "propsel/curate.hpp"
#include "propsel/engine.hpp"
#include "propsel/llm.hpp"
#include "propsel/p2a.hpp"
#include "propsel/reward.hpp"
#include "propsel/service.hpp"
#include "propsel/version.hpp"

namespace {

using namespace propsel;

std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

struct BackendFlags {
  std::string spec;  // "mock:<file.json>" or an http(s) base URL
  std::string model;
  std::string api_key_env;
  double timeout_s = 120.0;
  int max_retries = 3;
  int max_in_flight = 4;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& flags, bool required = true) {
  auto* opt = cmd->add_option("--backend", flags.spec,
                              "Backend: mock:<script.json> or an OpenAI-compatible base URL");
  if (required) opt->required();
  cmd->add_option("--model", flags.model, "Model name sent to an HTTP backend");
  cmd->add_option("--api-key-env", flags.api_key_env,
                  "Environment variable holding the API key");
  cmd->add_option("--timeout", flags.timeout_s, "Per-request timeout in seconds");
  cmd->add_option("--max-retries", flags.max_retries, "Retries on transient HTTP failures");
  cmd->add_option("--max-in-flight", flags.max_in_flight, "Concurrent request bound");
}

json backend_flags_to_json(const BackendFlags& flags) {
  if (flags.spec.rfind("mock:", 0) == 0) {
    return json{{"kind", "mock"}, {"path", flags.spec.substr(5)}};
  }
  return json{{"kind", "http"},          {"base_url", flags.spec},
              {"model", flags.model},    {"api_key_env", flags.api_key_env},
              {"timeout_s", flags.timeout_s}, {"max_retries", flags.max_retries},
              {"max_in_flight", flags.max_in_flight}};
}

BackendPtr make_backend(const json& spec) {
  const std::string kind = spec.value("kind", "http");
  if (kind == "mock") {
    return MockBackend::from_file(spec.at("path").get<std::string>());
  }
  if (kind == "http") {
    BackendConfig config;
    config.base_url = spec.at("base_url").get<std::string>();
    config.api_key_env = spec.value("api_key_env", "");
    config.timeout_s = spec.value("timeout_s", 120.0);
    config.max_retries = spec.value("max_retries", 3);
    config.max_in_flight = spec.value("max_in_flight", 4);
    const std::string model = spec.value("model", "");
    if (model.empty()) {
      throw CLI::ValidationError("--model is required for an HTTP backend");
    }
    return std::make_shared<HttpBackend>(config, model);
  }
  throw CLI::ValidationError("backend kind must be 'mock' or 'http', got '" + kind + "'");
}

json manifest_for(const std::string& subcommand, const std::string& dataset_path,
                  const std::vector<std::string>& backend_names, const json& config_snapshot) {
  json manifest;
  manifest["tool"] = "propsel";
  manifest["version"] = kVersion;
  manifest["subcommand"] = subcommand;
  manifest["created_utc"] = iso_utc_now();
  manifest["dataset"] =
      json{{"path", dataset_path}, {"fnv1a64", fnv1a64_hex(read_text_file(dataset_path))}};
  manifest["backends"] = backend_names;
  manifest["config"] = config_snapshot;
  return manifest;
}

std::set<std::string> read_id_lines(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const std::string id = trim(line);
    if (!id.empty()) ids.insert(id);
  }
  return ids;
}

RewardWeights parse_weights_csv(const std::string& csv) {
  RewardWeights weights;
  double values[4];
  std::istringstream in(csv);
  std::string part;
  for (int i = 0; i < 4; ++i) {
    if (!std::getline(in, part, ',')) {
      throw CLI::ValidationError("--weights needs 4 comma-separated values");
    }
    values[i] = std::stod(part);
  }
  weights.w_sel = values[0];
  weights.w_think = values[1];
  weights.w_justi = values[2];
  weights.w_gold = values[3];
  weights.validate();
  return weights;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"propsel " + std::string(kVersion) +
               " - proposal selection, synthesis, and benchmark toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--seed", seed, "Seed for any randomized behavior")
      ->each([&](const std::string&) { seed_set = true; });

  // ---- validate ----------------------------------------------------------
  auto* validate_cmd = app.add_subcommand("validate", "Validate a dataset JSONL file");
  std::string validate_path;
  validate_cmd->add_option("dataset", validate_path, "Instance JSONL")->required();
  validate_cmd->callback([&] {
    const std::vector<ManagerInstance> instances = read_instances(validate_path);
    validate_dataset(instances);
    const DatasetStats stats = dataset_stats(instances);
    std::cout << "ok: " << stats.n_issues << " instances, " << stats.n_proposals
              << " proposals, " << format_dollars(stats.total_price.usd) << " total\n";
  });

  // ---- select ------------------------------------------------------------
  auto* select_cmd =
      app.add_subcommand("select", "Run the review backend over a dataset, one decision each");
  std::string select_dataset, select_out;
  BackendFlags select_backend;
  ManagerRunConfig select_config;
  int select_parallelism = 1;
  bool omit_timing = false;
  select_cmd->add_option("--dataset", select_dataset, "Instance JSONL")->required();
  select_cmd->add_option("--out", select_out, "Decision log JSONL to write")->required();
  add_backend_flags(select_cmd, select_backend);
  select_cmd->add_option("--temperature", select_config.temperature, "Sampling temperature");
  select_cmd->add_option("--max-parse-retries", select_config.max_parse_retries,
                         "Completions retried after a parse failure");
  select_cmd->add_option("--max-tokens", select_config.max_tokens, "Completion token budget");
  select_cmd->add_option("--parallelism", select_parallelism, "Concurrent instances");
  select_cmd->add_flag("--omit-timing", omit_timing,
                       "Write latency_ms as 0 so reruns compare byte-identical");
  select_cmd->callback([&] {
    const std::vector<ManagerInstance> instances = read_instances(select_dataset);
    validate_dataset(instances);
    select_config.model = select_backend.model;
    const json backend_spec = backend_flags_to_json(select_backend);
    const BackendPtr backend = make_backend(backend_spec);
    const std::vector<Decision> decisions =
        decide_batch(instances, backend, select_config, select_parallelism);
    write_decision_log(select_out, decisions, !omit_timing);
    std::size_t errors = 0;
    for (const Decision& d : decisions) errors += d.ok() ? 0 : 1;
    write_text_file(select_out + ".manifest.json",
                    manifest_for("select", select_dataset, {backend->name()},
                                 json{{"backend", backend_spec},
                                      {"temperature", select_config.temperature},
                                      {"max_parse_retries", select_config.max_parse_retries},
                                      {"max_tokens", select_config.max_tokens},
                                      {"parallelism", select_parallelism}})
                        .dump(2) +
                        "\n");
    std::cout << "wrote " << decisions.size() << " decisions (" << errors << " errors) to "
              << select_out << "\n";
  });

  // ---- score -------------------------------------------------------------
  auto* score_cmd = app.add_subcommand("score", "Score a run against a dataset");
  score_cmd->require_subcommand(1);
  std::string score_dataset, score_run;
  bool score_json = false, allow_partial = false;

  auto* score_manager_cmd = score_cmd->add_subcommand("manager", "Match/Earned for decisions");
  score_manager_cmd->add_option("--dataset", score_dataset, "Instance JSONL")->required();
  score_manager_cmd->add_option("--run", score_run, "Decision log JSONL")->required();
  score_manager_cmd->add_flag("--json", score_json, "Emit JSON instead of text");
  score_manager_cmd->add_flag("--allow-partial", allow_partial,
                              "Count missing decisions as non-matches instead of failing");
  score_manager_cmd->callback([&] {
    const ManagerScore score = score_manager_run(read_decision_log(score_run),
                                                 read_instances(score_dataset),
                                                 ScoreOptions{allow_partial});
    std::cout << (score_json ? manager_score_to_json(score).dump(2) + "\n"
                             : render_manager_report(score));
  });

  auto* score_ic_cmd = score_cmd->add_subcommand("ic", "Pass/Earned for verdicts");
  score_ic_cmd->add_option("--dataset", score_dataset, "Issue JSONL")->required();
  score_ic_cmd->add_option("--run", score_run, "Verdict JSONL")->required();
  score_ic_cmd->add_flag("--json", score_json, "Emit JSON instead of text");
  score_ic_cmd->add_flag("--allow-partial", allow_partial,
                         "Count missing verdicts as failures instead of erroring");
  score_ic_cmd->callback([&] {
    const ICScore score = score_ic_run(read_verdicts(score_run), read_issues(score_dataset),
                                       ScoreOptions{allow_partial});
    std::cout << (score_json ? ic_score_to_json(score).dump(2) + "\n" : render_ic_report(score));
  });

  // ---- analyze -----------------------------------------------------------
  auto* analyze_cmd = app.add_subcommand("analyze", "Bin and overlap analyses");
  analyze_cmd->require_subcommand(1);

  auto* bins_cmd = analyze_cmd->add_subcommand("bins", "Accuracy by pool size or price tier");
  std::string bins_dataset, bins_run, bins_by = "proposals", bins_csv;
  bool bins_json = false, bins_allow_partial = false;
  bins_cmd->add_option("--dataset", bins_dataset, "Instance JSONL")->required();
  bins_cmd->add_option("--run", bins_run, "Decision log JSONL")->required();
  bins_cmd->add_option("--by", bins_by, "proposals | reward")
      ->check(CLI::IsMember({"proposals", "reward"}));
  bins_cmd->add_option("--csv", bins_csv, "Also write the report as CSV to this path");
  bins_cmd->add_flag("--json", bins_json, "Emit JSON instead of text");
  bins_cmd->add_flag("--allow-partial", bins_allow_partial, "Tolerate missing decisions");
  bins_cmd->callback([&] {
    const std::vector<ManagerInstance> instances = read_instances(bins_dataset);
    const std::vector<Decision> decisions = read_decision_log(bins_run);
    const ScoreOptions options{bins_allow_partial};
    const BinReport report = bins_by == "reward"
                                 ? bin_by_reward(decisions, instances, options)
                                 : bin_by_proposal_count(decisions, instances, options);
    if (!bins_csv.empty()) write_text_file(bins_csv, render_bin_report_csv(report));
    std::cout << (bins_json ? bin_report_to_json(report).dump(2) + "\n"
                            : render_bin_report(report));
  });

  auto* overlap_cmd = analyze_cmd->add_subcommand("overlap", "Solved-set overlap of two runs");
  std::string run_a, run_b, ids_a, ids_b;
  bool overlap_json = false;
  overlap_cmd->add_option("--run-a", run_a, "Verdict JSONL for run A");
  overlap_cmd->add_option("--run-b", run_b, "Verdict JSONL for run B");
  overlap_cmd->add_option("--ids-a", ids_a, "Plain id list for set A (one per line)");
  overlap_cmd->add_option("--ids-b", ids_b, "Plain id list for set B");
  overlap_cmd->add_flag("--json", overlap_json, "Emit JSON instead of text");
  overlap_cmd->callback([&] {
    OverlapReport report;
    if (!run_a.empty() && !run_b.empty()) {
      report = selector_overlap(read_verdicts(run_a), read_verdicts(run_b));
    } else if (!ids_a.empty() && !ids_b.empty()) {
      report = overlap_analysis(read_id_lines(ids_a), read_id_lines(ids_b));
    } else {
      throw CLI::ValidationError("pass either --run-a/--run-b or --ids-a/--ids-b");
    }
    std::cout << (overlap_json ? overlap_to_json(report).dump(2) + "\n"
                               : render_overlap_report(report));
  });

  // ---- reward ------------------------------------------------------------
  auto* reward_cmd = app.add_subcommand("reward", "Composite reward scoring");
  reward_cmd->require_subcommand(1);

  auto* reward_score_cmd = reward_cmd->add_subcommand("score", "Score one response offline");
  std::string response_path, reference_path, weights_csv;
  int n_candidates = 0;
  reward_score_cmd->add_option("--response", response_path, "File with the raw response text")
      ->required();
  reward_score_cmd->add_option("--n-candidates", n_candidates, "Candidate count")->required();
  reward_score_cmd->add_option("--reference", reference_path, "Reference annotation JSON")
      ->required();
  reward_score_cmd->add_option("--weights", weights_csv, "w_sel,w_think,w_justi,w_gold");
  reward_score_cmd->callback([&] {
    const ReferenceAnnotation reference =
        reference_from_json(json::parse(read_text_file(reference_path)));
    const RewardWeights weights =
        weights_csv.empty() ? RewardWeights{} : parse_weights_csv(weights_csv);
    const RewardBreakdown breakdown = composite_reward_from_text(
        read_text_file(response_path), n_candidates, reference, weights);
    std::cout << reward_to_json(breakdown).dump(2) << "\n";
  });

  auto* serve_cmd = reward_cmd->add_subcommand("serve", "HTTP scoring service");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8787;
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--port", serve_port, "Port");
  serve_cmd->callback([&] {
    RewardService service;
    std::cout << "scoring service listening on http://" << serve_host << ":" << serve_port
              << " (POST /score, /score_batch)\n"
              << std::flush;
    if (!service.listen(serve_host, serve_port)) {
      throw std::runtime_error("cannot bind " + serve_host + ":" + std::to_string(serve_port));
    }
  });

  // ---- curate ------------------------------------------------------------
  auto* curate_cmd = app.add_subcommand("curate", "Dataset curation and annotation");
  curate_cmd->require_subcommand(1);

  auto* sample_cmd = curate_cmd->add_subcommand("sample-size", "Finite-population sample size");
  long long population = 0;
  double margin = 0.05, confidence = 0.95;
  sample_cmd->add_option("--population", population, "Population size")->required();
  sample_cmd->add_option("--margin", margin, "Margin of error in (0,1)");
  sample_cmd->add_option("--confidence", confidence, "0.90 | 0.95 | 0.99");
  sample_cmd->callback(
      [&] { std::cout << required_sample_size(population, margin, confidence) << "\n"; });

  auto* leakage_cmd =
      curate_cmd->add_subcommand("filter-leakage", "Drop training instances that appear in "
                                                   "benchmark sets (by id or repo#issue)");
  std::string train_path, filtered_out, report_out;
  std::vector<std::string> benchmark_paths;
  leakage_cmd->add_option("--train", train_path, "Training instance JSONL")->required();
  leakage_cmd->add_option("--benchmark", benchmark_paths, "Benchmark JSONL (repeatable)")
      ->required();
  leakage_cmd->add_option("--out", filtered_out, "Filtered JSONL to write")->required();
  leakage_cmd->add_option("--report", report_out, "Removal report JSON");
  leakage_cmd->callback([&] {
    LeakageKeys keys;
    for (const std::string& path : benchmark_paths) {
      keys.merge(LeakageKeys::from_issues(read_issues(path)));
    }
    const auto [kept, report] = filter_leakage(read_instances(train_path), keys);
    write_instances(filtered_out, kept);
    if (!report_out.empty()) {
      write_text_file(report_out, leakage_report_to_json(report).dump(2) + "\n");
    }
    std::cout << "removed " << report.removed_ids.size() << ", kept " << report.n_kept << "\n";
  });

  auto* annotate_cmd = curate_cmd->add_subcommand(
      "annotate", "Generate decision-consistent supervision targets with a teacher backend");
  std::string annotate_dataset, annotate_out;
  BackendFlags teacher_backend;
  ManagerRunConfig teacher_config;
  int annotate_parallelism = 1;
  annotate_cmd->add_option("--dataset", annotate_dataset, "Instance JSONL")->required();
  annotate_cmd->add_option("--out", annotate_out, "Annotated JSONL to write")->required();
  add_backend_flags(annotate_cmd, teacher_backend);
  annotate_cmd->add_option("--temperature", teacher_config.temperature, "Sampling temperature");
  annotate_cmd->add_option("--max-parse-retries", teacher_config.max_parse_retries,
                           "Completions retried per instance");
  annotate_cmd->add_option("--max-tokens", teacher_config.max_tokens, "Completion token budget");
  annotate_cmd->add_option("--parallelism", annotate_parallelism, "Concurrent instances");
  annotate_cmd->callback([&] {
    const std::vector<ManagerInstance> instances = read_instances(annotate_dataset);
    validate_dataset(instances);
    teacher_config.model = teacher_backend.model;
    const json backend_spec = backend_flags_to_json(teacher_backend);
    const BackendPtr teacher = make_backend(backend_spec);
    std::vector<std::string> failed;
    const std::vector<AnnotatedInstance> annotated =
        build_sft_targets(instances, teacher, teacher_config, annotate_parallelism, &failed);
    write_annotated(annotate_out, annotated);
    write_text_file(annotate_out + ".manifest.json",
                    manifest_for("curate annotate", annotate_dataset, {teacher->name()},
                                 json{{"backend", backend_spec},
                                      {"temperature", teacher_config.temperature},
                                      {"max_parse_retries", teacher_config.max_parse_retries},
                                      {"parallelism", annotate_parallelism}})
                        .dump(2) +
                        "\n");
    for (const std::string& id : failed) std::cerr << "[warn] annotation failed: " << id << "\n";
    std::cout << "annotated " << annotated.size() << "/" << instances.size() << " instances\n";
    if (annotated.empty() && !instances.empty()) {
      throw std::runtime_error("every annotation attempt failed");
    }
  });

  auto* stats_cmd = curate_cmd->add_subcommand("stats", "Dataset and prompt-length statistics");
  std::string stats_dataset;
  bool stats_json = false;
  stats_cmd->add_option("--dataset", stats_dataset, "Instance JSONL")->required();
  stats_cmd->add_flag("--json", stats_json, "Emit JSON instead of text");
  stats_cmd->callback([&] {
    const std::vector<ManagerInstance> instances = read_instances(stats_dataset);
    const DatasetStats stats = dataset_stats(instances);
    const TokenLengthStats lengths = token_length_stats(instances);
    json histogram = json::object();
    for (const auto& [n, count] : stats.proposal_count_histogram) {
      histogram[std::to_string(n)] = count;
    }
    const json out = {{"n_issues", stats.n_issues},
                      {"n_proposals", stats.n_proposals},
                      {"total_price_usd", stats.total_price.usd},
                      {"proposal_count_histogram", histogram},
                      {"prompt_tokens",
                       {{"mean", lengths.mean}, {"median", lengths.median}, {"p90", lengths.p90}}}};
    if (stats_json) {
      std::cout << out.dump(2) << "\n";
    } else {
      std::cout << "issues:    " << stats.n_issues << "\n"
                << "proposals: " << stats.n_proposals << "\n"
                << "total:     " << format_dollars(stats.total_price.usd) << "\n"
                << "prompt tokens (whitespace): mean " << lengths.mean << ", median "
                << lengths.median << ", p90 " << lengths.p90 << "\n";
    }
  });

  auto* tally_cmd = curate_cmd->add_subcommand("tally", "Tally selection-rationale tags");
  std::string tags_path;
  bool tally_json = false;
  tally_cmd->add_option("--tags", tags_path, "JSONL of {\"criterion\": str}")->required();
  tally_cmd->add_flag("--json", tally_json, "Emit JSON instead of text");
  tally_cmd->callback([&] {
    std::vector<SelectionRationale> tags;
    for (const json& record : read_jsonl(tags_path)) {
      tags.push_back(
          SelectionRationale::make(criterion_from_string(record.at("criterion"))));
    }
    const RationaleTally tally = tally_rationales(tags);
    std::cout << (tally_json ? tally_to_json(tally).dump(2) + "\n" : render_tally(tally));
  });

  // ---- p2a ---------------------------------------------------------------
  auto* p2a_cmd = app.add_subcommand("p2a", "Draft/review/implement pipeline");
  p2a_cmd->require_subcommand(1);
  auto* p2a_run_cmd = p2a_cmd->add_subcommand("run", "Run the pipeline over an issue dataset");
  std::string p2a_dataset, p2a_workspaces, p2a_out, p2a_config_path;
  std::vector<std::string> proposal_specs;
  std::string manager_spec, impl_spec;
  int p2a_parallelism = 1;
  bool shuffle_pool = false;
  AgentLimits limits;
  p2a_run_cmd->add_option("--dataset", p2a_dataset, "Issue JSONL")->required();
  p2a_run_cmd->add_option("--workspaces", p2a_workspaces,
                          "Directory with one checkout per issue id")
      ->required();
  p2a_run_cmd->add_option("--out", p2a_out, "Output directory")->required();
  p2a_run_cmd->add_option("--config", p2a_config_path, "JSON config; flags win over it");
  p2a_run_cmd->add_option("--proposal-backend", proposal_specs,
                          "Proposal backend spec (repeat; at least 2)");
  p2a_run_cmd->add_option("--manager-backend", manager_spec, "Review backend spec");
  p2a_run_cmd->add_option("--impl-backend", impl_spec, "Implementation backend spec");
  p2a_run_cmd->add_option("--parallelism", p2a_parallelism, "Concurrent issues");
  p2a_run_cmd->add_option("--max-steps", limits.max_steps, "Agent step budget");
  p2a_run_cmd->add_option("--command-timeout", limits.command_timeout_s,
                          "Per-command timeout in seconds");
  p2a_run_cmd->add_option("--max-obs-chars", limits.max_observation_chars,
                          "Observation truncation limit");
  p2a_run_cmd->add_flag("--shuffle-pool", shuffle_pool,
                        "Shuffle pool order before review (seeded by --seed)");
  p2a_run_cmd->callback([&] {
    json config_json = json::object();
    if (!p2a_config_path.empty()) config_json = json::parse(read_text_file(p2a_config_path));
    auto spec_to_json = [](const std::string& spec) {
      BackendFlags flags;
      flags.spec = spec;
      return backend_flags_to_json(flags);
    };
    json proposal_json = config_json.value("proposal_backends", json::array());
    if (!proposal_specs.empty()) {
      proposal_json = json::array();
      for (const std::string& spec : proposal_specs) proposal_json.push_back(spec_to_json(spec));
    }
    json manager_json = config_json.value("manager_backend", json());
    if (!manager_spec.empty()) manager_json = spec_to_json(manager_spec);
    json impl_json = config_json.value("implementation_backend", json());
    if (!impl_spec.empty()) impl_json = spec_to_json(impl_spec);
    if (proposal_json.size() < 2 || manager_json.is_null() || impl_json.is_null()) {
      throw CLI::ValidationError(
          "p2a run needs >= 2 proposal backends, a manager backend, and an impl backend "
          "(via flags or --config)");
    }

    P2AConfig config;
    for (const json& spec : proposal_json) config.proposal_backends.push_back(make_backend(spec));
    config.manager_backend = make_backend(manager_json);
    config.implementation_backend = make_backend(impl_json);
    config.agent_limits = limits;
    if (config_json.contains("agent_limits")) {
      const json& l = config_json["agent_limits"];
      if (!p2a_run_cmd->count("--max-steps")) {
        config.agent_limits.max_steps = l.value("max_steps", limits.max_steps);
      }
      if (!p2a_run_cmd->count("--command-timeout")) {
        config.agent_limits.command_timeout_s =
            l.value("command_timeout_s", limits.command_timeout_s);
      }
      if (!p2a_run_cmd->count("--max-obs-chars")) {
        config.agent_limits.max_observation_chars =
            l.value("max_observation_chars", limits.max_observation_chars);
      }
    }
    if (config_json.contains("manager_config")) {
      const json& m = config_json["manager_config"];
      config.manager_config.temperature = m.value("temperature", 0.0);
      config.manager_config.max_parse_retries = m.value("max_parse_retries", 2);
      config.manager_config.max_tokens = m.value("max_tokens", 4096);
      config.manager_config.model = m.value("model", "");
    }
    if (shuffle_pool || config_json.value("shuffle_pool", false)) {
      config.pool_shuffle_seed = seed_set ? seed : 0;
    }

    const std::vector<IssueRecord> issues = read_issues(p2a_dataset);
    std::vector<std::filesystem::path> workspaces;
    workspaces.reserve(issues.size());
    for (const IssueRecord& issue : issues) {
      workspaces.push_back(std::filesystem::path(p2a_workspaces) / issue.id);
    }
    const std::vector<P2AResult> results =
        run_p2a_batch(issues, workspaces, config, p2a_parallelism);
    write_p2a_outputs(results, issues, p2a_out);

    std::vector<std::string> backend_names;
    for (const BackendPtr& b : config.proposal_backends) backend_names.push_back(b->name());
    backend_names.push_back(config.manager_backend->name());
    backend_names.push_back(config.implementation_backend->name());
    write_text_file(
        std::filesystem::path(p2a_out) / "run_manifest.json",
        manifest_for("p2a run", p2a_dataset, backend_names,
                     json{{"proposal_backends", proposal_json},
                          {"manager_backend", manager_json},
                          {"implementation_backend", impl_json},
                          {"parallelism", p2a_parallelism},
                          {"max_steps", config.agent_limits.max_steps},
                          {"command_timeout_s", config.agent_limits.command_timeout_s},
                          {"max_observation_chars", config.agent_limits.max_observation_chars},
                          {"shuffle_pool", config.pool_shuffle_seed.has_value()}})
            .dump(2) +
            "\n");
    std::size_t patched = 0;
    for (const P2AResult& r : results) patched += r.status == P2AStatus::patched ? 1 : 0;
    std::cout << "p2a: " << patched << "/" << results.size() << " patched; outputs in " << p2a_out
              << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "[error] " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(argc, argv); }
