#include "mobcast/evaluation.hpp"

#include <fstream>
#include <map>
#include <memory>

#include <fmt/format.h>

namespace mobcast {
namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

struct RunPlan {
  Method method;
  std::optional<AblationConfig> ablation;
};

std::vector<RunPlan> plan_runs(const RunSpec& spec) {
  std::vector<RunPlan> plans;
  for (const Method method : spec.methods) {
    if (method == Method::kAgentMove) {
      for (const auto& ablation : spec.ablations) plans.push_back({method, ablation});
    } else {
      plans.push_back({method, std::nullopt});
    }
  }
  if (plans.empty()) throw std::invalid_argument("run spec has no methods");
  return plans;
}

// run key -> instance id -> checkpointed record.
using Checkpoint = std::map<std::string, std::map<std::string, ordered_json>>;

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Checkpoint checkpoint;
  if (!std::filesystem::exists(path)) return checkpoint;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    // A torn final line from an interrupted write is skipped.
    ordered_json record = ordered_json::parse(line, nullptr, false);
    if (!record.is_object() || !record.contains("run") ||
        !record.contains("record")) {
      continue;
    }
    const auto run = record["run"].get<std::string>();
    const auto id = record["record"]["instance_id"].get<std::string>();
    checkpoint[run][id] = std::move(record["record"]);
  }
  return checkpoint;
}

ordered_json prediction_record(const std::string& city, const TestInstance& instance,
                               const RunPlan& plan, const Prediction& prediction) {
  ordered_json r;
  r["instance_id"] = instance.instance_id;
  r["user"] = instance.user_id;
  r["city"] = city;
  r["method"] = std::string{to_string(plan.method)};
  r["ablation"] = plan.ablation ? ordered_json(plan.ablation->tag()) : ordered_json();
  r["prediction"] = prediction.result.prediction;
  r["reason"] = prediction.result.reason;
  r["target"] = instance.target_poi;
  r["parse_failed"] = prediction.parse_failed;
  r["prompt_chars"] = prediction.prompt_chars;
  if (prediction.parse_failed && !prediction.raw_output.empty()) {
    r["raw_output"] = prediction.raw_output;
  }
  return r;
}

class Runner {
 public:
  Runner(const RunSpec& spec, const LoadedDataset& dataset, ChatProvider& llm)
      : spec_(spec), dataset_(dataset), llm_(llm) {
    options_.neighbor_limit = spec.config.neighbor_limit;
    options_.neighbor_anchors = spec.config.neighbor_anchors;
    options_.social_score = spec.config.social_score;
    options_.memory.top_k = spec.config.memory_top_k;
    options_.memory.per_session_transitions = spec.config.per_session_transitions;
    options_.memory.prompt_budget_chars = spec.config.memory_budget;
  }

  EvaluationOutcome run() {
    std::filesystem::create_directories(spec_.out_dir);
    InstanceOptions io;
    io.context_k = spec_.config.context_k;
    io.history_len = spec_.config.history_len;
    io.sample_n = spec_.sample_n;
    io.seed = spec_.seed;
    io.min_test_sessions = dataset_.profile.min_test_sessions;
    io.max_test_sessions = dataset_.profile.max_test_sessions;
    instances_ = build_test_instances(dataset_.split, io);
    if (instances_.empty()) throw DataError("run has no test instances");

    const auto checkpoint_path = spec_.out_dir / kCheckpointFile;
    checkpoint_ = read_checkpoint(checkpoint_path);
    checkpoint_out_.open(checkpoint_path, std::ios::app);
    if (!checkpoint_out_) {
      throw std::runtime_error(
          fmt::format("cannot append to '{}'", checkpoint_path.string()));
    }

    EvaluationOutcome outcome;
    std::string predictions;
    ordered_json runs = ordered_json::array();
    for (const auto& plan : plan_runs(spec_)) {
      std::vector<ordered_json> records;
      RunSummary summary;
      if (!run_one(plan, records, summary)) {
        outcome.interrupted = true;
        return outcome;
      }
      for (const auto& r : records) predictions += r.dump() + "\n";
      ordered_json entry;
      entry["city"] = spec_.city;
      entry["method"] = std::string{to_string(plan.method)};
      entry["ablation"] = plan.ablation ? ordered_json(plan.ablation->tag()) : ordered_json();
      entry["metrics"] = to_json(summary.metrics);
      entry["n_errors"] = summary.n_errors;
      runs.push_back(std::move(entry));
      outcome.runs.push_back(std::move(summary));
    }
    ordered_json metrics;
    metrics["sample_n"] = spec_.sample_n;
    metrics["seed"] = spec_.seed;
    metrics["provider"] = llm_.name();
    metrics["runs"] = std::move(runs);
    write_text_atomic(spec_.out_dir / kPredictionsFile, predictions);
    write_text_atomic(spec_.out_dir / kMetricsFile, metrics.dump(2) + "\n");
    return outcome;
  }

 private:
  bool run_one(const RunPlan& plan, std::vector<ordered_json>& records,
               RunSummary& summary) {
    const std::string key = run_key(spec_.city, plan.method, plan.ablation);
    auto& done = checkpoint_[key];
    summary.city = spec_.city;
    summary.method = plan.method;
    summary.ablation = plan.ablation;

    const bool collective = plan.ablation && plan.ablation->use_collective;
    TransitionGraph graph;
    if (collective && spec_.config.graph_init_from_train) {
      graph = init_from_training(dataset_.split.train, &dataset_.catalog);
    }
    std::unique_ptr<ReverseGeocoder> geocoder;
    std::unique_ptr<WorldKnowledge> world;
    if (plan.ablation && plan.ablation->use_world) {
      geocoder = std::make_unique<ReverseGeocoder>(spec_.config.geocoder,
                                                   make_http_client());
      world = std::make_unique<WorldKnowledge>(
          geocoder.get(), llm_, WorldOptions{spec_.config.explore_num});
    }
    std::optional<MarkovModel> markov;
    if (plan.method == Method::kMarkov) markov = MarkovModel::fit(dataset_.split.train);
    MemoryPool pool;
    const AgentMoveContext context{&dataset_.catalog, &pool, &graph, world.get()};

    std::vector<RankedResult> scored;
    std::size_t parse_failed = 0;
    for (const auto& instance : instances_) {
      ordered_json record;
      if (const auto it = done.find(instance.instance_id); it != done.end()) {
        record = it->second;
        ++summary.n_resumed;
      } else {
        if (spec_.stop_after && fresh_ >= *spec_.stop_after) return false;
        try {
          const Prediction prediction = predict(plan, instance, context, markov);
          record = prediction_record(spec_.city, instance, plan, prediction);
          ordered_json line;
          line["run"] = key;
          line["record"] = record;
          checkpoint_out_ << line.dump() << '\n';
          checkpoint_out_.flush();
        } catch (const ProviderUnavailable& e) {
          ++summary.n_errors;
          if (static_cast<double>(summary.n_errors) >
              spec_.config.failure_budget * static_cast<double>(instances_.size())) {
            throw EvaluationAborted(fmt::format(
                "{}: {} provider failures exceed the failure budget ({}); last: {}",
                key, summary.n_errors, spec_.config.failure_budget, e.what()));
          }
          record = prediction_record(spec_.city, instance, plan, Prediction{});
          record["error"] = e.what();
        }
        ++fresh_;
      }
      records.push_back(record);
      if (collective) graph.update_with_stays(instance.context, &dataset_.catalog);

      RankedResult result;
      result.prediction = record["prediction"].get<std::vector<std::string>>();
      result.target = instance.target_poi;
      if (record["parse_failed"].get<bool>()) ++parse_failed;
      scored.push_back(std::move(result));
    }
    summary.metrics = compute_report(scored, parse_failed);
    return true;
  }

  Prediction predict(const RunPlan& plan, const TestInstance& instance,
                     const AgentMoveContext& context,
                     const std::optional<MarkovModel>& markov) {
    switch (plan.method) {
      case Method::kAgentMove:
        return predict_agentmove(instance, context, llm_, *plan.ablation, options_);
      case Method::kLlmZs: return predict_llm_zs(instance, llm_);
      case Method::kLlmMob: return predict_llm_mob(instance, llm_);
      case Method::kMarkov: return predict_markov(instance, *markov);
    }
    throw std::logic_error("unhandled method");
  }

  const RunSpec& spec_;
  const LoadedDataset& dataset_;
  ChatProvider& llm_;
  PredictorOptions options_;
  std::vector<TestInstance> instances_;
  Checkpoint checkpoint_;
  std::ofstream checkpoint_out_;
  std::size_t fresh_ = 0;
};

}  // namespace

std::string run_key(const std::string& city, Method method,
                    const std::optional<AblationConfig>& ablation) {
  if (ablation) return fmt::format("{}/{}/{}", city, to_string(method), ablation->tag());
  return fmt::format("{}/{}", city, to_string(method));
}

EvaluationOutcome run_evaluation(const RunSpec& spec, const LoadedDataset& dataset,
                                 ChatProvider* provider) {
  if (spec.sample_n == 0) throw std::invalid_argument("sample_n must be >= 1");
  std::unique_ptr<ChatProvider> owned;
  if (!provider) {
    owned = make_provider(spec.provider_tag, apply_provider_env(spec.config.provider));
    provider = owned.get();
  }
  Runner runner(spec, dataset, *provider);
  return runner.run();
}

EvaluationOutcome run_evaluation(const RunSpec& spec, ChatProvider* provider) {
  const LoadedDataset dataset = read_dataset(spec.dataset_dir);
  return run_evaluation(spec, dataset, provider);
}

std::vector<CollectedRun> collect_runs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == kMetricsFile) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<CollectedRun> runs;
  for (const auto& file : files) {
    const json doc = json::parse(read_text(file), nullptr, false);
    if (!doc.is_object() || !doc.contains("runs")) {
      throw DataError(fmt::format("'{}' is not a metrics file", file.string()));
    }
    for (const auto& run : doc["runs"]) {
      CollectedRun c;
      c.source = file;
      c.city = run.at("city").get<std::string>();
      c.method = run.at("method").get<std::string>();
      c.ablation = run.at("ablation").is_string() ? run["ablation"].get<std::string>()
                                                  : "";
      c.metrics = metrics_from_json(run.at("metrics"));
      runs.push_back(std::move(c));
    }
  }
  return runs;
}

BiasReportFiles build_bias_report(const std::vector<CollectedRun>& runs) {
  std::map<std::pair<std::string, std::string>, std::map<std::string, MetricsReport>>
      groups;
  for (const auto& run : runs) {
    groups[{run.method, run.ablation}][run.city] = run.metrics;
  }
  BiasReportFiles files;
  files.json = ordered_json::array();
  bool header = true;
  for (const auto& [group, per_city] : groups) {
    if (per_city.size() < 2) continue;
    const BiasSummary summary = report_bias(per_city);
    const std::string prefix = fmt::format("{},{}", group.first, group.second);
    std::string csv = bias_csv(summary, "method,ablation", prefix);
    if (!header) csv.erase(0, csv.find('\n') + 1);
    header = false;
    files.csv += csv;
    ordered_json entry;
    entry["method"] = group.first;
    entry["ablation"] = group.second;
    entry["metrics"] = bias_json(summary);
    files.json.push_back(std::move(entry));
    ++files.groups;
  }
  if (files.groups == 0) {
    throw std::invalid_argument(
        "bias report needs a method/ablation evaluated on at least two cities");
  }
  return files;
}

}  // namespace mobcast
