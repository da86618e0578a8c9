#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobcast/config.hpp"
#include "mobcast/dataset_io.hpp"
#include "mobcast/metrics.hpp"
#include "mobcast/predictor.hpp"

namespace mobcast {

// Raised when provider failures exceed the failure budget. The checkpoint
// file is left in place so the run can be resumed.
class EvaluationAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunSpec {
  std::filesystem::path dataset_dir;
  std::string city = "city";
  std::vector<Method> methods{Method::kAgentMove};
  // Applied to agentmove only.
  std::vector<AblationConfig> ablations{AblationConfig{}};
  std::string provider_tag = "mock:frequency-oracle";
  std::size_t sample_n = 200;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  RunConfig config;
  // Stop after this many newly predicted instances, leaving only the
  // checkpoint behind (used to exercise resume).
  std::optional<std::size_t> stop_after;
};

struct RunSummary {
  std::string city;
  Method method = Method::kAgentMove;
  std::optional<AblationConfig> ablation;  // agentmove only
  MetricsReport metrics;
  std::size_t n_errors = 0;
  std::size_t n_resumed = 0;
};

struct EvaluationOutcome {
  std::vector<RunSummary> runs;
  bool interrupted = false;
};

inline constexpr const char* kPredictionsFile = "predictions.jsonl";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kCheckpointFile = "checkpoint.jsonl";

// Runs every (method, ablation) pair over the same seeded instance sample.
// `provider` overrides spec.provider_tag when given.
EvaluationOutcome run_evaluation(const RunSpec& spec,
                                 ChatProvider* provider = nullptr);

// Same, over an in-memory dataset; spec.dataset_dir is ignored.
EvaluationOutcome run_evaluation(const RunSpec& spec, const LoadedDataset& dataset,
                                 ChatProvider* provider = nullptr);

// "city/method" or "city/agentmove/<ablation tag>".
std::string run_key(const std::string& city, Method method,
                    const std::optional<AblationConfig>& ablation);

struct CollectedRun {
  std::filesystem::path source;
  std::string city;
  std::string method;
  std::string ablation;  // "" for baselines
  MetricsReport metrics;
};

// Every run listed in metrics.json files under `dir` (recursive).
std::vector<CollectedRun> collect_runs(const std::filesystem::path& dir);

struct BiasReportFiles {
  std::string csv;
  nlohmann::ordered_json json;
  std::size_t groups = 0;
};

// Groups runs by method and ablation; groups spanning at least two cities get
// a bias summary. Throws std::invalid_argument when no group qualifies.
BiasReportFiles build_bias_report(const std::vector<CollectedRun>& runs);

}  // namespace mobcast
