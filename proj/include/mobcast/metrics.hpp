#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace mobcast {

struct RankedResult {
  std::vector<std::string> prediction;  // empty for a parse failure
  std::string target;
};

// 1-based rank of the target, nullopt when absent.
std::optional<std::size_t> rank_of(const RankedResult& result);

// Both throw std::invalid_argument on empty input or k == 0.
double acc_at_k(std::span<const RankedResult> results, std::size_t k);
double ndcg_at_k(std::span<const RankedResult> results, std::size_t k);

struct MetricsReport {
  double acc_at_1 = 0.0;
  double acc_at_5 = 0.0;
  double ndcg_at_5 = 0.0;
  std::size_t n_instances = 0;
  std::size_t n_parse_failed = 0;
};

MetricsReport compute_report(std::span<const RankedResult> results,
                             std::size_t n_parse_failed);

nlohmann::ordered_json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

// Linear interpolation between order statistics: h = (n - 1) p.
double quantile(std::vector<double> values, double p);

struct SummaryStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double range = 0.0;
  double mean = 0.0;
};

SummaryStats summarize(std::span<const double> values);

struct BiasSummary {
  // metric name -> city -> value
  std::map<std::string, std::map<std::string, double>> values;
  std::map<std::string, SummaryStats> stats;
};

// Box-plot statistics of each metric across cities. Throws
// std::invalid_argument with fewer than two cities.
BiasSummary report_bias(const std::map<std::string, MetricsReport>& per_city);

// Header: metric,n_cities,min,q1,median,q3,max,range,mean
std::string bias_csv(const BiasSummary& summary, std::string_view prefix_header = {},
                     std::string_view prefix = {});
nlohmann::ordered_json bias_json(const BiasSummary& summary);

}  // namespace mobcast
