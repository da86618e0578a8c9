#include "mobcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace mobcast {
namespace {

constexpr const char* kMetricNames[] = {"acc_at_1", "acc_at_5", "ndcg_at_5"};

void check(std::span<const RankedResult> results, std::size_t k) {
  if (results.empty()) throw std::invalid_argument("no results to average");
  if (k == 0) throw std::invalid_argument("k must be >= 1");
}

}  // namespace

std::optional<std::size_t> rank_of(const RankedResult& result) {
  const auto it =
      std::find(result.prediction.begin(), result.prediction.end(), result.target);
  if (it == result.prediction.end()) return std::nullopt;
  return static_cast<std::size_t>(it - result.prediction.begin()) + 1;
}

double acc_at_k(std::span<const RankedResult> results, std::size_t k) {
  check(results, k);
  std::size_t hits = 0;
  for (const auto& r : results) {
    const auto rank = rank_of(r);
    if (rank && *rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double ndcg_at_k(std::span<const RankedResult> results, std::size_t k) {
  check(results, k);
  double total = 0.0;
  for (const auto& r : results) {
    const auto rank = rank_of(r);
    if (rank && *rank <= k) total += 1.0 / std::log2(static_cast<double>(*rank) + 1.0);
  }
  return total / static_cast<double>(results.size());
}

MetricsReport compute_report(std::span<const RankedResult> results,
                             std::size_t n_parse_failed) {
  MetricsReport report;
  report.acc_at_1 = acc_at_k(results, 1);
  report.acc_at_5 = acc_at_k(results, 5);
  report.ndcg_at_5 = ndcg_at_k(results, 5);
  report.n_instances = results.size();
  report.n_parse_failed = n_parse_failed;
  return report;
}

nlohmann::ordered_json to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["acc_at_1"] = report.acc_at_1;
  j["acc_at_5"] = report.acc_at_5;
  j["ndcg_at_5"] = report.ndcg_at_5;
  j["n_instances"] = report.n_instances;
  j["n_parse_failed"] = report.n_parse_failed;
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport report;
  report.acc_at_1 = j.at("acc_at_1").get<double>();
  report.acc_at_5 = j.at("acc_at_5").get<double>();
  report.ndcg_at_5 = j.at("ndcg_at_5").get<double>();
  report.n_instances = j.at("n_instances").get<std::size_t>();
  report.n_parse_failed = j.value("n_parse_failed", std::size_t{0});
  return report;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summary of empty set");
  const std::vector<double> v(values.begin(), values.end());
  SummaryStats s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.range = s.max - s.min;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.q1 = quantile(v, 0.25);
  s.median = quantile(v, 0.5);
  s.q3 = quantile(v, 0.75);
  return s;
}

BiasSummary report_bias(const std::map<std::string, MetricsReport>& per_city) {
  if (per_city.size() < 2) {
    throw std::invalid_argument("bias report needs at least two cities");
  }
  BiasSummary summary;
  for (const auto& [city, report] : per_city) {
    summary.values["acc_at_1"][city] = report.acc_at_1;
    summary.values["acc_at_5"][city] = report.acc_at_5;
    summary.values["ndcg_at_5"][city] = report.ndcg_at_5;
  }
  for (const auto* metric : kMetricNames) {
    std::vector<double> column;
    for (const auto& [_, value] : summary.values[metric]) column.push_back(value);
    summary.stats[metric] = summarize(column);
  }
  return summary;
}

std::string bias_csv(const BiasSummary& summary, std::string_view prefix_header,
                     std::string_view prefix) {
  std::string out;
  if (!prefix_header.empty()) out += fmt::format("{},", prefix_header);
  out += "metric,n_cities,min,q1,median,q3,max,range,mean\n";
  for (const auto* metric : kMetricNames) {
    const auto it = summary.stats.find(metric);
    if (it == summary.stats.end()) continue;
    const SummaryStats& s = it->second;
    if (!prefix.empty()) out += fmt::format("{},", prefix);
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", metric,
                       summary.values.at(metric).size(), s.min, s.q1, s.median,
                       s.q3, s.max, s.range, s.mean);
  }
  return out;
}

nlohmann::ordered_json bias_json(const BiasSummary& summary) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto* metric : kMetricNames) {
    const auto it = summary.stats.find(metric);
    if (it == summary.stats.end()) continue;
    const SummaryStats& s = it->second;
    nlohmann::ordered_json entry;
    entry["cities"] = summary.values.at(metric);
    entry["min"] = s.min;
    entry["q1"] = s.q1;
    entry["median"] = s.median;
    entry["q3"] = s.q3;
    entry["max"] = s.max;
    entry["range"] = s.range;
    entry["mean"] = s.mean;
    j[metric] = std::move(entry);
  }
  return j;
}

}  // namespace mobcast
