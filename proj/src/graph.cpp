#include "mobcast/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "mobcast/dataset_io.hpp"

namespace mobcast {

std::optional<ScoreMode> parse_score_mode(std::string_view tag) {
  if (tag == "weight") return ScoreMode::kWeight;
  if (tag == "uniform") return ScoreMode::kUniform;
  return std::nullopt;
}

TransitionGraph::TransitionGraph(const TransitionGraph& other) {
  std::shared_lock lock(other.mutex_);
  nodes_ = other.nodes_;
  adjacency_ = other.adjacency_;
}

TransitionGraph& TransitionGraph::operator=(const TransitionGraph& other) {
  if (this == &other) return *this;
  std::unique_lock mine(mutex_, std::defer_lock);
  std::shared_lock theirs(other.mutex_, std::defer_lock);
  std::lock(mine, theirs);
  nodes_ = other.nodes_;
  adjacency_ = other.adjacency_;
  return *this;
}

void TransitionGraph::add_node(const std::string& id, const PoiCatalog* catalog) {
  NodeInfo& info = nodes_[id];
  if (!catalog) return;
  const auto it = catalog->find(id);
  if (it == catalog->end()) return;
  if (info.address.empty()) info.address = it->second.address;
  if (info.category.empty()) info.category = it->second.category;
}

void TransitionGraph::add_edge(const std::string& a, const std::string& b,
                               std::size_t w) {
  adjacency_[a][b] += w;
  adjacency_[b][a] += w;
}

void TransitionGraph::update_with_stays(std::span<const Stay> stays,
                                        const PoiCatalog* catalog) {
  std::unique_lock lock(mutex_);
  for (std::size_t i = 0; i < stays.size(); ++i) {
    add_node(stays[i].poi_id, catalog);
    if (i > 0 && stays[i - 1].poi_id != stays[i].poi_id) {
      add_edge(stays[i - 1].poi_id, stays[i].poi_id, 1);
    }
  }
}

void TransitionGraph::update_with_trajectory(const Session& session,
                                             const PoiCatalog* catalog) {
  update_with_stays(session.stays, catalog);
}

std::size_t TransitionGraph::weight(const std::string& a, const std::string& b) const {
  std::shared_lock lock(mutex_);
  const auto row = adjacency_.find(a);
  if (row == adjacency_.end()) return 0;
  const auto cell = row->second.find(b);
  return cell == row->second.end() ? 0 : cell->second;
}

bool TransitionGraph::has_node(const std::string& id) const {
  std::shared_lock lock(mutex_);
  return nodes_.contains(id);
}

std::optional<NodeInfo> TransitionGraph::node(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) return std::nullopt;
  return it->second;
}

std::size_t TransitionGraph::node_count() const {
  std::shared_lock lock(mutex_);
  return nodes_.size();
}

std::size_t TransitionGraph::edge_count() const {
  std::size_t directed = 0;
  std::shared_lock lock(mutex_);
  for (const auto& [_, row] : adjacency_) directed += row.size();
  return directed / 2;
}

std::map<std::pair<std::string, std::string>, std::size_t> TransitionGraph::edges()
    const {
  std::map<std::pair<std::string, std::string>, std::size_t> out;
  std::shared_lock lock(mutex_);
  for (const auto& [a, row] : adjacency_) {
    for (const auto& [b, w] : row) {
      if (a < b) out.emplace(std::pair{a, b}, w);
    }
  }
  return out;
}

std::vector<Neighbor> TransitionGraph::neighbors_ranked(
    std::span<const std::string> anchors, const std::set<std::string>& exclude,
    std::size_t limit, ScoreMode mode) const {
  if (limit == 0) throw std::invalid_argument("neighbor limit must be >= 1");
  const std::set<std::string> anchor_set(anchors.begin(), anchors.end());
  std::map<std::string, std::size_t> scores;
  {
    std::shared_lock lock(mutex_);
    for (const auto& anchor : anchor_set) {
      const auto row = adjacency_.find(anchor);
      if (row == adjacency_.end()) continue;
      for (const auto& [place, w] : row->second) {
        if (exclude.contains(place) || anchor_set.contains(place)) continue;
        scores[place] += mode == ScoreMode::kWeight ? w : 0;
      }
    }
  }
  std::vector<Neighbor> ranked;
  ranked.reserve(scores.size());
  for (const auto& [place, score] : scores) {
    ranked.push_back({place, mode == ScoreMode::kWeight ? score : 1});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Neighbor& a, const Neighbor& b) {
                     return a.score > b.score;  // map order keeps ids ascending
                   });
  if (ranked.size() > limit) ranked.resize(limit);
  return ranked;
}

void TransitionGraph::save_tsv(const std::filesystem::path& path) const {
  std::string text;
  for (const auto& [edge, w] : edges()) {
    text += fmt::format("{}\t{}\t{}\n", edge.first, edge.second, w);
  }
  write_text_atomic(path, text);
}

TransitionGraph TransitionGraph::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  TransitionGraph graph;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, w;
    if (!std::getline(fields, a, '\t') || !std::getline(fields, b, '\t') ||
        !std::getline(fields, w)) {
      throw DataError(fmt::format("{}:{}: expected a<TAB>b<TAB>weight",
                                  path.string(), line_no));
    }
    std::size_t weight = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
    if (ec != std::errc{} || ptr != w.data() + w.size() || weight == 0 || a == b) {
      throw DataError(fmt::format("{}:{}: bad edge", path.string(), line_no));
    }
    graph.nodes_[a];
    graph.nodes_[b];
    graph.add_edge(a, b, weight);
  }
  return graph;
}

bool TransitionGraph::operator==(const TransitionGraph& other) const {
  if (this == &other) return true;
  std::shared_lock mine(mutex_, std::defer_lock);
  std::shared_lock theirs(other.mutex_, std::defer_lock);
  std::lock(mine, theirs);
  return nodes_ == other.nodes_ && adjacency_ == other.adjacency_;
}

TransitionGraph init_from_training(std::span<const Session> train,
                                   const PoiCatalog* catalog) {
  TransitionGraph graph;
  for (const auto& session : train) graph.update_with_trajectory(session, catalog);
  return graph;
}

std::vector<std::string> recent_anchors(std::span<const Stay> stays, std::size_t n) {
  std::vector<std::string> anchors;
  for (auto it = stays.rbegin(); it != stays.rend() && anchors.size() < n; ++it) {
    if (std::find(anchors.begin(), anchors.end(), it->poi_id) == anchors.end()) {
      anchors.push_back(it->poi_id);
    }
  }
  return anchors;
}

std::string render_social_prompt(std::span<const Neighbor> neighbors) {
  std::string list;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (i) list += ", ";
    list += neighbors[i].place;
  }
  return "1-hop neighbor places in the social world: " +
         (list.empty() ? std::string{"(none)"} : list);
}

void update_with_trajectory(TransitionGraph& graph, const Session& session) {
  graph.update_with_trajectory(session);
}

}  // namespace mobcast
