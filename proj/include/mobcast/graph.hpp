#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mobcast/trajectory.hpp"

namespace mobcast {

struct NodeInfo {
  std::string address;
  std::string category;
  bool operator==(const NodeInfo&) const = default;
};

enum class ScoreMode {
  kWeight,   // summed edge weight to the anchors
  kUniform,  // every neighbor scores 1
};

std::optional<ScoreMode> parse_score_mode(std::string_view tag);

struct Neighbor {
  std::string place;
  std::size_t score = 0;
  bool operator==(const Neighbor&) const = default;
};

// Undirected weighted location graph. Consecutive distinct stays add 1 to the
// weight of their edge; self-transitions are ignored.
//
// Writers take an exclusive lock, queries a shared one.
class TransitionGraph {
 public:
  TransitionGraph() = default;
  TransitionGraph(const TransitionGraph& other);
  TransitionGraph& operator=(const TransitionGraph& other);

  void update_with_trajectory(const Session& session,
                              const PoiCatalog* catalog = nullptr);
  void update_with_stays(std::span<const Stay> stays,
                         const PoiCatalog* catalog = nullptr);

  std::size_t weight(const std::string& a, const std::string& b) const;
  bool has_node(const std::string& id) const;
  std::optional<NodeInfo> node(const std::string& id) const;
  std::size_t node_count() const;
  std::size_t edge_count() const;

  // Each undirected edge once, as (smaller id, larger id) -> weight.
  std::map<std::pair<std::string, std::string>, std::size_t> edges() const;

  // Union of 1-hop neighbors of `anchors`, minus `exclude` and the anchors
  // themselves, ranked by score then id. Throws std::invalid_argument when
  // limit is 0.
  std::vector<Neighbor> neighbors_ranked(std::span<const std::string> anchors,
                                         const std::set<std::string>& exclude,
                                         std::size_t limit,
                                         ScoreMode mode = ScoreMode::kWeight) const;

  // Tab-separated "a\tb\tweight" lines, one per undirected edge.
  void save_tsv(const std::filesystem::path& path) const;
  static TransitionGraph load_tsv(const std::filesystem::path& path);

  bool operator==(const TransitionGraph& other) const;

 private:
  void add_node(const std::string& id, const PoiCatalog* catalog);
  void add_edge(const std::string& a, const std::string& b, std::size_t w);

  mutable std::shared_mutex mutex_;
  std::map<std::string, NodeInfo> nodes_;
  std::map<std::string, std::map<std::string, std::size_t>> adjacency_;
};

TransitionGraph init_from_training(std::span<const Session> train,
                                   const PoiCatalog* catalog = nullptr);

// Last `n` distinct locations of `stays`, most recent first.
std::vector<std::string> recent_anchors(std::span<const Stay> stays, std::size_t n);

std::string render_social_prompt(std::span<const Neighbor> neighbors);

void update_with_trajectory(TransitionGraph& graph, const Session& session);

}  // namespace mobcast
