#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mobcast/graph.hpp"
#include "test_support.hpp"

namespace mobcast {
namespace {

using testing::session_of;
using Edges = std::map<std::pair<std::string, std::string>, std::size_t>;

TEST(Graph, InitExamples) {
  const std::vector<Session> train{session_of({"A", "B", "C"}), session_of({"B", "C"})};
  EXPECT_EQ(init_from_training(train).edges(),
            (Edges{{{"A", "B"}, 1}, {{"B", "C"}, 2}}));
  EXPECT_EQ(init_from_training(std::vector{session_of({"A", "A", "B"})}).edges(),
            (Edges{{{"A", "B"}, 1}}));
  const auto empty = init_from_training({});
  EXPECT_EQ(empty.node_count(), 0u);
  EXPECT_EQ(empty.edge_count(), 0u);
}

TEST(Graph, SingleStayUpdateAddsNodeOnly) {
  TransitionGraph g;
  update_with_trajectory(g, session_of({"A"}));
  EXPECT_TRUE(g.has_node("A"));
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Graph, NodeAttributesFromCatalog) {
  PoiCatalog catalog;
  catalog["A"] = Poi{"A", "Cafe", std::nullopt, "1 Main St"};
  TransitionGraph g;
  g.update_with_trajectory(session_of({"A", "B"}), &catalog);
  EXPECT_EQ(g.node("A")->category, "Cafe");
  EXPECT_EQ(g.node("A")->address, "1 Main St");
  EXPECT_EQ(g.node("B")->category, "");
  EXPECT_FALSE(g.node("Z"));
}

TEST(Graph, NeighborExamples) {
  TransitionGraph g = init_from_training(
      std::vector{session_of({"A", "B", "A", "C"})});  // A-B:2, A-C:1
  const std::vector<std::string> a{"A"};
  EXPECT_EQ(g.neighbors_ranked(a, {}, 10),
            (std::vector<Neighbor>{{"B", 2}, {"C", 1}}));
  EXPECT_EQ(g.neighbors_ranked(a, {"B"}, 10), (std::vector<Neighbor>{{"C", 1}}));
  const std::vector<std::string> x{"X"};
  EXPECT_TRUE(g.neighbors_ranked(x, {}, 10).empty());
  EXPECT_EQ(g.neighbors_ranked(a, {}, 1).size(), 1u);
  EXPECT_THROW(g.neighbors_ranked(a, {}, 0), std::invalid_argument);
  EXPECT_EQ(g.neighbors_ranked(a, {}, 10, ScoreMode::kUniform),
            (std::vector<Neighbor>{{"B", 1}, {"C", 1}}));
}

TEST(Graph, NeighborScoresSumOverAnchors) {
  TransitionGraph g = init_from_training(
      std::vector{session_of({"A", "C", "B", "C", "A", "D"})});
  const std::vector<std::string> anchors{"A", "B"};
  // C: A-C 2 + B-C 2; D: 1. Anchors never appear.
  EXPECT_EQ(g.neighbors_ranked(anchors, {}, 10),
            (std::vector<Neighbor>{{"C", 4}, {"D", 1}}));
}

TEST(Graph, RenderSocial) {
  const std::vector<Neighbor> n{{"B", 2}, {"C", 1}};
  EXPECT_EQ(render_social_prompt(n), "1-hop neighbor places in the social world: B, C");
  EXPECT_EQ(render_social_prompt({}), "1-hop neighbor places in the social world: (none)");
}

TEST(Graph, RecentAnchors) {
  const auto s = session_of({"A", "B", "A", "C", "C"});
  EXPECT_EQ(recent_anchors(s.stays, 3), (std::vector<std::string>{"C", "A", "B"}));
  EXPECT_EQ(recent_anchors(s.stays, 1), (std::vector<std::string>{"C"}));
}

TEST(Graph, TsvRoundTrip) {
  testing::TempDir dir;
  const auto g = init_from_training(std::vector{session_of({"A", "B", "C", "A"})});
  g.save_tsv(dir / "graph.tsv");
  EXPECT_EQ(TransitionGraph::load_tsv(dir / "graph.tsv").edges(), g.edges());
  testing::write_file(dir / "bad.tsv", "A\tA\t1\n");
  EXPECT_THROW(TransitionGraph::load_tsv(dir / "bad.tsv"), DataError);
  testing::write_file(dir / "bad2.tsv", "A\tB\n");
  EXPECT_THROW(TransitionGraph::load_tsv(dir / "bad2.tsv"), DataError);
}

std::vector<Session> random_corpus(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_sessions(0, 50), len(1, 12), loc(0, 19);
  std::vector<Session> out(static_cast<std::size_t>(n_sessions(rng)));
  for (auto& s : out) {
    std::vector<std::string> ids(static_cast<std::size_t>(len(rng)));
    for (auto& id : ids) id = "L" + std::to_string(loc(rng));
    s = session_of(ids);
  }
  return out;
}

Edges brute_force(const std::vector<Session>& corpus) {
  Edges out;
  for (int ia = 0; ia < 20; ++ia) {
    for (int ib = 0; ib < 20; ++ib) {
      const std::string a = "L" + std::to_string(ia), b = "L" + std::to_string(ib);
      if (!(a < b)) continue;
      std::size_t count = 0;
      for (const auto& s : corpus) {
        for (std::size_t i = 1; i < s.stays.size(); ++i) {
          const auto& p = s.stays[i - 1].poi_id;
          const auto& q = s.stays[i].poi_id;
          if ((p == a && q == b) || (p == b && q == a)) ++count;
        }
      }
      if (count) out[{a, b}] = count;
    }
  }
  return out;
}

TEST(GraphProperty, WeightsMatchBruteForceAndOrderFree) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto corpus = random_corpus(rng);
    const auto graph = init_from_training(corpus);
    ASSERT_EQ(graph.edges(), brute_force(corpus));
    std::shuffle(corpus.begin(), corpus.end(), rng);
    TransitionGraph online;
    for (const auto& s : corpus) update_with_trajectory(online, s);
    ASSERT_EQ(online, graph);
  }
}

TEST(GraphProperty, NeighborInvariants) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto graph = init_from_training(random_corpus(rng));
    const std::vector<std::string> anchors{"L" + std::to_string(trial % 20),
                                           "L" + std::to_string((trial * 7) % 20)};
    const std::set<std::string> exclude{"L3", "L4"};
    const auto n = graph.neighbors_ranked(anchors, exclude, 5);
    ASSERT_LE(n.size(), 5u);
    for (std::size_t i = 0; i < n.size(); ++i) {
      ASSERT_FALSE(exclude.contains(n[i].place));
      ASSERT_EQ(std::count(anchors.begin(), anchors.end(), n[i].place), 0);
      if (i) {
        ASSERT_TRUE(n[i - 1].score > n[i].score ||
                    (n[i - 1].score == n[i].score && n[i - 1].place < n[i].place));
      }
    }
    for (const auto& [edge, w] : graph.edges()) {
      ASSERT_GE(w, 1u);
      ASSERT_NE(edge.first, edge.second);
      ASSERT_TRUE(graph.has_node(edge.first) && graph.has_node(edge.second));
      const std::vector<std::string> a{edge.first}, b{edge.second};
      const auto from_a = graph.neighbors_ranked(a, {}, 100);
      const auto from_b = graph.neighbors_ranked(b, {}, 100);
      ASSERT_TRUE(std::any_of(from_a.begin(), from_a.end(),
                              [&](const Neighbor& x) { return x.place == edge.second; }));
      ASSERT_TRUE(std::any_of(from_b.begin(), from_b.end(),
                              [&](const Neighbor& x) { return x.place == edge.first; }));
    }
  }
}

}  // namespace
}  // namespace mobcast
