#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "mbhgcn/graph.hpp"
#include "mbhgcn/oracle.hpp"
#include "mbhgcn/rng.hpp"
#include "test_helpers.hpp"

using namespace mbhgcn;

namespace {

Dataset two_behavior_dataset() {
  // behavior 0: (0,0) (0,1); behavior 1 (target): (0,0) (1,1) x2 so user have
  // enough interactions to keep training edges after the split
  std::vector<InteractionRecord> records = {
      {"u0", "i0", "view", 1}, {"u0", "i1", "view", 2}, {"u0", "i0", "buy", 3},
      {"u0", "i1", "buy", 4},  {"u1", "i1", "buy", 5},  {"u1", "i0", "buy", 6},
  };
  return build_dataset(deduplicate(records), {"view", "buy"});
}

std::set<std::pair<int, int>> edge_set(const NormalizedGraph& g) {
  std::set<std::pair<int, int>> out;
  for (int u = 0; u < g.num_users; ++u)
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) out.insert({u, g.user_adj[e]});
  return out;
}

double coeff_of(const NormalizedGraph& g, int u, int i) {
  for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e)
    if (g.user_adj[e] == i) return g.user_coeff[e];
  return 0.0;
}

}  // namespace

TEST_CASE("single edge gets coefficient 1") {
  NormalizedGraph g = build_graph({{0, 0}}, 1, 1);
  CHECK(g.num_edges() == 1);
  CHECK(coeff_of(g, 0, 0) == doctest::Approx(1.0));
}

TEST_CASE("star user over degree-1 items gets coefficient 1/sqrt(4)") {
  NormalizedGraph g = build_graph({{0, 0}, {0, 1}, {0, 2}, {0, 3}}, 1, 4);
  for (int i = 0; i < 4; ++i) CHECK(coeff_of(g, 0, i) == doctest::Approx(0.5));
}

TEST_CASE("coefficients match a dense degree recomputation on random graphs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto edges = testing::random_edges(5, 5, 0.4, rng);
    NormalizedGraph g = build_graph(edges, 5, 5);
    std::vector<int> udeg(5, 0), ideg(5, 0);
    for (auto& [u, i] : edges) {
      udeg[u]++;
      ideg[i]++;
    }
    for (auto& [u, i] : edges)
      CHECK(coeff_of(g, u, i) ==
            doctest::Approx(1.0 / std::sqrt(double(udeg[u]) * ideg[i])).epsilon(1e-14));
  }
}

TEST_CASE("unified graph stores an edge present in several behaviors once") {
  Dataset ds = two_behavior_dataset();
  NormalizedGraph g = build_unified_graph(ds);
  auto edges = edge_set(g);
  // (u0,i0) appears in view and buy-training
  CHECK(edges.count({0, 0}) == 1);
  int occurrences = 0;
  for (int e = g.user_ptr[0]; e < g.user_ptr[1]; ++e) occurrences += (g.user_adj[e] == 0);
  CHECK(occurrences == 1);
}

TEST_CASE("unified graph of one behavior equals the behavior graph") {
  std::vector<InteractionRecord> records = {
      {"u0", "i0", "buy", 1}, {"u0", "i1", "buy", 2}, {"u1", "i0", "buy", 3},
      {"u1", "i1", "buy", 4},
  };
  Dataset ds = build_dataset(deduplicate(records), {"buy"});
  NormalizedGraph unified = build_unified_graph(ds);
  NormalizedGraph behavior = build_behavior_graph(ds, 0);
  CHECK(edge_set(unified) == edge_set(behavior));
  CHECK(unified.user_coeff == behavior.user_coeff);
}

TEST_CASE("disjoint behaviors: unified edge count is the sum") {
  std::vector<InteractionRecord> records = {
      {"u0", "i0", "view", 1},
      {"u1", "i1", "buy", 2},
      {"u1", "i2", "buy", 3},
      {"u1", "i3", "buy", 4},
  };
  Dataset ds = build_dataset(deduplicate(records), {"view", "buy"});
  NormalizedGraph unified = build_unified_graph(ds);
  CHECK(unified.num_edges() ==
        static_cast<int>(ds.edges[0].size() + ds.edges[1].size()));
}

TEST_CASE("unified degree counts the union, not the per-behavior sum") {
  Dataset ds = two_behavior_dataset();
  NormalizedGraph unified = build_unified_graph(ds);
  std::set<int> u0_items;
  for (int k = 0; k < ds.num_behaviors; ++k)
    for (auto& [u, i] : ds.edges[k])
      if (u == 0) u0_items.insert(i);
  CHECK(unified.user_degree[0] == static_cast<int>(u0_items.size()));
}

TEST_CASE("transpose consistency against the dense adjacency with all-ones input") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    int M = 3 + uniform_index(rng, 40);
    int N = 3 + uniform_index(rng, 40);
    auto edges = testing::random_edges(M, N, 0.15, rng);
    NormalizedGraph g = build_graph(edges, M, N);

    Mat ones_u(M, 2), ones_i(N, 2);
    std::fill(ones_u.data.begin(), ones_u.data.end(), 1.0);
    std::fill(ones_i.data.begin(), ones_i.data.end(), 1.0);
    Mat out_u, out_i;
    propagate_step(g, ones_u, ones_i, out_u, out_i);

    Mat adj = oracle::dense_adjacency(edges, M, N);
    Mat stacked(M + N, 2);
    std::fill(stacked.data.begin(), stacked.data.end(), 1.0);
    auto layers = oracle::dense_propagate(adj, stacked, 1);
    for (int u = 0; u < M; ++u)
      for (int c = 0; c < 2; ++c)
        CHECK(out_u.at(u, c) == doctest::Approx(layers[1].at(u, c)).epsilon(1e-12));
    for (int i = 0; i < N; ++i)
      for (int c = 0; c < 2; ++c)
        CHECK(out_i.at(i, c) == doctest::Approx(layers[1].at(M + i, c)).epsilon(1e-12));
  }
}

TEST_CASE("node dropout with rate 0 is the identity for any seed") {
  std::mt19937_64 rng(3);
  auto edges = testing::random_edges(6, 6, 0.4, rng);
  NormalizedGraph g = build_graph(edges, 6, 6);
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    NormalizedGraph dropped = node_dropout(g, 0.0, seed);
    CHECK(dropped.user_adj == g.user_adj);
    CHECK(dropped.user_coeff == g.user_coeff);
    CHECK(dropped.message_scale == g.message_scale);
  }
}

TEST_CASE("node dropout rejects rates outside [0,1)") {
  NormalizedGraph g = build_graph({{0, 0}}, 1, 1);
  CHECK_THROWS_AS(node_dropout(g, 1.0, 0), InvalidRate);
  CHECK_THROWS_AS(node_dropout(g, -0.1, 0), InvalidRate);
}

TEST_CASE("surviving messages are rescaled by 1/(1-rate) with frozen coefficients") {
  NormalizedGraph g = build_graph({{0, 0}, {0, 1}, {1, 0}}, 2, 2);
  const double rate = 0.25;
  // find a seed under which every node survives
  for (std::uint64_t seed = 0;; ++seed) {
    std::mt19937_64 rng(seed);
    bool all = true;
    for (int n = 0; n < 4; ++n) all = all && (uniform01(rng) >= rate);
    if (!all) continue;
    NormalizedGraph dropped = node_dropout(g, rate, seed);
    REQUIRE(dropped.num_edges() == g.num_edges());
    CHECK(dropped.user_coeff == g.user_coeff);  // frozen, not recomputed
    CHECK(dropped.message_scale == doctest::Approx(1.0 / (1.0 - rate)));
    break;
  }
}

TEST_CASE("node dropout matches an independent re-simulation of the stream") {
  std::mt19937_64 rng(21);
  auto edges = testing::random_edges(5, 5, 0.5, rng);
  NormalizedGraph g = build_graph(edges, 5, 5);
  const double rate = 0.5;
  const std::uint64_t seed = 77;
  NormalizedGraph dropped = node_dropout(g, rate, seed);

  // generator spec: users first in index order, then items; survive when
  // uniform01 >= rate
  std::mt19937_64 sim(seed);
  std::vector<bool> user_alive(5), item_alive(5);
  for (int u = 0; u < 5; ++u) user_alive[u] = uniform01(sim) >= rate;
  for (int i = 0; i < 5; ++i) item_alive[i] = uniform01(sim) >= rate;
  std::set<std::pair<int, int>> expected;
  for (auto& [u, i] : edges)
    if (user_alive[u] && item_alive[i]) expected.insert({u, i});
  CHECK(edge_set(dropped) == expected);
}

TEST_CASE("dropped-graph propagation equals a dense rebuild from the edge dump") {
  std::mt19937_64 rng(5);
  auto edges = testing::random_edges(8, 8, 0.4, rng);
  NormalizedGraph g = build_graph(edges, 8, 8);
  NormalizedGraph dropped = node_dropout(g, 0.3, 123);

  std::ostringstream dump;
  dump_edges(dropped, dump);
  Mat adj(16, 16);
  std::istringstream in(dump.str());
  int u, i;
  double c;
  while (in >> u >> i >> c) {
    adj.at(u, 8 + i) = c * dropped.message_scale;
    adj.at(8 + i, u) = c * dropped.message_scale;
  }

  Mat x_u(8, 3), x_i(8, 3);
  for (double& v : x_u.data) v = uniform01(rng) - 0.5;
  for (double& v : x_i.data) v = uniform01(rng) - 0.5;
  Mat out_u, out_i;
  propagate_step(dropped, x_u, x_i, out_u, out_i);

  Mat stacked(16, 3);
  for (int r = 0; r < 8; ++r)
    for (int z = 0; z < 3; ++z) {
      stacked.at(r, z) = x_u.at(r, z);
      stacked.at(8 + r, z) = x_i.at(r, z);
    }
  auto layers = oracle::dense_propagate(adj, stacked, 1);
  for (int r = 0; r < 8; ++r)
    for (int z = 0; z < 3; ++z) {
      CHECK(out_u.at(r, z) == doctest::Approx(layers[1].at(r, z)).epsilon(1e-12));
      CHECK(out_i.at(r, z) == doctest::Approx(layers[1].at(8 + r, z)).epsilon(1e-12));
    }
}

TEST_CASE("different seeds drop different node sets") {
  std::mt19937_64 rng(33);
  auto edges = testing::random_edges(20, 20, 0.3, rng);
  NormalizedGraph g = build_graph(edges, 20, 20);
  NormalizedGraph a = node_dropout(g, 0.4, 1);
  NormalizedGraph b = node_dropout(g, 0.4, 2);
  CHECK(edge_set(a) != edge_set(b));
  // and the same seed reproduces the same subgraph
  NormalizedGraph c = node_dropout(g, 0.4, 1);
  CHECK(edge_set(a) == edge_set(c));
}
