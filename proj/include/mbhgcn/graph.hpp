#pragma once

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "mbhgcn/data.hpp"
#include "mbhgcn/matrix.hpp"

namespace mbhgcn {

// Sparse bipartite user-item adjacency with precomputed symmetric
// normalization coefficients 1/sqrt(|N_u| * |N_i|) per edge, stored in both
// directions. Immutable after construction.
//
// After node_dropout the coefficients and degrees stay frozen at the source
// graph's values and surviving messages are rescaled by message_scale
// (inverted-dropout convention), so degrees here always describe the graph
// the coefficients were computed on.
struct NormalizedGraph {
  int num_users = 0;
  int num_items = 0;
  std::vector<int> user_ptr;      // size M+1, CSR user -> item
  std::vector<int> user_adj;      // item indices
  std::vector<double> user_coeff; // per edge
  std::vector<int> item_ptr;      // size N+1, CSR item -> user
  std::vector<int> item_adj;
  std::vector<double> item_coeff;
  std::vector<int> user_degree;
  std::vector<int> item_degree;
  double message_scale = 1.0;

  int num_edges() const { return static_cast<int>(user_adj.size()); }
};

// Builds the normalized graph of an explicit edge list (no duplicates).
NormalizedGraph build_graph(const std::vector<std::pair<int, int>>& edges, int M, int N);

// One behavior's training interactions; degrees computed within the behavior.
NormalizedGraph build_behavior_graph(const Dataset& ds, int k);

// Set union of all behaviors' edges; an edge present in several behaviors
// appears once and degrees are computed on the union.
NormalizedGraph build_unified_graph(const Dataset& ds);

// Drops each node independently with probability `rate` (seeded; users drawn
// first in index order, then items, survive when uniform01 >= rate), removes
// incident edges, keeps the original coefficients and rescales surviving
// messages by 1/(1-rate). rate == 0 returns the graph unchanged.
NormalizedGraph node_dropout(const NormalizedGraph& g, double rate, std::uint64_t seed);

// One propagation hop: user_out = C * item_in, item_out = C^T * user_in,
// where C holds coeff * message_scale per edge. Self-adjoint: applying it to
// output gradients yields input gradients.
void propagate_step(const NormalizedGraph& g, const Mat& user_in, const Mat& item_in,
                    Mat& user_out, Mat& item_out);

// Debug dump, one "u i coeff" line per edge.
void dump_edges(const NormalizedGraph& g, std::ostream& os);

}  // namespace mbhgcn
