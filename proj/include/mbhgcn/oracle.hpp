#pragma once

#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "mbhgcn/data.hpp"
#include "mbhgcn/matrix.hpp"
#include "mbhgcn/model.hpp"
#include "mbhgcn/training.hpp"

// Brute-force references used by the test suites. Every routine here is the
// most literal transcription of its definition and shares no code with the
// optimized implementations it checks.
namespace mbhgcn::oracle {

inline constexpr int kMaxDenseNodes = 200;
inline constexpr int kMaxRankItems = 1000;

// Dense (M+N) x (M+N) symmetric normalized adjacency of a bipartite edge
// list: entry (u, M+i) = (M+i, u) = 1/sqrt(deg_u * deg_i). Degrees are
// recomputed densely from the edge list.
Mat dense_adjacency(const std::vector<std::pair<int, int>>& edges, int M, int N);

// Applies `adj` L times to the stacked embedding matrix; returns layers
// 0..L. Throws SizeLimitExceeded above kMaxDenseNodes nodes.
std::vector<Mat> dense_propagate(const Mat& adj, const Mat& stacked, int num_layers);

// Literal layer combination on stacked matrices: row = layer0 +
// sum_l (1/(l+1)) * layer_l / ||layer_l||.
Mat dense_combine(const std::vector<Mat>& layers);

// Standalone dense LightGCN pass (propagate + combine) over one edge list;
// returns the stacked (M+N) x d result.
Mat dense_lightgcn(const std::vector<std::pair<int, int>>& edges, int M, int N,
                   const Mat& user0, const Mat& item0, int num_layers);

// Central finite differences (f(x+h) - f(x-h)) / 2h for every scalar in the
// user table, item table and behavior weights. `loss` must be deterministic.
Gradients finite_diff_grad(const std::function<double(const ModelParams&)>& loss,
                           const ModelParams& at, double step);

// Materializes and sorts every test user's candidate scores (same pessimistic
// tie rule: equal scores rank above the held-out item) and returns the rank
// map. Scores come from a dropout-free forward pass; the ranking path is
// independent of eval's counting rule. Throws SizeLimitExceeded above
// kMaxRankItems items.
std::map<int, int> brute_rank(const ModelParams& params, const Dataset& ds,
                              const VariantFlags& flags);

}  // namespace mbhgcn::oracle
