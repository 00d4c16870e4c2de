#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mbhgcn/graph.hpp"
#include "mbhgcn/matrix.hpp"

namespace mbhgcn {

// Trainable state: user/item embedding tables plus one learnable item-weight
// scalar per behavior. Layer weights are fixed at 1/(l+1).
struct ModelParams {
  Mat user_emb;  // M x d
  Mat item_emb;  // N x d
  std::vector<double> item_behavior_weight;  // size K, init 1.0
  int num_layers = 2;

  int dim() const { return user_emb.cols; }
  int num_users() const { return user_emb.rows; }
  int num_items() const { return item_emb.rows; }
  int num_behaviors() const { return static_cast<int>(item_behavior_weight.size()); }
  double layer_weight(int l) const { return 1.0 / (l + 1); }
};

// Embedding entries drawn from N(0, 0.1^2), seeded; item weights start at 1
// so the initial item mixing equals pure count weighting.
ModelParams init_params(int num_users, int num_items, int num_behaviors, int dim,
                        int num_layers, std::uint64_t seed);

enum class UserAgg { Sum, Linear, Adaptive };
enum class ItemGamma { FixedOne, CountsOnly, Learnable };
enum class DeltaQuery { Task, Target };

// Ablation switches. Defaults are the full model.
struct VariantFlags {
  bool use_unified = true;     // false: behavior graphs start from raw embeddings
  UserAgg user_agg = UserAgg::Adaptive;
  ItemGamma item_gamma = ItemGamma::Learnable;
  bool fuse_global = true;     // false: final embeddings are the aggregates alone
  bool mtl = true;             // false: only the target task is optimized
  DeltaQuery delta_query = DeltaQuery::Task;
};

// Graphs plus the interaction statistics the aggregation weights need.
// Counts always come from the full training data, never from dropped graphs.
struct GraphSet {
  NormalizedGraph unified;
  std::vector<NormalizedGraph> behavior;        // K graphs
  std::vector<std::vector<int>> item_counts;    // [k][i]
  std::vector<std::vector<int>> user_counts;    // [k][u]
};

GraphSet build_graphs(const Dataset& ds);

// Re-samples node dropout on every graph of `base` (per-graph derived seeds).
GraphSet dropout_graphs(const GraphSet& base, double rate, std::uint64_t seed);

// Per-layer embeddings of one propagation run, layer 0 = input. When message
// dropout is active each layer >= 1 is stored post-mask and the mask (already
// including the 1/(1-rate) survivor scale) is kept for the backward pass.
struct LayerStack {
  std::vector<Mat> user;
  std::vector<Mat> item;
  std::vector<Mat> user_mask;  // empty when dropout off
  std::vector<Mat> item_mask;
};

struct MessageDropout {
  double rate = 0.0;  // 0 = off
  std::uint64_t seed = 0;
};

// Everything the backward pass needs, cached by forward().
struct ForwardTrace {
  LayerStack global_layers;
  Mat global_user, global_item;                // combined unified-graph embeddings
  std::vector<LayerStack> behavior_layers;     // K
  std::vector<Mat> behavior_user, behavior_item;  // K refined embeddings
  std::vector<Mat> user_agg_weights;           // per task, M x K rows summing to 1
  Mat user_linear_weights;                     // M x K, Linear user aggregation only
  std::vector<Mat> agg_user;                   // per task, M x d
  Mat item_agg_weights;                        // N x K
  Mat agg_item;                                // N x d
  std::vector<Mat> final_user;                 // per task, M x d
  Mat final_item;                              // N x d
};

// L hops of graph convolution from (user0, item0); layer l+1 row u is the
// coefficient-weighted sum of its neighbors' layer-l rows.
LayerStack propagate(const NormalizedGraph& g, const Mat& user0, const Mat& item0,
                     int num_layers, const MessageDropout& dropout = {});

// Layer combination: layer 0 plus sum over l >= 1 of layer_weight(l) times the
// row-L2-normalized layer; zero-norm rows contribute nothing at that layer.
Mat combine_layers(const std::vector<Mat>& layers);

// Similarity-weighted mix of one user's K behavior embeddings for one task.
// Weights are softmax(query . e_j / sqrt(d)) with the task (or target)
// embedding as query. Returns (weights, aggregate). Parameter-free.
std::pair<std::vector<double>, std::vector<double>> user_adaptive_aggregate(
    const std::vector<std::vector<double>>& behavior_vecs, int task,
    DeltaQuery query = DeltaQuery::Task, int target = -1);

// Count-weighted mix of one item's K behavior embeddings:
// weight_k = w_k * n_k / sum_m w_m * n_m. When the denominator magnitude is
// below 1e-12 the weights fall back to uniform over behaviors with n_k > 0,
// or uniform over all behaviors when every count is zero.
std::pair<std::vector<double>, std::vector<double>> item_weighted_aggregate(
    const std::vector<std::vector<double>>& behavior_vecs, const std::vector<int>& counts,
    const std::vector<double>& weights);

inline std::vector<double> fuse_embeddings(const std::vector<double>& a,
                                           const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline double score(const double* user_vec, const double* item_vec, int d) {
  return dot(user_vec, item_vec, d);
}

// Full pipeline: unified-graph embeddings, per-behavior refinement, user and
// item aggregation, global fusion. Deterministic given params, graphs and the
// dropout seed.
ForwardTrace forward(const ModelParams& params, const GraphSet& graphs,
                     const VariantFlags& flags, const MessageDropout& dropout = {});

// Serialized with shapes and the variant flags the model was trained under.
void save_model(const ModelParams& params, const VariantFlags& flags, const std::string& path);
std::pair<ModelParams, VariantFlags> load_model(const std::string& path);

inline constexpr const char* kModelMagic = "MBHGCN-MODEL-v1";

std::string to_string(UserAgg v);
std::string to_string(ItemGamma v);
std::string to_string(DeltaQuery v);
UserAgg user_agg_from_string(const std::string& s);
ItemGamma item_gamma_from_string(const std::string& s);
DeltaQuery delta_query_from_string(const std::string& s);

}  // namespace mbhgcn
