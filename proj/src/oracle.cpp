#include "mbhgcn/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "mbhgcn/errors.hpp"

namespace mbhgcn::oracle {

Mat dense_adjacency(const std::vector<std::pair<int, int>>& edges, int M, int N) {
  if (M + N > kMaxDenseNodes)
    throw SizeLimitExceeded("dense oracle limited to " + std::to_string(kMaxDenseNodes) +
                            " nodes");
  std::vector<int> udeg(M, 0), ideg(N, 0);
  for (const auto& [u, i] : edges) {
    udeg[u]++;
    ideg[i]++;
  }
  Mat adj(M + N, M + N);
  for (const auto& [u, i] : edges) {
    double c = 1.0 / std::sqrt(static_cast<double>(udeg[u]) * ideg[i]);
    adj.at(u, M + i) = c;
    adj.at(M + i, u) = c;
  }
  return adj;
}

std::vector<Mat> dense_propagate(const Mat& adj, const Mat& stacked, int num_layers) {
  if (adj.rows > kMaxDenseNodes)
    throw SizeLimitExceeded("dense oracle limited to " + std::to_string(kMaxDenseNodes) +
                            " nodes");
  std::vector<Mat> layers;
  layers.push_back(stacked);
  for (int l = 0; l < num_layers; ++l) {
    const Mat& prev = layers.back();
    Mat next(prev.rows, prev.cols);
    for (int r = 0; r < adj.rows; ++r)
      for (int c = 0; c < adj.cols; ++c) {
        double a = adj.at(r, c);
        if (a == 0.0) continue;
        for (int z = 0; z < prev.cols; ++z) next.at(r, z) += a * prev.at(c, z);
      }
    layers.push_back(std::move(next));
  }
  return layers;
}

Mat dense_combine(const std::vector<Mat>& layers) {
  Mat out = layers[0];
  const int L = static_cast<int>(layers.size()) - 1;
  for (int l = 1; l <= L; ++l) {
    const double alpha = 1.0 / (l + 1);
    for (int r = 0; r < out.rows; ++r) {
      double norm = 0.0;
      for (int c = 0; c < out.cols; ++c) norm += layers[l].at(r, c) * layers[l].at(r, c);
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (int c = 0; c < out.cols; ++c) out.at(r, c) += alpha * layers[l].at(r, c) / norm;
    }
  }
  return out;
}

Mat dense_lightgcn(const std::vector<std::pair<int, int>>& edges, int M, int N,
                   const Mat& user0, const Mat& item0, int num_layers) {
  Mat stacked(M + N, user0.cols);
  for (int u = 0; u < M; ++u)
    for (int c = 0; c < user0.cols; ++c) stacked.at(u, c) = user0.at(u, c);
  for (int i = 0; i < N; ++i)
    for (int c = 0; c < item0.cols; ++c) stacked.at(M + i, c) = item0.at(i, c);
  Mat adj = dense_adjacency(edges, M, N);
  return dense_combine(dense_propagate(adj, stacked, num_layers));
}

Gradients finite_diff_grad(const std::function<double(const ModelParams&)>& loss,
                           const ModelParams& at, double step) {
  ModelParams probe = at;
  Gradients g;
  g.user_emb = Mat(at.user_emb.rows, at.user_emb.cols);
  g.item_emb = Mat(at.item_emb.rows, at.item_emb.cols);
  g.item_behavior_weight.assign(at.item_behavior_weight.size(), 0.0);

  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + step;
    double f_plus = loss(probe);
    slot = saved - step;
    double f_minus = loss(probe);
    slot = saved;
    return (f_plus - f_minus) / (2.0 * step);
  };

  for (size_t z = 0; z < probe.user_emb.data.size(); ++z)
    g.user_emb.data[z] = central(probe.user_emb.data[z]);
  for (size_t z = 0; z < probe.item_emb.data.size(); ++z)
    g.item_emb.data[z] = central(probe.item_emb.data[z]);
  for (size_t z = 0; z < probe.item_behavior_weight.size(); ++z)
    g.item_behavior_weight[z] = central(probe.item_behavior_weight[z]);
  return g;
}

std::map<int, int> brute_rank(const ModelParams& params, const Dataset& ds,
                              const VariantFlags& flags) {
  if (ds.num_items > kMaxRankItems)
    throw SizeLimitExceeded("brute ranking limited to " + std::to_string(kMaxRankItems) +
                            " items");
  GraphSet graphs = build_graphs(ds);
  ForwardTrace trace = forward(params, graphs, flags);
  const int target = ds.target_behavior();
  const int d = params.dim();

  std::vector<std::vector<int>> train_items(ds.num_users);
  for (const auto& [u, i] : ds.edges[target]) train_items[u].push_back(i);

  std::map<int, int> ranks;
  for (int u = 0; u < ds.num_users; ++u) {
    int test = ds.test_item[u];
    if (test < 0) continue;
    std::vector<char> excluded(ds.num_items, 0);
    for (int i : train_items[u]) excluded[i] = 1;

    // (score, is_held_out) pairs sorted descending; the held-out item goes
    // after every tied competitor.
    std::vector<std::pair<double, int>> cands;
    for (int i = 0; i < ds.num_items; ++i) {
      if (excluded[i] && i != test) continue;
      double s = dot(trace.final_user[target].row(u), trace.final_item.row(i), d);
      cands.push_back({s, i == test ? 1 : 0});
    }
    std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (size_t pos = 0; pos < cands.size(); ++pos)
      if (cands[pos].second == 1) {
        ranks[u] = static_cast<int>(pos) + 1;
        break;
      }
  }
  return ranks;
}

}  // namespace mbhgcn::oracle
