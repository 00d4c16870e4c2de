#include "mbhgcn/graph.hpp"
#include <cstdio>

#include <algorithm>
#include <cmath>

#include "mbhgcn/errors.hpp"
#include "mbhgcn/rng.hpp"

namespace mbhgcn {

namespace {

// Shared CSR assembly from a final (edge, coeff, degree) description.
NormalizedGraph assemble(const std::vector<std::pair<int, int>>& edges,
                         const std::vector<double>& coeffs, int M, int N,
                         std::vector<int> user_degree, std::vector<int> item_degree,
                         double message_scale) {
  NormalizedGraph g;
  g.num_users = M;
  g.num_items = N;
  g.user_degree = std::move(user_degree);
  g.item_degree = std::move(item_degree);
  g.message_scale = message_scale;

  std::vector<int> ucount(M, 0), icount(N, 0);
  for (const auto& [u, i] : edges) {
    ucount[u]++;
    icount[i]++;
  }
  g.user_ptr.assign(M + 1, 0);
  for (int u = 0; u < M; ++u) g.user_ptr[u + 1] = g.user_ptr[u] + ucount[u];
  g.item_ptr.assign(N + 1, 0);
  for (int i = 0; i < N; ++i) g.item_ptr[i + 1] = g.item_ptr[i] + icount[i];

  size_t nnz = edges.size();
  g.user_adj.resize(nnz);
  g.user_coeff.resize(nnz);
  g.item_adj.resize(nnz);
  g.item_coeff.resize(nnz);
  std::vector<int> ucur(g.user_ptr.begin(), g.user_ptr.end() - 1);
  std::vector<int> icur(g.item_ptr.begin(), g.item_ptr.end() - 1);
  for (size_t e = 0; e < nnz; ++e) {
    const auto& [u, i] = edges[e];
    double c = coeffs[e];
    g.user_adj[ucur[u]] = i;
    g.user_coeff[ucur[u]] = c;
    ucur[u]++;
    g.item_adj[icur[i]] = u;
    g.item_coeff[icur[i]] = c;
    icur[i]++;
  }
  return g;
}

}  // namespace

NormalizedGraph build_graph(const std::vector<std::pair<int, int>>& edges, int M, int N) {
  std::vector<int> udeg(M, 0), ideg(N, 0);
  for (const auto& [u, i] : edges) {
    udeg[u]++;
    ideg[i]++;
  }
  std::vector<double> coeffs(edges.size());
  for (size_t e = 0; e < edges.size(); ++e) {
    const auto& [u, i] = edges[e];
    coeffs[e] = 1.0 / std::sqrt(static_cast<double>(udeg[u]) * ideg[i]);
  }
  return assemble(edges, coeffs, M, N, std::move(udeg), std::move(ideg), 1.0);
}

NormalizedGraph build_behavior_graph(const Dataset& ds, int k) {
  return build_graph(ds.edges[k], ds.num_users, ds.num_items);
}

NormalizedGraph build_unified_graph(const Dataset& ds) {
  std::vector<std::pair<int, int>> all;
  for (const auto& edges : ds.edges) all.insert(all.end(), edges.begin(), edges.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return build_graph(all, ds.num_users, ds.num_items);
}

NormalizedGraph node_dropout(const NormalizedGraph& g, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidRate("node dropout rate must be in [0, 1)");
  if (rate == 0.0) return g;

  std::mt19937_64 rng(seed);
  std::vector<char> user_alive(g.num_users), item_alive(g.num_items);
  for (int u = 0; u < g.num_users; ++u) user_alive[u] = uniform01(rng) >= rate;
  for (int i = 0; i < g.num_items; ++i) item_alive[i] = uniform01(rng) >= rate;

  std::vector<std::pair<int, int>> edges;
  std::vector<double> coeffs;
  for (int u = 0; u < g.num_users; ++u) {
    if (!user_alive[u]) continue;
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) {
      int i = g.user_adj[e];
      if (!item_alive[i]) continue;
      edges.push_back({u, i});
      coeffs.push_back(g.user_coeff[e]);
    }
  }
  return assemble(edges, coeffs, g.num_users, g.num_items, g.user_degree, g.item_degree,
                  g.message_scale / (1.0 - rate));
}

void propagate_step(const NormalizedGraph& g, const Mat& user_in, const Mat& item_in,
                    Mat& user_out, Mat& item_out) {
  const int d = user_in.cols;
  user_out = Mat(g.num_users, d);
  item_out = Mat(g.num_items, d);
  const double scale = g.message_scale;
  for (int u = 0; u < g.num_users; ++u) {
    double* out = user_out.row(u);
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e)
      axpy(g.user_coeff[e] * scale, item_in.row(g.user_adj[e]), out, d);
  }
  for (int i = 0; i < g.num_items; ++i) {
    double* out = item_out.row(i);
    for (int e = g.item_ptr[i]; e < g.item_ptr[i + 1]; ++e)
      axpy(g.item_coeff[e] * scale, user_in.row(g.item_adj[e]), out, d);
  }
}

void dump_edges(const NormalizedGraph& g, std::ostream& os) {
  char buf[32];
  for (int u = 0; u < g.num_users; ++u)
    for (int e = g.user_ptr[u]; e < g.user_ptr[u + 1]; ++e) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.user_coeff[e]);
      os << u << " " << g.user_adj[e] << " " << buf << "\n";
    }
}

}  // namespace mbhgcn
