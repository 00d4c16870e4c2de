#include "mbhgcn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_set>

namespace mbhgcn {

int rank_test_item(std::span<const double> scores, int test_item,
                   const std::vector<int>& exclude) {
  std::vector<char> excluded(scores.size(), 0);
  for (int i : exclude) excluded[i] = 1;
  const double s = scores[test_item];
  int rank = 1;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (static_cast<int>(i) == test_item || excluded[i]) continue;
    if (scores[i] >= s) ++rank;  // ties count above the held-out item
  }
  return rank;
}

double hr_at_k(const std::vector<int>& ranks, int K) {
  if (ranks.empty()) return 0.0;
  int hits = 0;
  for (int r : ranks) hits += (r <= K);
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(const std::vector<int>& ranks, int K) {
  if (ranks.empty()) return 0.0;
  double sum = 0.0;
  for (int r : ranks)
    if (r <= K) sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return sum / static_cast<double>(ranks.size());
}

EvalReport evaluate(const ModelParams& params, const Dataset& ds, const std::vector<int>& ks,
                    const VariantFlags& flags, const EvalOptions& opts) {
  GraphSet graphs = build_graphs(ds);
  ForwardTrace trace = forward(params, graphs, flags);  // dropout off

  const int target = ds.target_behavior();
  const int d = params.dim();
  const Mat& user_final = trace.final_user[target];
  const Mat& item_final = trace.final_item;

  // Per-user candidate exclusions (target training items, optionally all
  // auxiliary training items too).
  std::vector<std::vector<int>> exclude(ds.num_users);
  for (const auto& [u, i] : ds.edges[target]) exclude[u].push_back(i);
  if (opts.exclude_auxiliary)
    for (int k = 0; k < target; ++k)
      for (const auto& [u, i] : ds.edges[k]) exclude[u].push_back(i);

  std::vector<char> allowed(ds.num_users, 1);
  if (opts.restrict_users) {
    allowed.assign(ds.num_users, 0);
    for (int u : *opts.restrict_users) allowed[u] = 1;
  }
  const std::vector<int>& held = opts.use_validation_item ? ds.valid_item : ds.test_item;

  EvalReport report;
  std::vector<int> ranks;
  std::vector<double> scores(ds.num_items);
  for (int u = 0; u < ds.num_users; ++u) {
    if (held[u] < 0 || !allowed[u]) continue;
    const double* eu = user_final.row(u);
    for (int i = 0; i < ds.num_items; ++i) scores[i] = dot(eu, item_final.row(i), d);
    int rank = rank_test_item(scores, held[u], exclude[u]);
    report.per_user_rank[u] = rank;
    ranks.push_back(rank);
  }
  report.num_evaluated = static_cast<int>(ranks.size());
  for (int K : ks) {
    report.hr[K] = hr_at_k(ranks, K);
    report.ndcg[K] = ndcg_at_k(ranks, K);
  }
  return report;
}

EvalReport evaluate_cold_start(const ModelParams& params, const std::vector<int>& cold_users,
                               const Dataset& ds, const std::vector<int>& ks,
                               const VariantFlags& flags) {
  EvalOptions opts;
  opts.restrict_users = &cold_users;
  return evaluate(params, ds, ks, flags, opts);
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream ss;
  char buf[64];
  ss << "users evaluated: " << report.num_evaluated << "\n";
  ss << "      K";
  for (const auto& [K, v] : report.hr) {
    std::snprintf(buf, sizeof(buf), "%10d", K);
    ss << buf;
  }
  ss << "\n   HR@K";
  for (const auto& [K, v] : report.hr) {
    std::snprintf(buf, sizeof(buf), "%10.4f", v);
    ss << buf;
  }
  ss << "\n NDCG@K";
  for (const auto& [K, v] : report.ndcg) {
    std::snprintf(buf, sizeof(buf), "%10.4f", v);
    ss << buf;
  }
  ss << "\n";
  return ss.str();
}

std::string format_report_csv(const EvalReport& report) {
  std::ostringstream ss;
  char buf[64];
  for (const auto& [K, v] : report.hr) {
    std::snprintf(buf, sizeof(buf), "HR,%d,%.10g", K, v);
    ss << buf << "\n";
  }
  for (const auto& [K, v] : report.ndcg) {
    std::snprintf(buf, sizeof(buf), "NDCG,%d,%.10g", K, v);
    ss << buf << "\n";
  }
  return ss.str();
}

}  // namespace mbhgcn
