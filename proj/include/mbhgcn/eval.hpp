#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mbhgcn/data.hpp"
#include "mbhgcn/model.hpp"

namespace mbhgcn {

struct EvalReport {
  std::map<int, double> hr;    // K -> value
  std::map<int, double> ndcg;
  std::map<int, int> per_user_rank;  // user -> 1-based rank of the held-out item
  int num_evaluated = 0;
};

// 1 + number of non-excluded items scoring strictly higher, with ties counted
// above the held-out item (pessimistic).
int rank_test_item(std::span<const double> scores, int test_item,
                   const std::vector<int>& exclude);

// Mean over users of [rank <= K]; empty rank list gives 0.
double hr_at_k(const std::vector<int>& ranks, int K);

// Mean over users of 1/log2(rank+1) for rank <= K, else 0 (single relevant
// item, ideal DCG = 1); empty rank list gives 0.
double ndcg_at_k(const std::vector<int>& ranks, int K);

struct EvalOptions {
  bool use_validation_item = false;  // rank the validation item instead of the test item
  bool exclude_auxiliary = false;    // also drop auxiliary-behavior training items from candidates
  const std::vector<int>* restrict_users = nullptr;  // evaluate only these users
};

// Dropout-free forward pass, then for every user with a held-out item ranks
// it among all items minus the user's target-behavior training items, scoring
// with the target-task user embedding against the final item embeddings.
EvalReport evaluate(const ModelParams& params, const Dataset& ds, const std::vector<int>& ks,
                    const VariantFlags& flags, const EvalOptions& opts = {});

// evaluate() restricted to the given cold-start users.
EvalReport evaluate_cold_start(const ModelParams& params, const std::vector<int>& cold_users,
                               const Dataset& ds, const std::vector<int>& ks,
                               const VariantFlags& flags);

// Human-readable aligned table.
std::string format_report_table(const EvalReport& report);

// Machine-readable "metric,K,value" lines (HR then NDCG, ascending K).
std::string format_report_csv(const EvalReport& report);

}  // namespace mbhgcn
