#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mbhgcn/errors.hpp"

namespace mbhgcn {

// One raw interaction log entry. Timestamps are integer seconds or any
// monotone integer order key; ties are broken by input order downstream.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  std::string behavior;
  long long timestamp = 0;
};

// ID-mapped multi-behavior dataset with leave-one-out splits.
// edges[k] holds the TRAINING edges of behavior k; the per-user held-out test
// (chronologically last) and validation (second-to-last) target items live in
// test_item / valid_item. item_counts[k][i] counts distinct training users of
// item i in behavior k. The target behavior is always the last index.
struct Dataset {
  int num_users = 0;
  int num_items = 0;
  int num_behaviors = 0;
  std::vector<std::string> behavior_order;  // target behavior last
  std::vector<std::string> user_ids;        // dense index -> raw id
  std::vector<std::string> item_ids;
  std::vector<std::vector<std::pair<int, int>>> edges;  // per behavior (u, i)
  std::vector<std::vector<int>> item_counts;            // [k][i]
  std::vector<int> valid_item;                          // per user, -1 if none
  std::vector<int> test_item;                           // per user, -1 if none

  int target_behavior() const { return num_behaviors - 1; }

  std::vector<int> test_users() const {
    std::vector<int> out;
    for (int u = 0; u < num_users; ++u)
      if (test_item[u] >= 0) out.push_back(u);
    return out;
  }

  // Number of items user u interacted with in behavior k (training edges).
  std::vector<std::vector<int>> user_counts() const;
};

// Reads one interaction per line: user, item, behavior, timestamp separated
// by `delimiter`. Lines with anything but four fields, unparsable or negative
// timestamps, or labels outside `behavior_vocab` are rejected.
std::vector<InteractionRecord> parse_log(const std::string& path,
                                         const std::vector<std::string>& behavior_vocab,
                                         char delimiter = '\t');

// For each (user, item, behavior) triple keeps exactly the record with the
// minimum timestamp, first occurrence winning ties. Survivor order follows
// the input.
std::vector<InteractionRecord> deduplicate(const std::vector<InteractionRecord>& records);

// Maps raw IDs to dense indices in first-appearance order and populates
// edges, counts and the leave-one-out split. Per user, target interactions
// sorted by (timestamp, input order): 1 interaction -> all training;
// 2 -> first trains, last is the test item; >=3 -> last is test,
// second-to-last is validation, the rest train.
Dataset build_dataset(const std::vector<InteractionRecord>& records,
                      const std::vector<std::string>& behavior_order);

struct ColdStartMask {
  Dataset dataset;
  std::vector<int> cold_users;  // ascending user indices
};

// Simulates cold-start users: picks n_cold users uniformly (Fisher-Yates on
// the test-user list, seeded) and removes all their target-behavior training
// edges plus, in auxiliary behaviors, the (user, item) pairs that also appear
// among those target training edges. Test items are kept.
ColdStartMask mask_cold_start(const Dataset& base, int n_cold, std::uint64_t seed);

// Versioned text bundle holding every Dataset field including the ID maps.
void save_bundle(const Dataset& ds, const std::string& path);
Dataset load_bundle(const std::string& path);

// Sidecar mapping file: "user|item <raw_id> <index>" per line.
void save_id_map(const Dataset& ds, const std::string& path);

inline constexpr const char* kBundleMagic = "MBHGCN-DATA-v1";

}  // namespace mbhgcn
