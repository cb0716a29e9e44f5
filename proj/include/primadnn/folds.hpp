#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace primadnn {

struct FoldSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

/// Singer-disjoint k-fold plan. Fold i tests on group i, validates on group
/// (i + 1) mod k and trains on the rest.
struct FoldPlan {
  std::vector<std::vector<std::string>> groups;

  int folds() const { return static_cast<int>(groups.size()); }
  FoldSplit split(int fold) const;
  /// Group index of a singer, or -1.
  int group_of(const std::string& singer) const;
};

/// Seeded shuffle followed by round-robin assignment to k groups.
FoldPlan make_fold_plan(std::vector<std::string> singers, int k, std::uint64_t seed);

/// Deterministic Fisher-Yates permutation that does not depend on the
/// standard library's distribution implementations.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace primadnn
