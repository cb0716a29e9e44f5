#include "primadnn/folds.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace primadnn {

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

FoldPlan make_fold_plan(std::vector<std::string> singers, int k, std::uint64_t seed) {
  if (k < 3) throw std::invalid_argument("need at least 3 folds for train/validation/test");
  std::sort(singers.begin(), singers.end());
  singers.erase(std::unique(singers.begin(), singers.end()), singers.end());
  if (singers.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("cannot split " + std::to_string(singers.size()) +
                                " singers into " + std::to_string(k) + " folds");
  }
  const auto perm = seeded_permutation(singers.size(), seed);
  FoldPlan plan;
  plan.groups.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    plan.groups[i % static_cast<std::size_t>(k)].push_back(singers[perm[i]]);
  }
  return plan;
}

FoldSplit FoldPlan::split(int fold) const {
  const int k = folds();
  if (fold < 0 || fold >= k) throw std::out_of_range("fold " + std::to_string(fold));
  FoldSplit s;
  const int val = (fold + 1) % k;
  for (int g = 0; g < k; ++g) {
    auto& dst = g == fold ? s.test : (g == val ? s.validation : s.train);
    const auto& src = groups[static_cast<std::size_t>(g)];
    dst.insert(dst.end(), src.begin(), src.end());
  }
  return s;
}

int FoldPlan::group_of(const std::string& singer) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (std::find(groups[g].begin(), groups[g].end(), singer) != groups[g].end()) {
      return static_cast<int>(g);
    }
  }
  return -1;
}

}  // namespace primadnn
