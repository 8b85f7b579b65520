#include "proxyctl/folds.hpp"

#include <numeric>

#include "proxyctl/error.hpp"
#include "proxyctl/rng.hpp"

namespace proxyctl {

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  return idx;
}

FoldPlan make_fold_plan(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 1) throw InvalidInputError("make_fold_plan: folds must be >= 1");
  if (n < folds) {
    throw InvalidInputError("make_fold_plan: more folds than observations");
  }
  std::vector<Eigen::Index> order = all_rows(n);
  Xoshiro256pp rng(derive_seed(seed, 0x666f6c64 /* "fold" */));
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }
  FoldPlan plan;
  plan.assignments.assign(static_cast<std::size_t>(n), 0);
  plan.folds = folds;
  plan.seed = seed;
  const Eigen::Index base = n / folds;
  const Eigen::Index extra = n % folds;
  Eigen::Index pos = 0;
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index size = base + (f < extra ? 1 : 0);
    for (Eigen::Index k = 0; k < size; ++k) {
      plan.assignments[static_cast<std::size_t>(order[pos++])] = f;
    }
  }
  return plan;
}

std::vector<Eigen::Index> FoldPlan::fold_rows(int j) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == j) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

std::vector<Eigen::Index> FoldPlan::complement_rows(int j) const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != j) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

}  // namespace proxyctl
