#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace proxyctl {

// Partition of {0..n-1} into J folds: contiguous blocks after a seeded
// shuffle, sizes differing by at most one.
struct FoldPlan {
  std::vector<int> assignments;  // length n, values in [0, folds)
  int folds = 0;
  std::uint64_t seed = 0;

  std::vector<Eigen::Index> fold_rows(int j) const;
  std::vector<Eigen::Index> complement_rows(int j) const;
};

FoldPlan make_fold_plan(Eigen::Index n, int folds, std::uint64_t seed);

std::vector<Eigen::Index> all_rows(Eigen::Index n);

}  // namespace proxyctl
