#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "proxyctl/simulate.hpp"

namespace proxyctl {

enum class EstimatorKind { kNaive, kFixedRank, kAdaptive, kDr, kTsls };

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

struct ExperimentGrid {
  std::vector<DgpSpec> cells;
  std::vector<EstimatorKind> estimators;
  int replications = 100;
  std::vector<double> levels = {0.90, 0.95, 0.99};
  std::uint64_t master_seed = 0;
  // Rank for the fixed_rank estimator; absent means r = d_V (unrestricted).
  std::optional<Eigen::Index> fixed_rank_r;
  int dr_folds = 5;

  void validate() const;
};

struct EstimatorMetrics {
  EstimatorKind kind = EstimatorKind::kNaive;
  double median_se = 0.0;  // median of ||beta_hat - beta0||^2
  // Aligned with ExperimentGrid::levels; DR only, empty otherwise.
  std::vector<double> coverage;
  // Fraction of replications with selected rank == d_W; adaptive only.
  std::optional<double> rank_correct_frac;
  int reps = 0;
  int failures = 0;
};

struct CellResult {
  DgpSpec spec;
  std::size_t cell_index = 0;
  std::uint64_t master_seed = 0;
  std::vector<double> levels;
  std::vector<EstimatorMetrics> metrics;
};

// Runs every (cell, replication, estimator) combination. Replications use
// independent streams derived from (master_seed, cell, rep), so results are
// identical regardless of thread count or execution order. Estimator
// failures are counted and excluded from the medians.
std::vector<CellResult> run_grid(const ExperimentGrid& grid);

// One row per (cell, estimator); format is "csv" or "json".
std::string summarize(const std::vector<CellResult>& results,
                      const std::string& format);

// Median with the midpoint rule for even counts. Throws on empty input.
double median(std::vector<double> values);

}  // namespace proxyctl
