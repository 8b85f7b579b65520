#include "proxyctl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "proxyctl/error.hpp"
#include "proxyctl/estimators.hpp"

namespace proxyctl {

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kNaive: return "naive";
    case EstimatorKind::kFixedRank: return "fixed_rank";
    case EstimatorKind::kAdaptive: return "adaptive";
    case EstimatorKind::kDr: return "dr";
    case EstimatorKind::kTsls: return "tsls";
  }
  throw InvalidInputError("unknown estimator kind");
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "naive") return EstimatorKind::kNaive;
  if (name == "fixed_rank") return EstimatorKind::kFixedRank;
  if (name == "adaptive") return EstimatorKind::kAdaptive;
  if (name == "dr") return EstimatorKind::kDr;
  if (name == "tsls" || name == "2sls") return EstimatorKind::kTsls;
  throw InvalidInputError("unknown estimator name: " + name);
}

void ExperimentGrid::validate() const {
  if (cells.empty()) throw InvalidInputError("ExperimentGrid: no cells");
  if (estimators.empty()) {
    throw InvalidInputError("ExperimentGrid: no estimators");
  }
  if (replications < 1) {
    throw InvalidInputError("ExperimentGrid: replications must be >= 1");
  }
  for (const auto& cell : cells) cell.validate();
  for (const double level : levels) {
    if (level <= 0.0 || level >= 1.0) {
      throw InvalidInputError("ExperimentGrid: CI level outside (0, 1)");
    }
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidInputError("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

struct RepOutcome {
  bool failed = true;
  double squared_error = 0.0;
  std::vector<bool> ci_hits;  // DR only, aligned with levels
  bool rank_correct = false;  // adaptive only
};

RepOutcome run_estimator(EstimatorKind kind, const SimulatedDataset& ds,
                         const ExperimentGrid& grid, std::uint64_t rep_seed) {
  RepOutcome out;
  const DataMatrices& data = ds.data;
  const VectorXd& beta0 = ds.params.beta0;
  try {
    switch (kind) {
      case EstimatorKind::kNaive: {
        const VectorXd beta = estimate_naive_ols(data);
        out.squared_error = (beta - beta0).squaredNorm();
        break;
      }
      case EstimatorKind::kFixedRank: {
        const Eigen::Index r = grid.fixed_rank_r.value_or(data.dv());
        const FixedRankEstimate est = estimate_fixed_rank(data, r);
        out.squared_error = (est.beta - beta0).squaredNorm();
        break;
      }
      case EstimatorKind::kAdaptive: {
        AdaptiveOptions opts;
        opts.seed = rep_seed;
        const FixedRankEstimate est = estimate_adaptive(data, opts);
        out.squared_error = (est.beta - beta0).squaredNorm();
        out.rank_correct = est.rank_used == ds.params.dw();
        break;
      }
      case EstimatorKind::kDr: {
        DrOptions opts;
        opts.seed = rep_seed;
        const FoldPlan plan =
            make_fold_plan(data.n(), grid.dr_folds, rep_seed);
        const DrEstimate est = estimate_dr(data, plan, opts);
        out.squared_error = (est.beta - beta0).squaredNorm();
        VectorXd contrast = VectorXd::Zero(data.dx());
        contrast(0) = 1.0;
        for (const double level : grid.levels) {
          const ConfidenceInterval ci = confidence_interval(
              est.beta, est.sigma2, contrast, level, data.n());
          const double target = contrast.dot(beta0);
          out.ci_hits.push_back(target >= ci.lower && target <= ci.upper);
        }
        break;
      }
      case EstimatorKind::kTsls: {
        const TslsEstimate est = estimate_2sls(data);
        out.squared_error = (est.beta - beta0).squaredNorm();
        break;
      }
    }
    out.failed = !std::isfinite(out.squared_error);
  } catch (const std::exception&) {
    out.failed = true;
  }
  return out;
}

int thread_count(int replications) {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PROXYCTL_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) threads = parsed;
  }
  threads = std::max(threads, 1);
  return std::min(threads, replications);
}

}  // namespace

std::vector<CellResult> run_grid(const ExperimentGrid& grid) {
  grid.validate();
  std::vector<CellResult> results;
  results.reserve(grid.cells.size());

  for (std::size_t cell_idx = 0; cell_idx < grid.cells.size(); ++cell_idx) {
    const DgpSpec& spec = grid.cells[cell_idx];
    const int reps = grid.replications;

    // One outcome slot per (rep, estimator): threads never contend.
    std::vector<std::vector<RepOutcome>> outcomes(
        static_cast<std::size_t>(reps),
        std::vector<RepOutcome>(grid.estimators.size()));

    std::atomic<int> next_rep{0};
    auto worker = [&]() {
      for (;;) {
        const int rep = next_rep.fetch_add(1);
        if (rep >= reps) return;
        const std::uint64_t rep_seed =
            derive_seed(grid.master_seed, cell_idx,
                        static_cast<std::uint64_t>(rep));
        Xoshiro256pp rng(rep_seed);
        const DgpParams params = draw_params(spec, rng);
        const SimulatedDataset ds = draw_dataset(params, spec.n, rng);
        for (std::size_t e = 0; e < grid.estimators.size(); ++e) {
          outcomes[static_cast<std::size_t>(rep)][e] =
              run_estimator(grid.estimators[e], ds, grid, rep_seed);
        }
      }
    };

    const int threads = thread_count(reps);
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }

    CellResult cell;
    cell.spec = spec;
    cell.cell_index = cell_idx;
    cell.master_seed = grid.master_seed;
    cell.levels = grid.levels;
    for (std::size_t e = 0; e < grid.estimators.size(); ++e) {
      EstimatorMetrics m;
      m.kind = grid.estimators[e];
      m.reps = reps;
      std::vector<double> errors;
      std::vector<int> hit_counts(grid.levels.size(), 0);
      int hit_reps = 0;
      int rank_correct = 0;
      for (int rep = 0; rep < reps; ++rep) {
        const RepOutcome& o = outcomes[static_cast<std::size_t>(rep)][e];
        if (o.failed) {
          ++m.failures;
          continue;
        }
        errors.push_back(o.squared_error);
        if (!o.ci_hits.empty()) {
          ++hit_reps;
          for (std::size_t l = 0; l < grid.levels.size(); ++l) {
            if (o.ci_hits[l]) ++hit_counts[l];
          }
        }
        if (o.rank_correct) ++rank_correct;
      }
      if (!errors.empty()) m.median_se = median(errors);
      if (m.kind == EstimatorKind::kDr && hit_reps > 0) {
        for (std::size_t l = 0; l < grid.levels.size(); ++l) {
          m.coverage.push_back(static_cast<double>(hit_counts[l]) /
                               static_cast<double>(hit_reps));
        }
      }
      if (m.kind == EstimatorKind::kAdaptive && !errors.empty()) {
        m.rank_correct_frac = static_cast<double>(rank_correct) /
                              static_cast<double>(errors.size());
      }
      cell.metrics.push_back(std::move(m));
    }
    results.push_back(std::move(cell));
  }
  return results;
}

namespace {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

std::string summarize(const std::vector<CellResult>& results,
                      const std::string& format) {
  if (results.empty()) throw InvalidInputError("summarize: empty results");
  const std::vector<double>& levels = results.front().levels;

  if (format == "csv") {
    std::ostringstream out;
    out << "cell_id,d_w,d_x,d_v,d_z,n,p,estimator,median_se";
    for (const double level : levels) {
      out << ",coverage_" << static_cast<int>(std::lround(level * 100));
    }
    out << ",rank_correct_frac,reps,failures,seed\n";
    for (const auto& cell : results) {
      for (const auto& m : cell.metrics) {
        out << cell.cell_index << ',' << cell.spec.d_w << ',' << cell.spec.d_x
            << ',' << cell.spec.d_v << ',' << cell.spec.d_z << ','
            << cell.spec.n << ',' << cell.spec.p << ','
            << estimator_name(m.kind) << ',' << format_double(m.median_se);
        for (std::size_t l = 0; l < levels.size(); ++l) {
          out << ',';
          if (l < m.coverage.size()) out << format_double(m.coverage[l]);
        }
        out << ',';
        if (m.rank_correct_frac) out << format_double(*m.rank_correct_frac);
        out << ',' << m.reps << ',' << m.failures << ',' << cell.master_seed
            << '\n';
      }
    }
    return out.str();
  }
  if (format == "json") {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& cell : results) {
      for (const auto& m : cell.metrics) {
        nlohmann::ordered_json row;
        row["cell_id"] = cell.cell_index;
        row["d_w"] = cell.spec.d_w;
        row["d_x"] = cell.spec.d_x;
        row["d_v"] = cell.spec.d_v;
        row["d_z"] = cell.spec.d_z;
        row["n"] = cell.spec.n;
        row["p"] = cell.spec.p;
        row["estimator"] = estimator_name(m.kind);
        row["median_se"] = m.median_se;
        for (std::size_t l = 0; l < levels.size(); ++l) {
          const std::string key =
              "coverage_" +
              std::to_string(static_cast<int>(std::lround(levels[l] * 100)));
          if (l < m.coverage.size()) {
            row[key] = m.coverage[l];
          } else {
            row[key] = nullptr;
          }
        }
        if (m.rank_correct_frac) {
          row["rank_correct_frac"] = *m.rank_correct_frac;
        } else {
          row["rank_correct_frac"] = nullptr;
        }
        row["reps"] = m.reps;
        row["failures"] = m.failures;
        row["seed"] = cell.master_seed;
        rows.push_back(std::move(row));
      }
    }
    return rows.dump(2) + "\n";
  }
  throw InvalidInputError("summarize: unknown format: " + format);
}

}  // namespace proxyctl
