#include "proxyctl/cli.hpp"

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "proxyctl/csv.hpp"
#include "proxyctl/error.hpp"
#include "proxyctl/estimators.hpp"
#include "proxyctl/harness.hpp"
#include "proxyctl/simulate.hpp"

namespace proxyctl {

namespace {

using nlohmann::ordered_json;

ordered_json matrix_to_json(const MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_to_json(const VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::vector<std::string> string_list(const ordered_json& j) {
  std::vector<std::string> out;
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
    return out;
  }
  for (const auto& item : j) out.push_back(item.get<std::string>());
  return out;
}

std::string pct_name(double level) {
  return std::to_string(static_cast<int>(std::lround(level * 100)));
}

// ---- estimate -----------------------------------------------------------

struct EstimateConfig {
  std::string input;
  std::string y_role;
  std::vector<std::string> x_roles, z_roles, v_roles, d_roles;
  std::string estimator = "adaptive";
  std::optional<Eigen::Index> rank;
  std::optional<double> lambda;  // absent = cross-validate
  std::optional<double> delta;
  int folds = 5;
  std::vector<double> levels = {0.90, 0.95, 0.99};
  std::uint64_t seed = 0;
  std::string out = "estimate_results.json";
  std::string format = "json";
};

ordered_json echo_estimate_config(const EstimateConfig& cfg) {
  ordered_json j;
  j["input"] = cfg.input;
  ordered_json roles;
  roles["y"] = cfg.y_role;
  roles["x"] = cfg.x_roles;
  roles["z"] = cfg.z_roles;
  roles["v"] = cfg.v_roles;
  roles["d"] = cfg.d_roles;
  j["roles"] = std::move(roles);
  j["estimator"] = cfg.estimator;
  if (cfg.rank) j["rank"] = *cfg.rank;
  if (cfg.lambda) {
    j["lambda"] = *cfg.lambda;
  } else {
    j["lambda"] = "cv";
  }
  if (cfg.delta) j["delta"] = *cfg.delta;
  j["folds"] = cfg.folds;
  j["levels"] = cfg.levels;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out;
  j["format"] = cfg.format;
  return j;
}

void load_estimate_config(const ordered_json& j, EstimateConfig& cfg) {
  if (j.contains("input")) cfg.input = j.at("input").get<std::string>();
  if (j.contains("roles")) {
    const auto& roles = j.at("roles");
    if (roles.contains("y")) cfg.y_role = roles.at("y").get<std::string>();
    if (roles.contains("x")) cfg.x_roles = string_list(roles.at("x"));
    if (roles.contains("z")) cfg.z_roles = string_list(roles.at("z"));
    if (roles.contains("v")) cfg.v_roles = string_list(roles.at("v"));
    if (roles.contains("d")) cfg.d_roles = string_list(roles.at("d"));
  }
  if (j.contains("estimator")) cfg.estimator = j.at("estimator").get<std::string>();
  if (j.contains("rank")) cfg.rank = j.at("rank").get<Eigen::Index>();
  if (j.contains("lambda")) {
    if (j.at("lambda").is_string()) {
      if (j.at("lambda").get<std::string>() != "cv") {
        throw ConfigError("lambda must be a number or \"cv\"");
      }
      cfg.lambda.reset();
    } else {
      cfg.lambda = j.at("lambda").get<double>();
    }
  }
  if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
  if (j.contains("folds")) cfg.folds = j.at("folds").get<int>();
  if (j.contains("levels")) cfg.levels = j.at("levels").get<std::vector<double>>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  if (j.contains("format")) cfg.format = j.at("format").get<std::string>();
}

MatrixXd columns_by_role(const CsvTable& table,
                         const std::vector<std::string>& names) {
  MatrixXd out(table.values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Eigen::Index col = table.column(names[i]);
    if (col < 0) throw ConfigError("column not found in CSV: " + names[i]);
    out.col(static_cast<Eigen::Index>(i)) = table.values.col(col);
  }
  return out;
}

DataMatrices data_from_csv(const CsvTable& table, const EstimateConfig& cfg,
                           bool need_proxies) {
  if (cfg.y_role.empty() || cfg.x_roles.empty()) {
    throw ConfigError("role mapping must cover y and x");
  }
  if (need_proxies && (cfg.z_roles.empty() || cfg.v_roles.empty())) {
    throw ConfigError("estimator requires z and v roles");
  }
  // Roles must partition the named columns.
  std::vector<std::string> seen;
  auto check = [&seen](const std::vector<std::string>& names) {
    for (const auto& name : names) {
      for (const auto& prev : seen) {
        if (prev == name) {
          throw ConfigError("column mapped to two roles: " + name);
        }
      }
      seen.push_back(name);
    }
  };
  check({cfg.y_role});
  check(cfg.x_roles);
  check(cfg.z_roles);
  check(cfg.v_roles);
  check(cfg.d_roles);

  DataMatrices data;
  data.y = columns_by_role(table, {cfg.y_role});
  data.x = columns_by_role(table, cfg.x_roles);
  data.z = columns_by_role(table, cfg.z_roles);
  data.v = columns_by_role(table, cfg.v_roles);
  const Eigen::Index n = table.values.rows();
  // An intercept column is always prepended; mapped d columns follow.
  data.d = MatrixXd::Ones(n, 1 + static_cast<Eigen::Index>(cfg.d_roles.size()));
  if (!cfg.d_roles.empty()) {
    data.d.rightCols(static_cast<Eigen::Index>(cfg.d_roles.size())) =
        columns_by_role(table, cfg.d_roles);
  }
  return data;
}

std::string estimate_csv_output(const VectorXd& beta,
                                const DrEstimate* dr,
                                const std::vector<double>& levels) {
  std::ostringstream out;
  out << "coordinate,beta";
  if (dr != nullptr) {
    out << ",variance";
    for (const double level : levels) {
      out << ",lower_" << pct_name(level) << ",upper_" << pct_name(level);
    }
  }
  out << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    out << k;
    put(beta(k));
    if (dr != nullptr) {
      put(dr->sigma2(k, k));
      VectorXd contrast = VectorXd::Zero(beta.size());
      contrast(k) = 1.0;
      for (const double level : levels) {
        const ConfidenceInterval ci = confidence_interval(
            dr->beta, dr->sigma2, contrast, level, dr->scores.rows());
        put(ci.lower);
        put(ci.upper);
      }
    }
    out << '\n';
  }
  return out.str();
}

int cmd_estimate(const EstimateConfig& cfg, std::ostream&, std::ostream& err) {
  const bool need_proxies = cfg.estimator != "naive";
  const CsvTable table = read_csv(cfg.input);
  const DataMatrices data = data_from_csv(table, cfg, need_proxies);

  ordered_json result;
  result["command"] = "estimate";
  result["estimator"] = cfg.estimator;

  VectorXd beta;
  std::optional<DrEstimate> dr;
  ordered_json diagnostics;

  if (cfg.estimator == "naive") {
    beta = estimate_naive_ols(data);
  } else if (cfg.estimator == "tsls") {
    const TslsEstimate est = estimate_2sls(data);
    beta = est.beta;
    diagnostics["weak_instruments"] = est.weak_instruments;
    diagnostics["first_stage_sv_ratio"] = est.first_stage_sv_ratio;
    if (est.weak_instruments) {
      err << "warning: weak instruments (first-stage Gram nearly singular)\n";
    }
  } else if (cfg.estimator == "fixed_rank") {
    const Eigen::Index r = cfg.rank.value_or(data.dv());
    const FixedRankEstimate est = estimate_fixed_rank(data, r);
    beta = est.beta;
    result["rank"] = est.rank_used;
    diagnostics["q_eigenvalues"] = vector_to_json(est.rrr.q_eigs);
    diagnostics["degenerate_gram"] = est.diagnostics.degenerate_gram;
  } else if (cfg.estimator == "adaptive") {
    AdaptiveOptions opts;
    opts.lambda = cfg.lambda;
    opts.cv_folds = cfg.folds;
    opts.seed = cfg.seed;
    const FixedRankEstimate est = estimate_adaptive(data, opts);
    beta = est.beta;
    result["rank"] = est.rank_used;
    diagnostics["q_eigenvalues"] = vector_to_json(est.rrr.q_eigs);
    diagnostics["degenerate_gram"] = est.diagnostics.degenerate_gram;
    if (est.rrr.lambda) diagnostics["lambda"] = *est.rrr.lambda;
    if (est.cv) {
      ordered_json curve = ordered_json::array();
      for (const auto& point : est.cv->curve) {
        curve.push_back({{"lambda", point.lambda}, {"score", point.score}});
      }
      diagnostics["cv_curve"] = std::move(curve);
    }
  } else if (cfg.estimator == "dr") {
    DrOptions opts;
    opts.lambda = cfg.lambda;
    opts.delta = cfg.delta;
    opts.cv_folds = cfg.folds;
    opts.seed = cfg.seed;
    const FoldPlan plan = make_fold_plan(data.n(), cfg.folds, cfg.seed);
    dr = estimate_dr(data, plan, opts);
    beta = dr->beta;
    ordered_json ranks = ordered_json::array();
    for (const auto& fold : dr->per_fold) ranks.push_back(fold.inputs.rank);
    result["rank"] = ranks;
    result["sigma2"] = matrix_to_json(dr->sigma2);
    ordered_json cis = ordered_json::array();
    for (Eigen::Index k = 0; k < beta.size(); ++k) {
      VectorXd contrast = VectorXd::Zero(beta.size());
      contrast(k) = 1.0;
      for (const double level : cfg.levels) {
        const ConfidenceInterval ci =
            confidence_interval(beta, dr->sigma2, contrast, level, data.n());
        ordered_json entry;
        entry["coordinate"] = k;
        entry["level"] = level;
        entry["center"] = ci.center;
        entry["lower"] = ci.lower;
        entry["upper"] = ci.upper;
        cis.push_back(std::move(entry));
      }
    }
    result["confidence_intervals"] = std::move(cis);
    diagnostics["delta"] = dr->delta;
    ordered_json fold_eigs = ordered_json::array();
    for (const auto& fold : dr->per_fold) {
      fold_eigs.push_back(vector_to_json(fold.q_eigs));
    }
    diagnostics["q_eigenvalues"] = std::move(fold_eigs);
    diagnostics["weak_identification"] = dr->diagnostics.weak_identification;
    diagnostics["identification_sv_ratio"] =
        dr->diagnostics.identification_sv_ratio;
    if (dr->diagnostics.weak_identification) {
      err << "warning: weak identification (mu Gram nearly singular)\n";
    }
  } else {
    throw ConfigError("unknown estimator: " + cfg.estimator);
  }

  result["beta"] = vector_to_json(beta);
  result["diagnostics"] = std::move(diagnostics);
  result["seed"] = cfg.seed;
  result["config"] = echo_estimate_config(cfg);

  if (cfg.format == "json") {
    write_file_atomic(cfg.out, result.dump(2) + "\n");
  } else if (cfg.format == "csv") {
    write_file_atomic(cfg.out, estimate_csv_output(
                                   beta, dr ? &*dr : nullptr, cfg.levels));
  } else {
    throw ConfigError("unknown format: " + cfg.format);
  }
  return 0;
}

// ---- simulate -----------------------------------------------------------

struct SimulateConfig {
  DgpSpec dgp;
  std::string out = "dataset.csv";
  std::string sidecar;  // default: out + ".params.json"
};

void load_dgp(const ordered_json& j, DgpSpec& spec) {
  if (j.contains("d_w")) spec.d_w = j.at("d_w").get<Eigen::Index>();
  if (j.contains("d_x")) spec.d_x = j.at("d_x").get<Eigen::Index>();
  if (j.contains("d_v")) spec.d_v = j.at("d_v").get<Eigen::Index>();
  if (j.contains("d_z")) spec.d_z = j.at("d_z").get<Eigen::Index>();
  if (j.contains("n")) spec.n = j.at("n").get<Eigen::Index>();
  if (j.contains("p")) spec.p = j.at("p").get<int>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("noise_scale")) {
    spec.noise_scale = j.at("noise_scale").get<double>();
  }
}

ordered_json echo_dgp(const DgpSpec& spec) {
  ordered_json j;
  j["d_w"] = spec.d_w;
  j["d_x"] = spec.d_x;
  j["d_v"] = spec.d_v;
  j["d_z"] = spec.d_z;
  j["n"] = spec.n;
  j["p"] = spec.p;
  j["seed"] = spec.seed;
  j["noise_scale"] = spec.noise_scale;
  return j;
}

int cmd_simulate(const SimulateConfig& cfg, std::ostream&, std::ostream&) {
  cfg.dgp.validate();
  Xoshiro256pp rng(cfg.dgp.seed);
  const DgpParams params = draw_params(cfg.dgp, rng);
  const SimulatedDataset ds = draw_dataset(params, cfg.dgp.n, rng);

  CsvTable table;
  table.header.push_back("y");
  for (Eigen::Index i = 0; i < ds.data.x.cols(); ++i) {
    table.header.push_back("x" + std::to_string(i + 1));
  }
  for (Eigen::Index i = 0; i < ds.data.z.cols(); ++i) {
    table.header.push_back("z" + std::to_string(i + 1));
  }
  for (Eigen::Index i = 0; i < ds.data.v.cols(); ++i) {
    table.header.push_back("v" + std::to_string(i + 1));
  }
  for (Eigen::Index i = 0; i < ds.data.d.cols(); ++i) {
    table.header.push_back("d" + std::to_string(i + 1));
  }
  table.values.resize(ds.data.n(), static_cast<Eigen::Index>(table.header.size()));
  table.values << ds.data.y, ds.data.x, ds.data.z, ds.data.v, ds.data.d;
  write_file_atomic(cfg.out, format_csv(table));

  ordered_json sidecar;
  sidecar["command"] = "simulate";
  sidecar["seed"] = cfg.dgp.seed;
  sidecar["dgp"] = echo_dgp(cfg.dgp);
  ordered_json pj;
  pj["beta0"] = vector_to_json(params.beta0);
  pj["b0"] = matrix_to_json(params.b0);
  pj["t0"] = matrix_to_json(params.t0);
  pj["c0"] = matrix_to_json(params.c0);
  pj["g0"] = matrix_to_json(params.g0);
  pj["f0"] = matrix_to_json(params.f0);
  pj["chi0"] = matrix_to_json(params.chi0);
  pj["sigma_v"] = matrix_to_json(params.sigma_v);
  pj["sigma_x"] = matrix_to_json(params.sigma_x);
  pj["sigma_z"] = matrix_to_json(params.sigma_z);
  pj["sigma_y"] = matrix_to_json(params.sigma_y);
  sidecar["params"] = std::move(pj);
  const std::string sidecar_path =
      cfg.sidecar.empty() ? cfg.out + ".params.json" : cfg.sidecar;
  write_file_atomic(sidecar_path, sidecar.dump(2) + "\n");
  return 0;
}

// ---- benchmark ----------------------------------------------------------

struct BenchmarkConfig {
  ExperimentGrid grid;
  std::string out = "benchmark_results.csv";
  std::string format = "csv";
};

void load_benchmark(const ordered_json& j, BenchmarkConfig& cfg) {
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (g.contains("cells")) {
      cfg.grid.cells.clear();
      for (const auto& cj : g.at("cells")) {
        DgpSpec spec;
        load_dgp(cj, spec);
        cfg.grid.cells.push_back(spec);
      }
    }
    if (g.contains("estimators")) {
      cfg.grid.estimators.clear();
      for (const auto& name : g.at("estimators")) {
        cfg.grid.estimators.push_back(
            estimator_from_name(name.get<std::string>()));
      }
    }
    if (g.contains("replications")) {
      cfg.grid.replications = g.at("replications").get<int>();
    }
    if (g.contains("levels")) {
      cfg.grid.levels = g.at("levels").get<std::vector<double>>();
    }
    if (g.contains("master_seed")) {
      cfg.grid.master_seed = g.at("master_seed").get<std::uint64_t>();
    }
    if (g.contains("fixed_rank_r")) {
      cfg.grid.fixed_rank_r = g.at("fixed_rank_r").get<Eigen::Index>();
    }
    if (g.contains("dr_folds")) cfg.grid.dr_folds = g.at("dr_folds").get<int>();
  }
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  if (j.contains("format")) cfg.format = j.at("format").get<std::string>();
}

int cmd_benchmark(const BenchmarkConfig& cfg, std::ostream& out,
                  std::ostream&) {
  const std::vector<CellResult> results = run_grid(cfg.grid);
  write_file_atomic(cfg.out, summarize(results, cfg.format));

  // Table-style summary on stdout.
  out << "d_W  d_V=d_Z  n        estimator    median_se    rank_correct\n";
  for (const auto& cell : results) {
    for (const auto& m : cell.metrics) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-4lld %-8lld %-8lld %-12s %-12.5g %s\n",
                    static_cast<long long>(cell.spec.d_w),
                    static_cast<long long>(cell.spec.d_v),
                    static_cast<long long>(cell.spec.n),
                    estimator_name(m.kind).c_str(), m.median_se,
                    m.rank_correct_frac
                        ? std::to_string(*m.rank_correct_frac).c_str()
                        : "-");
      out << line;
    }
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Linear proxy-control estimation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> estimator_flag, lambda_flag, out_flag, format_flag;
  std::optional<Eigen::Index> rank_flag;
  std::optional<double> delta_flag;
  std::optional<int> folds_flag;
  std::optional<std::string> input_flag, levels_flag;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "JSON config: file path or inline document");
    sub->add_option("--seed", seed_flag, "RNG seed (overrides config)");
    sub->add_option("--out", out_flag, "output path");
    sub->add_option("--format", format_flag, "output format: json|csv");
  };

  CLI::App* est = app.add_subcommand("estimate", "Estimate from a CSV dataset");
  add_common(est);
  std::optional<std::string> y_col, x_cols, z_cols, v_cols, d_cols;
  est->add_option("--input", input_flag, "input CSV path");
  est->add_option("--y-col", y_col, "outcome column name");
  est->add_option("--x-cols", x_cols, "treatment columns, comma-separated");
  est->add_option("--z-cols", z_cols, "negative control treatment columns");
  est->add_option("--v-cols", v_cols, "negative control outcome columns");
  est->add_option("--d-cols", d_cols, "control columns (intercept is implicit)");
  est->add_option("--estimator", estimator_flag,
                  "naive|fixed_rank|adaptive|dr|tsls");
  est->add_option("--rank", rank_flag, "rank for fixed_rank");
  est->add_option("--lambda", lambda_flag, "threshold or 'cv'");
  est->add_option("--delta", delta_flag, "lasso penalty for dr");
  est->add_option("--folds", folds_flag, "fold count");
  est->add_option("--levels", levels_flag, "comma-separated CI levels");

  CLI::App* sim = app.add_subcommand("simulate", "Draw a synthetic dataset");
  add_common(sim);

  CLI::App* bench = app.add_subcommand("benchmark", "Run an experiment grid");
  add_common(bench);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    ordered_json config = ordered_json::object();
    if (!config_path.empty()) {
      // A value starting with '{' is inline JSON, otherwise a file path.
      const bool inline_json =
          config_path.find_first_not_of(" \t") != std::string::npos &&
          config_path[config_path.find_first_not_of(" \t")] == '{';
      config = ordered_json::parse(inline_json ? config_path
                                               : read_file(config_path));
    }

    if (est->parsed()) {
      EstimateConfig cfg;
      load_estimate_config(config, cfg);
      auto split_names = [](const std::string& s) {
        std::vector<std::string> names;
        std::istringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) names.push_back(tok);
        return names;
      };
      if (input_flag) cfg.input = *input_flag;
      if (y_col) cfg.y_role = *y_col;
      if (x_cols) cfg.x_roles = split_names(*x_cols);
      if (z_cols) cfg.z_roles = split_names(*z_cols);
      if (v_cols) cfg.v_roles = split_names(*v_cols);
      if (d_cols) cfg.d_roles = split_names(*d_cols);
      if (estimator_flag) cfg.estimator = *estimator_flag;
      if (rank_flag) cfg.rank = *rank_flag;
      if (lambda_flag) {
        if (*lambda_flag == "cv") {
          cfg.lambda.reset();
        } else {
          cfg.lambda = std::stod(*lambda_flag);
        }
      }
      if (delta_flag) cfg.delta = *delta_flag;
      if (folds_flag) cfg.folds = *folds_flag;
      if (levels_flag) {
        cfg.levels.clear();
        std::istringstream ss(*levels_flag);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.levels.push_back(std::stod(tok));
      }
      if (seed_flag) cfg.seed = *seed_flag;
      if (out_flag) cfg.out = *out_flag;
      if (format_flag) cfg.format = *format_flag;
      if (cfg.input.empty()) throw ConfigError("no input CSV given");
      return cmd_estimate(cfg, out, err);
    }
    if (sim->parsed()) {
      SimulateConfig cfg;
      if (config.contains("dgp")) load_dgp(config.at("dgp"), cfg.dgp);
      if (config.contains("seed")) cfg.dgp.seed = config.at("seed").get<std::uint64_t>();
      if (config.contains("out")) cfg.out = config.at("out").get<std::string>();
      if (config.contains("sidecar")) cfg.sidecar = config.at("sidecar").get<std::string>();
      if (seed_flag) cfg.dgp.seed = *seed_flag;
      if (out_flag) cfg.out = *out_flag;
      return cmd_simulate(cfg, out, err);
    }
    if (bench->parsed()) {
      BenchmarkConfig cfg;
      load_benchmark(config, cfg);
      if (seed_flag) cfg.grid.master_seed = *seed_flag;
      if (out_flag) cfg.out = *out_flag;
      if (format_flag) cfg.format = *format_flag;
      return cmd_benchmark(cfg, out, err);
    }
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "error: no subcommand\n";
  return 2;
}

}  // namespace proxyctl
