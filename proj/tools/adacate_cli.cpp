// Command-line front end: `estimate` runs the adaptive combination on user
// CSV data, `simulate` runs the Monte Carlo harness. Both emit plot-ready
// CSV/JSON; figures in downstream reports are static, so no rendering here.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "adacate/adacate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  int target_z = 1;
  std::string reduction = "pct:1";
  std::string outcome_link = "identity";
  bool per_arm_outcome = false;
  std::string method = "lasso";
  double beta_exponent = 0.25;
  std::string se_variant = "conservative";
  int grid_size = 25;
  double epsilon = 1e-3;
  std::string bandwidth = "auto";
  std::string eval_points = "19";
  int threads = 0;
  std::string out_dir = ".";
  std::uint64_t seed = 42;
};

void add_common_flags(CLI::App& app, CommonFlags& f) {
  app.add_option("--target-z", f.target_z, "Target population: 0=trial, 1=OS")
      ->check(CLI::Range(0, 1))
      ->envname("ADACATE_TARGET_Z");
  app.add_option("--reduction", f.reduction,
                 "V = g(X): col:<i> | pct:<i> | pct-score (i is 1-based)")
      ->envname("ADACATE_REDUCTION");
  app.add_option("--outcome-link", f.outcome_link, "identity | logit")
      ->check(CLI::IsMember({"identity", "logit"}))
      ->envname("ADACATE_OUTCOME_LINK");
  app.add_flag("--per-arm-outcome", f.per_arm_outcome,
               "Fit outcome models separately per treatment arm");
  app.add_option("--method", f.method, "lasso | ridge | unpenalized")
      ->check(CLI::IsMember({"lasso", "ridge", "unpenalized"}))
      ->envname("ADACATE_METHOD");
  app.add_option("--beta", f.beta_exponent,
                 "Ridge correction exponent, in (0, 0.5)")
      ->envname("ADACATE_BETA");
  app.add_option("--se-variant", f.se_variant,
                 "CI standard error: plain | conservative")
      ->check(CLI::IsMember({"plain", "conservative"}));
  app.add_option("--grid", f.grid_size, "Lambda grid size")
      ->check(CLI::PositiveNumber)
      ->envname("ADACATE_GRID");
  app.add_option("--epsilon", f.epsilon, "Lambda grid floor multiplier")
      ->envname("ADACATE_EPSILON");
  app.add_option("--bandwidth", f.bandwidth,
                 "Kernel bandwidth for both arms, or 'auto' (rule of thumb)")
      ->envname("ADACATE_BANDWIDTH");
  app.add_option("--eval-points", f.eval_points,
                 "Evaluation grid: a count or a comma list of v values")
      ->envname("ADACATE_EVAL_POINTS");
  app.add_option("--threads", f.threads,
                 "Parallel width (0 = available parallelism)")
      ->envname("ADACATE_THREADS");
  app.add_option("--seed", f.seed, "RNG seed")->envname("ADACATE_SEED");
  app.add_option("--out", f.out_dir, "Output directory")
      ->envname("ADACATE_OUT");
}

adacate::ReductionSpec parse_reduction(const std::string& spec,
                                       adacate::Link outcome_link) {
  adacate::ReductionSpec r;
  r.score_link = outcome_link;
  auto column_of = [&](const std::string& body) {
    int idx = std::stoi(body);
    if (idx < 1) throw adacate::Error("reduction column is 1-based");
    return static_cast<std::size_t>(idx - 1);
  };
  if (spec.rfind("col:", 0) == 0) {
    r.kind = adacate::ReductionSpec::Kind::column;
    r.column = column_of(spec.substr(4));
  } else if (spec.rfind("pct:", 0) == 0) {
    r.kind = adacate::ReductionSpec::Kind::pct_column;
    r.column = column_of(spec.substr(4));
  } else if (spec == "pct-score") {
    r.kind = adacate::ReductionSpec::Kind::pct_score;
  } else {
    throw adacate::Error("bad --reduction '" + spec +
                         "'; expected col:<i>, pct:<i>, or pct-score");
  }
  return r;
}

adacate::PipelineConfig make_pipeline(const CommonFlags& f) {
  adacate::PipelineConfig cfg;
  cfg.target_z = f.target_z;
  cfg.outcome_link =
      f.outcome_link == "logit" ? adacate::Link::logit : adacate::Link::identity;
  cfg.outcome_per_arm = f.per_arm_outcome;
  cfg.reduction = parse_reduction(f.reduction, cfg.outcome_link);
  if (f.method == "lasso")
    cfg.method = adacate::CombineMethod::lasso;
  else if (f.method == "ridge")
    cfg.method = adacate::CombineMethod::ridge;
  else
    cfg.method = adacate::CombineMethod::unpenalized;
  cfg.beta_exponent = f.beta_exponent;
  cfg.se_variant = f.se_variant == "plain" ? adacate::SeVariant::plain
                                           : adacate::SeVariant::conservative;
  cfg.grid_size = f.grid_size;
  cfg.epsilon = f.epsilon;
  if (f.bandwidth != "auto") {
    const double h = std::stod(f.bandwidth);
    if (h <= 0) throw adacate::Error("--bandwidth must be positive or 'auto'");
    cfg.kernel.bandwidth_trial = h;
    cfg.kernel.bandwidth_os = h;
  }
  cfg.threads = adacate::resolve_threads(f.threads);
  return cfg;
}

std::vector<double> parse_point_list(const std::string& text) {
  std::vector<double> pts;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    pts.push_back(std::stod(text.substr(start, comma - start)));
    start = comma + 1;
  }
  return pts;
}

adacate::EvaluationGrid resolve_eval_grid(const std::string& spec,
                                          const adacate::ReductionSpec& reduction,
                                          const std::vector<double>& v_reference) {
  if (spec.find(',') != std::string::npos || spec.find('.') != std::string::npos) {
    adacate::EvaluationGrid g;
    g.points = parse_point_list(spec);
    g.validate();
    return g;
  }
  const int k = std::stoi(spec);
  if (reduction.kind == adacate::ReductionSpec::Kind::column) {
    // raw-column V: span the reference range
    const auto [lo, hi] =
        std::minmax_element(v_reference.begin(), v_reference.end());
    adacate::EvaluationGrid g;
    for (int i = 1; i <= k; ++i)
      g.points.push_back(*lo + (*hi - *lo) * i / (k + 1.0));
    g.validate();
    return g;
  }
  return adacate::even_grid(k);
}

std::string fmt(double v) { return adacate::csv::format_number(v); }

json common_json(const CommonFlags& f) {
  return json{{"target_z", f.target_z},
              {"reduction", f.reduction},
              {"outcome_link", f.outcome_link},
              {"per_arm_outcome", f.per_arm_outcome},
              {"method", f.method},
              {"beta", f.beta_exponent},
              {"se_variant", f.se_variant},
              {"grid", f.grid_size},
              {"epsilon", f.epsilon},
              {"bandwidth", f.bandwidth},
              {"eval_points", f.eval_points},
              {"threads", f.threads},
              {"seed", f.seed},
              {"out", f.out_dir}};
}

void write_risk_curve(const std::string& path,
                      const std::vector<std::pair<double, double>>& curve) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [lambda, risk] : curve) rows.push_back({fmt(lambda), fmt(risk)});
  adacate::csv::write(path, {"lambda", "risk"}, rows);
}

int cmd_estimate(const CommonFlags& f, const std::string& data_path,
                 const adacate::CsvSchema& schema, double train_frac,
                 bool dump_panel) {
  const adacate::StudyDataset data = adacate::load_csv(data_path, schema);
  auto [train, valid] =
      adacate::split_train_validation(data, train_frac, f.seed);

  adacate::PipelineConfig cfg = make_pipeline(f);
  adacate::ReductionSpec resolved = adacate::resolve_reduction(cfg.reduction, valid);
  const std::vector<double> v_ref = adacate::apply_reduction(resolved, valid, valid);
  cfg.eval = resolve_eval_grid(f.eval_points, resolved, v_ref);
  cfg.reduction = resolved;

  const adacate::EstimationResult res = adacate::run_estimation(train, valid, cfg);

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);

  std::vector<std::vector<std::string>> est_rows, weight_rows;
  for (const adacate::CombinedEstimate& p : res.points) {
    est_rows.push_back({fmt(p.v),
                        fmt(p.tau_r), fmt(p.se_r),
                        fmt(p.tau_r - adacate::kZ975 * p.se_r),
                        fmt(p.tau_r + adacate::kZ975 * p.se_r),
                        fmt(p.tau_o), fmt(p.se_o),
                        fmt(p.tau_o - adacate::kZ975 * p.se_o),
                        fmt(p.tau_o + adacate::kZ975 * p.se_o),
                        fmt(p.f_r), fmt(p.f_o),
                        fmt(p.eta), fmt(p.tau),
                        fmt(p.se_plain), fmt(p.se_conservative),
                        fmt(p.ci_low), fmt(p.ci_high)});
    weight_rows.push_back({fmt(p.v), fmt(p.eta)});
  }
  adacate::csv::write(
      (out / "estimates.csv").string(),
      {"v", "tau_r", "se_r", "ci_r_low", "ci_r_high", "tau_o", "se_o",
       "ci_o_low", "ci_o_high", "f_r", "f_o", "eta", "tau", "se_plain",
       "se_conservative", "ci_low", "ci_high"},
      est_rows);
  adacate::csv::write((out / "weights.csv").string(), {"v", "eta"}, weight_rows);
  write_risk_curve((out / "risk_curve.csv").string(), res.tuning.risk_curve);
  if (dump_panel)
    adacate::write_panel_csv((out / "panel.csv").string(), res.panel_train);

  json run;
  run["command"] = "estimate";
  run["data"] = data_path;
  run["schema"] = {{"z", schema.z_column},
                   {"t", schema.t_column},
                   {"y", schema.y_column},
                   {"x", schema.x_columns}};
  run["flags"] = common_json(f);
  run["train_frac"] = train_frac;
  run["n"] = data.size();
  run["n_train"] = train.size();
  run["n_valid"] = valid.size();
  run["bandwidth_trial"] = res.bandwidth_trial;
  run["bandwidth_os"] = res.bandwidth_os;
  run["selected_lambda"] = res.selected_lambda;
  run["lambda_grid"] = res.grid.values;
  run["lambda_grid_degenerate"] = res.grid.degenerate;
  run["dropped_validation_points"] = res.dropped_validation;
  run["total_validation_points"] = res.total_validation;
  run["separation_warning"] = res.separation_warning;
  run["eval"] = cfg.eval.points;
  run["nuisances"] = adacate::nuisances_json(res.nuisances);
  std::ofstream(out / "run.json") << run.dump(2) << "\n";

  std::cerr << "estimate: " << res.points.size() << " points, lambda="
            << res.selected_lambda << ", outputs in " << f.out_dir << "\n";
  return 0;
}

int cmd_simulate(const CommonFlags& f, std::size_t n, std::size_t n_valid,
                 const std::string& scenario, int reps, bool per_rep) {
  adacate::ScenarioConfig sc;
  sc.n = n;
  sc.n_valid = n_valid;
  sc.scenario = scenario == "misspecified" ? adacate::Scenario::misspecified
                                           : adacate::Scenario::correct;
  sc.replications = reps;
  sc.seed = f.seed;
  sc.pipeline = make_pipeline(f);
  const unsigned threads = sc.pipeline.threads;
  sc.pipeline.threads = 1;  // replications are the parallel unit

  int last_pct = -1;
  const auto results = adacate::run_simulation(
      sc, threads, [&](int done, int total) {
        const int pct = done * 100 / total;
        if (pct / 10 > last_pct / 10) {
          std::cerr << "simulate: " << done << "/" << total << " replications\n";
          last_pct = pct;
        }
      });
  const adacate::MetricsReport report = adacate::aggregate_metrics(results, sc);

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);

  std::vector<std::vector<std::string>> rows;
  for (const adacate::MetricsRow& r : report.rows) {
    rows.push_back({r.scenario, std::to_string(r.n), r.percentile, r.estimator,
                    fmt(r.bias), fmt(r.rmse),
                    r.coverage_plain < 0 ? "" : fmt(r.coverage_plain),
                    r.coverage_conservative < 0 ? "" : fmt(r.coverage_conservative)});
  }
  adacate::csv::write((out / "metrics.csv").string(),
                      {"scenario", "n", "percentile", "estimator", "bias",
                       "rmse", "coverage_plain", "coverage_conservative"},
                      rows);

  std::ofstream failures(out / "failures.txt");
  failures << report.failures << " of " << report.total_reps
           << " replications failed\n";
  for (const std::string& msg : report.failure_messages) failures << msg << "\n";

  for (const auto& r : results) {
    if (!r.failed && !r.risk_curve.empty()) {
      write_risk_curve((out / "risk_curve.csv").string(), r.risk_curve);
      break;
    }
  }

  if (per_rep) {
    std::vector<std::vector<std::string>> rep_rows;
    for (const auto& r : results) {
      if (r.failed) continue;
      for (const auto& p : r.points)
        rep_rows.push_back({std::to_string(r.rep), fmt(r.selected_lambda),
                            fmt(p.v), fmt(p.tau_r), fmt(p.se_r), fmt(p.tau_o),
                            fmt(p.se_o), fmt(p.eta), fmt(p.tau),
                            fmt(p.se_plain), fmt(p.se_conservative)});
    }
    adacate::csv::write((out / "per_rep.csv").string(),
                        {"rep", "lambda", "v", "tau_r", "se_r", "tau_o", "se_o",
                         "eta", "tau", "se_plain", "se_conservative"},
                        rep_rows);
  }

  std::cerr << "simulate: " << report.total_reps - report.failures << "/"
            << report.total_reps << " replications ok, outputs in "
            << f.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive combination of trial and observational CATE estimates"};
  app.require_subcommand(1);

  CommonFlags est_flags, sim_flags;

  CLI::App* estimate = app.add_subcommand("estimate", "Estimate on CSV data");
  std::string data_path;
  adacate::CsvSchema schema;
  std::string x_cols;
  double train_frac = 0.2;
  bool dump_panel = false;
  estimate->add_option("--data", data_path, "Input CSV")->required();
  estimate->add_option("--z-col", schema.z_column, "Study indicator column");
  estimate->add_option("--t-col", schema.t_column, "Treatment column");
  estimate->add_option("--y-col", schema.y_column, "Outcome column");
  estimate->add_option("--x-cols", x_cols,
                       "Comma list of covariate columns (default: x1..xp)");
  estimate->add_option("--train-frac", train_frac,
                       "Training fraction of the split")
      ->check(CLI::Range(0.0, 1.0));
  estimate->add_flag("--dump-panel", dump_panel,
                     "Also write the pseudo-outcome panel (panel.csv)");
  add_common_flags(*estimate, est_flags);

  CLI::App* simulate = app.add_subcommand("simulate", "Run the Monte Carlo harness");
  std::size_t n = 1000, n_valid = 20000;
  std::string scenario = "correct";
  int reps = 1;
  bool per_rep = false;
  simulate->add_option("--n", n, "Training sample size");
  simulate->add_option("--n-valid", n_valid, "Validation sample size");
  simulate->add_option("--scenario", scenario, "correct | misspecified")
      ->check(CLI::IsMember({"correct", "misspecified"}));
  simulate->add_option("--reps", reps, "Replications")->check(CLI::PositiveNumber);
  simulate->add_flag("--per-rep", per_rep, "Also write per_rep.csv");
  add_common_flags(*simulate, sim_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (estimate->parsed()) {
      if (!x_cols.empty()) {
        std::size_t start = 0;
        while (start <= x_cols.size()) {
          std::size_t comma = x_cols.find(',', start);
          if (comma == std::string::npos) comma = x_cols.size();
          schema.x_columns.push_back(x_cols.substr(start, comma - start));
          start = comma + 1;
        }
      }
      return cmd_estimate(est_flags, data_path, schema, train_frac, dump_panel);
    }
    return cmd_simulate(sim_flags, n, n_valid, scenario, reps, per_rep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
