#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "adacate/pipeline.hpp"

namespace adacate {

enum class Scenario { correct, misspecified };

inline std::string scenario_name(Scenario s) {
  return s == Scenario::correct ? "correct" : "misspecified";
}

struct ScenarioConfig {
  std::size_t n = 1000;
  std::size_t n_valid = 20000;
  Scenario scenario = Scenario::correct;
  int replications = 1;
  std::uint64_t seed = 1;
  std::vector<double> eval_percentiles = {0.05, 0.25, 0.50, 0.75, 0.95};
  int eval_grid_points = 19;  // even lattice over (0,1), includes the percentiles
  PipelineConfig pipeline;    // method, links, bandwidths, ...
  double max_failure_fraction = 0.05;
};

// Synthetic parallel trial/OS data. Covariates are standard normal (p=4);
// OS participation is expit{2.5 + 0.1(x1+..+x4)} (about 8% land in the
// trial), treatment is randomized 1:1 in the trial and covariate-driven in
// the OS, and the outcome mean 210 + 27.4 x1 + 13.7(x2+x3+x4) is free of
// both t and z, so the true CATE is identically zero. The misspecified
// scenario stores a nonlinear transform of the covariates, so every working
// model fit on them is wrong.
inline StudyDataset generate_dataset(std::size_t n, Scenario scenario,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<UnitRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x1 = normal(rng), x2 = normal(rng), x3 = normal(rng), x4 = normal(rng);
    const double rho = expit(2.5 + 0.1 * (x1 + x2 + x3 + x4));
    const int z = uniform(rng) < rho ? 1 : 0;
    const double pi1 =
        z == 0 ? 0.5 : expit(-x1 + 0.5 * x2 - 0.25 * x3 - 0.1 * x4);
    const int t = uniform(rng) < pi1 ? 1 : 0;
    const double y = 210.0 + 27.4 * x1 + 13.7 * (x2 + x3 + x4) + normal(rng);
    UnitRecord r;
    r.z = z;
    r.t = t;
    r.y = y;
    if (scenario == Scenario::misspecified) {
      r.x = {std::exp(x1 / 2.0), x2 / (1.0 + std::exp(x1)) + 10.0,
             std::pow(x1 * x3 / 25.0 + 0.6, 3.0),
             (x2 + x4 + 20.0) * (x2 + x4 + 20.0)};
    } else {
      r.x = {x1, x2, x3, x4};
    }
    records.push_back(std::move(r));
  }
  return StudyDataset(std::move(records));
}

inline EvaluationGrid simulation_grid(const std::vector<double>& percentiles,
                                      int lattice_points) {
  std::vector<double> pts;
  for (int i = 1; i <= lattice_points; ++i)
    pts.push_back(static_cast<double>(i) / (lattice_points + 1));
  pts.insert(pts.end(), percentiles.begin(), percentiles.end());
  std::sort(pts.begin(), pts.end());
  std::vector<double> dedup;
  for (double v : pts)
    if (dedup.empty() || v - dedup.back() > 1e-9) dedup.push_back(v);
  EvaluationGrid grid;
  grid.points = std::move(dedup);
  return grid;
}

struct ReplicationResult {
  int rep = 0;
  bool failed = false;
  std::string error;

  struct PointRow {
    double v = 0.0;
    double tau_r = 0.0, se_r = 0.0;
    double tau_o = 0.0, se_o = 0.0;
    double eta = 0.0, tau = 0.0;
    double se_plain = 0.0, se_conservative = 0.0;
  };
  std::vector<PointRow> points;

  double selected_lambda = 0.0;
  bool lambda_at_min = false;  // smallest grid value selected
  bool eta_all_zero = false;   // OS estimator discarded at every point
  bool separation_warning = false;
  std::size_t dropped_validation = 0;
  std::vector<std::pair<double, double>> risk_curve;

  // integrated accumulators over the training records' V values
  double sum_r = 0.0, sum2_r = 0.0;
  double sum_o = 0.0, sum2_o = 0.0;
  double sum_a = 0.0, sum2_a = 0.0;
  std::size_t n_integrated = 0;
  std::size_t skipped_integrated = 0;
};

inline ReplicationResult run_replication(int rep_index,
                                         const ScenarioConfig& config) {
  ReplicationResult out;
  out.rep = rep_index;
  try {
    const StudyDataset train = generate_dataset(
        config.n, config.scenario,
        derive_seed(config.seed, 1, static_cast<std::uint64_t>(rep_index)));
    const StudyDataset valid = generate_dataset(
        config.n_valid, config.scenario,
        derive_seed(config.seed, 2, static_cast<std::uint64_t>(rep_index)));

    PipelineConfig cfg = config.pipeline;
    cfg.eval = simulation_grid(config.eval_percentiles, config.eval_grid_points);
    cfg.reduction.kind = ReductionSpec::Kind::pct_column;
    cfg.reduction.column = 0;

    EstimationResult res = run_estimation(train, valid, cfg);
    out.selected_lambda = res.selected_lambda;
    out.lambda_at_min = !res.grid.values.empty() &&
                        res.selected_lambda == res.grid.values.front();
    out.separation_warning = res.separation_warning;
    out.dropped_validation = res.dropped_validation;
    out.risk_curve = res.tuning.risk_curve;

    out.eta_all_zero = !res.points.empty();
    for (const CombinedEstimate& p : res.points) {
      out.points.push_back({p.v, p.tau_r, p.se_r, p.tau_o, p.se_o, p.eta, p.tau,
                            p.se_plain, p.se_conservative});
      if (p.eta != 0.0) out.eta_all_zero = false;
    }

    // Integrated metrics evaluate every estimator at the training records'
    // own V values.
    CombinerConfig cc;
    cc.method = cfg.method;
    cc.lambda = res.selected_lambda;
    cc.beta_exponent = cfg.beta_exponent;
    cc.se_variant = cfg.se_variant;
    const CombineScale scale = res.scale();
    KernelWorkspace ws;
    for (double v : res.panel_train.v) {
      const PointSummary sum = res.smoother_train->summary_at(v, ws);
      if (!sum.ok) {
        ++out.skipped_integrated;
        continue;
      }
      const double eta = eta_from_summary(sum, cc, scale);
      const double tau_a =
          eta == 0.0 ? sum.tau_r : sum.tau_r + eta * (sum.tau_o - sum.tau_r);
      out.sum_r += sum.tau_r;
      out.sum2_r += sum.tau_r * sum.tau_r;
      out.sum_o += sum.tau_o;
      out.sum2_o += sum.tau_o * sum.tau_o;
      out.sum_a += tau_a;
      out.sum2_a += tau_a * tau_a;
      ++out.n_integrated;
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

// Replications are independent; each owns its derived RNG stream, so the
// results are identical for any thread count.
inline std::vector<ReplicationResult> run_simulation(
    const ScenarioConfig& config, unsigned threads,
    const std::function<void(int, int)>& progress = {}) {
  const int reps = config.replications;
  if (reps < 1) throw Error("replications must be >= 1");
  std::vector<ReplicationResult> results(static_cast<std::size_t>(reps));
  std::atomic<int> done{0};
  parallel_chunks(static_cast<std::size_t>(reps), threads,
                  [&](std::size_t begin, std::size_t end) {
                    for (std::size_t r = begin; r < end; ++r) {
                      results[r] = run_replication(static_cast<int>(r), config);
                      if (progress) progress(++done, reps);
                    }
                  });
  return results;
}

struct MetricsRow {
  std::string scenario;
  std::size_t n = 0;
  std::string percentile;  // p05..p95 or "integrated"
  std::string estimator;   // trial / os / adaptive
  double bias = 0.0;
  double rmse = 0.0;
  double coverage_plain = -1.0;         // fraction in [0,1]; <0 means n/a
  double coverage_conservative = -1.0;  // ditto
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::size_t failures = 0;
  std::size_t total_reps = 0;
  std::vector<std::string> failure_messages;
};

namespace detail {

inline std::string percentile_label(double p) {
  const int pct = static_cast<int>(std::lround(p * 100));
  return (pct < 10 ? "p0" : "p") + std::to_string(pct);
}

}  // namespace detail

// Pointwise bias/RMSE/coverage at the configured percentiles plus
// integrated rows, with truth identically zero. Failed replications are
// excluded; more than max_failure_fraction of them fails the run.
inline MetricsReport aggregate_metrics(
    const std::vector<ReplicationResult>& results,
    const ScenarioConfig& config) {
  MetricsReport report;
  report.total_reps = results.size();
  std::vector<const ReplicationResult*> kept;
  for (const ReplicationResult& r : results) {
    if (r.failed) {
      ++report.failures;
      report.failure_messages.push_back("rep " + std::to_string(r.rep) + ": " +
                                        r.error);
    } else {
      kept.push_back(&r);
    }
  }
  if (kept.empty()) throw Error("no successful replications");
  if (static_cast<double>(report.failures) >
      config.max_failure_fraction * static_cast<double>(results.size()))
    throw Error(std::to_string(report.failures) + " of " +
                std::to_string(results.size()) +
                " replications failed (limit " +
                std::to_string(config.max_failure_fraction * 100) + "%)");

  const std::string scen = scenario_name(config.scenario);
  auto covered = [](double tau, double se) {
    return std::abs(tau) <= kZ975 * se;
  };

  for (double p : config.eval_percentiles) {
    for (const std::string& est : {std::string("trial"), std::string("os"),
                                   std::string("adaptive")}) {
      double sum = 0.0, sum2 = 0.0;
      double cov_plain = 0.0, cov_cons = 0.0;
      std::size_t count = 0;
      for (const ReplicationResult* r : kept) {
        const ReplicationResult::PointRow* row = nullptr;
        for (const auto& candidate : r->points)
          if (std::abs(candidate.v - p) < 1e-9) {
            row = &candidate;
            break;
          }
        if (!row) continue;
        double tau = 0.0, se_plain = 0.0, se_cons = 0.0;
        if (est == "trial") {
          tau = row->tau_r;
          se_plain = se_cons = row->se_r;
        } else if (est == "os") {
          tau = row->tau_o;
          se_plain = se_cons = row->se_o;
        } else {
          tau = row->tau;
          se_plain = row->se_plain;
          se_cons = row->se_conservative;
        }
        sum += tau;
        sum2 += tau * tau;
        cov_plain += covered(tau, se_plain);
        cov_cons += covered(tau, se_cons);
        ++count;
      }
      if (count == 0) continue;
      MetricsRow out;
      out.scenario = scen;
      out.n = config.n;
      out.percentile = detail::percentile_label(p);
      out.estimator = est;
      out.bias = sum / static_cast<double>(count);
      out.rmse = std::sqrt(sum2 / static_cast<double>(count));
      out.coverage_plain = cov_plain / static_cast<double>(count);
      out.coverage_conservative = cov_cons / static_cast<double>(count);
      report.rows.push_back(std::move(out));
    }
  }

  struct Acc {
    double sum = 0.0, sum2 = 0.0;
  };
  Acc acc_r, acc_o, acc_a;
  std::size_t n_int = 0;
  for (const ReplicationResult* r : kept) {
    acc_r.sum += r->sum_r;
    acc_r.sum2 += r->sum2_r;
    acc_o.sum += r->sum_o;
    acc_o.sum2 += r->sum2_o;
    acc_a.sum += r->sum_a;
    acc_a.sum2 += r->sum2_a;
    n_int += r->n_integrated;
  }
  const std::pair<std::string, Acc> integrated[] = {
      {"trial", acc_r}, {"os", acc_o}, {"adaptive", acc_a}};
  for (const auto& [est, acc] : integrated) {
    MetricsRow out;
    out.scenario = scen;
    out.n = config.n;
    out.percentile = "integrated";
    out.estimator = est;
    out.bias = n_int ? acc.sum / static_cast<double>(n_int) : 0.0;
    out.rmse = n_int ? std::sqrt(acc.sum2 / static_cast<double>(n_int)) : 0.0;
    report.rows.push_back(std::move(out));
  }
  return report;
}

}  // namespace adacate
