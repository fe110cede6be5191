#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "adacate/combiner.hpp"
#include "adacate/tuning.hpp"

namespace adacate {

// Everything needed to run estimation end to end on a train/validation pair.
struct PipelineConfig {
  int target_z = 1;
  Link outcome_link = Link::identity;
  bool outcome_per_arm = false;
  ReductionSpec reduction;  // percentile reference is the validation set
  CombineMethod method = CombineMethod::lasso;
  double beta_exponent = 0.25;
  SeVariant se_variant = SeVariant::conservative;
  KernelConfig kernel;  // nonpositive bandwidths resolve by rule of thumb
  double epsilon = 1e-3;
  int grid_size = 25;
  EvaluationGrid eval;
  unsigned threads = 1;
  double max_dropped_fraction = 0.10;
};

// Lambda-independent tuning state: per-validation-point reductions of the
// training estimator plus the validation-side trial estimator.
struct TuningPrep {
  std::vector<PointSummary> train_summaries;  // kept points only
  std::vector<double> valid_trial_tau;        // aligned with train_summaries
  std::size_t dropped = 0;
  std::size_t total = 0;
};

namespace detail {

inline TuningPrep prepare_tuning(const KernelSmoother& train_smoother,
                                 const KernelSmoother& valid_smoother,
                                 const std::vector<double>& v_valid,
                                 unsigned threads) {
  const std::size_t m = v_valid.size();
  std::vector<PointSummary> summaries(m);
  std::vector<KernelSmoother::TrialValue> trial(m);
  parallel_chunks(m, threads, [&](std::size_t begin, std::size_t end) {
    KernelWorkspace ws_train, ws_valid;
    for (std::size_t i = begin; i < end; ++i) {
      summaries[i] = train_smoother.summary_at(v_valid[i], ws_train);
      trial[i] = valid_smoother.trial_estimate_at(v_valid[i], ws_valid);
    }
  });
  TuningPrep prep;
  prep.total = m;
  prep.train_summaries.reserve(m);
  prep.valid_trial_tau.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!summaries[i].ok || !trial[i].ok) {
      ++prep.dropped;
      continue;
    }
    prep.train_summaries.push_back(summaries[i]);
    prep.valid_trial_tau.push_back(trial[i].tau);
  }
  return prep;
}

// Per-point squared gaps between the training-data adaptive estimator at
// lambda and the validation-data trial estimator.
inline void gaps_at(double lambda, const TuningPrep& prep,
                    const PipelineConfig& cfg, const CombineScale& scale,
                    std::vector<double>& out) {
  CombinerConfig cc;
  cc.method = CombineMethod::lasso;
  cc.lambda = lambda;
  cc.beta_exponent = cfg.beta_exponent;
  const std::size_t m = prep.train_summaries.size();
  out.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const PointSummary& sum = prep.train_summaries[i];
    const double eta = eta_from_summary(sum, cc, scale);
    const double tau =
        eta == 0.0 ? sum.tau_r : sum.tau_r + eta * (sum.tau_o - sum.tau_r);
    const double gap = tau - prep.valid_trial_tau[i];
    out[i] = gap * gap;
  }
}

// Out-of-sample MISE estimate at one lambda.
inline double risk_from_prep(double lambda, const TuningPrep& prep,
                             const PipelineConfig& cfg,
                             const CombineScale& scale) {
  std::vector<double> gaps;
  gaps_at(lambda, prep, cfg, scale, gaps);
  double risk = 0.0;
  for (double g : gaps) risk += g;
  return risk;
}

// Per-point (eta_unpenalized, bias) pairs feeding the lambda grid; on the
// normalized penalty scale the resulting endpoints are exact: lambda_max
// zeroes the weight at no evaluation point, lambda_max_plus at all of them.
inline std::vector<std::pair<double, double>> grid_sources(
    const std::vector<PointSummary>& eval_summaries) {
  std::vector<std::pair<double, double>> sources;
  sources.reserve(eval_summaries.size());
  for (const PointSummary& sum : eval_summaries) {
    const double eta0 = sum.gram > 0.0 ? sum.s / sum.gram : 0.0;
    sources.emplace_back(eta0, sum.tau_o - sum.tau_r);
  }
  return sources;
}

inline constexpr int kRiskBlocks = 20;

// Risk minimization with a noise-aware tie rule. Validation points inside
// one kernel neighborhood move together with the training draw, so risk
// differences between lambdas are compared against a block standard error
// over V-sorted clusters rather than treated as exact. Among candidates
// within one block SE of the minimum, the smallest lambda (least
// shrinkage) wins.
inline TuningResult select_lambda_blocked(const LambdaGrid& grid,
                                          const TuningPrep& prep,
                                          const PipelineConfig& cfg,
                                          const CombineScale& scale) {
  if (grid.values.empty()) throw Error("empty lambda grid");
  const std::size_t m = prep.train_summaries.size();
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prep.train_summaries[a].v < prep.train_summaries[b].v;
  });
  const int blocks = static_cast<int>(
      std::min<std::size_t>(kRiskBlocks, std::max<std::size_t>(m, 1)));

  TuningResult result;
  std::vector<std::vector<double>> gaps(grid.values.size());
  int argmin = -1;
  double min_risk = 0.0;
  for (std::size_t gi = 0; gi < grid.values.size(); ++gi) {
    gaps_at(grid.values[gi], prep, cfg, scale, gaps[gi]);
    double risk = 0.0;
    for (double g : gaps[gi]) risk += g;
    result.risk_curve.emplace_back(grid.values[gi], risk);
    if (argmin < 0 || risk < min_risk) {
      argmin = static_cast<int>(gi);
      min_risk = risk;
    }
  }

  result.selected_index = argmin;
  for (std::size_t gi = 0; gi < static_cast<std::size_t>(argmin); ++gi) {
    const double diff = result.risk_curve[gi].second - min_risk;
    std::vector<double> block_sum(blocks, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = order[k];
      const int b = static_cast<int>(k * blocks / std::max<std::size_t>(m, 1));
      block_sum[b] += gaps[gi][i] - gaps[static_cast<std::size_t>(argmin)][i];
    }
    double var = 0.0;
    const double mean_block = diff / blocks;
    for (double s : block_sum) var += (s - mean_block) * (s - mean_block);
    const double se =
        blocks > 1 ? std::sqrt(var * blocks / (blocks - 1.0)) : 0.0;
    if (diff <= se) {
      result.selected_index = static_cast<int>(gi);
      break;
    }
  }
  result.selected_lambda =
      grid.values[static_cast<std::size_t>(result.selected_index)];
  result.dropped_points = prep.dropped;
  return result;
}

struct FittedHalf {
  FittedNuisances nuisances;
  PseudoOutcomePanel panel;
  std::optional<KernelSmoother> smoother;
};

inline FittedHalf fit_half(const StudyDataset& data,
                           const std::vector<double>& v,
                           const PipelineConfig& cfg) {
  FittedHalf half;
  half.nuisances =
      fit_all_nuisances(data, cfg.outcome_link, cfg.outcome_per_arm);
  half.panel = compute_pseudo_outcomes(data, half.nuisances, v);
  half.smoother.emplace(half.panel, cfg.target_z, cfg.kernel);
  return half;
}

}  // namespace detail

struct EstimationResult {
  std::vector<CombinedEstimate> points;
  LambdaGrid grid;       // populated for the lasso method
  TuningResult tuning;   // ditto
  double selected_lambda = 0.0;
  FittedNuisances nuisances;  // training fit
  ReductionSpec reduction;    // resolved (score models fitted)
  double bandwidth_trial = 0.0, bandwidth_os = 0.0;
  std::size_t dropped_validation = 0;
  std::size_t total_validation = 0;
  bool separation_warning = false;
  // retained for downstream evaluation at additional points
  PseudoOutcomePanel panel_train;
  std::optional<KernelSmoother> smoother_train;

  CombineScale scale() const {
    return {smoother_train->n_total(), bandwidth_trial, bandwidth_os,
            smoother_train->dimension()};
  }
};

// Fits the full pipeline on the training data, tunes lambda against the
// validation data (lasso method), and returns combined estimates with both
// SE variants at every evaluation point.
inline EstimationResult run_estimation(const StudyDataset& train,
                                       const StudyDataset& valid,
                                       const PipelineConfig& cfg) {
  cfg.eval.validate();
  train.require_both_studies("estimation");
  valid.require_both_studies("validation");

  EstimationResult result;
  result.reduction = resolve_reduction(cfg.reduction, valid);
  const std::vector<double> v_train =
      apply_reduction(result.reduction, train, valid);

  detail::FittedHalf train_half = detail::fit_half(train, v_train, cfg);
  result.nuisances = train_half.nuisances;
  result.bandwidth_trial = train_half.smoother->bandwidth_trial();
  result.bandwidth_os = train_half.smoother->bandwidth_os();
  result.separation_warning = train_half.nuisances.any_separation_warning();

  CombinerConfig cc;
  cc.method = cfg.method;
  cc.beta_exponent = cfg.beta_exponent;
  cc.se_variant = cfg.se_variant;

  if (cfg.method == CombineMethod::lasso) {
    std::vector<PointSummary> eval_summaries;
    eval_summaries.reserve(cfg.eval.points.size());
    KernelWorkspace ws;
    for (double v : cfg.eval.points)
      eval_summaries.push_back(train_half.smoother->summary_at(v, ws));
    for (const PointSummary& sum : eval_summaries)
      if (!sum.ok)
        throw EstimationError("no effective support at v=" +
                              std::to_string(sum.v) + " on the lambda grid");
    const auto sources = detail::grid_sources(eval_summaries);
    result.grid = build_lambda_grid(sources, cfg.epsilon, cfg.grid_size);

    const std::vector<double> v_valid =
        apply_reduction(result.reduction, valid, valid);
    detail::FittedHalf valid_half = detail::fit_half(valid, v_valid, cfg);
    result.separation_warning |= valid_half.nuisances.any_separation_warning();

    TuningPrep prep = detail::prepare_tuning(
        *train_half.smoother, *valid_half.smoother, v_valid, cfg.threads);
    result.dropped_validation = prep.dropped;
    result.total_validation = prep.total;
    if (prep.total > 0 &&
        static_cast<double>(prep.dropped) >
            cfg.max_dropped_fraction * static_cast<double>(prep.total))
      throw EstimationError(
          "validation risk: " + std::to_string(prep.dropped) + " of " +
          std::to_string(prep.total) +
          " points below the density floor (limit " +
          std::to_string(cfg.max_dropped_fraction * 100) + "%)");

    const CombineScale scale{train_half.smoother->n_total(),
                             result.bandwidth_trial, result.bandwidth_os,
                             train_half.smoother->dimension()};
    result.tuning = detail::select_lambda_blocked(result.grid, prep, cfg, scale);
    result.selected_lambda = result.tuning.selected_lambda;
    cc.lambda = result.selected_lambda;
  }

  KernelWorkspace ws;
  result.points.reserve(cfg.eval.points.size());
  for (double v : cfg.eval.points) {
    const BaseEstimate base = train_half.smoother->estimate_at(v, ws);
    result.points.push_back(combine(base, cc));
  }
  result.panel_train = std::move(train_half.panel);
  result.smoother_train = std::move(train_half.smoother);
  return result;
}

// Spec-level tuning entry points: both fit the full pipeline independently
// on train and validation, as the tuning procedure requires.
namespace detail {

inline std::pair<TuningPrep, CombineScale> tuning_state(
    const StudyDataset& train, const StudyDataset& valid,
    const PipelineConfig& cfg) {
  ReductionSpec reduction = resolve_reduction(cfg.reduction, valid);
  const std::vector<double> v_train = apply_reduction(reduction, train, valid);
  const std::vector<double> v_valid = apply_reduction(reduction, valid, valid);
  FittedHalf train_half = fit_half(train, v_train, cfg);
  FittedHalf valid_half = fit_half(valid, v_valid, cfg);
  TuningPrep prep = prepare_tuning(*train_half.smoother, *valid_half.smoother,
                                   v_valid, cfg.threads);
  if (prep.total > 0 &&
      static_cast<double>(prep.dropped) >
          cfg.max_dropped_fraction * static_cast<double>(prep.total))
    throw EstimationError("validation risk: " + std::to_string(prep.dropped) +
                          " of " + std::to_string(prep.total) +
                          " points below the density floor");
  const CombineScale scale{train_half.smoother->n_total(),
                           train_half.smoother->bandwidth_trial(),
                           train_half.smoother->bandwidth_os(),
                           train_half.smoother->dimension()};
  return {std::move(prep), scale};
}

}  // namespace detail

inline double validation_risk(double lambda, const StudyDataset& train,
                              const StudyDataset& valid,
                              const PipelineConfig& cfg) {
  auto [prep, scale] = detail::tuning_state(train, valid, cfg);
  return detail::risk_from_prep(lambda, prep, cfg, scale);
}

inline TuningResult select_lambda(const LambdaGrid& grid,
                                  const StudyDataset& train,
                                  const StudyDataset& valid,
                                  const PipelineConfig& cfg) {
  auto [prep, scale] = detail::tuning_state(train, valid, cfg);
  return detail::select_lambda_blocked(grid, prep, cfg, scale);
}

}  // namespace adacate
