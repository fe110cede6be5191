#pragma once

#include <string>
#include <vector>

#include "adacate/dataset.hpp"
#include "adacate/glm.hpp"

#include <json.hpp>  // vendored nlohmann/json

namespace adacate {

// Mean-outcome working model for one study. Default is a single fit of
// Y ~ X + T; per-arm mode fits Y ~ X separately within each treatment arm.
struct OutcomeModel {
  bool per_arm = false;
  CoefficientVector joint;
  CoefficientVector arm0;
  CoefficientVector arm1;

  double predict(std::span<const double> x, double t) const {
    if (per_arm) return predict_mean(t == 1.0 ? arm1 : arm0, x);
    return predict_mean(joint, x, t);
  }
};

// The five fitted working models: treatment propensity per study, mean
// outcome per study, and OS participation on the pooled sample.
struct FittedNuisances {
  CoefficientVector ps_trial;      // T ~ X on z=0
  CoefficientVector ps_os;         // T ~ X on z=1
  OutcomeModel outcome_trial;      // Y ~ X (+T) on z=0
  OutcomeModel outcome_os;         // Y ~ X (+T) on z=1
  CoefficientVector participation; // Z ~ X pooled

  bool any_separation_warning() const {
    auto warn = [](const OutcomeModel& m) {
      return m.per_arm ? (m.arm0.separation_warning || m.arm1.separation_warning)
                       : m.joint.separation_warning;
    };
    return ps_trial.separation_warning || ps_os.separation_warning ||
           participation.separation_warning || warn(outcome_trial) ||
           warn(outcome_os);
  }
};

// Odds of OS participation given x: rho / (1 - rho) with the clamped
// participation probability, so the result stays within (~1e-12, ~1e12).
inline double odds_weight(const CoefficientVector& participation,
                          std::span<const double> x) {
  if (participation.link != Link::logit)
    throw Error("odds_weight requires a logit-link participation model");
  const double rho = predict_probability(participation, x);
  return rho / (1.0 - rho);
}

namespace detail {

struct Subsample {
  Eigen::VectorXd response;
  Eigen::MatrixXd covariates;   // x only
  Eigen::MatrixXd covariates_t; // [x, t]
};

template <typename Pred, typename Resp>
Subsample collect(const StudyDataset& data, Pred keep, Resp response) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (keep(data.records()[i])) rows.push_back(i);
  Subsample s;
  s.response.resize(rows.size());
  s.covariates.resize(rows.size(), data.dim());
  s.covariates_t.resize(rows.size(), data.dim() + 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const UnitRecord& r = data.records()[rows[k]];
    s.response[static_cast<long>(k)] = response(r);
    for (std::size_t j = 0; j < data.dim(); ++j) {
      s.covariates(static_cast<long>(k), static_cast<long>(j)) = r.x[j];
      s.covariates_t(static_cast<long>(k), static_cast<long>(j)) = r.x[j];
    }
    s.covariates_t(static_cast<long>(k), static_cast<long>(data.dim())) = r.t;
  }
  return s;
}

template <typename Fn>
auto tagged(const std::string& model, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw FitError(model + ": " + e.what());
  }
}

inline OutcomeModel fit_outcome(const StudyDataset& data, int study, Link link,
                                bool per_arm, const std::string& tag) {
  OutcomeModel model;
  model.per_arm = per_arm;
  auto fit = [&](const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
    return link == Link::logit ? fit_logistic(y, x) : fit_linear(y, x);
  };
  if (per_arm) {
    for (int arm : {0, 1}) {
      Subsample s = collect(
          data, [&](const UnitRecord& r) { return r.z == study && r.t == arm; },
          [](const UnitRecord& r) { return r.y; });
      CoefficientVector cv = tagged(tag + "(t=" + std::to_string(arm) + ")",
                                    [&] { return fit(s.response, s.covariates); });
      (arm == 0 ? model.arm0 : model.arm1) = std::move(cv);
    }
  } else {
    Subsample s = collect(data, [&](const UnitRecord& r) { return r.z == study; },
                          [](const UnitRecord& r) { return r.y; });
    model.joint = tagged(tag, [&] { return fit(s.response, s.covariates_t); });
    model.joint.has_treatment_term = true;
  }
  return model;
}

}  // namespace detail

// Fits all five working models on the training data. Propensity and outcome
// models are fit per study; the participation model on the pooled sample.
inline FittedNuisances fit_all_nuisances(const StudyDataset& train,
                                         Link outcome_link = Link::identity,
                                         bool outcome_per_arm = false) {
  train.require_both_studies("participation model");
  FittedNuisances nuis;
  for (int study : {0, 1}) {
    detail::Subsample ps = detail::collect(
        train, [&](const UnitRecord& r) { return r.z == study; },
        [](const UnitRecord& r) { return static_cast<double>(r.t); });
    const std::string tag = study == 0 ? "ps_trial" : "ps_os";
    CoefficientVector fit = detail::tagged(
        tag, [&] { return fit_logistic(ps.response, ps.covariates); });
    (study == 0 ? nuis.ps_trial : nuis.ps_os) = std::move(fit);
  }
  nuis.outcome_trial = detail::fit_outcome(train, 0, outcome_link,
                                           outcome_per_arm, "outcome_trial");
  nuis.outcome_os = detail::fit_outcome(train, 1, outcome_link,
                                        outcome_per_arm, "outcome_os");
  detail::Subsample part = detail::collect(
      train, [](const UnitRecord&) { return true; },
      [](const UnitRecord& r) { return static_cast<double>(r.z); });
  nuis.participation = detail::tagged("participation", [&] {
    return fit_logistic(part.response, part.covariates);
  });
  return nuis;
}

inline nlohmann::json coefficients_json(const CoefficientVector& m) {
  nlohmann::json j;
  j["link"] = link_name(m.link);
  j["intercept"] = m.intercept;
  std::vector<double> slopes(m.slopes.data(), m.slopes.data() + m.slopes.size());
  j["slopes"] = slopes;
  if (m.has_treatment_term) j["treatment_term"] = true;
  if (m.separation_warning) j["separation_warning"] = true;
  return j;
}

inline nlohmann::json nuisances_json(const FittedNuisances& nuis) {
  nlohmann::json j;
  j["ps_trial"] = coefficients_json(nuis.ps_trial);
  j["ps_os"] = coefficients_json(nuis.ps_os);
  auto outcome = [](const OutcomeModel& m) {
    nlohmann::json o;
    if (m.per_arm) {
      o["t0"] = coefficients_json(m.arm0);
      o["t1"] = coefficients_json(m.arm1);
    } else {
      o = coefficients_json(m.joint);
    }
    return o;
  };
  j["outcome_trial"] = outcome(nuis.outcome_trial);
  j["outcome_os"] = outcome(nuis.outcome_os);
  j["participation"] = coefficients_json(nuis.participation);
  return j;
}

}  // namespace adacate
