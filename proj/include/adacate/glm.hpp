#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>

#include "adacate/common.hpp"

namespace adacate {

enum class Link { identity, logit };

inline std::string link_name(Link link) {
  return link == Link::logit ? "logit" : "identity";
}

inline double expit(double lp) { return 1.0 / (1.0 + std::exp(-lp)); }

// Fitted coefficients of one working model. Design is main effects over the
// covariates, in order, with an optional trailing treatment main effect
// (outcome models of the form Y ~ X + T).
struct CoefficientVector {
  Link link = Link::identity;
  double intercept = 0.0;
  Eigen::VectorXd slopes;
  bool has_treatment_term = false;
  bool separation_warning = false;
  int iterations = 0;

  std::size_t n_covariates() const {
    return static_cast<std::size_t>(slopes.size()) - (has_treatment_term ? 1 : 0);
  }

  double linear_predictor(std::span<const double> x, double t = 0.0) const {
    const std::size_t p = n_covariates();
    if (x.size() != p)
      throw Error("linear_predictor: expected " + std::to_string(p) +
                  " covariates, got " + std::to_string(x.size()));
    double lp = intercept;
    for (std::size_t j = 0; j < p; ++j) lp += slopes[static_cast<long>(j)] * x[j];
    if (has_treatment_term) lp += slopes[slopes.size() - 1] * t;
    return lp;
  }
};

// expit of the linear predictor, clamped away from {0,1} so that downstream
// inverse-probability denominators stay bounded.
inline double predict_probability(const CoefficientVector& model,
                                  std::span<const double> x, double t = 0.0) {
  if (model.link != Link::logit)
    throw Error("predict_probability requires a logit-link model");
  const double p = expit(model.linear_predictor(x, t));
  return std::clamp(p, kProbClampLo, kProbClampHi);
}

// Mean prediction under the model's link.
inline double predict_mean(const CoefficientVector& model,
                           std::span<const double> x, double t = 0.0) {
  if (model.link == Link::logit) return predict_probability(model, x, t);
  return model.linear_predictor(x, t);
}

namespace detail {

struct IrlsOptions {
  double ridge = 0.0;           // extra ridge penalty on all coefficients
  bool watch_separation = true; // stop when any |coef| exceeds the bound
  double separation_bound = 30.0;
  int max_iterations = 100;
};

struct IrlsOutcome {
  Eigen::VectorXd beta;
  bool converged = false;
  bool separation = false;
  int iterations = 0;
  std::string trace;
};

inline double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& lp,
                               const Eigen::VectorXd& beta, double ridge) {
  double ll = 0.0;
  for (long i = 0; i < y.size(); ++i) {
    // log p if y=1, log(1-p) otherwise, in the overflow-safe form.
    const double z = lp[i];
    ll += y[i] * z - (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
  }
  if (ridge > 0) ll -= 0.5 * ridge * beta.squaredNorm();
  return ll;
}

// Newton/IRLS core on the design [1, X]. A 1e-8 ridge jitter is added to the
// weighted normal equations every iteration; step halving guards against
// overshoot on badly scaled designs.
inline IrlsOutcome irls(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                        const IrlsOptions& opt) {
  const long q = design.cols();
  const long n = design.rows();
  IrlsOutcome out;
  out.beta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(n);
  double ll = bernoulli_loglik(y, lp, out.beta, opt.ridge);
  std::ostringstream trace;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    out.iterations = iter;
    Eigen::VectorXd p(n), w(n);
    for (long i = 0; i < n; ++i) {
      p[i] = expit(lp[i]);
      w[i] = std::max(p[i] * (1.0 - p[i]), 1e-10);
    }
    Eigen::VectorXd score = design.transpose() * (y - p);
    if (opt.ridge > 0) score -= opt.ridge * out.beta;
    Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
    hessian.diagonal().array() += 1e-8 + opt.ridge;
    Eigen::VectorXd step = hessian.ldlt().solve(score);

    double scale = 1.0;
    Eigen::VectorXd beta_new, lp_new;
    double ll_new = 0.0;
    for (int half = 0; half < 12; ++half) {
      beta_new = out.beta + scale * step;
      lp_new = design * beta_new;
      ll_new = bernoulli_loglik(y, lp_new, beta_new, opt.ridge);
      if (ll_new >= ll - 1e-10) break;
      scale *= 0.5;
    }
    const double max_change = (scale * step).cwiseAbs().maxCoeff();
    out.beta = beta_new;
    lp = lp_new;
    ll = ll_new;
    trace << "iter " << iter << ": max|dcoef|=" << max_change
          << " |score|=" << score.norm() << "\n";

    if (opt.watch_separation &&
        out.beta.cwiseAbs().maxCoeff() > opt.separation_bound) {
      out.separation = true;
      out.trace = trace.str();
      return out;
    }
    if (max_change < 1e-8 || score.norm() < 1e-10) {
      out.converged = true;
      out.trace = trace.str();
      return out;
    }
  }
  // A separation march can stall under the bound: the jitter dominates the
  // vanishing curvature and freezes the walk. Same pathology, same exit.
  if (opt.watch_separation && out.beta.cwiseAbs().maxCoeff() > 10.0)
    out.separation = true;
  out.trace = trace.str();
  return out;
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& covariates) {
  Eigen::MatrixXd design(covariates.rows(), covariates.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(covariates.cols()) = covariates;
  return design;
}

}  // namespace detail

// Logistic regression by IRLS. Near-separation (any |coefficient| above 30
// during the iteration) triggers a penalized refit with ridge 1e-4 and sets
// the warning flag on the result instead of failing.
inline CoefficientVector fit_logistic(const Eigen::VectorXd& responses,
                                      const Eigen::MatrixXd& covariates) {
  const long n = responses.size();
  if (covariates.rows() != n)
    throw FitError("fit_logistic: responses/design row mismatch");
  long ones = 0;
  for (long i = 0; i < n; ++i) {
    if (responses[i] != 0.0 && responses[i] != 1.0)
      throw FitError("fit_logistic: response at row " + std::to_string(i) +
                     " is not 0/1");
    ones += responses[i] == 1.0;
  }
  if (ones == 0 || ones == n)
    throw FitError("fit_logistic: responses are all " +
                   std::string(ones == 0 ? "0" : "1") +
                   "; need both classes");

  Eigen::MatrixXd design = detail::with_intercept(covariates);
  detail::IrlsOptions opt;
  detail::IrlsOutcome res = detail::irls(responses, design, opt);
  bool warned = false;
  if (res.separation) {
    detail::IrlsOptions refit;
    refit.ridge = 1e-4;
    refit.watch_separation = false;
    res = detail::irls(responses, design, refit);
    warned = true;
  }
  if (!res.converged)
    throw FitError("fit_logistic: no convergence after " +
                   std::to_string(res.iterations) + " iterations\n" + res.trace);

  CoefficientVector model;
  model.link = Link::logit;
  model.intercept = res.beta[0];
  model.slopes = res.beta.tail(res.beta.size() - 1);
  model.separation_warning = warned;
  model.iterations = res.iterations;
  return model;
}

// Ordinary least squares via column-pivoted QR, with a rank check.
inline CoefficientVector fit_linear(const Eigen::VectorXd& responses,
                                    const Eigen::MatrixXd& covariates) {
  const long n = responses.size();
  if (covariates.rows() != n)
    throw FitError("fit_linear: responses/design row mismatch");
  Eigen::MatrixXd design = detail::with_intercept(covariates);
  if (design.rows() < design.cols())
    throw FitError("fit_linear: " + std::to_string(design.rows()) +
                   " rows < " + std::to_string(design.cols()) + " columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    throw FitError("fit_linear: design is rank deficient (rank " +
                   std::to_string(qr.rank()) + " of " +
                   std::to_string(design.cols()) + ")");
  Eigen::VectorXd beta = qr.solve(responses);

  CoefficientVector model;
  model.link = Link::identity;
  model.intercept = beta[0];
  model.slopes = beta.tail(beta.size() - 1);
  model.iterations = 1;
  return model;
}

}  // namespace adacate
