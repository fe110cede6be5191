#pragma once

#include <cmath>
#include <string>

#include "adacate/kernel.hpp"

namespace adacate {

enum class CombineMethod { lasso, ridge, unpenalized };
enum class SeVariant { plain, conservative };

inline std::string method_name(CombineMethod m) {
  switch (m) {
    case CombineMethod::lasso: return "lasso";
    case CombineMethod::ridge: return "ridge";
    case CombineMethod::unpenalized: return "unpenalized";
  }
  return "?";
}

// The lasso tuning parameter is on the Gram-normalized scale: at a point
// with unpenalized weight eta0 and bias estimate D, the weight is the soft
// threshold sign(eta0) * max(|eta0| - lambda*D^2, 0). On this scale the
// candidate-grid endpoints min_v/max_v of eta0_v/D_v^2 are exactly the
// largest lambda discarding the OS estimator nowhere and the smallest
// discarding it everywhere. Equivalent to the raw objective's minimizer at
// penalty 2*gram*lambda (see eta_lasso).
struct CombinerConfig {
  CombineMethod method = CombineMethod::lasso;
  double lambda = 0.0;          // lasso tuning parameter, normalized scale
  double beta_exponent = 0.25;  // ridge correction exponent, in (0, 0.5)
  SeVariant se_variant = SeVariant::conservative;
};

struct EtaResult {
  double value = 0.0;
  bool degenerate = false;  // zero Gram term: weight defaulted to 0
};

namespace detail {

// Regression pieces of the penalized least squares objectives:
// a_i = xi_r_i, b_i = xi_r_i - xi_o_i, s = <a,b>, gram = <b,b>.
struct EtaInputs {
  double s = 0.0;
  double gram = 0.0;
  double bias = 0.0;  // tau_o - tau_r
};

inline EtaInputs eta_inputs(const BaseEstimate& base) {
  EtaInputs in;
  const Eigen::VectorXd b = base.xi_r - base.xi_o;
  in.s = base.xi_r.dot(b);
  in.gram = b.squaredNorm();
  in.bias = base.tau_o - base.tau_r;
  return in;
}

inline EtaResult eta_unpenalized(const EtaInputs& in) {
  if (in.gram == 0.0) return {0.0, true};
  return {in.s / in.gram, false};
}

// Exact minimizer of sum(a - eta*b)^2 + lambda*|eta|*bias^2: soft threshold
// at half the penalty weight. The boundary case returns exactly 0.
inline EtaResult eta_lasso(const EtaInputs& in, double lambda) {
  if (in.gram == 0.0) return {0.0, true};
  const double cut = 0.5 * lambda * in.bias * in.bias;
  const double mag = std::abs(in.s) - cut;
  if (mag <= 0.0) return {0.0, false};
  return {(in.s > 0 ? 1.0 : -1.0) * mag / in.gram, false};
}

// Minimizer of sum(a - eta*b)^2 + n^{2(1-beta)} h^{2d} eta^2 bias^2.
inline EtaResult eta_ridge(const EtaInputs& in, std::size_t n, double h, int d,
                           double beta_exponent) {
  const double penalty = std::pow(static_cast<double>(n), 2.0 * (1.0 - beta_exponent)) *
                         std::pow(h, 2.0 * d) * in.bias * in.bias;
  const double denom = in.gram + penalty;
  if (denom == 0.0) return {0.0, true};
  return {in.s / denom, false};
}

}  // namespace detail

inline EtaResult eta_unpenalized(const BaseEstimate& base) {
  return detail::eta_unpenalized(detail::eta_inputs(base));
}

inline EtaResult eta_lasso(const BaseEstimate& base, double lambda) {
  return detail::eta_lasso(detail::eta_inputs(base), lambda);
}

inline EtaResult eta_ridge(const BaseEstimate& base, std::size_t n, double h,
                           int d, double beta_exponent) {
  return detail::eta_ridge(detail::eta_inputs(base), n, h, d, beta_exponent);
}

struct CombinedEstimate {
  double v = 0.0;
  double eta = 0.0;
  double tau = 0.0;
  double se_plain = 0.0;
  double se_conservative = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  double eta_unpenalized = 0.0;
  double bias_estimate = 0.0;
  double tau_r = 0.0, tau_o = 0.0;
  double se_r = 0.0, se_o = 0.0;  // base-estimator standard errors
  double f_r = 0.0, f_o = 0.0;
  bool degenerate = false;
  double lambda = 0.0;
};

// Forms the combination and its standard errors for a given weight.
// Variances follow the influence-function plug-in with each arm's own
// (n h^d) scale; the conservative variant adds eta^2 bias^2 / (n h_r^d),
// the trial arm being the expansion anchor.
inline CombinedEstimate combine_with_eta(const BaseEstimate& base, double eta,
                                         const CombinerConfig& config) {
  CombinedEstimate out;
  out.v = base.v;
  out.eta = eta;
  out.tau_r = base.tau_r;
  out.tau_o = base.tau_o;
  out.f_r = base.f_r;
  out.f_o = base.f_o;
  out.bias_estimate = base.tau_o - base.tau_r;
  out.tau = eta == 0.0 ? base.tau_r : base.tau_r + eta * out.bias_estimate;

  const double nhr = static_cast<double>(base.n) * std::pow(base.h_r, base.d);
  const double nho = static_cast<double>(base.n) * std::pow(base.h_o, base.d);
  const Eigen::VectorXd mix =
      (1.0 - eta) / nhr * base.xi_r + eta / nho * base.xi_o;
  out.se_plain = std::sqrt(mix.squaredNorm());
  out.se_conservative = std::sqrt(
      mix.squaredNorm() +
      eta * eta * out.bias_estimate * out.bias_estimate / nhr);
  out.se_r = base.xi_r.norm() / nhr;
  out.se_o = base.xi_o.norm() / nho;

  const double se = config.se_variant == SeVariant::conservative
                        ? out.se_conservative
                        : out.se_plain;
  out.ci_low = out.tau - kZ975 * se;
  out.ci_high = out.tau + kZ975 * se;
  return out;
}

inline CombinedEstimate combine(const BaseEstimate& base,
                                const CombinerConfig& config) {
  const detail::EtaInputs in = detail::eta_inputs(base);
  EtaResult eta;
  switch (config.method) {
    case CombineMethod::lasso:
      // normalized-scale lambda maps to raw penalty 2*gram*lambda
      eta = detail::eta_lasso(in, 2.0 * in.gram * config.lambda);
      break;
    case CombineMethod::ridge:
      eta = detail::eta_ridge(in, base.n, base.h_r, base.d, config.beta_exponent);
      break;
    case CombineMethod::unpenalized:
      eta = detail::eta_unpenalized(in);
      break;
  }
  CombinedEstimate out = combine_with_eta(base, eta.value, config);
  out.degenerate = eta.degenerate;
  out.eta_unpenalized = detail::eta_unpenalized(in).value;
  out.lambda = config.method == CombineMethod::lasso ? config.lambda : 0.0;
  return out;
}

// Hot-path equivalents working from PointSummary reductions. Numerically
// identical to the vector forms on real (disjoint-arm) panels.
struct CombineScale {
  std::size_t n = 0;
  double h_r = 0.0, h_o = 0.0;
  int d = 1;
};

inline double eta_from_summary(const PointSummary& sum,
                               const CombinerConfig& config,
                               const CombineScale& scale) {
  const detail::EtaInputs in{sum.s, sum.gram, sum.tau_o - sum.tau_r};
  switch (config.method) {
    case CombineMethod::lasso:
      return detail::eta_lasso(in, 2.0 * in.gram * config.lambda).value;
    case CombineMethod::ridge:
      return detail::eta_ridge(in, scale.n, scale.h_r, scale.d,
                               config.beta_exponent)
          .value;
    case CombineMethod::unpenalized:
      return detail::eta_unpenalized(in).value;
  }
  return 0.0;
}

inline CombinedEstimate combine_summary(const PointSummary& sum,
                                        const CombinerConfig& config,
                                        const CombineScale& scale) {
  CombinedEstimate out;
  out.v = sum.v;
  out.tau_r = sum.tau_r;
  out.tau_o = sum.tau_o;
  out.f_r = sum.f_r;
  out.f_o = sum.f_o;
  out.bias_estimate = sum.tau_o - sum.tau_r;
  const detail::EtaInputs in{sum.s, sum.gram, out.bias_estimate};
  out.eta_unpenalized = detail::eta_unpenalized(in).value;
  out.degenerate = sum.gram == 0.0;
  const double eta = eta_from_summary(sum, config, scale);
  out.eta = eta;
  out.tau = eta == 0.0 ? sum.tau_r : sum.tau_r + eta * out.bias_estimate;
  const double nhr = static_cast<double>(scale.n) * std::pow(scale.h_r, scale.d);
  const double var_plain = (1.0 - eta) * (1.0 - eta) * sum.sum_rho2_r +
                           eta * eta * sum.sum_rho2_o;
  out.se_plain = std::sqrt(var_plain);
  out.se_conservative = std::sqrt(
      var_plain + eta * eta * out.bias_estimate * out.bias_estimate / nhr);
  out.se_r = std::sqrt(sum.sum_rho2_r);
  out.se_o = std::sqrt(sum.sum_rho2_o);
  out.lambda = config.method == CombineMethod::lasso ? config.lambda : 0.0;
  const double se = config.se_variant == SeVariant::conservative
                        ? out.se_conservative
                        : out.se_plain;
  out.ci_low = out.tau - kZ975 * se;
  out.ci_high = out.tau + kZ975 * se;
  return out;
}

}  // namespace adacate
