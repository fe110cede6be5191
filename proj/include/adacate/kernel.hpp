#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "adacate/pseudo_outcome.hpp"

namespace adacate {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Product Gaussian kernel over a d-dimensional argument.
inline double kernel_value(std::span<const double> u) {
  double q = 0.0;
  for (double uj : u) q += uj * uj;
  return std::pow(kInvSqrt2Pi, static_cast<double>(u.size())) *
         std::exp(-0.5 * q);
}

inline double kernel_value(double u) {
  return kInvSqrt2Pi * std::exp(-0.5 * u * u);
}

// h = 1.06 * sd(v) * m^{-1/5}; the usual normal-reference rule for locally
// constant smoothing. m is the effective sample size of the arm.
inline double rule_of_thumb_bandwidth(std::span<const double> v_values,
                                      std::size_t m) {
  if (m < 2 || v_values.size() < 2)
    throw EstimationError("rule-of-thumb bandwidth needs m >= 2");
  const auto [lo, hi] = std::minmax_element(v_values.begin(), v_values.end());
  if (*lo == *hi) throw EstimationError("degenerate V: constant values");
  double mean = 0.0;
  for (double v : v_values) mean += v;
  mean /= static_cast<double>(v_values.size());
  double ss = 0.0;
  for (double v : v_values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v_values.size() - 1));
  return 1.06 * sd * std::pow(static_cast<double>(m), -0.2);
}

// One bandwidth per arm, shared across evaluation points. Nonpositive
// entries resolve to the trial arm's rule-of-thumb value for BOTH arms: a
// common h keeps the influence-function regression for the combination
// weight on a single scale (with arm-specific bandwidths the weight drifts
// off the precision weight by (h_o/h_r)^2), and the trial arm, being the
// scarce one, sets the binding smoothing resolution. Explicit per-arm
// overrides remain available.
struct KernelConfig {
  double bandwidth_trial = 0.0;
  double bandwidth_os = 0.0;
  int d = 1;
};

// Base estimates at one evaluation point. The influence vectors are in
// panel record order: xi_r is zero on OS records and vice versa, and each
// sums to zero by construction.
struct BaseEstimate {
  double v = 0.0;
  int target_z = 0;
  double tau_r = 0.0, tau_o = 0.0;
  double f_r = 0.0, f_o = 0.0;
  Eigen::VectorXd xi_r, xi_o;
  // fitting context, carried for downstream weight/SE scaling
  std::size_t n = 0;
  double h_r = 0.0, h_o = 0.0;
  int d = 1;
};

// Influence-function reductions at one point: everything the combiner needs
// without materializing the per-record vectors.
//   s        = sum xi_r * (xi_r - xi_o)
//   gram     = sum (xi_r - xi_o)^2
//   sum_rho2 = sum over the arm of {xi / (n h^d)}^2, the normalized residual
//              squares entering the plug-in variance.
struct PointSummary {
  double v = 0.0;
  double tau_r = 0.0, tau_o = 0.0;
  double f_r = 0.0, f_o = 0.0;
  double s = 0.0;
  double gram = 0.0;
  double sum_rho2_r = 0.0, sum_rho2_o = 0.0;
  bool ok = true;
};

// Reusable scratch space for kernel sweeps; one per worker thread.
struct KernelWorkspace {
  Eigen::ArrayXd buf_r, buf_o;
};

// Locally constant kernel regression of the pseudo-outcomes over V for one
// target population. Arm weights are omega^z on trial records and
// omega^(z-1) on OS records. Immutable after construction; evaluation
// points are independent and safe to map over in parallel, each worker
// holding its own KernelWorkspace.
class KernelSmoother {
 public:
  KernelSmoother(const PseudoOutcomePanel& panel, int target_z,
                 const KernelConfig& config)
      : target_z_(target_z), d_(config.d), n_(panel.size()) {
    if (target_z != 0 && target_z != 1)
      throw Error("target_z must be 0 or 1");
    if (panel.n_trial == 0 || panel.n_os == 0)
      throw EstimationError("kernel smoother needs records from both studies");
    v_r_.resize(panel.n_trial);
    psi_r_.resize(panel.n_trial);
    w_r_.resize(panel.n_trial);
    v_o_.resize(panel.n_os);
    psi_o_.resize(panel.n_os);
    w_o_.resize(panel.n_os);
    idx_r_.reserve(panel.n_trial);
    idx_o_.reserve(panel.n_os);
    long r = 0, o = 0;
    for (std::size_t i = 0; i < panel.size(); ++i) {
      if (panel.z[i] == 0) {
        v_r_[r] = panel.v[i];
        psi_r_[r] = *panel.psi_r[i];
        w_r_[r] = target_z == 1 ? panel.omega[i] : 1.0;
        idx_r_.push_back(i);
        ++r;
      } else {
        v_o_[o] = panel.v[i];
        psi_o_[o] = *panel.psi_o[i];
        w_o_[o] = target_z == 0 ? 1.0 / panel.omega[i] : 1.0;
        idx_o_.push_back(i);
        ++o;
      }
    }
    h_r_ = config.bandwidth_trial > 0.0
               ? config.bandwidth_trial
               : rule_of_thumb_bandwidth(
                     std::span<const double>(v_r_.data(), v_r_.size()),
                     panel.n_trial);
    h_o_ = config.bandwidth_os > 0.0 ? config.bandwidth_os : h_r_;
  }

  double bandwidth_trial() const { return h_r_; }
  double bandwidth_os() const { return h_o_; }
  int dimension() const { return d_; }
  std::size_t n_total() const { return n_; }
  int target_z() const { return target_z_; }

  PointSummary summary_at(double v, KernelWorkspace& ws) const {
    PointSummary out;
    out.v = v;
    const ArmPass r = arm_pass(v, v_r_, psi_r_, w_r_, h_r_, ws.buf_r);
    const ArmPass o = arm_pass(v, v_o_, psi_o_, w_o_, h_o_, ws.buf_o);
    out.tau_r = r.tau;
    out.tau_o = o.tau;
    out.f_r = r.f;
    out.f_o = o.f;
    if (r.f <= kDensityFloor || o.f <= kDensityFloor) {
      out.ok = false;
      return out;
    }
    // Disjoint arms: xi_o vanishes on trial records and xi_r on OS records,
    // so s = sum xi_r^2 and gram = sum xi_r^2 + sum xi_o^2.
    const double sum_xi2_r = r.sq / (r.f * r.f);
    const double sum_xi2_o = o.sq / (o.f * o.f);
    out.s = sum_xi2_r;
    out.gram = sum_xi2_r + sum_xi2_o;
    out.sum_rho2_r = r.sq / (r.s1 * r.s1);
    out.sum_rho2_o = o.sq / (o.s1 * o.s1);
    return out;
  }

  PointSummary summary_at(double v) const {
    KernelWorkspace ws;
    return summary_at(v, ws);
  }

  // Trial-arm Nadaraya-Watson value alone; used as the validation-side
  // reference when tuning. Returns false through ok when the density floor
  // is violated at v.
  struct TrialValue {
    double tau = 0.0;
    double f = 0.0;
    bool ok = true;
  };

  TrialValue trial_estimate_at(double v, KernelWorkspace& ws) const {
    const ArmPass r = arm_pass(v, v_r_, psi_r_, w_r_, h_r_, ws.buf_r);
    TrialValue out;
    out.tau = r.tau;
    out.f = r.f;
    out.ok = r.f > kDensityFloor;
    return out;
  }

  BaseEstimate estimate_at(double v, KernelWorkspace& ws) const {
    BaseEstimate out;
    out.v = v;
    out.target_z = target_z_;
    out.n = n_;
    out.h_r = h_r_;
    out.h_o = h_o_;
    out.d = d_;
    const ArmPass r = arm_pass(v, v_r_, psi_r_, w_r_, h_r_, ws.buf_r);
    const ArmPass o = arm_pass(v, v_o_, psi_o_, w_o_, h_o_, ws.buf_o);
    out.tau_r = r.tau;
    out.tau_o = o.tau;
    out.f_r = r.f;
    out.f_o = o.f;
    if (r.f <= kDensityFloor || o.f <= kDensityFloor)
      throw EstimationError("no effective support at v=" + std::to_string(v) +
                            " (density " +
                            std::to_string(r.f <= kDensityFloor ? r.f : o.f) +
                            " below floor)");
    out.xi_r = Eigen::VectorXd::Zero(static_cast<long>(n_));
    out.xi_o = Eigen::VectorXd::Zero(static_cast<long>(n_));
    // ws.buf_* still holds k*w from the arm pass above.
    for (std::size_t j = 0; j < idx_r_.size(); ++j)
      out.xi_r[static_cast<long>(idx_r_[j])] =
          ws.buf_r[static_cast<long>(j)] * (psi_r_[static_cast<long>(j)] - r.tau) / r.f;
    for (std::size_t j = 0; j < idx_o_.size(); ++j)
      out.xi_o[static_cast<long>(idx_o_[j])] =
          ws.buf_o[static_cast<long>(j)] * (psi_o_[static_cast<long>(j)] - o.tau) / o.f;
    return out;
  }

  BaseEstimate estimate_at(double v) const {
    KernelWorkspace ws;
    return estimate_at(v, ws);
  }

 private:
  struct ArmPass {
    double s1 = 0.0;  // sum k*w
    double sq = 0.0;  // sum (k*w*(psi - tau))^2
    double tau = 0.0;
    double f = 0.0;
  };

  // One vectorized pass over an arm: kernel weights, the Nadaraya-Watson
  // ratio, the K_h-scaled density, and residual squares. Leaves k*w in buf.
  ArmPass arm_pass(double v, const Eigen::ArrayXd& vs, const Eigen::ArrayXd& psi,
                   const Eigen::ArrayXd& w, double h, Eigen::ArrayXd& buf) const {
    ArmPass out;
    buf = (-0.5 * ((vs - v) / h).square()).exp() * kInvSqrt2Pi * w;
    out.s1 = buf.sum();
    const double s2 = (buf * psi).sum();
    out.f = out.s1 / (static_cast<double>(n_) * std::pow(h, d_));
    out.tau = out.s1 > 0.0 ? s2 / out.s1 : 0.0;
    out.sq = (buf * (psi - out.tau)).square().sum();
    return out;
  }

  int target_z_;
  int d_;
  std::size_t n_;
  double h_r_ = 0.0, h_o_ = 0.0;
  Eigen::ArrayXd v_r_, psi_r_, w_r_;
  Eigen::ArrayXd v_o_, psi_o_, w_o_;
  std::vector<std::size_t> idx_r_, idx_o_;
};

// Convenience single-point form.
inline BaseEstimate base_estimates(const PseudoOutcomePanel& panel, int target_z,
                                   double v, const KernelConfig& config) {
  return KernelSmoother(panel, target_z, config).estimate_at(v);
}

}  // namespace adacate
