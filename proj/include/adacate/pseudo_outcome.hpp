#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adacate/csv.hpp"
#include "adacate/nuisance.hpp"
#include "adacate/reduction.hpp"

namespace adacate {

// Per-subject doubly-robust pseudo-outcomes with odds weights, aligned with
// the source dataset's record order. psi_r is defined only for trial
// records, psi_o only for OS records.
struct PseudoOutcomePanel {
  std::vector<int> z;
  std::vector<double> v;
  std::vector<std::optional<double>> psi_r;
  std::vector<std::optional<double>> psi_o;
  std::vector<double> omega;

  std::size_t size() const { return z.size(); }
  std::size_t n_trial = 0;
  std::size_t n_os = 0;
};

namespace detail {

// The DR transform: inverse-propensity-weighted residual plus the model
// treatment contrast, with the study-specific nuisances.
inline double dr_pseudo_outcome(const UnitRecord& r,
                                const CoefficientVector& ps,
                                const OutcomeModel& outcome) {
  const double pi1 = predict_probability(ps, r.x);
  const double pi0 = 1.0 - pi1;
  const double mu_t = outcome.predict(r.x, r.t);
  const double mu1 = outcome.predict(r.x, 1.0);
  const double mu0 = outcome.predict(r.x, 0.0);
  return (r.t - pi1) / (pi1 * pi0) * (r.y - mu_t) + mu1 - mu0;
}

}  // namespace detail

// Low-level form taking pre-reduced V values (one per record).
inline PseudoOutcomePanel compute_pseudo_outcomes(
    const StudyDataset& data, const FittedNuisances& nuis,
    const std::vector<double>& v_per_record) {
  if (v_per_record.size() != data.size())
    throw Error("compute_pseudo_outcomes: V vector length " +
                std::to_string(v_per_record.size()) + " != n=" +
                std::to_string(data.size()));
  PseudoOutcomePanel panel;
  const std::size_t n = data.size();
  panel.z.resize(n);
  panel.v = v_per_record;
  panel.psi_r.resize(n);
  panel.psi_o.resize(n);
  panel.omega.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const UnitRecord& r = data.records()[i];
    panel.z[i] = r.z;
    panel.omega[i] = odds_weight(nuis.participation, r.x);
    if (r.z == 0) {
      panel.psi_r[i] = detail::dr_pseudo_outcome(r, nuis.ps_trial, nuis.outcome_trial);
      ++panel.n_trial;
    } else {
      panel.psi_o[i] = detail::dr_pseudo_outcome(r, nuis.ps_os, nuis.outcome_os);
      ++panel.n_os;
    }
  }
  return panel;
}

inline PseudoOutcomePanel compute_pseudo_outcomes(const StudyDataset& data,
                                                  const FittedNuisances& nuis,
                                                  const ReductionSpec& reduction,
                                                  const StudyDataset& reference) {
  return compute_pseudo_outcomes(data, nuis,
                                 apply_reduction(reduction, data, reference));
}

// Audit export: z, v, psi_r, psi_o, omega. Absent pseudo-outcomes are empty cells.
inline void write_panel_csv(const std::string& path,
                            const PseudoOutcomePanel& panel) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    rows.push_back({std::to_string(panel.z[i]), csv::format_number(panel.v[i]),
                    panel.psi_r[i] ? csv::format_number(*panel.psi_r[i]) : "",
                    panel.psi_o[i] ? csv::format_number(*panel.psi_o[i]) : "",
                    csv::format_number(panel.omega[i])});
  }
  csv::write(path, {"z", "v", "psi_r", "psi_o", "omega"}, rows);
}

}  // namespace adacate
