#pragma once

#include <random>
#include <vector>

#include "adacate/adacate.hpp"

namespace testutil {

inline adacate::UnitRecord rec(int z, int t, double y, std::vector<double> x) {
  adacate::UnitRecord r;
  r.z = z;
  r.t = t;
  r.y = y;
  r.x = std::move(x);
  return r;
}

// Small random two-study dataset with scalar covariate, for property tests.
inline adacate::StudyDataset random_dataset(std::mt19937_64& rng, std::size_t n0,
                                            std::size_t n1) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<adacate::UnitRecord> records;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    const int z = i < n0 ? 0 : 1;
    records.push_back(rec(z, unif(rng) < 0.5 ? 1 : 0, normal(rng),
                          {normal(rng), normal(rng)}));
  }
  return adacate::StudyDataset(std::move(records));
}

// Random pseudo-outcome panel (already reduced), for kernel/combiner tests.
inline adacate::PseudoOutcomePanel random_panel(std::mt19937_64& rng,
                                                std::size_t n0, std::size_t n1,
                                                double omega_spread = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  adacate::PseudoOutcomePanel panel;
  const std::size_t n = n0 + n1;
  panel.z.resize(n);
  panel.v.resize(n);
  panel.psi_r.resize(n);
  panel.psi_o.resize(n);
  panel.omega.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    panel.z[i] = i < n0 ? 0 : 1;
    panel.v[i] = unif(rng);
    panel.omega[i] = std::exp(omega_spread * normal(rng));
    if (panel.z[i] == 0) {
      panel.psi_r[i] = 2.0 * normal(rng) + 1.0;
      ++panel.n_trial;
    } else {
      panel.psi_o[i] = normal(rng) - 0.5;
      ++panel.n_os;
    }
  }
  return panel;
}

}  // namespace testutil
