#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "adacate/common.hpp"

namespace adacate {

// One subject: study indicator z (0=trial, 1=observational), treatment t,
// outcome y, covariate vector x.
struct UnitRecord {
  int z = 0;
  int t = 0;
  double y = 0.0;
  std::vector<double> x;
};

// Immutable container for the pooled trial + OS sample. Validates domains
// and dimension consistency on construction.
class StudyDataset {
 public:
  StudyDataset() = default;

  explicit StudyDataset(std::vector<UnitRecord> records)
      : records_(std::move(records)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const UnitRecord& r = records_[i];
      if (r.z != 0 && r.z != 1)
        throw ParseError("record " + std::to_string(i) + ": z=" +
                         std::to_string(r.z) + " outside {0,1}");
      if (r.t != 0 && r.t != 1)
        throw ParseError("record " + std::to_string(i) + ": t=" +
                         std::to_string(r.t) + " outside {0,1}");
      if (!std::isfinite(r.y))
        throw ParseError("record " + std::to_string(i) + ": non-finite y");
      if (i == 0) {
        p_ = r.x.size();
      } else if (r.x.size() != p_) {
        throw ParseError("record " + std::to_string(i) +
                         ": covariate length " + std::to_string(r.x.size()) +
                         " != " + std::to_string(p_));
      }
      for (std::size_t j = 0; j < r.x.size(); ++j) {
        if (!std::isfinite(r.x[j]))
          throw ParseError("record " + std::to_string(i) + ": non-finite x" +
                           std::to_string(j + 1));
      }
      if (r.z == 0)
        ++n0_;
      else
        ++n1_;
    }
  }

  const std::vector<UnitRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return p_; }
  std::size_t n_trial() const { return n0_; }
  std::size_t n_os() const { return n1_; }

  void require_both_studies(const std::string& context) const {
    if (n0_ == 0 || n1_ == 0)
      throw EstimationError(context + " needs both studies: n0=" +
                            std::to_string(n0_) + ", n1=" +
                            std::to_string(n1_));
  }

 private:
  std::vector<UnitRecord> records_;
  std::size_t p_ = 0;
  std::size_t n0_ = 0;
  std::size_t n1_ = 0;
};

// Evaluation points for the CATE (d = 1 throughout; the reductions
// supported all map covariates to a scalar).
struct EvaluationGrid {
  std::vector<double> points;

  void validate() const {
    if (points.empty()) throw Error("evaluation grid is empty");
    for (double v : points)
      if (!std::isfinite(v)) throw Error("evaluation grid has non-finite point");
  }
};

inline EvaluationGrid even_grid(int k) {
  if (k < 1) throw Error("grid size must be >= 1");
  EvaluationGrid g;
  g.points.reserve(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i)
    g.points.push_back(static_cast<double>(i) / (k + 1));
  return g;
}

// Stratified train/validation split: each study keeps at least one record
// in each part, so downstream per-study fits stay feasible. Deterministic
// given the seed; strata with fewer than two records make the split
// infeasible and raise an error.
inline std::pair<StudyDataset, StudyDataset> split_train_validation(
    const StudyDataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error("split fraction must lie in (0,1), got " +
                std::to_string(fraction));
  std::vector<UnitRecord> train, valid;
  train.reserve(data.size());
  valid.reserve(data.size());
  std::mt19937_64 rng(derive_seed(seed, 0x51));
  for (int stratum : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.records()[i].z == stratum) idx.push_back(i);
    if (idx.size() < 2)
      throw Error("stratified split infeasible: study z=" +
                  std::to_string(stratum) + " has " +
                  std::to_string(idx.size()) + " record(s), need >= 2");
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t take = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(idx.size())));
    take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < take ? train : valid).push_back(data.records()[idx[k]]);
    }
  }
  return {StudyDataset(std::move(train)), StudyDataset(std::move(valid))};
}

}  // namespace adacate
