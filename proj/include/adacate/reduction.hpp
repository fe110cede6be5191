#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "adacate/dataset.hpp"
#include "adacate/glm.hpp"

namespace adacate {

// Right-continuous empirical CDF: F(x) = #{reference <= x} / m.
// Ties share a percentile.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> reference) : sorted_(std::move(reference)) {
    if (sorted_.empty()) throw Error("ECDF needs a nonempty reference sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) /
           static_cast<double>(sorted_.size());
  }

  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

// Deterministic map from the covariate vector to the scalar V over which the
// CATE is estimated. Three kinds:
//   column     — raw covariate column (0-based index),
//   pct_column — reference-ECDF percentile of a covariate column,
//   pct_score  — reference-ECDF percentile of a fitted treatment-difference
//                score (predictions from per-arm outcome regressions fit on
//                the pooled reference data).
struct ReductionSpec {
  enum class Kind { column, pct_column, pct_score };

  Kind kind = Kind::pct_column;
  std::size_t column = 0;
  Link score_link = Link::identity;
  std::optional<CoefficientVector> score_arm0;
  std::optional<CoefficientVector> score_arm1;
};

namespace detail {

inline Eigen::MatrixXd covariate_matrix(const StudyDataset& data) {
  Eigen::MatrixXd x(data.size(), data.dim());
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.dim(); ++j)
      x(static_cast<long>(i), static_cast<long>(j)) = data.records()[i].x[j];
  return x;
}

inline double score_value(const ReductionSpec& spec, std::span<const double> x) {
  return predict_mean(*spec.score_arm1, x) - predict_mean(*spec.score_arm0, x);
}

}  // namespace detail

// Fits the score models for pct_score against the reference data. Other
// kinds pass through unchanged. The returned spec is a fixed transformation
// from then on.
inline ReductionSpec resolve_reduction(ReductionSpec spec,
                                       const StudyDataset& reference) {
  if (spec.kind != ReductionSpec::Kind::pct_score) return spec;
  for (int arm : {0, 1}) {
    std::vector<double> ys;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < reference.size(); ++i) {
      if (reference.records()[i].t == arm) {
        ys.push_back(reference.records()[i].y);
        rows.push_back(i);
      }
    }
    if (rows.size() < reference.dim() + 1)
      throw FitError("pct-score reduction: treatment arm " +
                     std::to_string(arm) + " has only " +
                     std::to_string(rows.size()) + " reference records");
    Eigen::MatrixXd x(rows.size(), reference.dim());
    Eigen::VectorXd y(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      y[static_cast<long>(k)] = ys[k];
      for (std::size_t j = 0; j < reference.dim(); ++j)
        x(static_cast<long>(k), static_cast<long>(j)) =
            reference.records()[rows[k]].x[j];
    }
    CoefficientVector fit = spec.score_link == Link::logit
                                ? fit_logistic(y, x)
                                : fit_linear(y, x);
    (arm == 0 ? spec.score_arm0 : spec.score_arm1) = std::move(fit);
  }
  return spec;
}

// Applies the reduction to every record of data, using reference for the
// percentile kinds.
inline std::vector<double> apply_reduction(const ReductionSpec& spec,
                                           const StudyDataset& data,
                                           const StudyDataset& reference) {
  std::vector<double> v;
  v.reserve(data.size());
  switch (spec.kind) {
    case ReductionSpec::Kind::column: {
      if (spec.column >= data.dim())
        throw Error("reduction column " + std::to_string(spec.column) +
                    " out of range for p=" + std::to_string(data.dim()));
      for (const UnitRecord& r : data.records()) v.push_back(r.x[spec.column]);
      return v;
    }
    case ReductionSpec::Kind::pct_column: {
      if (reference.size() == 0)
        throw Error("percentile reduction needs a nonempty reference");
      if (spec.column >= data.dim() || spec.column >= reference.dim())
        throw Error("reduction column " + std::to_string(spec.column) +
                    " out of range for p=" + std::to_string(data.dim()));
      std::vector<double> ref;
      ref.reserve(reference.size());
      for (const UnitRecord& r : reference.records())
        ref.push_back(r.x[spec.column]);
      Ecdf ecdf(std::move(ref));
      for (const UnitRecord& r : data.records()) v.push_back(ecdf(r.x[spec.column]));
      return v;
    }
    case ReductionSpec::Kind::pct_score: {
      if (!spec.score_arm0 || !spec.score_arm1)
        throw Error("pct-score reduction not resolved; fit it on the reference first");
      if (reference.size() == 0)
        throw Error("percentile reduction needs a nonempty reference");
      std::vector<double> ref;
      ref.reserve(reference.size());
      for (const UnitRecord& r : reference.records())
        ref.push_back(detail::score_value(spec, r.x));
      Ecdf ecdf(std::move(ref));
      for (const UnitRecord& r : data.records())
        v.push_back(ecdf(detail::score_value(spec, r.x)));
      return v;
    }
  }
  throw Error("unknown reduction kind");
}

}  // namespace adacate
