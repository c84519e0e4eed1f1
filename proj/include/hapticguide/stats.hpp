#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace hapticguide {

/// Mean of the values summed in ascending order, so the result does not
/// depend on input order.
double stable_mean(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> values);

struct AnovaResult {
  double f = 0.0;
  double df_condition = 0.0;
  double df_error = 0.0;
  double p = 1.0;
  double ss_condition = 0.0;
  double ss_subject = 0.0;
  double ss_error = 0.0;
  bool infinite_f = false;  // zero residual with a nonzero condition effect

  bool operator==(const AnovaResult&) const = default;
};

/// One-way repeated-measures ANOVA on a participants x conditions matrix.
/// Throws std::invalid_argument for fewer than 2 rows/columns or non-finite cells.
AnovaResult rm_anova(const Eigen::MatrixXd& values);

enum class Correction { None, Bonferroni };

struct PairedComparison {
  std::size_t first = 0;
  std::size_t second = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool degenerate = false;  // zero variance of a nonzero difference
};

/// Paired t-test for every column pair (i < j).
std::vector<PairedComparison> paired_comparisons(const Eigen::MatrixXd& values,
                                                 Correction correction = Correction::None);

}  // namespace hapticguide
