#include "hapticguide/stats.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hapticguide {

double stable_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  return sum / static_cast<double>(sorted.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = stable_mean(values);
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back((v - m) * (v - m));
  std::sort(sq.begin(), sq.end());
  double ss = 0.0;
  for (double v : sq) ss += v;
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

AnovaResult rm_anova(const Eigen::MatrixXd& values) {
  const auto n = values.rows();
  const auto k = values.cols();
  if (n < 2 || k < 2) throw std::invalid_argument("rm_anova needs >= 2 subjects and >= 2 conditions");
  if (!values.allFinite()) throw std::invalid_argument("rm_anova needs a complete finite matrix");

  const double grand = values.mean();
  const Eigen::RowVectorXd condition_means = values.colwise().mean();
  const Eigen::VectorXd subject_means = values.rowwise().mean();

  AnovaResult r;
  const bool equal_means = (condition_means.array() == condition_means(0)).all();
  r.ss_condition =
      equal_means ? 0.0 : static_cast<double>(n) * (condition_means.array() - grand).square().sum();
  r.ss_subject = static_cast<double>(k) * (subject_means.array() - grand).square().sum();
  const double ss_total = (values.array() - grand).square().sum();
  const Eigen::RowVectorXd condition_effects = condition_means.array() - grand;
  const Eigen::MatrixXd residual =
      (values.colwise() - subject_means).rowwise() - condition_effects;
  r.ss_error = residual.squaredNorm();
  r.df_condition = static_cast<double>(k - 1);
  r.df_error = static_cast<double>((k - 1) * (n - 1));

  if (r.ss_condition == 0.0) {
    r.f = 0.0;
    r.p = 1.0;
    return r;
  }
  // Relative floor: the residual left by cancellation is noise, not variance.
  if (r.ss_error <= 1e-12 * ss_total) {
    r.ss_error = 0.0;
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.infinite_f = true;
    return r;
  }
  const double ms_condition = r.ss_condition / r.df_condition;
  const double ms_error = r.ss_error / r.df_error;
  r.f = ms_condition / ms_error;
  boost::math::fisher_f dist(r.df_condition, r.df_error);
  r.p = boost::math::cdf(boost::math::complement(dist, r.f));
  return r;
}

std::vector<PairedComparison> paired_comparisons(const Eigen::MatrixXd& values,
                                                 Correction correction) {
  const auto n = values.rows();
  const auto k = values.cols();
  if (n < 2) throw std::invalid_argument("paired comparisons need >= 2 subjects");
  if (!values.allFinite()) throw std::invalid_argument("paired comparisons need finite values");

  std::vector<PairedComparison> out;
  const double family = static_cast<double>(k * (k - 1) / 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const Eigen::VectorXd d = values.col(i) - values.col(j);
      PairedComparison c;
      c.first = static_cast<std::size_t>(i);
      c.second = static_cast<std::size_t>(j);
      c.df = static_cast<double>(n - 1);
      c.mean_difference = d.mean();
      const double sd = std::sqrt((d.array() - c.mean_difference).square().sum() / c.df);
      if (sd == 0.0) {
        if (c.mean_difference == 0.0) {
          c.t = 0.0;
          c.p = 1.0;
        } else {
          c.t = std::copysign(std::numeric_limits<double>::infinity(), c.mean_difference);
          c.p = 0.0;
          c.degenerate = true;
        }
      } else {
        c.t = c.mean_difference / (sd / std::sqrt(static_cast<double>(n)));
        boost::math::students_t dist(c.df);
        c.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(c.t)));
      }
      if (correction == Correction::Bonferroni) c.p = std::min(1.0, c.p * family);
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace hapticguide
