#pragma once

#include <string>
#include <vector>

#include "hyloc/core.hpp"

namespace hyloc {

struct AteSummary {
  std::vector<double> times;
  std::vector<double> errors;  // m, one per aligned pair
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
  double max = 0.0;
  std::size_t count = 0;
};

/// Summary statistics of a non-empty error list (median averages the two
/// middle values for even counts). Throws ArgumentError when empty.
AteSummary summarize_errors(std::vector<double> errors, std::vector<double> times = {});

/// Absolute trajectory error without any alignment: every estimate sample
/// inside the ground-truth span is compared with the interpolated ground
/// truth. Throws ArgumentError when the spans do not overlap.
AteSummary ate(const Trajectory& est, const Trajectory& gt);

/// Median of a non-empty list.
double median(std::vector<double> values);

struct PairwiseRelError {
  std::vector<double> distance_errors;  // m
  std::vector<double> angle_errors;     // degrees in [0, 180]
  double median_distance = 0.0;
  double median_angle = 0.0;
  double mean_distance = 0.0;
  double mean_angle = 0.0;
};

/// Relative distance and bearing errors between two agents, evaluated at the
/// samples of estA lying in the common span of all four trajectories.
/// Epochs where the true separation is below 1e-6 m are skipped. Throws
/// ArgumentError when no epoch remains.
PairwiseRelError relative_errors(const Trajectory& est_a, const Trajectory& est_b, const Trajectory& gt_a,
                                 const Trajectory& gt_b);

struct MultiUserRelError {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<PairwiseRelError> per_pair;
  double mean_distance = 0.0;  // per-pair epoch means, averaged over pairs
  double mean_angle = 0.0;
};

/// relative_errors for every agent pair (i < j). Needs at least two agents.
MultiUserRelError multi_user_errors(const std::vector<Trajectory>& est, const std::vector<Trajectory>& gt);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;

  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Sorted values paired with k/n. Throws ArgumentError when empty.
std::vector<CdfPoint> cdf(std::vector<double> errors);

struct CompareRow {
  std::string method;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  friend bool operator==(const CompareRow&, const CompareRow&) = default;
};

struct MethodResult {
  std::string method;
  AteSummary summary;
};

/// Rows sorted by median ascending, then by method name.
std::vector<CompareRow> compare_report(const std::vector<MethodResult>& results);

/// "method,mean,median,std,max,count" with round-trip precision.
std::string compare_to_csv(const std::vector<CompareRow>& rows);
/// Throws ParseError for malformed input.
std::vector<CompareRow> compare_from_csv(const std::string& text);
/// Fixed-width text table.
std::string compare_to_text(const std::vector<CompareRow>& rows);

/// "t,error_m" lines.
std::string errors_to_csv(const AteSummary& summary);
/// "error_m,fraction" lines.
std::string cdf_to_csv(const std::vector<CdfPoint>& points);

}  // namespace hyloc
