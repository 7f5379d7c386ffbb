#pragma once

#include <array>
#include <span>
#include <vector>

#include "curbloc/point_cloud.hpp"

namespace curbloc {

/// Open (clamped) cubic B-spline curve over the parameter range [0, 1].
class CubicBSpline {
 public:
  static constexpr int kDegree = 3;
  static constexpr int kOrder = kDegree + 1;

  /// Knot vector must have control_points.size() + 4 entries, be
  /// non-decreasing and have multiplicity 4 at both ends.
  CubicBSpline(std::vector<Point3> control_points, std::vector<double> knots);

  /// m + 4 knots: four zeros, m - 4 uniform interior knots, four ones.
  static std::vector<double> clamped_uniform_knots(std::size_t control_count);

  const std::vector<Point3>& control_points() const { return control_points_; }
  const std::vector<double>& knots() const { return knots_; }

  Point3 evaluate(double u) const;
  Point3 derivative(double u) const;

  /// Index of the knot span holding u, clamped to the valid range.
  std::size_t find_span(double u) const;

  /// The four non-zero basis values at u, for control points
  /// span-3 .. span.
  std::array<double, kOrder> basis(std::size_t span, double u) const;

  static std::size_t find_span(std::span<const double> knots, std::size_t control_count, double u);
  static std::array<double, kOrder> basis(std::span<const double> knots, std::size_t span,
                                          double u);

 private:
  std::vector<Point3> control_points_;
  std::vector<double> knots_;
};

}  // namespace curbloc
