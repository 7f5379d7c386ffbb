#include "curbloc/bspline.hpp"

#include <algorithm>

#include "curbloc/errors.hpp"

namespace curbloc {

CubicBSpline::CubicBSpline(std::vector<Point3> control_points, std::vector<double> knots)
    : control_points_(std::move(control_points)), knots_(std::move(knots)) {
  const std::size_t m = control_points_.size();
  if (m < static_cast<std::size_t>(kOrder)) {
    throw InvalidArgumentError("cubic B-spline needs at least 4 control points");
  }
  if (knots_.size() != m + kOrder) {
    throw InvalidArgumentError("knot vector length must equal control count + 4");
  }
  if (!std::is_sorted(knots_.begin(), knots_.end())) {
    throw InvalidArgumentError("knot vector must be non-decreasing");
  }
  for (int i = 1; i < kOrder; ++i) {
    if (knots_[i] != knots_[0] || knots_[knots_.size() - 1 - i] != knots_.back()) {
      throw InvalidArgumentError("knot vector must be clamped (end multiplicity 4)");
    }
  }
}

std::vector<double> CubicBSpline::clamped_uniform_knots(std::size_t control_count) {
  if (control_count < static_cast<std::size_t>(kOrder)) {
    throw InvalidArgumentError("cubic B-spline needs at least 4 control points");
  }
  std::vector<double> knots(control_count + kOrder, 0.0);
  const std::size_t interior = control_count - kOrder;
  for (std::size_t i = 0; i < interior; ++i) {
    knots[kOrder + i] = static_cast<double>(i + 1) / static_cast<double>(interior + 1);
  }
  std::fill(knots.end() - kOrder, knots.end(), 1.0);
  return knots;
}

std::size_t CubicBSpline::find_span(std::span<const double> knots, std::size_t control_count,
                                    double u) {
  const std::size_t n = control_count - 1;
  if (u >= knots[n + 1]) return n;
  if (u <= knots[kDegree]) return kDegree;
  // Largest span with knots[span] <= u < knots[span + 1].
  const auto it = std::upper_bound(knots.begin() + kDegree, knots.begin() + n + 1, u);
  return static_cast<std::size_t>(it - knots.begin()) - 1;
}

std::array<double, CubicBSpline::kOrder> CubicBSpline::basis(std::span<const double> knots,
                                                             std::size_t span, double u) {
  std::array<double, kOrder> N{};
  std::array<double, kOrder> left{};
  std::array<double, kOrder> right{};
  N[0] = 1.0;
  for (int j = 1; j <= kDegree; ++j) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  return N;
}

std::size_t CubicBSpline::find_span(double u) const {
  return find_span(knots_, control_points_.size(), u);
}

std::array<double, CubicBSpline::kOrder> CubicBSpline::basis(std::size_t span, double u) const {
  return basis(knots_, span, u);
}

Point3 CubicBSpline::evaluate(double u) const {
  u = std::clamp(u, knots_.front(), knots_.back());
  const std::size_t span = find_span(u);
  const auto N = basis(span, u);
  Point3 p = Point3::Zero();
  for (int i = 0; i < kOrder; ++i) p += N[i] * control_points_[span - kDegree + i];
  return p;
}

Point3 CubicBSpline::derivative(double u) const {
  // Derivative of a degree-3 curve is a degree-2 curve on the inner knots.
  u = std::clamp(u, knots_.front(), knots_.back());
  const std::size_t span = find_span(u);
  const std::span<const double> inner(knots_.data() + 1, knots_.size() - 2);
  // Degree-2 basis values for span (shifted by one in the inner vector).
  const std::size_t s = span - 1;
  std::array<double, 3> N{};
  std::array<double, 3> left{};
  std::array<double, 3> right{};
  N[0] = 1.0;
  for (int j = 1; j <= 2; ++j) {
    left[j] = u - inner[s + 1 - j];
    right[j] = inner[s + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom != 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
  Point3 d = Point3::Zero();
  for (int i = 0; i < 3; ++i) {
    const std::size_t k = s - 2 + i;  // derivative control point index
    const double denom = knots_[k + kOrder] - knots_[k + 1];
    if (denom > 0.0) {
      d += N[i] * (kDegree / denom) * (control_points_[k + 1] - control_points_[k]);
    }
  }
  return d;
}

}  // namespace curbloc
