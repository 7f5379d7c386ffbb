#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "curbloc/point_cloud.hpp"

namespace curbloc {

/// Static 3D k-d tree over a borrowed point array. The points must outlive
/// the tree.
class KdTree {
 public:
  struct Hit {
    std::size_t index = 0;
    double distance = std::numeric_limits<double>::infinity();
  };

  explicit KdTree(std::span<const Point3> points);

  bool empty() const { return points_.empty(); }

  /// Nearest stored point; distance is +inf when the tree is empty.
  Hit nearest(const Point3& query) const;

  /// Indices of all points within `radius` (inclusive), unordered.
  std::vector<std::size_t> radius_search(const Point3& query, double radius) const;

 private:
  struct Node {
    std::size_t begin;
    std::size_t end;
    int axis;  // -1 for leaves
    double split;
    int left;
    int right;
  };

  int build(std::size_t begin, std::size_t end, int depth);
  void nearest_impl(int node, const Point3& q, Hit& best) const;
  void radius_impl(int node, const Point3& q, double r2, std::vector<std::size_t>& out) const;

  std::span<const Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace curbloc
