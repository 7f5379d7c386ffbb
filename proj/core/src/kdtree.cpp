#include "curbloc/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace curbloc {

namespace {
constexpr std::size_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Point3> points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!order_.empty()) {
    nodes_.reserve(2 * order_.size() / kLeafSize + 2);
    build(0, order_.size(), 0);
  }
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize) return id;

  Point3 lo = points_[order_[begin]];
  Point3 hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree::Hit KdTree::nearest(const Point3& query) const {
  Hit best;
  if (nodes_.empty()) return best;
  double best2 = std::numeric_limits<double>::infinity();
  best.distance = best2;
  nearest_impl(0, query, best);
  best.distance = std::sqrt(best.distance);
  return best;
}

// Hit::distance holds the squared distance during the search.
void KdTree::nearest_impl(int node_id, const Point3& q, Hit& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const double d2 = (points_[order_[i]] - q).squaredNorm();
      if (d2 < best.distance || (d2 == best.distance && order_[i] < best.index)) {
        best.distance = d2;
        best.index = order_[i];
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int first = diff < 0.0 ? node.left : node.right;
  const int second = diff < 0.0 ? node.right : node.left;
  nearest_impl(first, q, best);
  if (diff * diff <= best.distance) nearest_impl(second, q, best);
}

std::vector<std::size_t> KdTree::radius_search(const Point3& query, double radius) const {
  std::vector<std::size_t> out;
  if (!nodes_.empty()) radius_impl(0, query, radius * radius, out);
  return out;
}

void KdTree::radius_impl(int node_id, const Point3& q, double r2,
                         std::vector<std::size_t>& out) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  if (diff <= 0.0 || diff * diff <= r2) radius_impl(node.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) radius_impl(node.right, q, r2, out);
}

}  // namespace curbloc
