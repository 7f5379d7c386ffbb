#include "curbloc/base_map.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <string>

#include "curbloc/errors.hpp"

namespace curbloc {

void BaseMap::add_vertex(BaseMapVertex v) {
  if (v.T_MB.parent_frame() != kMapFrame || v.T_MB.child_frame() != kBodyFrame) {
    throw FrameMismatchError("base map vertex pose must map body to map");
  }
  if (v.curb_observation && v.curb_observation->frame() != kBodyFrame) {
    throw FrameMismatchError("curb observation must be expressed in the body frame");
  }
  if (find(v.id) != nullptr) {
    throw InvalidArgumentError("duplicate base map vertex id " + std::to_string(v.id));
  }
  // Latest vertex of the same session must be older and carry a smaller id.
  for (auto it = vertices_.rbegin(); it != vertices_.rend(); ++it) {
    if (it->session_id != v.session_id) continue;
    if (it->timestamp >= v.timestamp || it->id >= v.id) {
      throw InvalidArgumentError("timestamps must strictly increase with id within session " +
                                 std::to_string(v.session_id));
    }
    break;
  }
  if (std::find(sessions_.begin(), sessions_.end(), v.session_id) == sessions_.end()) {
    sessions_.push_back(v.session_id);
  }
  vertices_.push_back(std::move(v));
}

const BaseMapVertex* BaseMap::find(VertexId id) const {
  for (const auto& v : vertices_) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

BaseMapVertex* BaseMap::find(VertexId id) {
  return const_cast<BaseMapVertex*>(std::as_const(*this).find(id));
}

std::size_t BaseMap::nearest_in_time(TimestampNs t) const {
  if (vertices_.empty()) throw EmptyMapError("base map has no vertices");
  std::size_t best = 0;
  auto best_gap = std::numeric_limits<TimestampNs>::max();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const TimestampNs gap = std::llabs(vertices_[i].timestamp - t);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

}  // namespace curbloc
