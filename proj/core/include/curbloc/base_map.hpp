#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "curbloc/point_cloud.hpp"
#include "curbloc/pose.hpp"

namespace curbloc {

using VertexId = std::int64_t;
using SessionId = std::int32_t;
using TimestampNs = std::int64_t;

inline constexpr TimestampNs kNsPerMs = 1'000'000;
inline constexpr TimestampNs kNsPerSecond = 1'000'000'000;

/// Pose-graph vertex produced by the upstream mapping pipeline.
struct BaseMapVertex {
  VertexId id = 0;
  TimestampNs timestamp = 0;
  Pose T_MB{kMapFrame, kBodyFrame};  // body -> map
  std::optional<PointCloud3> curb_observation;  // in F_B
  SessionId session_id = 0;
  /// Set when the vertex is known to carry curb data whose points were not
  /// loaded (e.g. when reading a base map without its clouds).
  bool has_curb_data = false;

  bool holds_curbs() const { return has_curb_data || curb_observation.has_value(); }
};

/// Timestamped vertices of one or more sessions.
/// Vertex ids are unique; within a session timestamps strictly increase with id.
class BaseMap {
 public:
  void add_vertex(BaseMapVertex v);

  const std::vector<BaseMapVertex>& vertices() const { return vertices_; }
  std::vector<BaseMapVertex>& mutable_vertices() { return vertices_; }
  const std::vector<SessionId>& sessions() const { return sessions_; }
  bool empty() const { return vertices_.empty(); }
  std::size_t size() const { return vertices_.size(); }

  const BaseMapVertex* find(VertexId id) const;
  BaseMapVertex* find(VertexId id);

  /// Index of the vertex minimising |timestamp - t|; ties go to the earlier
  /// entry. Requires a non-empty map.
  std::size_t nearest_in_time(TimestampNs t) const;

 private:
  std::vector<BaseMapVertex> vertices_;
  std::vector<SessionId> sessions_;
};

}  // namespace curbloc
