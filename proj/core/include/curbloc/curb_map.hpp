#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "curbloc/base_map.hpp"
#include "curbloc/parameterization.hpp"

namespace curbloc {

inline constexpr TimestampNs kDefaultMaxTimeGap = 100 * kNsPerMs;

/// Map-frame curb data anchored to base-map vertices.
struct CurbMap {
  std::vector<CurbSegment> segments;
  /// Observations transformed into F_M, keyed by base-map vertex id.
  std::map<VertexId, PointCloud3> raw_by_vertex;
  std::size_t total_raw_points = 0;
  std::vector<SessionId> sessions;

  /// Union of every raw cloud, ordered by vertex id.
  PointCloud3 raw_union() const;
  std::size_t stored_point_count() const;
};

/// Stores `obs` on the vertex closest in time to `t` and returns its id.
/// Throws TemporalAssociationError when that vertex is more than
/// `max_time_gap` away from `t`.
VertexId associate_observation(BaseMap& map, const PointCloud3& obs, TimestampNs t,
                               TimestampNs max_time_gap = kDefaultMaxTimeGap);

/// Transforms every vertex observation into F_M. Segments are left empty;
/// see parameterize_curb_map.
CurbMap build_curb_map(const BaseMap& map);

/// Replaces the segments by a fresh parameterization of the raw union.
void parameterize_curb_map(CurbMap& map, const ParameterizationConfig& cfg, std::uint64_t seed);

struct MergedMap {
  BaseMap base;
  CurbMap curbs;
};

/// Naive union of a new session into an existing map followed by full
/// re-parameterization. An empty new session returns the inputs unchanged.
MergedMap merge_session(const CurbMap& existing, const BaseMap& existing_base,
                        const BaseMap& new_session, const ParameterizationConfig& cfg,
                        std::uint64_t seed);

}  // namespace curbloc
