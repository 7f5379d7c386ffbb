#include "curbloc/curb_map.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "curbloc/errors.hpp"

namespace curbloc {

PointCloud3 CurbMap::raw_union() const {
  PointCloud3 all(kMapFrame);
  all.reserve(total_raw_points);
  for (const auto& [id, cloud] : raw_by_vertex) all.append(cloud);
  return all;
}

std::size_t CurbMap::stored_point_count() const {
  std::size_t total = 0;
  for (const auto& s : segments) total += s.stored_point_count();
  return total;
}

VertexId associate_observation(BaseMap& map, const PointCloud3& obs, TimestampNs t,
                               TimestampNs max_time_gap) {
  if (map.empty()) throw EmptyMapError("cannot associate an observation with an empty base map");
  if (obs.empty()) throw InvalidArgumentError("curb observation is empty");
  if (obs.frame() != kBodyFrame) {
    throw FrameMismatchError("curb observation must be in the body frame, got " + obs.frame().str());
  }
  BaseMapVertex& v = map.mutable_vertices()[map.nearest_in_time(t)];
  const TimestampNs gap = std::llabs(v.timestamp - t);
  if (gap > max_time_gap) {
    throw TemporalAssociationError("nearest vertex is " + std::to_string(gap / kNsPerMs) +
                                   " ms away from the observation");
  }
  if (v.curb_observation) {
    v.curb_observation->append(obs);
  } else {
    v.curb_observation = obs;
  }
  v.has_curb_data = true;
  return v.id;
}

CurbMap build_curb_map(const BaseMap& map) {
  CurbMap out;
  for (const auto& v : map.vertices()) {
    if (!v.curb_observation || v.curb_observation->empty()) continue;
    PointCloud3 in_map = apply(v.T_MB, *v.curb_observation);
    out.total_raw_points += in_map.size();
    out.raw_by_vertex.emplace(v.id, std::move(in_map));
  }
  if (out.raw_by_vertex.empty()) throw EmptyMapError("no base map vertex holds a curb observation");
  out.sessions = map.sessions();
  return out;
}

void parameterize_curb_map(CurbMap& map, const ParameterizationConfig& cfg, std::uint64_t seed) {
  map.segments = parameterize(map.raw_union(), cfg, seed).segments;
}

MergedMap merge_session(const CurbMap& existing, const BaseMap& existing_base,
                        const BaseMap& new_session, const ParameterizationConfig& cfg,
                        std::uint64_t seed) {
  if (new_session.empty()) return {existing_base, existing};
  for (const SessionId s : new_session.sessions()) {
    if (std::find(existing_base.sessions().begin(), existing_base.sessions().end(), s) !=
        existing_base.sessions().end()) {
      throw SessionCollisionError("session " + std::to_string(s) + " already in the map");
    }
  }
  MergedMap merged{existing_base, existing};
  for (const auto& v : new_session.vertices()) merged.base.add_vertex(v);

  bool added_curbs = false;
  for (const auto& v : new_session.vertices()) {
    if (!v.curb_observation || v.curb_observation->empty()) continue;
    PointCloud3 in_map = apply(v.T_MB, *v.curb_observation);
    merged.curbs.total_raw_points += in_map.size();
    merged.curbs.raw_by_vertex.emplace(v.id, std::move(in_map));
    added_curbs = true;
  }
  merged.curbs.sessions = merged.base.sessions();
  if (added_curbs) parameterize_curb_map(merged.curbs, cfg, seed);
  return merged;
}

}  // namespace curbloc
