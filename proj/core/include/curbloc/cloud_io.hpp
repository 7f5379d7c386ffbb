#pragma once

#include <filesystem>
#include <iosfwd>

#include "curbloc/point_cloud.hpp"

namespace curbloc {

/// One `x,y,z` row per point. A leading non-numeric header line is skipped.
PointCloud3 read_cloud_csv(std::istream& in, const FrameId& frame);
void write_cloud_csv(std::ostream& out, const PointCloud3& cloud);

/// ASCII PLY. The vertex element must carry x, y and z properties; other
/// properties are ignored.
PointCloud3 read_cloud_ply(std::istream& in, const FrameId& frame);
void write_cloud_ply(std::ostream& out, const PointCloud3& cloud);

/// Dispatches on the extension (.csv or .ply).
PointCloud3 load_cloud(const std::filesystem::path& path, const FrameId& frame);
void save_cloud(const std::filesystem::path& path, const PointCloud3& cloud);

}  // namespace curbloc
