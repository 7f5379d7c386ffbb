#include "curbloc/cloud_io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "curbloc/errors.hpp"

namespace curbloc {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool ends_with_ci(const std::string& s, std::string_view suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t i = 0; i < suffix.size(); ++i) {
    const char a = static_cast<char>(std::tolower(s[s.size() - suffix.size() + i]));
    if (a != suffix[i]) return false;
  }
  return true;
}

}  // namespace

PointCloud3 read_cloud_csv(std::istream& in, const FrameId& frame) {
  PointCloud3 cloud(frame);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto fields = split(content, ',');
    double xyz[3];
    const bool numeric = fields.size() >= 3 && parse_double(fields[0], xyz[0]) &&
                         parse_double(fields[1], xyz[1]) && parse_double(fields[2], xyz[2]);
    if (!numeric) {
      if (line_no == 1) continue;  // header
      throw FormatError("csv line " + std::to_string(line_no) + ": expected x,y,z");
    }
    cloud.push_back(Point3(xyz[0], xyz[1], xyz[2]));
  }
  return cloud;
}

void write_cloud_csv(std::ostream& out, const PointCloud3& cloud) {
  out << "x,y,z\n" << std::setprecision(17);
  for (const auto& p : cloud) out << p.x() << ',' << p.y() << ',' << p.z() << '\n';
}

PointCloud3 read_cloud_ply(std::istream& in, const FrameId& frame) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "ply") {
    throw FormatError("ply: missing magic line");
  }
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::string> vertex_props;
  // Number of property values on each line of elements declared before 'vertex'.
  std::vector<std::size_t> elements_before;  // element sizes (count of lines)
  while (std::getline(in, line)) {
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields[0] == "format") {
      if (fields.size() < 2 || fields[1] != "ascii") {
        throw FormatError("ply: only ascii format is supported");
      }
    } else if (fields[0] == "element") {
      if (fields.size() < 3) throw FormatError("ply: malformed element line");
      std::size_t count = 0;
      std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), count);
      in_vertex = fields[1] == "vertex";
      if (in_vertex) {
        vertex_count = count;
        seen_vertex = true;
      } else if (!seen_vertex) {
        elements_before.push_back(count);
      }
    } else if (fields[0] == "property") {
      if (in_vertex) {
        if (fields.size() < 3 || fields[1] == "list") {
          throw FormatError("ply: unsupported vertex property");
        }
        vertex_props.emplace_back(fields.back());
      }
    } else if (fields[0] == "end_header") {
      break;
    }
  }
  if (!seen_vertex) throw FormatError("ply: no vertex element");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < vertex_props.size(); ++i) {
    if (vertex_props[i] == "x") ix = static_cast<int>(i);
    if (vertex_props[i] == "y") iy = static_cast<int>(i);
    if (vertex_props[i] == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw FormatError("ply: vertex lacks x/y/z properties");

  for (const std::size_t count : elements_before) {
    for (std::size_t i = 0; i < count; ++i) std::getline(in, line);
  }
  PointCloud3 cloud(frame);
  cloud.reserve(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) throw FormatError("ply: truncated vertex list");
    const auto fields = split_ws(line);
    double x, y, z;
    if (fields.size() < vertex_props.size() || !parse_double(fields[ix], x) ||
        !parse_double(fields[iy], y) || !parse_double(fields[iz], z)) {
      throw FormatError("ply: malformed vertex " + std::to_string(i));
    }
    cloud.push_back(Point3(x, y, z));
  }
  return cloud;
}

void write_cloud_ply(std::ostream& out, const PointCloud3& cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n"
      << std::setprecision(17);
  for (const auto& p : cloud) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

PointCloud3 load_cloud(const std::filesystem::path& path, const FrameId& frame) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  if (ends_with_ci(path.string(), ".ply")) return read_cloud_ply(in, frame);
  if (ends_with_ci(path.string(), ".csv")) return read_cloud_csv(in, frame);
  throw FormatError("unsupported cloud extension: " + path.string());
}

void save_cloud(const std::filesystem::path& path, const PointCloud3& cloud) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  if (ends_with_ci(path.string(), ".ply")) {
    write_cloud_ply(out, cloud);
  } else {
    write_cloud_csv(out, cloud);
  }
}

}  // namespace curbloc
