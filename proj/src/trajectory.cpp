#include "riskmpc/trajectory.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "riskmpc/text_format.hpp"

namespace riskmpc {

const TrajectoryRecord* TrajectoryStream::at_frame(long long frame) const {
  auto it = std::lower_bound(records.begin(), records.end(), frame,
                             [](const TrajectoryRecord& r, long long f) { return r.frame < f; });
  if (it == records.end() || it->frame != frame) return nullptr;
  return &*it;
}

std::vector<TrajectoryStream> load_trajectories(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open dataset: " + path.string());

  static constexpr std::array<const char*, 8> kColumns{
      "vehicle_id", "frame", "x", "y", "vx", "vy", "length", "width"};
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  std::array<std::size_t, 8> col{};
  for (std::size_t k = 0; k < kColumns.size(); ++k) {
    auto it = std::find(header.begin(), header.end(), kColumns[k]);
    if (it == header.end()) {
      throw std::runtime_error(path.string() + ": missing column '" + kColumns[k] + "'");
    }
    col[k] = static_cast<std::size_t>(it - header.begin());
  }

  std::map<int, TrajectoryStream> streams;
  long long row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " fields");
    }
    TrajectoryRecord r;
    try {
      r.vehicle_id = static_cast<int>(parse_int(fields[col[0]]));
      r.frame = parse_int(fields[col[1]]);
      r.x = parse_double(fields[col[2]]);
      r.y = parse_double(fields[col[3]]);
      r.vx = parse_double(fields[col[4]]);
      r.vy = parse_double(fields[col[5]]);
      r.length = parse_double(fields[col[6]]);
      r.width = parse_double(fields[col[7]]);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
    if (!(r.length > 0 && r.width > 0)) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row) +
                               ": length and width must be > 0");
    }
    TrajectoryStream& s = streams[r.vehicle_id];
    if (!s.records.empty() && r.frame <= s.records.back().frame) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row) + ": frame " +
                               std::to_string(r.frame) + " of vehicle " +
                               std::to_string(r.vehicle_id) + " is not increasing");
    }
    if (s.records.empty()) {
      s.vehicle_id = r.vehicle_id;
      s.geometry = {kWheelbaseFraction * r.length, r.length, r.width};
    }
    s.records.push_back(r);
  }

  std::vector<TrajectoryStream> out;
  out.reserve(streams.size());
  for (auto& [id, s] : streams) out.push_back(std::move(s));
  return out;
}

}  // namespace riskmpc
