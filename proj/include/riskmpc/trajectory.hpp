#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "riskmpc/vehicle_models.hpp"

namespace riskmpc {

/// One row of a replay dataset (SI units, x longitudinal).
struct TrajectoryRecord {
  int vehicle_id = 0;
  long long frame = 0;
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  double length = 0.0, width = 0.0;
};

/// All rows of one vehicle, frames strictly increasing.
struct TrajectoryStream {
  int vehicle_id = 0;
  VehicleGeometry geometry;
  std::vector<TrajectoryRecord> records;

  const TrajectoryRecord* at_frame(long long frame) const;
  long long first_frame() const { return records.front().frame; }
  long long last_frame() const { return records.back().frame; }
};

/// Wheelbase convention for replayed vehicles.
inline constexpr double kWheelbaseFraction = 0.6;

/// Parses "vehicle_id,frame,x,y,vx,vy,length,width" (columns in any order).
/// Streams come back sorted by vehicle id. Throws std::runtime_error citing
/// the row number on a missing column, non-numeric field or non-increasing
/// frame.
std::vector<TrajectoryStream> load_trajectories(const std::filesystem::path& path);

}  // namespace riskmpc
