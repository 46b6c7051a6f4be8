#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskmpc/sim.hpp"

namespace riskmpc {

/// Trace CSV: "step,time,vehicle_id,x,y,vx,vy,heading,accel,steer,risk",
/// one row per active vehicle per step, risk only on ego rows. Terminal
/// metrics follow as "# key=value" lines; `timestamp`, when given, adds a
/// "# generated=..." line.
void write_trace(const SimTrace& trace, int ego_id, const std::filesystem::path& path,
                 const std::optional<std::string>& timestamp = std::nullopt);

struct TraceRow {
  int step = 0;
  double time = 0.0;
  int vehicle_id = 0;
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0, heading = 0.0;
  double accel = 0.0, steer = 0.0;
  std::optional<double> risk;
};

struct ParsedTrace {
  std::vector<TraceRow> rows;
  std::map<std::string, std::string> metrics;
};

ParsedTrace read_trace(const std::filesystem::path& path);

/// Summary CSV: "trial,seed,avg_speed,long_dist,min_dist,collision" plus
/// mean/min/max comment lines.
void write_batch_summary(const BatchResult& batch, const std::filesystem::path& path,
                         const std::optional<std::string>& timestamp = std::nullopt);

/// UTC time in ISO 8601.
std::string utc_timestamp();

}  // namespace riskmpc
