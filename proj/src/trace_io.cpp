#include "riskmpc/trace_io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "riskmpc/text_format.hpp"

namespace riskmpc {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  return f;
}

void finish(std::ofstream& f, const std::filesystem::path& path) {
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_trace(const SimTrace& trace, int ego_id, const std::filesystem::path& path,
                 const std::optional<std::string>& timestamp) {
  std::ofstream f = open_out(path);
  f << "step,time,vehicle_id,x,y,vx,vy,heading,accel,steer,risk\n";
  for (const StepRecord& r : trace.records) {
    for (const VehicleSnapshot& v : r.vehicles) {
      f << r.step << ',' << format_double(r.time) << ',' << v.id << ',' << format_double(v.state.x)
        << ',' << format_double(v.state.y) << ',' << format_double(v.velocity.x) << ','
        << format_double(v.velocity.y) << ',' << format_double(v.state.phi) << ','
        << format_double(v.control.accel) << ',' << format_double(v.control.steer) << ',';
      if (v.id == ego_id && r.ego_risk) f << format_double(*r.ego_risk);
      f << '\n';
    }
  }
  const EpisodeMetrics& m = trace.metrics;
  f << "# avg_speed=" << format_double(m.avg_speed) << '\n'
    << "# long_dist=" << format_double(m.long_dist) << '\n'
    << "# min_dist=" << format_double(m.min_dist) << '\n'
    << "# collision=" << (m.collision ? 1 : 0) << '\n'
    << "# optimal_steps=" << m.optimal_steps << '\n'
    << "# max_iter_steps=" << m.max_iter_steps << '\n'
    << "# infeasible_steps=" << m.infeasible_steps << '\n'
    << "# uncertified_optimal=" << m.uncertified_optimal << '\n'
    << "# safety_bound=" << format_double(m.safety_bound) << '\n';
  if (timestamp) f << "# generated=" << *timestamp << '\n';
  finish(f, path);
}

ParsedTrace read_trace(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trace: " + path.string());
  ParsedTrace out;
  std::string line;
  if (!std::getline(f, line) || line != "step,time,vehicle_id,x,y,vx,vy,heading,accel,steer,risk") {
    throw std::runtime_error(path.string() + ": not a trace file");
  }
  long long row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        const std::size_t start = line.find_first_not_of(" #");
        out.metrics[line.substr(start, eq - start)] = line.substr(eq + 1);
      }
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != 11) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row) + ": expected 11 fields");
    }
    try {
      TraceRow r;
      r.step = static_cast<int>(parse_int(fields[0]));
      r.time = parse_double(fields[1]);
      r.vehicle_id = static_cast<int>(parse_int(fields[2]));
      r.x = parse_double(fields[3]);
      r.y = parse_double(fields[4]);
      r.vx = parse_double(fields[5]);
      r.vy = parse_double(fields[6]);
      r.heading = parse_double(fields[7]);
      r.accel = parse_double(fields[8]);
      r.steer = parse_double(fields[9]);
      if (!fields[10].empty()) r.risk = parse_double(fields[10]);
      out.rows.push_back(r);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

void write_batch_summary(const BatchResult& batch, const std::filesystem::path& path,
                         const std::optional<std::string>& timestamp) {
  std::ofstream f = open_out(path);
  f << "trial,seed,avg_speed,long_dist,min_dist,collision\n";
  for (std::size_t k = 0; k < batch.trials.size(); ++k) {
    const BatchTrial& t = batch.trials[k];
    const EpisodeMetrics& m = t.trace.metrics;
    f << k << ',' << t.seed << ',' << format_double(m.avg_speed) << ','
      << format_double(m.long_dist) << ',' << format_double(m.min_dist) << ','
      << (m.collision ? 1 : 0) << '\n';
  }
  const BatchSummary& s = batch.summary;
  auto emit = [&](const char* name, const MetricSummary& ms) {
    f << "# " << name << "_mean=" << format_double(ms.mean) << '\n'
      << "# " << name << "_min=" << format_double(ms.min) << '\n'
      << "# " << name << "_max=" << format_double(ms.max) << '\n';
  };
  emit("avg_speed", s.avg_speed);
  emit("long_dist", s.long_dist);
  emit("min_dist", s.min_dist);
  f << "# collisions=" << s.collisions << '\n';
  if (timestamp) f << "# generated=" << *timestamp << '\n';
  finish(f, path);
}

}  // namespace riskmpc
