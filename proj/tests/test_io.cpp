#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "riskmpc/cli.hpp"
#include "riskmpc/config.hpp"
#include "riskmpc/text_format.hpp"
#include "riskmpc/trace_io.hpp"
#include "riskmpc/trajectory.hpp"

using namespace riskmpc;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("riskmpc_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ConfigError config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return ConfigError("", "");
}

SimTrace two_step_trace() {
  SimTrace t;
  for (int k = 0; k < 2; ++k) {
    StepRecord r;
    r.step = k;
    r.time = 0.1 * k;
    r.vehicles.push_back({7, {1.5 * k + 0.123456789012, -0.25, 15.0, 0.01}, {15.0, 0.15}, {0.5, -0.02}});
    r.ego_risk = -12.5 - k;
    r.min_distance = std::numeric_limits<double>::infinity();
    t.records.push_back(r);
  }
  t.metrics.avg_speed = 15.0;
  t.metrics.long_dist = 1.5;
  t.metrics.min_dist = std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace

TEST(LoadConfig, SeedOnlyGetsDefaults) {
  const RunConfig c = parse_config(R"({"seed": 3})");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.risk.alpha, RiskParams{}.alpha);
  EXPECT_EQ(c.risk.gamma, RiskParams{}.gamma);
  EXPECT_EQ(c.mpc.horizon, 10);
  EXPECT_EQ(c.mpc.dt, 0.1);
  EXPECT_EQ(c.mpc.p_s, 0.25);
  EXPECT_EQ(c.mpc.risk_tol, 1e-6);
  EXPECT_EQ(c.mpc.weights.w_v, 1.0);
  EXPECT_EQ(c.mpc.weights.w_dsteer, 2.0);
  EXPECT_EQ(c.sim.steps, 300);
  EXPECT_EQ(c.sim.neighbor_pos_cov.xx, 0.1);
  EXPECT_EQ(c.riskmap.grid.nx, 481);
  EXPECT_EQ(c.scene.lane_count, 3);
  EXPECT_EQ(c.mpc.lane_centers, build_scene(c).lane_centers());
}

TEST(LoadConfig, AlphaOutOfRangeNamesKey) {
  const ConfigError e = config_error(R"({"risk": {"alpha": 1.5}})");
  EXPECT_EQ(e.key(), "risk.alpha");
  EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
}

TEST(LoadConfig, UnknownKeyRejected) {
  EXPECT_EQ(config_error(R"({"risk": {"alpah": 0.1}})").key(), "risk.alpah");
  EXPECT_EQ(config_error(R"({"sedd": 1})").key(), "sedd");
}

TEST(LoadConfig, WrongTypeNamesKey) {
  EXPECT_EQ(config_error(R"({"mpc": {"horizon": "ten"}})").key(), "mpc.horizon");
}

TEST(LoadConfig, SyntaxErrorReportsPosition) {
  const ConfigError e = config_error("{\n  \"seed\": ,\n}");
  EXPECT_TRUE(e.key().empty());
  EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
}

TEST(LoadConfig, EchoRoundTrips) {
  for (const char* name : {"canonical.json", "riskmap_slow_leader.json", "replay/replay.json", "scenarios/merge.json"}) {
    const RunConfig c = load_config(fs::path(RISKMPC_DATA_DIR) / name);
    const nlohmann::json j = to_json(c);
    EXPECT_EQ(to_json(parse_config(j.dump())), j) << name;
  }
  TempDir dir;
  const RunConfig c = load_config(RISKMPC_DATA_DIR "/canonical.json");
  const fs::path echo = write_config_echo(c, dir / "trace.csv");
  EXPECT_EQ(echo, dir / "trace.csv.config.json");
  EXPECT_EQ(to_json(load_config(echo)), to_json(c));
}

TEST(LoadConfig, MissingFileIsError) {
  EXPECT_ANY_THROW(load_config("/nonexistent/riskmpc.json"));
}

TEST(LoadTrajectories, SingleVehicle) {
  TempDir dir;
  write_text(dir / "t.csv",
             "vehicle_id,frame,x,y,vx,vy,length,width\n"
             "3,10,0,0,15,0,5,2\n3,11,1.5,0,15,0,5,2\n3,12,3,0.1,15,1,5,2\n");
  const auto s = load_trajectories(dir / "t.csv");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].vehicle_id, 3);
  ASSERT_EQ(s[0].records.size(), 3u);
  EXPECT_EQ(s[0].records[2].y, 0.1);
  EXPECT_DOUBLE_EQ(s[0].geometry.wheelbase, 0.6 * 5.0);
  EXPECT_EQ(s[0].geometry.body_width, 2.0);
  EXPECT_EQ(s[0].at_frame(11)->x, 1.5);
  EXPECT_EQ(s[0].at_frame(13), nullptr);
}

TEST(LoadTrajectories, InterleavedVehiclesSeparated) {
  TempDir dir;
  write_text(dir / "t.csv",
             "frame,vehicle_id,x,y,vx,vy,length,width\n"
             "1,9,0,4,10,0,4,2\n1,2,5,0,12,0,5,2\n2,9,1,4,10,0,4,2\n2,2,6.2,0,12,0,5,2\n3,9,2,4,10,0,4,2\n");
  const auto s = load_trajectories(dir / "t.csv");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].vehicle_id, 2);
  EXPECT_EQ(s[0].records.size(), 2u);
  EXPECT_EQ(s[1].vehicle_id, 9);
  EXPECT_EQ(s[1].records.size(), 3u);
  EXPECT_EQ(s[0].records[1].x, 6.2);
}

TEST(LoadTrajectories, ErrorsCiteRow) {
  TempDir dir;
  auto message = [&](const std::string& text) {
    write_text(dir / "bad.csv", text);
    try {
      load_trajectories(dir / "bad.csv");
    } catch (const std::runtime_error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const std::string header = "vehicle_id,frame,x,y,vx,vy,length,width\n";
  EXPECT_NE(message(header + "1,5,0,0,1,0,4,2\n1,5,1,0,1,0,4,2\n").find("row 3"), std::string::npos);
  EXPECT_NE(message(header + "1,5,0,0,1,0,4,2\n1,4,1,0,1,0,4,2\n").find("row 3"), std::string::npos);
  EXPECT_NE(message(header + "1,5,0,zero,1,0,4,2\n").find("row 2"), std::string::npos);
  EXPECT_NE(message("vehicle_id,frame,x,y,vx,vy,length\n1,5,0,0,1,0,4\n").find("width"), std::string::npos);
  EXPECT_NE(message(header + "1,5,0,0,1,0,0,2\n").find("row 2"), std::string::npos);
}

TEST(LoadTrajectories, ShippedSample) {
  const auto s = load_trajectories(RISKMPC_DATA_DIR "/replay/sample_trajectories.csv");
  ASSERT_EQ(s.size(), 6u);
  for (const auto& v : s) EXPECT_EQ(v.records.size(), 350u);
}

TEST(WriteTrace, TwoStepsRoundTrip) {
  TempDir dir;
  const SimTrace t = two_step_trace();
  write_trace(t, 7, dir / "trace.csv");
  const std::string text = read_text(dir / "trace.csv");
  EXPECT_EQ(text.rfind("step,time,vehicle_id,x,y,vx,vy,heading,accel,steer,risk\n", 0), 0u);
  EXPECT_EQ(text.find("generated="), std::string::npos);
  const ParsedTrace p = read_trace(dir / "trace.csv");
  ASSERT_EQ(p.rows.size(), 2u);
  EXPECT_NEAR(p.rows[1].x, t.records[1].vehicles[0].state.x, 1e-9);
  EXPECT_NEAR(p.rows[1].y, -0.25, 1e-9);
  EXPECT_NEAR(*p.rows[0].risk, -12.5, 1e-9);
  EXPECT_EQ(p.metrics.at("min_dist"), "inf");
  EXPECT_EQ(p.metrics.at("avg_speed"), "15");

  write_trace(t, 7, dir / "stamped.csv", "2026-01-01T00:00:00Z");
  EXPECT_NE(read_text(dir / "stamped.csv").find("# generated=2026-01-01T00:00:00Z"), std::string::npos);
}

TEST(WriteTrace, RiskOnlyOnEgoRows) {
  TempDir dir;
  SimTrace t = two_step_trace();
  for (auto& r : t.records) r.vehicles.push_back({8, {20, 4, 12, 0}, {12, 0}, {0.3, 0}});
  write_trace(t, 7, dir / "trace.csv");
  const ParsedTrace p = read_trace(dir / "trace.csv");
  ASSERT_EQ(p.rows.size(), 4u);
  for (const auto& r : p.rows) EXPECT_EQ(r.risk.has_value(), r.vehicle_id == 7);
}

TEST(WriteTrace, EmptyTraceHasHeaderAndMetricsOnly) {
  TempDir dir;
  write_trace(SimTrace{}, 0, dir / "empty.csv");
  std::ifstream in(dir / "empty.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,time,vehicle_id,x,y,vx,vy,heading,accel,steer,risk");
  int comments = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.front(), '#');
    ++comments;
  }
  EXPECT_GT(comments, 0);
  EXPECT_TRUE(read_trace(dir / "empty.csv").rows.empty());
}

TEST(WriteTrace, UnwritablePathNamed) {
  try {
    write_trace(SimTrace{}, 0, "/nonexistent_riskmpc/t.csv");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_riskmpc/t.csv"), std::string::npos);
  }
}

TEST(WriteBatchSummary, Header) {
  TempDir dir;
  BatchResult b;
  b.trials.resize(2);
  b.trials[0].seed = 4;
  b.trials[1].seed = 9;
  b.summary = summarize(b.trials);
  write_batch_summary(b, dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "trial,seed,avg_speed,long_dist,min_dist,collision");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("0,4,", 0), 0u);
}

TEST(TextFormat, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 15.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(15.0), "15");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
  EXPECT_THROW(parse_double(""), std::invalid_argument);
  EXPECT_EQ(split_csv_line("a,,b").size(), 3u);
}

TEST(Cli, MissingConfigIsUsageError) {
  ::testing::internal::CaptureStderr();
  ::testing::internal::CaptureStdout();
  const int rc = cli_main({"simulate", "--log", "x.csv"});
  const std::string out = ::testing::internal::GetCapturedStdout() + ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, 1);
  EXPECT_NE(out.find("--config"), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  ::testing::internal::CaptureStderr();
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(cli_main({"fly"}), 1);
  ::testing::internal::GetCapturedStdout();
  ::testing::internal::GetCapturedStderr();
}

TEST(Cli, ValidationErrorExitsOne) {
  TempDir dir;
  write_text(dir / "bad.json", R"({"risk": {"alpha": 1.5}})");
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(cli_main({"simulate", "--config", (dir / "bad.json").string(), "--log", (dir / "t.csv").string()}), 1);
  EXPECT_NE(::testing::internal::GetCapturedStderr().find("alpha"), std::string::npos);
}

TEST(Cli, ReplayAbsentEgoNamesId) {
  TempDir dir;
  ::testing::internal::CaptureStderr();
  const int rc = cli_main({"replay", "--config", RISKMPC_DATA_DIR "/replay/replay.json", "--dataset",
                           RISKMPC_DATA_DIR "/replay/sample_trajectories.csv", "--ego-id", "42", "--log",
                           (dir / "t.csv").string()});
  EXPECT_EQ(rc, 1);
  EXPECT_NE(::testing::internal::GetCapturedStderr().find("42"), std::string::npos);
}

TEST(Cli, RiskmapWritesOutputs) {
  TempDir dir;
  ::testing::internal::CaptureStdout();
  const int rc = cli_main({"--no-timestamp", "riskmap", "--config", RISKMPC_DATA_DIR "/riskmap_equal_speed.json", "--out",
                           (dir / "g.csv").string(), "--pgm", (dir / "g.pgm").string(), "--contour",
                           (dir / "k.csv").string()});
  ::testing::internal::GetCapturedStdout();
  EXPECT_EQ(rc, 0);
  for (const char* f : {"g.csv", "g.pgm", "k.csv", "g.csv.config.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  const RiskMapGrid g = read_grid_csv(dir / "g.csv");
  EXPECT_EQ(g.spec.nx, 481);
  EXPECT_EQ(g.spec.ny, 161);
  EXPECT_FALSE(read_text(dir / "k.csv").empty());
}

TEST(Cli, SimulateIsByteReproducible) {
  TempDir dir;
  auto run = [&](const std::string& log) {
    ::testing::internal::CaptureStdout();
    const int rc = cli_main({"--no-timestamp", "simulate", "--config", RISKMPC_DATA_DIR "/canonical.json",
                             "--steps", "20", "--seed", "5", "--log", (dir / log).string()});
    ::testing::internal::GetCapturedStdout();
    return rc;
  };
  ASSERT_EQ(run("a.csv"), 0);
  ASSERT_EQ(run("b.csv"), 0);
  EXPECT_EQ(read_text(dir / "a.csv"), read_text(dir / "b.csv"));
  EXPECT_EQ(read_trace(dir / "a.csv").rows.size() % 20, 0u);
}
