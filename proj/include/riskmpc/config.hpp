#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "riskmpc/mpc.hpp"
#include "riskmpc/risk_core.hpp"
#include "riskmpc/risk_map.hpp"
#include "riskmpc/sim.hpp"

namespace riskmpc {

/// Rejected configuration. `key` is the dotted path of the offending entry
/// (e.g. "risk.alpha"); empty for syntax errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct VehicleSpec {
  int id = 0;
  double x = 0.0;
  std::optional<int> lane;   // lane index, 0 = lowest y
  std::optional<double> y;   // explicit lateral position, overrides lane
  double v = 0.0;
  double heading = 0.0;
  VehicleGeometry geometry{3.0, 5.0, 2.0};
  IdmParams idm;  // v0 defaults to v
  std::optional<DiagCov> pos_cov;
  std::optional<DiagCov> vel_cov;
};

struct SceneSpec {
  int lane_count = 3;
  double lane_width = 4.0;
  double road_length = 1000.0;
  VehicleSpec ego{0, 50.0, 1, std::nullopt, 15.0, 0.0, {4.0, 5.0, 2.0}, {}, {}, {}};
  std::vector<VehicleSpec> vehicles;
  /// When set, simulate and batch re-draw neighbor placement from the seed.
  bool randomize = false;
  PlacementConfig placement;
};

struct RiskMapNeighbor {
  Vec2 pos;
  Vec2 vel;
  VehicleGeometry geometry{3.0, 5.0, 2.0};
};

struct RiskMapSpec {
  GridSpec grid;
  Vec2 ego_velocity{15.0, 0.0};
  std::vector<RiskMapNeighbor> neighbors;
};

struct RunConfig {
  std::uint64_t seed = 0;
  RiskParams risk;
  MpcConfig mpc;
  SimConfig sim;
  SceneSpec scene;
  RiskMapSpec riskmap;
  /// mpc.lane_centers / y bounds follow the scene unless given explicitly.
  bool lane_centers_explicit = false;
  bool y_bounds_explicit = false;
};

/// Parses, applies defaults and validates. Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration; parse_config(to_json(c).dump()) yields c.
nlohmann::json to_json(const RunConfig& c);

/// Writes the resolved echo next to an output file: "<output>.config.json".
std::filesystem::path write_config_echo(const RunConfig& c, const std::filesystem::path& output);

/// Scene as configured (no randomization).
HighwayScene build_scene(const RunConfig& c);

/// Scene for a run with the given seed; randomized when scene.randomize.
HighwayScene scene_for_seed(const RunConfig& c, std::uint64_t seed);

/// MPC configuration with ego geometry taken from the scene ego.
MpcConfig effective_mpc(const RunConfig& c);

}  // namespace riskmpc
