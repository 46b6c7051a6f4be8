#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "riskmpc/mpc.hpp"
#include "riskmpc/risk_core.hpp"
#include "riskmpc/trajectory.hpp"
#include "riskmpc/vehicle_models.hpp"

namespace riskmpc {

enum class Behavior { mpc_ego, idm, replay };

struct SceneVehicle {
  int id = 0;
  VehicleGeometry geometry;
  Behavior behavior = Behavior::idm;
  EgoState state;
  /// Velocity in the world frame; for the ego it is heading-aligned.
  Vec2 velocity;
  ControlInput control;
  IdmParams idm;
  /// Index into HighwayScene::replay_streams for replay vehicles.
  int stream = -1;
  /// Replay vehicles are inactive outside their recorded frames.
  bool active = true;
  /// Per-vehicle observation covariances; SimConfig defaults when unset.
  std::optional<DiagCov> pos_cov;
  std::optional<DiagCov> vel_cov;
};

/// Receding-horizon memory of the ego controller.
struct ControllerMemory {
  std::vector<ControlInput> last_plan;
};

struct HighwayScene {
  int lane_count = 3;
  double lane_width = 4.0;
  double road_length = 1000.0;
  std::vector<SceneVehicle> vehicles;
  std::vector<TrajectoryStream> replay_streams;
  long long frame = 0;
  ControllerMemory memory;

  std::vector<double> lane_centers() const;
  const SceneVehicle& ego() const;
  SceneVehicle& ego();
};

/// Throws std::invalid_argument unless there is exactly one mpc_ego, at
/// least one lane, and every active vehicle lies on the road.
void validate(const HighwayScene& scene);

struct SimConfig {
  double dt = 0.1;
  int steps = 300;
  double sensing_range = 60.0;
  DiagCov neighbor_pos_cov{0.1, 0.1};
  DiagCov neighbor_vel_cov{0.1, 0.1};
  std::uint64_t rng_seed = 0;
  bool observation_noise_on = false;
  /// Per-pair ellipse from the vehicle footprints; otherwise RiskParams
  /// tau/d_safe are used as given.
  bool geometry_sizing = true;
  PairSizing sizing;
  /// Extra lateral clearance when IDM vehicles look for a same-lane leader.
  double idm_lateral_margin = 0.5;
};

void validate(const SimConfig& cfg);

using Rng = std::mt19937_64;

struct ObservedNeighbor {
  int vehicle_id = 0;
  NoisyAgentState agent;
  VehicleGeometry geometry;
};

/// Neighbors of vehicle `ego_id` within the sensing range, as the ego sees
/// them. Means are perturbed by Gaussian draws when observation noise is on.
std::vector<ObservedNeighbor> observe(const HighwayScene& scene, int ego_id,
                                      const SimConfig& cfg, Rng& rng);

/// Risk parameters for each observed neighbor.
std::vector<RiskParams> neighbor_params(const VehicleGeometry& ego,
                                        std::span<const ObservedNeighbor> neighbors,
                                        const RiskParams& base, const SimConfig& cfg);

struct VehicleSnapshot {
  int id = 0;
  EgoState state;
  Vec2 velocity;
  ControlInput control;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;
  std::vector<VehicleSnapshot> vehicles;  // active vehicles before the step
  std::optional<double> ego_risk;         // aggregated risk the ego perceived
  double min_distance = 0.0;              // ego to nearest active vehicle
  MpcStatus mpc_status = MpcStatus::optimal;
  bool certified = true;                  // post-hoc check of the MPC plan
  bool collision = false;
};

/// Advances the scene by one dt and returns the record of the state it
/// started from together with the controls applied.
StepRecord step(HighwayScene& scene, const SimConfig& cfg, const MpcConfig& mpc_cfg,
                const RiskParams& risk, Rng& rng);

struct EpisodeMetrics {
  double avg_speed = 0.0;
  double long_dist = 0.0;
  double min_dist = 0.0;
  bool collision = false;
  int optimal_steps = 0;
  int max_iter_steps = 0;
  int infeasible_steps = 0;
  int uncertified_optimal = 0;
  /// (1 - alpha)^steps.
  double safety_bound = 1.0;
};

struct SimTrace {
  std::vector<StepRecord> records;
  EpisodeMetrics metrics;
};

/// Runs cfg.steps steps from a copy of the scene with rng seeded by
/// cfg.rng_seed.
SimTrace run_episode(const HighwayScene& scene, const SimConfig& cfg,
                     const MpcConfig& mpc_cfg, const RiskParams& risk);

/// Randomized initial conditions for batch trials.
struct PlacementConfig {
  double x_min = 0.0;    // longitudinal window for neighbors
  double x_max = 250.0;
  double speed_min = 10.0;
  double speed_max = 15.0;
  double min_gap = 20.0;
  int max_attempts = 10000;
};

void validate(const PlacementConfig& p);

/// Re-draws neighbor lanes, positions and speeds (IDM desired speed set to
/// the drawn speed). The ego is put in the center lane at v_ref. Throws
/// std::runtime_error when no overlap-free placement is found.
HighwayScene randomize_scene(const HighwayScene& base, const PlacementConfig& placement,
                             double v_ref, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0, min = 0.0, max = 0.0;
};

struct BatchSummary {
  MetricSummary avg_speed, long_dist, min_dist;
  int collisions = 0;
};

struct BatchTrial {
  std::uint64_t seed = 0;
  SimTrace trace;
};

struct BatchResult {
  std::vector<BatchTrial> trials;
  BatchSummary summary;
};

/// Trials run in parallel, one RNG stream per seed.
BatchResult run_batch(const HighwayScene& base, const SimConfig& cfg, const MpcConfig& mpc_cfg,
                      const RiskParams& risk, const PlacementConfig& placement,
                      std::span<const std::uint64_t> seeds);

/// Sequential reference of run_batch.
BatchResult run_batch_serial(const HighwayScene& base, const SimConfig& cfg,
                             const MpcConfig& mpc_cfg, const RiskParams& risk,
                             const PlacementConfig& placement,
                             std::span<const std::uint64_t> seeds);

BatchSummary summarize(std::span<const BatchTrial> trials);

/// Scene for replaying a dataset with vehicle `ego_id` handed to the MPC.
/// Throws std::invalid_argument if the id is absent.
HighwayScene make_replay_scene(std::vector<TrajectoryStream> streams, int ego_id,
                               int lane_count, double lane_width, double road_length);

}  // namespace riskmpc
