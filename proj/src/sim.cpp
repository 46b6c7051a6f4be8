#include "riskmpc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>

namespace riskmpc {

std::vector<double> HighwayScene::lane_centers() const {
  std::vector<double> c(static_cast<std::size_t>(lane_count));
  for (int k = 0; k < lane_count; ++k) c[k] = (k - 0.5 * (lane_count - 1)) * lane_width;
  return c;
}

const SceneVehicle& HighwayScene::ego() const {
  for (const SceneVehicle& v : vehicles) {
    if (v.behavior == Behavior::mpc_ego) return v;
  }
  throw std::invalid_argument("scene has no mpc_ego vehicle");
}

SceneVehicle& HighwayScene::ego() {
  return const_cast<SceneVehicle&>(std::as_const(*this).ego());
}

void validate(const HighwayScene& scene) {
  if (scene.lane_count < 1) throw std::invalid_argument("scene: lane_count must be >= 1");
  if (!(scene.lane_width > 0)) throw std::invalid_argument("scene: lane_width must be > 0");
  if (!(scene.road_length > 0)) throw std::invalid_argument("scene: road_length must be > 0");
  const auto egos = std::count_if(scene.vehicles.begin(), scene.vehicles.end(),
                                  [](const SceneVehicle& v) { return v.behavior == Behavior::mpc_ego; });
  if (egos != 1) {
    throw std::invalid_argument("scene: exactly one mpc_ego required, found " + std::to_string(egos));
  }
  const double half_width = 0.5 * scene.lane_count * scene.lane_width;
  for (const SceneVehicle& v : scene.vehicles) {
    validate(v.geometry);
    if (!v.active) continue;
    if (v.state.x < 0 || v.state.x > scene.road_length || std::abs(v.state.y) > half_width) {
      throw std::invalid_argument("scene: vehicle " + std::to_string(v.id) + " starts off the road");
    }
    if (v.state.v < 0) throw std::invalid_argument("scene: negative speed for vehicle " + std::to_string(v.id));
    if (v.behavior == Behavior::idm) validate(v.idm);
    if (v.behavior == Behavior::replay &&
        (v.stream < 0 || v.stream >= static_cast<int>(scene.replay_streams.size()))) {
      throw std::invalid_argument("scene: replay vehicle " + std::to_string(v.id) + " has no stream");
    }
  }
}

void validate(const SimConfig& cfg) {
  if (!(cfg.dt > 0)) throw std::invalid_argument("sim: dt must be > 0");
  if (cfg.steps < 1) throw std::invalid_argument("sim: steps must be >= 1");
  if (!(cfg.sensing_range > 0)) throw std::invalid_argument("sim: sensing_range must be > 0");
  for (double c : {cfg.neighbor_pos_cov.xx, cfg.neighbor_pos_cov.yy, cfg.neighbor_vel_cov.xx,
                   cfg.neighbor_vel_cov.yy}) {
    if (!(c >= 0)) throw std::invalid_argument("sim: covariances must be >= 0");
  }
}

void validate(const PlacementConfig& p) {
  if (!(p.x_max > p.x_min)) throw std::invalid_argument("placement: x_max must exceed x_min");
  if (!(p.speed_min >= 0 && p.speed_max >= p.speed_min))
    throw std::invalid_argument("placement: need 0 <= speed_min <= speed_max");
  if (!(p.min_gap > 0)) throw std::invalid_argument("placement: min_gap must be > 0");
}

std::vector<ObservedNeighbor> observe(const HighwayScene& scene, int ego_id,
                                      const SimConfig& cfg, Rng& rng) {
  const SceneVehicle* ego = nullptr;
  for (const SceneVehicle& v : scene.vehicles) {
    if (v.id == ego_id) ego = &v;
  }
  if (!ego) throw std::invalid_argument("observe: no vehicle with id " + std::to_string(ego_id));

  std::vector<ObservedNeighbor> out;
  std::normal_distribution<double> unit(0.0, 1.0);
  for (const SceneVehicle& v : scene.vehicles) {
    if (v.id == ego_id || !v.active) continue;
    const double dist = std::hypot(v.state.x - ego->state.x, v.state.y - ego->state.y);
    if (dist > cfg.sensing_range) continue;
    ObservedNeighbor o{v.id, {}, v.geometry};
    o.agent.pos_cov = v.pos_cov.value_or(cfg.neighbor_pos_cov);
    o.agent.vel_cov = v.vel_cov.value_or(cfg.neighbor_vel_cov);
    o.agent.pos_mean = {v.state.x, v.state.y};
    o.agent.vel_mean = v.velocity;
    if (cfg.observation_noise_on) {
      o.agent.pos_mean.x += std::sqrt(o.agent.pos_cov.xx) * unit(rng);
      o.agent.pos_mean.y += std::sqrt(o.agent.pos_cov.yy) * unit(rng);
      o.agent.vel_mean.x += std::sqrt(o.agent.vel_cov.xx) * unit(rng);
      o.agent.vel_mean.y += std::sqrt(o.agent.vel_cov.yy) * unit(rng);
    }
    out.push_back(o);
  }
  return out;
}

std::vector<RiskParams> neighbor_params(const VehicleGeometry& ego,
                                        std::span<const ObservedNeighbor> neighbors,
                                        const RiskParams& base, const SimConfig& cfg) {
  std::vector<RiskParams> out;
  out.reserve(neighbors.size());
  for (const ObservedNeighbor& n : neighbors) {
    out.push_back(cfg.geometry_sizing ? pair_params(base, ego, n.geometry, cfg.sizing) : base);
  }
  return out;
}

namespace {

void set_from_record(SceneVehicle& v, const TrajectoryRecord& r) {
  v.state = {r.x, r.y, std::hypot(r.vx, r.vy), std::atan2(r.vy, r.vx)};
  v.velocity = {r.vx, r.vy};
}

Vec2 heading_velocity(const EgoState& s) { return {s.v * std::cos(s.phi), s.v * std::sin(s.phi)}; }

RiskParams truth_params(const SceneVehicle& a, const SceneVehicle& b, const RiskParams& base,
                        const SimConfig& cfg) {
  return cfg.geometry_sizing ? pair_params(base, a.geometry, b.geometry, cfg.sizing) : base;
}

struct Geometry {
  double min_distance;
  bool collision;
};

// Ego distance to its nearest active vehicle and the pairwise ellipse check
// over all active vehicles, on true states.
Geometry inspect(const HighwayScene& scene, const RiskParams& base, const SimConfig& cfg) {
  Geometry g{std::numeric_limits<double>::infinity(), false};
  const auto& vs = scene.vehicles;
  for (std::size_t a = 0; a < vs.size(); ++a) {
    if (!vs[a].active) continue;
    for (std::size_t b = a + 1; b < vs.size(); ++b) {
      if (!vs[b].active) continue;
      const bool with_ego = vs[a].behavior == Behavior::mpc_ego || vs[b].behavior == Behavior::mpc_ego;
      if (with_ego) {
        g.min_distance = std::min(g.min_distance, std::hypot(vs[a].state.x - vs[b].state.x,
                                                             vs[a].state.y - vs[b].state.y));
      }
      const double h = eval_h({vs[a].state.x, vs[a].state.y}, {vs[b].state.x, vs[b].state.y},
                              truth_params(vs[a], vs[b], base, cfg));
      if (h < 0.0) g.collision = true;
    }
  }
  return g;
}

double idm_for(const HighwayScene& scene, const SceneVehicle& me, const SimConfig& cfg) {
  const SceneVehicle* leader = nullptr;
  double best_dx = std::numeric_limits<double>::infinity();
  for (const SceneVehicle& o : scene.vehicles) {
    if (&o == &me || !o.active) continue;
    const double dx = o.state.x - me.state.x;
    const double lateral = 0.5 * (me.geometry.body_width + o.geometry.body_width) + cfg.idm_lateral_margin;
    if (dx <= 0.0 || std::abs(o.state.y - me.state.y) >= lateral) continue;
    if (dx < best_dx) {
      best_dx = dx;
      leader = &o;
    }
  }
  if (!leader) return idm_accel(me.state.v, std::nullopt, 0.0, me.idm);
  const double gap = best_dx - 0.5 * (me.geometry.body_length + leader->geometry.body_length);
  if (gap <= 0.0) return -me.idm.b_emergency;  // overlapping: brake hard
  return idm_accel(me.state.v, gap, me.state.v - leader->velocity.x, me.idm);
}

}  // namespace

StepRecord step(HighwayScene& scene, const SimConfig& cfg, const MpcConfig& base_mpc_cfg,
                const RiskParams& risk, Rng& rng) {
  StepRecord rec;
  rec.step = static_cast<int>(scene.frame);
  SceneVehicle& ego = scene.ego();
  MpcConfig mpc_cfg = base_mpc_cfg;
  mpc_cfg.ego_geometry = ego.geometry;

  // Ego controller.
  const auto seen = observe(scene, ego.id, cfg, rng);
  std::vector<NoisyAgentState> agents;
  agents.reserve(seen.size());
  for (const ObservedNeighbor& n : seen) agents.push_back(n.agent);
  const auto params = neighbor_params(ego.geometry, seen, risk, cfg);

  SolveOptions opts;
  opts.previous = ego.control;
  if (static_cast<int>(scene.memory.last_plan.size()) == mpc_cfg.horizon) {
    opts.warm_start.assign(scene.memory.last_plan.begin() + 1, scene.memory.last_plan.end());
    opts.warm_start.push_back(scene.memory.last_plan.back());
  }
  const MpcSolution sol = solve_mpc(ego.state, agents, params, mpc_cfg, opts);
  rec.mpc_status = sol.status;
  rec.ego_risk = sol.predicted_risks.front();
  if (sol.status == MpcStatus::optimal) {
    rec.certified = certify(ego.state, sol.controls, agents, params, mpc_cfg, opts.previous).ok;
  }
  scene.memory.last_plan =
      sol.status == MpcStatus::infeasible ? std::vector<ControlInput>{} : sol.controls;
  ego.control = sol.controls.front();

  // Human drivers react to true states.
  for (SceneVehicle& v : scene.vehicles) {
    if (v.behavior == Behavior::idm && v.active) v.control = {idm_for(scene, v, cfg), 0.0};
  }

  const Geometry geo = inspect(scene, risk, cfg);
  rec.min_distance = geo.min_distance;
  rec.collision = geo.collision;
  for (const SceneVehicle& v : scene.vehicles) {
    if (v.active) rec.vehicles.push_back({v.id, v.state, v.velocity, v.control});
  }

  // Advance.
  const long long next_frame = scene.frame + 1;
  for (SceneVehicle& v : scene.vehicles) {
    switch (v.behavior) {
      case Behavior::mpc_ego:
        v.state = bicycle_step(v.state, v.control, mpc_cfg.ego_geometry, cfg.dt);
        v.velocity = heading_velocity(v.state);
        break;
      case Behavior::idm:
        if (!v.active) break;
        v.state.x += v.state.v * cfg.dt;
        v.state.v = std::max(0.0, v.state.v + v.control.accel * cfg.dt);
        v.velocity = {v.state.v, 0.0};
        break;
      case Behavior::replay: {
        const TrajectoryRecord* r = scene.replay_streams[v.stream].at_frame(next_frame);
        v.active = r != nullptr;
        if (r) set_from_record(v, *r);
        break;
      }
    }
  }
  scene.frame = next_frame;
  rec.time = rec.step * cfg.dt;
  return rec;
}

SimTrace run_episode(const HighwayScene& initial, const SimConfig& cfg, const MpcConfig& mpc_cfg,
                     const RiskParams& risk) {
  validate(initial);
  validate(cfg);
  validate(mpc_cfg);
  validate(risk);

  HighwayScene scene = initial;
  Rng rng(cfg.rng_seed);
  const long long frame0 = scene.frame;
  const double x0 = scene.ego().state.x;

  SimTrace trace;
  trace.records.reserve(static_cast<std::size_t>(cfg.steps));
  EpisodeMetrics& m = trace.metrics;
  m.min_dist = std::numeric_limits<double>::infinity();
  double speed_sum = 0.0;
  for (int k = 0; k < cfg.steps; ++k) {
    const double v = scene.ego().state.v;
    StepRecord rec = step(scene, cfg, mpc_cfg, risk, rng);
    rec.step = static_cast<int>(rec.step - frame0);
    rec.time = rec.step * cfg.dt;
    speed_sum += v;
    m.min_dist = std::min(m.min_dist, rec.min_distance);
    m.collision = m.collision || rec.collision;
    switch (rec.mpc_status) {
      case MpcStatus::optimal: ++m.optimal_steps; break;
      case MpcStatus::max_iter: ++m.max_iter_steps; break;
      case MpcStatus::infeasible: ++m.infeasible_steps; break;
    }
    if (rec.mpc_status == MpcStatus::optimal && !rec.certified) ++m.uncertified_optimal;
    trace.records.push_back(std::move(rec));
  }
  const Geometry final_geo = inspect(scene, risk, cfg);
  m.min_dist = std::min(m.min_dist, final_geo.min_distance);
  m.collision = m.collision || final_geo.collision;
  m.avg_speed = speed_sum / cfg.steps;
  m.long_dist = scene.ego().state.x - x0;
  m.safety_bound = trajectory_safety_bound(risk.alpha, cfg.steps);
  return trace;
}

HighwayScene randomize_scene(const HighwayScene& base, const PlacementConfig& placement,
                             double v_ref, std::uint64_t seed) {
  validate(placement);
  HighwayScene scene = base;
  Rng rng(seed);
  const auto centers = scene.lane_centers();
  SceneVehicle& ego = scene.ego();
  ego.state = {ego.state.x, centers[(scene.lane_count - 1) / 2], v_ref, 0.0};
  ego.velocity = heading_velocity(ego.state);
  ego.control = {};
  scene.memory = {};

  std::uniform_int_distribution<int> lane_draw(0, scene.lane_count - 1);
  std::uniform_real_distribution<double> x_draw(placement.x_min, placement.x_max);
  std::uniform_real_distribution<double> v_draw(placement.speed_min, placement.speed_max);

  struct Placed {
    double x;
    int lane;
  };
  std::vector<Placed> placed;
  int attempts = 0;
  for (SceneVehicle& v : scene.vehicles) {
    if (v.behavior != Behavior::idm) continue;
    while (true) {
      if (++attempts > placement.max_attempts) {
        throw std::runtime_error("randomize_scene: no overlap-free placement with min_gap " +
                                 std::to_string(placement.min_gap) + " m");
      }
      const int lane = lane_draw(rng);
      const double x = x_draw(rng);
      if (x < 0.0 || x > scene.road_length) continue;
      bool ok = std::abs(x - ego.state.x) >= placement.min_gap;
      for (const Placed& p : placed) {
        if (p.lane == lane && std::abs(p.x - x) < placement.min_gap) ok = false;
      }
      if (!ok) continue;
      const double speed = v_draw(rng);
      v.state = {x, centers[lane], speed, 0.0};
      v.velocity = {speed, 0.0};
      v.control = {};
      v.idm.v0 = std::max(speed, 1e-3);
      placed.push_back({x, lane});
      break;
    }
  }
  return scene;
}

BatchSummary summarize(std::span<const BatchTrial> trials) {
  BatchSummary s;
  if (trials.empty()) return s;
  auto stat = [&](auto get) {
    MetricSummary m{0.0, std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
    for (const BatchTrial& t : trials) {
      const double v = get(t.trace.metrics);
      m.mean += v;
      m.min = std::min(m.min, v);
      m.max = std::max(m.max, v);
    }
    m.mean /= static_cast<double>(trials.size());
    return m;
  };
  s.avg_speed = stat([](const EpisodeMetrics& m) { return m.avg_speed; });
  s.long_dist = stat([](const EpisodeMetrics& m) { return m.long_dist; });
  s.min_dist = stat([](const EpisodeMetrics& m) { return m.min_dist; });
  for (const BatchTrial& t : trials) s.collisions += t.trace.metrics.collision ? 1 : 0;
  return s;
}

namespace {

BatchTrial run_trial(const HighwayScene& base, SimConfig cfg, const MpcConfig& mpc_cfg,
                     const RiskParams& risk, const PlacementConfig& placement,
                     std::uint64_t seed) {
  cfg.rng_seed = seed;
  const HighwayScene scene = randomize_scene(base, placement, mpc_cfg.v_ref, seed);
  return {seed, run_episode(scene, cfg, mpc_cfg, risk)};
}

}  // namespace

BatchResult run_batch(const HighwayScene& base, const SimConfig& cfg, const MpcConfig& mpc_cfg,
                      const RiskParams& risk, const PlacementConfig& placement,
                      std::span<const std::uint64_t> seeds) {
  BatchResult out;
  out.trials.resize(seeds.size());
  std::exception_ptr error;
  const long long n = static_cast<long long>(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long k = 0; k < n; ++k) {
    try {
      out.trials[k] = run_trial(base, cfg, mpc_cfg, risk, placement, seeds[k]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  out.summary = summarize(out.trials);
  return out;
}

BatchResult run_batch_serial(const HighwayScene& base, const SimConfig& cfg,
                             const MpcConfig& mpc_cfg, const RiskParams& risk,
                             const PlacementConfig& placement,
                             std::span<const std::uint64_t> seeds) {
  BatchResult out;
  for (std::uint64_t seed : seeds) {
    out.trials.push_back(run_trial(base, cfg, mpc_cfg, risk, placement, seed));
  }
  out.summary = summarize(out.trials);
  return out;
}

HighwayScene make_replay_scene(std::vector<TrajectoryStream> streams, int ego_id,
                               int lane_count, double lane_width, double road_length) {
  HighwayScene scene;
  scene.lane_count = lane_count;
  scene.lane_width = lane_width;
  scene.road_length = road_length;
  auto ego_it = std::find_if(streams.begin(), streams.end(),
                             [&](const TrajectoryStream& s) { return s.vehicle_id == ego_id; });
  if (ego_it == streams.end()) {
    throw std::invalid_argument("replay: vehicle id " + std::to_string(ego_id) +
                                " is not in the dataset");
  }
  scene.frame = ego_it->first_frame();
  scene.replay_streams = std::move(streams);
  for (std::size_t k = 0; k < scene.replay_streams.size(); ++k) {
    const TrajectoryStream& s = scene.replay_streams[k];
    SceneVehicle v;
    v.id = s.vehicle_id;
    v.geometry = s.geometry;
    v.stream = static_cast<int>(k);
    const TrajectoryRecord* r = s.at_frame(scene.frame);
    if (s.vehicle_id == ego_id) {
      v.behavior = Behavior::mpc_ego;
      set_from_record(v, s.records.front());
      v.state.phi = wrap_angle(v.state.phi);
      v.velocity = heading_velocity(v.state);
    } else {
      v.behavior = Behavior::replay;
      v.active = r != nullptr;
      if (r) set_from_record(v, *r);
    }
    scene.vehicles.push_back(v);
  }
  return scene;
}

}  // namespace riskmpc
