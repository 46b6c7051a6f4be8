#include "riskmpc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace riskmpc {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed view of one JSON object that remembers which keys were consumed so
// leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "'" + path_ + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = convert<T>(j_.at(key), join(path_, key));
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = convert<T>(j_.at(key), join(path_, key));
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, join(path_, key));
  }

  const json* array(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    if (!j_.at(key).is_array()) {
      throw ConfigError(join(path_, key), "'" + join(path_, key) + "' must be an array");
    }
    return &j_.at(key);
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(join(path_, it.key()), "unknown key '" + join(path_, it.key()) + "'");
      }
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& key) {
    auto bad = [&](const char* what) {
      return ConfigError(key, "'" + key + "' must be " + what);
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bad("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw bad("an integer");
      return v.get<int>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw bad("a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw bad("a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bad("a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, Vec2>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw bad("an array of two numbers");
      return Vec2{v[0].get<double>(), v[1].get<double>()};
    } else if constexpr (std::is_same_v<T, DiagCov>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw bad("an array of two numbers (diagonal covariance)");
      return DiagCov{v[0].get<double>(), v[1].get<double>()};
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw bad("an array of numbers");
      std::vector<double> out;
      for (const json& e : v) {
        if (!e.is_number()) throw bad("an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError(key, "'" + key + "' " + msg);
}

void read_geometry(Section& s, VehicleGeometry& g) {
  const bool has_wheelbase = s.has("wheelbase");
  s.get("length", g.body_length);
  s.get("width", g.body_width);
  if (has_wheelbase) {
    s.get("wheelbase", g.wheelbase);
  } else {
    g.wheelbase = kWheelbaseFraction * g.body_length;
  }
  require(g.body_length > 0, join(s.path(), "length"), "must be > 0");
  require(g.body_width > 0, join(s.path(), "width"), "must be > 0");
  require(g.wheelbase > 0, join(s.path(), "wheelbase"), "must be > 0");
}

void check_cov(const DiagCov& c, const std::string& key) {
  require(c.xx >= 0 && c.yy >= 0, key, "must have non-negative diagonal");
}

VehicleSpec read_vehicle(Section s, VehicleSpec v, bool is_ego) {
  s.get("id", v.id);
  s.get("x", v.x);
  s.get("lane", v.lane);
  s.get("y", v.y);
  if (v.y) v.lane.reset();
  s.get("v", v.v);
  s.get("heading", v.heading);
  require(v.v >= 0, join(s.path(), "v"), "must be >= 0");
  read_geometry(s, v.geometry);
  if (!is_ego) {
    v.idm.v0 = v.v > 0 ? v.v : v.idm.v0;
    s.get("v0", v.idm.v0);
    s.get("T", v.idm.T);
    s.get("s0", v.idm.s0);
    s.get("a_max", v.idm.a_max);
    s.get("b", v.idm.b);
    s.get("exponent", v.idm.exponent);
    s.get("b_emergency", v.idm.b_emergency);
    for (auto [key, val] : {std::pair{"v0", v.idm.v0}, {"T", v.idm.T}, {"s0", v.idm.s0},
                            {"a_max", v.idm.a_max}, {"b", v.idm.b},
                            {"exponent", v.idm.exponent}, {"b_emergency", v.idm.b_emergency}}) {
      require(val > 0, join(s.path(), key), "must be > 0");
    }
    s.get("pos_cov", v.pos_cov);
    s.get("vel_cov", v.vel_cov);
    if (v.pos_cov) check_cov(*v.pos_cov, join(s.path(), "pos_cov"));
    if (v.vel_cov) check_cov(*v.vel_cov, join(s.path(), "vel_cov"));
  }
  s.finish();
  return v;
}

void read_risk(Section s, RunConfig& c) {
  RiskParams& r = c.risk;
  s.get("gamma", r.gamma);
  s.get("alpha", r.alpha);
  s.get("tau", r.tau);
  s.get("d_safe", r.d_safe);
  s.get("margin", r.margin);
  s.get("geometry_sizing", c.sim.geometry_sizing);
  s.get("buffer_long", c.sim.sizing.buffer_long);
  s.get("buffer_lat", c.sim.sizing.buffer_lat);
  s.finish();
  require(r.gamma >= 0, "risk.gamma", "must be >= 0");
  require(r.alpha > 0 && r.alpha < 1, "risk.alpha", "must lie in (0, 1)");
  require(r.tau > 0, "risk.tau", "must be > 0");
  require(r.d_safe > 0, "risk.d_safe", "must be > 0");
  require(r.margin >= 0, "risk.margin", "must be >= 0");
  require(c.sim.sizing.buffer_long >= 0, "risk.buffer_long", "must be >= 0");
  require(c.sim.sizing.buffer_lat >= 0, "risk.buffer_lat", "must be >= 0");
}

void read_mpc(Section s, RunConfig& c) {
  MpcConfig& m = c.mpc;
  s.get("horizon", m.horizon);
  s.get("dt", m.dt);
  s.get("p_s", m.p_s);
  s.get("v_ref", m.v_ref);
  std::string mode = m.mode == MpcMode::courteous ? "courteous" : "risk_aware";
  s.get("mode", mode);
  require(mode == "courteous" || mode == "risk_aware", "mpc.mode",
          "must be \"courteous\" or \"risk_aware\"");
  m.mode = mode == "courteous" ? MpcMode::courteous : MpcMode::risk_aware;
  if (s.has("lane_centers")) {
    s.get("lane_centers", m.lane_centers);
    c.lane_centers_explicit = true;
    require(!m.lane_centers.empty(), "mpc.lane_centers", "must not be empty");
  }
  {
    Section w = s.child("weights");
    w.get("w_v", m.weights.w_v);
    w.get("w_y", m.weights.w_y);
    w.get("w_a", m.weights.w_a);
    w.get("w_steer", m.weights.w_steer);
    w.get("w_dsteer", m.weights.w_dsteer);
    w.finish();
    for (auto [key, val] : {std::pair{"w_v", m.weights.w_v}, {"w_y", m.weights.w_y},
                            {"w_a", m.weights.w_a}, {"w_steer", m.weights.w_steer},
                            {"w_dsteer", m.weights.w_dsteer}}) {
      require(val >= 0, join("mpc.weights", key), "must be >= 0");
    }
  }
  {
    Section b = s.child("state_bounds");
    if (b.has("y_min") || b.has("y_max")) c.y_bounds_explicit = true;
    b.get("y_min", m.state_bounds.y_min);
    b.get("y_max", m.state_bounds.y_max);
    b.get("v_min", m.state_bounds.v_min);
    b.get("v_max", m.state_bounds.v_max);
    b.get("phi_min", m.state_bounds.phi_min);
    b.get("phi_max", m.state_bounds.phi_max);
    b.finish();
    require(m.state_bounds.y_min < m.state_bounds.y_max, "mpc.state_bounds.y_max", "must exceed y_min");
    require(m.state_bounds.v_min < m.state_bounds.v_max, "mpc.state_bounds.v_max", "must exceed v_min");
    require(m.state_bounds.phi_min < m.state_bounds.phi_max, "mpc.state_bounds.phi_max",
            "must exceed phi_min");
  }
  {
    Section b = s.child("input_bounds");
    b.get("accel_min", m.input_bounds.accel_min);
    b.get("accel_max", m.input_bounds.accel_max);
    b.get("steer_min", m.input_bounds.steer_min);
    b.get("steer_max", m.input_bounds.steer_max);
    b.finish();
    require(m.input_bounds.accel_min < m.input_bounds.accel_max, "mpc.input_bounds.accel_max",
            "must exceed accel_min");
    require(m.input_bounds.steer_min < m.input_bounds.steer_max, "mpc.input_bounds.steer_max",
            "must exceed steer_min");
    require(m.input_bounds.steer_min > -1.5 && m.input_bounds.steer_max < 1.5,
            "mpc.input_bounds.steer_max", "must stay below pi/2 in magnitude");
  }
  s.get("steer_rate_max", m.steer_rate_max);
  s.get("risk_tol", m.risk_tol);
  s.get("ego_pos_cov", m.ego_pos_cov);
  s.get("ego_vel_cov", m.ego_vel_cov);
  check_cov(m.ego_pos_cov, "mpc.ego_pos_cov");
  check_cov(m.ego_vel_cov, "mpc.ego_vel_cov");
  {
    Section g = s.child("cov_growth");
    g.get("pos", m.growth.pos);
    g.get("vel", m.growth.vel);
    g.finish();
    require(m.growth.pos >= 0, "mpc.cov_growth.pos", "must be >= 0");
    require(m.growth.vel >= 0, "mpc.cov_growth.vel", "must be >= 0");
  }
  {
    Section v = s.child("solver");
    SolverSettings& ss = m.solver;
    v.get("max_outer", ss.max_outer);
    v.get("max_inner", ss.max_inner);
    v.get("stationarity_tol", ss.stationarity_tol);
    v.get("rho_init", ss.rho_init);
    v.get("rho_growth", ss.rho_growth);
    v.get("rho_max", ss.rho_max);
    v.get("risk_backoff", ss.risk_backoff);
    v.get("state_backoff", ss.state_backoff);
    v.get("lateral_seeds", ss.lateral_seeds);
    v.finish();
    require(ss.max_outer >= 1, "mpc.solver.max_outer", "must be >= 1");
    require(ss.max_inner >= 1, "mpc.solver.max_inner", "must be >= 1");
    require(ss.stationarity_tol > 0, "mpc.solver.stationarity_tol", "must be > 0");
    require(ss.rho_init > 0, "mpc.solver.rho_init", "must be > 0");
    require(ss.rho_growth >= 1, "mpc.solver.rho_growth", "must be >= 1");
    require(ss.rho_max >= ss.rho_init, "mpc.solver.rho_max", "must be >= rho_init");
    require(ss.risk_backoff >= 0, "mpc.solver.risk_backoff", "must be >= 0");
    require(ss.state_backoff >= 0, "mpc.solver.state_backoff", "must be >= 0");
  }
  s.finish();
  require(m.horizon >= 1, "mpc.horizon", "must be >= 1");
  require(m.dt > 0, "mpc.dt", "must be > 0");
  require(m.p_s >= 0, "mpc.p_s", "must be >= 0");
  require(m.steer_rate_max > 0, "mpc.steer_rate_max", "must be > 0");
  require(m.risk_tol >= 0, "mpc.risk_tol", "must be >= 0");
}

void read_sim(Section s, RunConfig& c) {
  SimConfig& m = c.sim;
  s.get("dt", m.dt);
  s.get("steps", m.steps);
  s.get("sensing_range", m.sensing_range);
  s.get("neighbor_pos_cov", m.neighbor_pos_cov);
  s.get("neighbor_vel_cov", m.neighbor_vel_cov);
  s.get("observation_noise", m.observation_noise_on);
  s.get("idm_lateral_margin", m.idm_lateral_margin);
  s.finish();
  require(m.dt > 0, "sim.dt", "must be > 0");
  require(m.steps >= 1, "sim.steps", "must be >= 1");
  require(m.sensing_range > 0, "sim.sensing_range", "must be > 0");
  require(m.idm_lateral_margin >= 0, "sim.idm_lateral_margin", "must be >= 0");
  check_cov(m.neighbor_pos_cov, "sim.neighbor_pos_cov");
  check_cov(m.neighbor_vel_cov, "sim.neighbor_vel_cov");
}

void read_scene(Section s, RunConfig& c) {
  SceneSpec& sc = c.scene;
  s.get("lane_count", sc.lane_count);
  s.get("lane_width", sc.lane_width);
  s.get("road_length", sc.road_length);
  s.get("randomize", sc.randomize);
  require(sc.lane_count >= 1, "scene.lane_count", "must be >= 1");
  require(sc.lane_width > 0, "scene.lane_width", "must be > 0");
  require(sc.road_length > 0, "scene.road_length", "must be > 0");
  sc.ego.lane = (sc.lane_count - 1) / 2;
  if (s.has("ego")) sc.ego = read_vehicle(s.child("ego"), sc.ego, true);
  if (const json* arr = s.array("vehicles")) {
    sc.vehicles.clear();
    for (std::size_t k = 0; k < arr->size(); ++k) {
      VehicleSpec v;
      v.id = static_cast<int>(k + 1);
      v.lane = (sc.lane_count - 1) / 2;
      sc.vehicles.push_back(read_vehicle(Section((*arr)[k], "scene.vehicles[" + std::to_string(k) + "]"),
                                         v, false));
    }
  }
  {
    Section p = s.child("placement");
    PlacementConfig& pl = sc.placement;
    p.get("x_min", pl.x_min);
    p.get("x_max", pl.x_max);
    p.get("speed_min", pl.speed_min);
    p.get("speed_max", pl.speed_max);
    p.get("min_gap", pl.min_gap);
    p.get("max_attempts", pl.max_attempts);
    p.finish();
    require(pl.x_max > pl.x_min, "scene.placement.x_max", "must exceed x_min");
    require(pl.speed_min >= 0, "scene.placement.speed_min", "must be >= 0");
    require(pl.speed_max >= pl.speed_min, "scene.placement.speed_max", "must be >= speed_min");
    require(pl.min_gap > 0, "scene.placement.min_gap", "must be > 0");
    require(pl.max_attempts >= 1, "scene.placement.max_attempts", "must be >= 1");
  }
  s.finish();

  std::set<int> ids{sc.ego.id};
  auto check_lane = [&](const VehicleSpec& v, const std::string& key) {
    if (v.lane) require(*v.lane >= 0 && *v.lane < sc.lane_count, key + ".lane", "is out of range");
  };
  check_lane(sc.ego, "scene.ego");
  for (std::size_t k = 0; k < sc.vehicles.size(); ++k) {
    const std::string key = "scene.vehicles[" + std::to_string(k) + "]";
    require(ids.insert(sc.vehicles[k].id).second, key + ".id", "duplicates another vehicle id");
    check_lane(sc.vehicles[k], key);
  }
}

void read_riskmap(Section s, RunConfig& c) {
  RiskMapSpec& r = c.riskmap;
  {
    Section g = s.child("grid");
    g.get("x_min", r.grid.x_min);
    g.get("x_max", r.grid.x_max);
    g.get("y_min", r.grid.y_min);
    g.get("y_max", r.grid.y_max);
    g.get("nx", r.grid.nx);
    g.get("ny", r.grid.ny);
    g.finish();
    require(r.grid.x_max > r.grid.x_min, "riskmap.grid.x_max", "must exceed x_min");
    require(r.grid.y_max > r.grid.y_min, "riskmap.grid.y_max", "must exceed y_min");
    require(r.grid.nx >= 2, "riskmap.grid.nx", "must be >= 2");
    require(r.grid.ny >= 2, "riskmap.grid.ny", "must be >= 2");
  }
  s.get("ego_velocity", r.ego_velocity);
  if (const json* arr = s.array("neighbors")) {
    r.neighbors.clear();
    for (std::size_t k = 0; k < arr->size(); ++k) {
      Section n((*arr)[k], "riskmap.neighbors[" + std::to_string(k) + "]");
      RiskMapNeighbor nb;
      n.get("pos", nb.pos);
      n.get("vel", nb.vel);
      read_geometry(n, nb.geometry);
      n.finish();
      r.neighbors.push_back(nb);
    }
  }
  s.finish();
}

void apply_scene_defaults(RunConfig& c) {
  HighwayScene probe;
  probe.lane_count = c.scene.lane_count;
  probe.lane_width = c.scene.lane_width;
  if (!c.lane_centers_explicit) c.mpc.lane_centers = probe.lane_centers();
  if (!c.y_bounds_explicit) {
    const double half = 0.5 * c.scene.lane_count * c.scene.lane_width;
    const double body = 0.5 * c.scene.ego.geometry.body_width;
    c.mpc.state_bounds.y_min = -half + body;
    c.mpc.state_bounds.y_max = half - body;
  }
}

json vehicle_json(const VehicleSpec& v, bool is_ego) {
  json j{{"id", v.id}, {"x", v.x}, {"v", v.v}, {"heading", v.heading},
         {"length", v.geometry.body_length}, {"width", v.geometry.body_width},
         {"wheelbase", v.geometry.wheelbase}};
  if (v.y) j["y"] = *v.y;
  if (v.lane) j["lane"] = *v.lane;
  if (!is_ego) {
    j["v0"] = v.idm.v0;
    j["T"] = v.idm.T;
    j["s0"] = v.idm.s0;
    j["a_max"] = v.idm.a_max;
    j["b"] = v.idm.b;
    j["exponent"] = v.idm.exponent;
    j["b_emergency"] = v.idm.b_emergency;
    if (v.pos_cov) j["pos_cov"] = {v.pos_cov->xx, v.pos_cov->yy};
    if (v.vel_cov) j["vel_cov"] = {v.vel_cov->xx, v.vel_cov->yy};
  }
  return j;
}

json cov_json(const DiagCov& c) { return json::array({c.xx, c.yy}); }

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset to line:column.
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("", origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                              ": parse error: " + e.what());
  }

  RunConfig c;
  Section top(root, "");
  top.get("seed", c.seed);
  read_risk(top.child("risk"), c);
  read_sim(top.child("sim"), c);
  read_scene(top.child("scene"), c);
  read_mpc(top.child("mpc"), c);
  read_riskmap(top.child("riskmap"), c);
  top.finish();
  apply_scene_defaults(c);

  // Backstop: module-level invariants.
  try {
    validate(c.risk);
    validate(c.mpc);
    validate(c.sim);
    validate(c.riskmap.grid);
    validate(build_scene(c));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("", "cannot open config file: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.string());
}

json to_json(const RunConfig& c) {
  const MpcConfig& m = c.mpc;
  json j;
  j["seed"] = c.seed;
  j["risk"] = {{"gamma", c.risk.gamma},
               {"alpha", c.risk.alpha},
               {"tau", c.risk.tau},
               {"d_safe", c.risk.d_safe},
               {"margin", c.risk.margin},
               {"geometry_sizing", c.sim.geometry_sizing},
               {"buffer_long", c.sim.sizing.buffer_long},
               {"buffer_lat", c.sim.sizing.buffer_lat}};
  j["mpc"] = {
      {"horizon", m.horizon},
      {"dt", m.dt},
      {"p_s", m.p_s},
      {"v_ref", m.v_ref},
      {"mode", m.mode == MpcMode::courteous ? "courteous" : "risk_aware"},
      {"lane_centers", m.lane_centers},
      {"weights",
       {{"w_v", m.weights.w_v}, {"w_y", m.weights.w_y}, {"w_a", m.weights.w_a},
        {"w_steer", m.weights.w_steer}, {"w_dsteer", m.weights.w_dsteer}}},
      {"state_bounds",
       {{"y_min", m.state_bounds.y_min}, {"y_max", m.state_bounds.y_max},
        {"v_min", m.state_bounds.v_min}, {"v_max", m.state_bounds.v_max},
        {"phi_min", m.state_bounds.phi_min}, {"phi_max", m.state_bounds.phi_max}}},
      {"input_bounds",
       {{"accel_min", m.input_bounds.accel_min}, {"accel_max", m.input_bounds.accel_max},
        {"steer_min", m.input_bounds.steer_min}, {"steer_max", m.input_bounds.steer_max}}},
      {"steer_rate_max", m.steer_rate_max},
      {"risk_tol", m.risk_tol},
      {"ego_pos_cov", cov_json(m.ego_pos_cov)},
      {"ego_vel_cov", cov_json(m.ego_vel_cov)},
      {"cov_growth", {{"pos", m.growth.pos}, {"vel", m.growth.vel}}},
      {"solver",
       {{"max_outer", m.solver.max_outer},
        {"max_inner", m.solver.max_inner},
        {"stationarity_tol", m.solver.stationarity_tol},
        {"rho_init", m.solver.rho_init},
        {"rho_growth", m.solver.rho_growth},
        {"rho_max", m.solver.rho_max},
        {"risk_backoff", m.solver.risk_backoff},
        {"state_backoff", m.solver.state_backoff},
        {"lateral_seeds", m.solver.lateral_seeds}}}};
  j["sim"] = {{"dt", c.sim.dt},
              {"steps", c.sim.steps},
              {"sensing_range", c.sim.sensing_range},
              {"neighbor_pos_cov", cov_json(c.sim.neighbor_pos_cov)},
              {"neighbor_vel_cov", cov_json(c.sim.neighbor_vel_cov)},
              {"observation_noise", c.sim.observation_noise_on},
              {"idm_lateral_margin", c.sim.idm_lateral_margin}};
  json vehicles = json::array();
  for (const VehicleSpec& v : c.scene.vehicles) vehicles.push_back(vehicle_json(v, false));
  const PlacementConfig& pl = c.scene.placement;
  j["scene"] = {{"lane_count", c.scene.lane_count},
                {"lane_width", c.scene.lane_width},
                {"road_length", c.scene.road_length},
                {"randomize", c.scene.randomize},
                {"ego", vehicle_json(c.scene.ego, true)},
                {"vehicles", vehicles},
                {"placement",
                 {{"x_min", pl.x_min}, {"x_max", pl.x_max}, {"speed_min", pl.speed_min},
                  {"speed_max", pl.speed_max}, {"min_gap", pl.min_gap},
                  {"max_attempts", pl.max_attempts}}}};
  json neighbors = json::array();
  for (const RiskMapNeighbor& n : c.riskmap.neighbors) {
    neighbors.push_back({{"pos", {n.pos.x, n.pos.y}},
                         {"vel", {n.vel.x, n.vel.y}},
                         {"length", n.geometry.body_length},
                         {"width", n.geometry.body_width},
                         {"wheelbase", n.geometry.wheelbase}});
  }
  const GridSpec& g = c.riskmap.grid;
  j["riskmap"] = {{"grid",
                   {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min},
                    {"y_max", g.y_max}, {"nx", g.nx}, {"ny", g.ny}}},
                  {"ego_velocity", {c.riskmap.ego_velocity.x, c.riskmap.ego_velocity.y}},
                  {"neighbors", neighbors}};
  return j;
}

std::filesystem::path write_config_echo(const RunConfig& c, const std::filesystem::path& output) {
  std::filesystem::path echo = output;
  echo += ".config.json";
  std::ofstream f(echo);
  if (!f) throw std::runtime_error("cannot write config echo: " + echo.string());
  f << to_json(c).dump(2) << '\n';
  if (!f) throw std::runtime_error("write failed: " + echo.string());
  return echo;
}

namespace {

SceneVehicle make_vehicle(const VehicleSpec& v, Behavior behavior, const std::vector<double>& centers) {
  SceneVehicle out;
  out.id = v.id;
  out.geometry = v.geometry;
  out.behavior = behavior;
  const double y = v.y ? *v.y : centers[static_cast<std::size_t>(v.lane.value_or(0))];
  out.state = {v.x, y, v.v, v.heading};
  out.velocity = {v.v * std::cos(v.heading), v.v * std::sin(v.heading)};
  out.idm = v.idm;
  out.pos_cov = v.pos_cov;
  out.vel_cov = v.vel_cov;
  return out;
}

}  // namespace

HighwayScene build_scene(const RunConfig& c) {
  HighwayScene scene;
  scene.lane_count = c.scene.lane_count;
  scene.lane_width = c.scene.lane_width;
  scene.road_length = c.scene.road_length;
  const auto centers = scene.lane_centers();
  scene.vehicles.push_back(make_vehicle(c.scene.ego, Behavior::mpc_ego, centers));
  for (const VehicleSpec& v : c.scene.vehicles) {
    SceneVehicle sv = make_vehicle(v, Behavior::idm, centers);
    sv.state.phi = 0.0;  // lane keeping
    sv.velocity = {v.v, 0.0};
    scene.vehicles.push_back(sv);
  }
  return scene;
}

HighwayScene scene_for_seed(const RunConfig& c, std::uint64_t seed) {
  const HighwayScene scene = build_scene(c);
  if (!c.scene.randomize) return scene;
  return randomize_scene(scene, c.scene.placement, c.mpc.v_ref, seed);
}

MpcConfig effective_mpc(const RunConfig& c) {
  MpcConfig m = c.mpc;
  m.ego_geometry = c.scene.ego.geometry;
  return m;
}

}  // namespace riskmpc
