#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "riskmpc/mpc.hpp"

using namespace riskmpc;

namespace {

const RiskParams kPair{1.0, 0.1, 0.5, 6.0, 0.0};

NoisyAgentState nb(Vec2 p, Vec2 v, double cov = 0.1) { return {p, v, {cov, cov}, {cov, cov}}; }

double max_risk(const MpcSolution& s) {
  double r = -std::numeric_limits<double>::infinity();
  for (const auto& v : s.predicted_risks)
    if (v) r = std::max(r, *v);
  return r;
}

}  // namespace

TEST(PredictNeighbors, Examples) {
  const std::vector<NoisyAgentState> o{nb({20, 0}, {10, 0}), nb({7, 3}, {0, 0})};
  const auto p3 = predict_neighbors(o, 3, 0.1);
  EXPECT_NEAR(p3[0].pos_mean.x, 23.0, 1e-12);
  EXPECT_EQ(p3[0].pos_mean.y, 0.0);
  EXPECT_EQ(p3[1].pos_mean.x, 7.0);
  EXPECT_EQ(p3[1].pos_mean.y, 3.0);
  const auto p0 = predict_neighbors(o, 0, 0.1);
  EXPECT_EQ(p0[0].pos_mean.x, 20.0);
  EXPECT_EQ(p0[0].pos_cov.xx, 0.1);
  const auto g = predict_neighbors(o, 4, 0.1, {0.01, 0.02});
  EXPECT_NEAR(g[0].pos_cov.xx, 0.14, 1e-12);
  EXPECT_NEAR(g[0].vel_cov.yy, 0.18, 1e-12);
  EXPECT_EQ(p3[0].pos_cov.xx, 0.1);
}

TEST(LaneOffset, NearestCenterTiesLow) {
  const std::vector<double> lanes{-4, 0, 4};
  EXPECT_EQ(lane_offset(0.5, lanes), 0.5);
  EXPECT_EQ(lane_offset(-2.0, lanes), 2.0);
  EXPECT_EQ(lane_offset(7.0, lanes), 3.0);
}

TEST(StageCost, Examples) {
  const MpcConfig cfg;
  EXPECT_EQ(stage_cost({0, 0, 15, 0}, {0, 0}, {0, 0}, cfg), 0.0);
  EXPECT_DOUBLE_EQ(stage_cost({0, 0, 16, 0}, {0, 0}, {0, 0}, cfg), cfg.weights.w_v);
  EXPECT_DOUBLE_EQ(stage_cost({0, 2, 15, 0}, {0, 0}, {0, 0}, cfg), cfg.weights.w_y * 4.0);
  EXPECT_DOUBLE_EQ(stage_cost({0, 0, 15, 0}, {2, 0.1}, {0, 0.3}, cfg),
                   cfg.weights.w_a * 4 + cfg.weights.w_steer * 0.01 + cfg.weights.w_dsteer * 0.04);
  EXPECT_DOUBLE_EQ(terminal_cost({0, 2, 16, 0}, cfg), cfg.weights.w_v + cfg.weights.w_y * 4.0);
}

TEST(Objective, EmptyRoadAtReferenceIsZero) {
  const MpcConfig cfg;
  const std::vector<ControlInput> u(cfg.horizon);
  EXPECT_EQ(objective(u, {0, 0, 15, 0}, {}, {}, cfg), 0.0);
}

TEST(Objective, LinearInCourtesyWeight) {
  MpcConfig cfg;
  const EgoState s0{0, 0.3, 14, 0.01};
  const std::vector<NoisyAgentState> o{nb({25, 0.5}, {11, 0})};
  const std::vector<RiskParams> ps{kPair};
  std::vector<ControlInput> u(cfg.horizon, {0.4, 0.01});
  cfg.p_s = 0.0;
  const double f0 = objective(u, s0, o, ps, cfg);
  cfg.p_s = 0.25;
  const double f1 = objective(u, s0, o, ps, cfg);
  const auto states = rollout(s0, u, cfg);
  double sum = 0.0;
  for (const auto& r : predicted_risks(states, o, ps, cfg)) sum += r.value_or(0.0);
  EXPECT_NEAR(f1 - f0, 0.25 * sum, 1e-9 * std::max(1.0, std::abs(sum)));

  cfg.mode = MpcMode::risk_aware;
  EXPECT_EQ(objective(u, s0, o, ps, cfg), f0);
}

TEST(Objective, PredictedRisksMatchRiskCore) {
  const MpcConfig cfg;
  const EgoState s0{0, 0, 15, 0};
  const std::vector<NoisyAgentState> o{nb({25, 0}, {11, 0}), nb({-20, 4}, {16, 0})};
  const std::vector<RiskParams> ps{kPair, kPair};
  const std::vector<ControlInput> u(cfg.horizon, {0.5, 0.02});
  const auto states = rollout(s0, u, cfg);
  ASSERT_EQ(states.size(), static_cast<std::size_t>(cfg.horizon + 1));
  const auto risks = predicted_risks(states, o, ps, cfg);
  for (int t = 0; t <= cfg.horizon; ++t) {
    const NoisyAgentState e{{states[t].x, states[t].y},
                            {states[t].v * std::cos(states[t].phi), states[t].v * std::sin(states[t].phi)},
                            {},
                            {}};
    const auto pred = predict_neighbors(o, t, cfg.dt);
    const double expect = std::max(pairwise_risk(e, pred[0], kPair), pairwise_risk(e, pred[1], kPair));
    EXPECT_NEAR(*risks[t], expect, 1e-9 * std::abs(expect));
  }
}

TEST(ObjectiveGradient, MatchesCentralDifferences) {
  MpcConfig cfg;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> a(-2, 2), d(-0.1, 0.1);
  const std::vector<NoisyAgentState> o{nb({25, 1}, {11, 0.2}), nb({-15, -4}, {17, 0})};
  const std::vector<RiskParams> ps{kPair, {2.0, 0.05, 0.8, 5.0, 0.5}};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ControlInput> u(cfg.horizon);
    for (auto& c : u) c = {a(rng), d(rng)};
    const EgoState s0{0, 0.5 * d(rng), 14, d(rng)};
    const ControlInput prev{0, d(rng)};
    const auto g = objective_gradient(u, s0, o, ps, cfg, prev);
    ASSERT_EQ(g.size(), 2u * cfg.horizon);
    for (int k = 0; k < 2 * cfg.horizon; ++k) {
      auto up = u, um = u;
      double& vp = k % 2 == 0 ? up[k / 2].accel : up[k / 2].steer;
      double& vm = k % 2 == 0 ? um[k / 2].accel : um[k / 2].steer;
      vp += 1e-6;
      vm -= 1e-6;
      const double fd = (objective(up, s0, o, ps, cfg, prev) - objective(um, s0, o, ps, cfg, prev)) / 2e-6;
      EXPECT_NEAR(g[k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "component " << k;
    }
  }
}

TEST(SolveMpc, EmptyRoadKeepsZeroControls) {
  const MpcConfig cfg;
  const MpcSolution s = solve_mpc({0, 0, 15, 0}, {}, {}, cfg);
  EXPECT_EQ(s.status, MpcStatus::optimal);
  ASSERT_EQ(s.controls.size(), static_cast<std::size_t>(cfg.horizon));
  for (const auto& u : s.controls) {
    EXPECT_LE(std::abs(u.accel), 1e-3);
    EXPECT_LE(std::abs(u.steer), 1e-3);
  }
  for (const auto& r : s.predicted_risks) EXPECT_FALSE(r.has_value());
}

TEST(SolveMpc, SlowObstacleAheadIsCertified) {
  const MpcConfig cfg;
  const EgoState s0{0, 0, 15, 0};
  const std::vector<NoisyAgentState> o{nb({30, 0}, {5, 0})};
  const std::vector<RiskParams> ps{kPair};
  const MpcSolution s = solve_mpc(s0, o, ps, cfg);
  ASSERT_NE(s.status, MpcStatus::infeasible);
  EXPECT_EQ(s.predicted_states.front().x, s0.x);
  EXPECT_EQ(s.predicted_states.front().v, s0.v);
  const auto states = rollout(s0, s.controls, cfg);
  for (int t = 0; t < cfg.horizon; ++t) {
    const NoisyAgentState e = ego_as_agent(states[t], cfg);
    const auto pred = predict_neighbors(o, t, cfg.dt);
    EXPECT_LE(pairwise_risk(e, pred[0], kPair), cfg.risk_tol) << "t=" << t;
  }
  EXPECT_TRUE(certify(s0, s.controls, o, ps, cfg).ok);
}

TEST(SolveMpc, InsideRiskRegionFallsBack) {
  const MpcConfig cfg;
  const EgoState s0{0, 0, 15, 0};
  const std::vector<NoisyAgentState> o{nb({3, 0}, {15, 0})};
  const std::vector<RiskParams> ps{kPair};
  const MpcSolution s = solve_mpc(s0, o, ps, cfg);
  EXPECT_EQ(s.status, MpcStatus::infeasible);
  EXPECT_GT(*s.predicted_risks[0], 0.0);
  for (const auto& u : s.controls) {
    EXPECT_EQ(u.accel, cfg.input_bounds.accel_min);
    EXPECT_EQ(u.steer, 0.0);
  }
}

TEST(FallbackBrake, Examples) {
  const MpcConfig cfg;
  const MpcSolution s = fallback_brake({0, 1, 15, 0.1}, {}, {}, cfg);
  EXPECT_EQ(s.status, MpcStatus::infeasible);
  EXPECT_NEAR(s.predicted_states[1].v, 14.4, 1e-12);
  for (const auto& u : s.controls) EXPECT_EQ(u.steer, 0.0);
  const MpcSolution z = fallback_brake({0, 0, 0, 0}, {}, {}, cfg);
  for (const auto& st : z.predicted_states) EXPECT_EQ(st.v, 0.0);
  const std::vector<NoisyAgentState> o{nb({10, 0}, {15, 0})};
  const std::vector<RiskParams> ps{kPair};
  const MpcSolution r = fallback_brake({0, 0, 15, 0}, o, ps, cfg);
  ASSERT_EQ(r.predicted_risks.size(), static_cast<std::size_t>(cfg.horizon + 1));
  EXPECT_TRUE(r.predicted_risks[0].has_value());
}

TEST(SolveMpc, RiskAwareEqualsZeroCourtesy) {
  MpcConfig a;
  a.p_s = 0.0;
  MpcConfig b;
  b.mode = MpcMode::risk_aware;
  const EgoState s0{0, 0.2, 14, 0};
  const std::vector<NoisyAgentState> o{nb({28, 0}, {10, 0}), nb({5, 4}, {15, 0})};
  const std::vector<RiskParams> ps{kPair, kPair};
  const MpcSolution sa = solve_mpc(s0, o, ps, a);
  const MpcSolution sb = solve_mpc(s0, o, ps, b);
  EXPECT_EQ(sa.objective, sb.objective);
  EXPECT_EQ(sa.status, sb.status);
  for (int t = 0; t < a.horizon; ++t) {
    EXPECT_EQ(sa.controls[t].accel, sb.controls[t].accel);
    EXPECT_EQ(sa.controls[t].steer, sb.controls[t].steer);
  }
}

TEST(SolveMpc, WarmStartNeverWorseThanCold) {
  const MpcConfig cfg;
  const std::vector<NoisyAgentState> o{nb({30, 0}, {10, 0}), nb({10, 4}, {14, 0})};
  const std::vector<RiskParams> ps{kPair, kPair};
  for (const EgoState s0 : {EgoState{0, 0, 15, 0}, EgoState{0, 1.0, 13, 0.02}, EgoState{0, -0.5, 15, -0.01}}) {
    const MpcSolution cold = solve_mpc(s0, o, ps, cfg);
    ASSERT_NE(cold.status, MpcStatus::infeasible);
    SolveOptions opts;
    opts.warm_start.assign(cold.controls.begin() + 1, cold.controls.end());
    opts.warm_start.push_back(cold.controls.back());
    const MpcSolution warm = solve_mpc(s0, o, ps, cfg, opts);
    ASSERT_NE(warm.status, MpcStatus::infeasible);
    EXPECT_LE(warm.objective, cold.objective + cfg.solver.stationarity_tol * (1 + std::abs(cold.objective)));
  }
}

TEST(SolveMpc, OptimalPlansRespectAllBoxes) {
  const MpcConfig cfg;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> x(15, 60), y(-4.5, 4.5), v(8, 16);
  int checked = 0;
  for (int trial = 0; trial < 15; ++trial) {
    const std::vector<NoisyAgentState> o{nb({x(rng), y(rng)}, {v(rng), 0}), nb({-x(rng), y(rng)}, {v(rng), 0})};
    const std::vector<RiskParams> ps{kPair, kPair};
    const EgoState s0{0, 0, 15, 0};
    const MpcSolution s = solve_mpc(s0, o, ps, cfg);
    if (s.status != MpcStatus::optimal) continue;
    ++checked;
    EXPECT_LE(max_risk(s), cfg.risk_tol);
    for (std::size_t t = 1; t < s.predicted_states.size(); ++t) {
      const EgoState& st = s.predicted_states[t];
      EXPECT_GE(st.y, cfg.state_bounds.y_min);
      EXPECT_LE(st.y, cfg.state_bounds.y_max);
      EXPECT_GE(st.v, cfg.state_bounds.v_min);
      EXPECT_LE(st.v, cfg.state_bounds.v_max);
      EXPECT_GE(st.phi, cfg.state_bounds.phi_min);
      EXPECT_LE(st.phi, cfg.state_bounds.phi_max);
    }
    double prev = 0.0;
    for (const auto& u : s.controls) {
      EXPECT_GE(u.accel, cfg.input_bounds.accel_min);
      EXPECT_LE(u.accel, cfg.input_bounds.accel_max);
      EXPECT_GE(u.steer, cfg.input_bounds.steer_min);
      EXPECT_LE(u.steer, cfg.input_bounds.steer_max);
      EXPECT_LE(std::abs(u.steer - prev), cfg.steer_rate_max + 1e-12);
      prev = u.steer;
    }
  }
  EXPECT_GT(checked, 5);
}

TEST(SolveMpc, ClearanceToSlowerLeaderGrowsWithCourtesy) {
  const EgoState s0{0, 0, 15, 0};
  const std::vector<NoisyAgentState> o{nb({30, 0}, {10, 0})};
  const std::vector<RiskParams> ps{kPair};
  double prev = -1.0;
  for (double p_s : {0.0, 0.05, 0.15, 0.25}) {
    MpcConfig cfg;
    cfg.p_s = p_s;
    const MpcSolution s = solve_mpc(s0, o, ps, cfg);
    ASSERT_NE(s.status, MpcStatus::infeasible);
    double dmin = std::numeric_limits<double>::infinity();
    for (int t = 0; t <= cfg.horizon; ++t) {
      const Vec2 p = predict_neighbors(o, t, cfg.dt)[0].pos_mean;
      dmin = std::min(dmin, std::hypot(s.predicted_states[t].x - p.x, s.predicted_states[t].y - p.y));
    }
    EXPECT_GE(dmin, prev - 1e-9) << "p_s=" << p_s;
    prev = dmin;
  }
}

TEST(MpcConfigValidation, RejectsBadValues) {
  EXPECT_NO_THROW(validate(MpcConfig{}));
  MpcConfig c;
  c.horizon = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = {};
  c.p_s = -0.1;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = {};
  c.state_bounds.v_min = 30;
  EXPECT_THROW(validate(c), std::invalid_argument);
}
