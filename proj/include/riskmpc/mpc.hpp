#pragma once

#include <optional>
#include <span>
#include <vector>

#include "riskmpc/risk_core.hpp"
#include "riskmpc/vehicle_models.hpp"

namespace riskmpc {

struct CostWeights {
  double w_v = 1.0;
  double w_y = 0.5;
  double w_a = 0.1;
  double w_steer = 1.0;
  double w_dsteer = 2.0;
};

struct StateBounds {
  double y_min = -5.0, y_max = 5.0;
  double v_min = 0.0, v_max = 20.0;
  double phi_min = -0.3, phi_max = 0.3;
};

struct InputBounds {
  double accel_min = -6.0, accel_max = 3.0;
  double steer_min = -0.4, steer_max = 0.4;
};

/// Risk-aware drops the risk term from the objective but keeps the risk
/// constraints; courteous weighs it by p_s.
enum class MpcMode { courteous, risk_aware };

struct SolverSettings {
  int max_outer = 12;
  int max_inner = 150;
  /// Reduced-gradient tolerance of the inner solver, relative to 1 + |objective|.
  double stationarity_tol = 1e-4;
  double rho_init = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e8;
  /// Constraints are enforced internally this far inside their limits so
  /// the returned plan certifies against the exact limits.
  double risk_backoff = 1e-3;
  double state_backoff = 1e-4;
  /// Additional lateral initial guesses (steer left / right) so lane changes
  /// are reachable from a symmetric start.
  bool lateral_seeds = true;
};

/// Linear growth of neighbor covariances per predicted step.
struct PredictionGrowth {
  double pos = 0.0;
  double vel = 0.0;
};

struct MpcConfig {
  int horizon = 10;
  double dt = 0.1;
  double p_s = 0.25;
  double v_ref = 15.0;
  std::vector<double> lane_centers{-4.0, 0.0, 4.0};
  CostWeights weights;
  StateBounds state_bounds;
  InputBounds input_bounds;
  double steer_rate_max = 0.05;  // rad per step
  double risk_tol = 1e-6;
  MpcMode mode = MpcMode::courteous;
  VehicleGeometry ego_geometry;
  DiagCov ego_pos_cov;
  DiagCov ego_vel_cov;
  PredictionGrowth growth;
  SolverSettings solver;

  /// Weight actually applied to the horizon risk sum.
  double risk_weight() const { return mode == MpcMode::risk_aware ? 0.0 : p_s; }
};

void validate(const MpcConfig& cfg);

enum class MpcStatus { optimal, max_iter, infeasible };

const char* to_string(MpcStatus s);

struct MpcSolution {
  std::vector<ControlInput> controls;
  std::vector<EgoState> predicted_states;
  /// nullopt where no neighbor is observed.
  std::vector<std::optional<double>> predicted_risks;
  double objective = 0.0;
  MpcStatus status = MpcStatus::infeasible;
  int iterations = 0;
};

struct SolveOptions {
  /// Control applied before this solve; anchors the steering-rate bound.
  ControlInput previous;
  /// Optional initial guess of length horizon (e.g. the last plan shifted).
  std::vector<ControlInput> warm_start;
};

/// Constant-velocity extrapolation t steps ahead; covariances grow linearly
/// by `growth` per step (held constant by default).
std::vector<NoisyAgentState> predict_neighbors(
    std::span<const NoisyAgentState> others, int t, double dt,
    const PredictionGrowth& growth = {});

/// Distance from y to the nearest lane center; ties go to the lower index.
double lane_offset(double y, std::span<const double> lane_centers);

double stage_cost(const EgoState& s, const ControlInput& u,
                  const ControlInput& u_prev, const MpcConfig& cfg);

double terminal_cost(const EgoState& s, const MpcConfig& cfg);

/// Ego as seen by the risk terms: its position and heading-aligned velocity
/// with the configured ego covariances.
NoisyAgentState ego_as_agent(const EgoState& s, const MpcConfig& cfg);

std::vector<EgoState> rollout(const EgoState& s0,
                              std::span<const ControlInput> controls,
                              const MpcConfig& cfg);

/// Aggregated risk along a rolled-out plan, t = 0..N.
std::vector<std::optional<double>> predicted_risks(
    std::span<const EgoState> states, std::span<const NoisyAgentState> others,
    std::span<const RiskParams> per_pair, const MpcConfig& cfg);

/// Task cost plus risk_weight times the summed horizon risk (t = 0..N);
/// "no neighbor" contributes zero.
double objective(std::span<const ControlInput> controls, const EgoState& s0,
                 std::span<const NoisyAgentState> others,
                 std::span<const RiskParams> per_pair, const MpcConfig& cfg,
                 const ControlInput& previous = {});

/// Gradient of objective() with respect to [a_0, steer_0, a_1, ...].
std::vector<double> objective_gradient(std::span<const ControlInput> controls,
                                       const EgoState& s0,
                                       std::span<const NoisyAgentState> others,
                                       std::span<const RiskParams> per_pair,
                                       const MpcConfig& cfg,
                                       const ControlInput& previous = {});

MpcSolution solve_mpc(const EgoState& s0,
                      std::span<const NoisyAgentState> others,
                      std::span<const RiskParams> per_pair,
                      const MpcConfig& cfg, const SolveOptions& opts = {});

/// Maximum braking with zero steering; status infeasible, risks post-hoc.
MpcSolution fallback_brake(const EgoState& s0,
                           std::span<const NoisyAgentState> others,
                           std::span<const RiskParams> per_pair,
                           const MpcConfig& cfg);

/// Post-hoc check of a plan against all hard constraints using risk_core
/// directly. Returns the largest violation (<= 0 when satisfied); risk is
/// measured against risk_tol, boxes and the steering rate against their
/// exact limits.
struct Certification {
  double max_risk_violation = 0.0;
  double max_state_violation = 0.0;
  double max_input_violation = 0.0;
  double max_rate_violation = 0.0;
  bool ok = false;
};

Certification certify(const EgoState& s0, std::span<const ControlInput> controls,
                      std::span<const NoisyAgentState> others,
                      std::span<const RiskParams> per_pair, const MpcConfig& cfg,
                      const ControlInput& previous = {});

}  // namespace riskmpc
