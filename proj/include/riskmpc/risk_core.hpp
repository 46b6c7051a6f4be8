#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "riskmpc/vehicle_models.hpp"

namespace riskmpc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Diagonal 2x2 covariance.
struct DiagCov {
  double xx = 0.0;
  double yy = 0.0;
};

/// Gaussian observation of one vehicle: means plus diagonal covariances of
/// position and velocity.
struct NoisyAgentState {
  Vec2 pos_mean;
  Vec2 vel_mean;
  DiagCov pos_cov;
  DiagCov vel_cov;
};

/// Constants of the CBF-inspired CVaR risk.
///
/// gamma is the slope of the linear class-K function, alpha the CVaR tail
/// level, tau the lateral stretch of the safety ellipse (lateral semi-axis
/// tau * d_safe), d_safe its longitudinal semi-axis and margin the additive
/// sampled-data controller margin.
struct RiskParams {
  double gamma = 1.0;
  double alpha = 0.1;
  double tau = 2.0;
  double d_safe = 5.0;
  double margin = 0.0;
};

void validate(const RiskParams& p);

/// Gradient layout: [X_e, Y_e, X_i, Y_i, vx_e, vy_e, vx_i, vy_i].
using Gradient8 = std::array<double, 8>;

struct JointMoments {
  double mean_h = 0.0;
  double var_h = 0.0;
  Gradient8 grad{};
};

/// Ellipse barrier h = dx^2 + (dy/tau)^2 - d_safe^2.
double eval_h(Vec2 ego_pos, Vec2 other_pos, const RiskParams& p);

/// Time derivative of h along the mean velocities.
double eval_h_dot(const NoisyAgentState& ego, const NoisyAgentState& other,
                  const RiskParams& p);

/// Severity H = -h_dot - gamma * h + margin at the means.
double eval_H_mean(const NoisyAgentState& ego, const NoisyAgentState& other,
                   const RiskParams& p);

Gradient8 grad_H(const NoisyAgentState& ego, const NoisyAgentState& other,
                 const RiskParams& p);

/// Delta-method variance g^T Sigma g with Sigma block-diagonal in the
/// gradient layout.
double eval_H_variance(const NoisyAgentState& ego,
                       const NoisyAgentState& other, const RiskParams& p);

JointMoments joint_moments(const NoisyAgentState& ego,
                           const NoisyAgentState& other, const RiskParams& p);

/// phi(z) / alpha with z = Phi^{-1}(1 - alpha): the CVaR multiplier of a
/// unit Gaussian. Throws std::invalid_argument unless 0 < alpha < 1.
double cvar_tail_multiplier(double alpha);

/// Upper-tail CVaR of N(mu, sigma^2) at level alpha.
double cvar_gaussian(double mu, double sigma, double alpha);

double pairwise_risk(const NoisyAgentState& ego, const NoisyAgentState& other,
                     const RiskParams& p);

/// Pairwise risk together with its derivatives with respect to the ego
/// position and velocity means.
struct RiskWithEgoGradient {
  double risk = 0.0;
  double d_x = 0.0;
  double d_y = 0.0;
  double d_vx = 0.0;
  double d_vy = 0.0;
};

RiskWithEgoGradient pairwise_risk_with_ego_gradient(
    const NoisyAgentState& ego, const NoisyAgentState& other,
    const RiskParams& p);

/// Max of the pairwise risks; nullopt when there are no neighbors.
/// Throws std::invalid_argument if the two spans differ in length.
std::optional<double> aggregate_risk(const NoisyAgentState& ego,
                                     std::span<const NoisyAgentState> others,
                                     std::span<const RiskParams> per_pair);

bool check_safety_constraint(double risk, double tol);

/// Lower bound (1 - alpha)^steps on whole-trajectory safety.
double trajectory_safety_bound(double alpha, int steps);

/// Per-pair ellipse from vehicle footprints: d_safe is half the summed
/// lengths plus buffer_long, the lateral semi-axis half the summed widths
/// plus buffer_lat, and tau their ratio.
struct PairSizing {
  double buffer_long = 1.0;
  double buffer_lat = 0.3;
};

RiskParams pair_params(const RiskParams& base, const VehicleGeometry& ego,
                       const VehicleGeometry& other,
                       const PairSizing& sizing = {});

/// Conservative controller margin over an operating box:
/// (2 v_rel_max + 2 gamma d_max + 2 u_max) * v_max * dt.
double estimate_controller_margin(double v_rel_max, double d_max,
                                  double u_max, double v_max, double gamma,
                                  double dt);

}  // namespace riskmpc
