#include "riskmpc/risk_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace riskmpc {

namespace {

struct Relative {
  double dx, dy, dvx, dvy;
};

Relative relative(const NoisyAgentState& ego, const NoisyAgentState& other) {
  return {ego.pos_mean.x - other.pos_mean.x, ego.pos_mean.y - other.pos_mean.y,
          ego.vel_mean.x - other.vel_mean.x, ego.vel_mean.y - other.vel_mean.y};
}

// Ego half of the gradient; the other agent's entries are the negatives.
struct EgoGrad {
  double x, y, vx, vy;
};

EgoGrad ego_grad(const Relative& r, const RiskParams& p) {
  const double inv_tau2 = 1.0 / (p.tau * p.tau);
  return {-2.0 * r.dvx - 2.0 * p.gamma * r.dx,
          -2.0 * inv_tau2 * r.dvy - 2.0 * p.gamma * inv_tau2 * r.dy,
          -2.0 * r.dx, -2.0 * inv_tau2 * r.dy};
}

// Combined variances acting on each ego-gradient component (ego and other
// blocks enter with the same squared weight).
struct CombinedVar {
  double x, y, vx, vy;
};

CombinedVar combined_var(const NoisyAgentState& ego,
                         const NoisyAgentState& other) {
  return {ego.pos_cov.xx + other.pos_cov.xx, ego.pos_cov.yy + other.pos_cov.yy,
          ego.vel_cov.xx + other.vel_cov.xx, ego.vel_cov.yy + other.vel_cov.yy};
}

double quadratic_form(const EgoGrad& g, const CombinedVar& c) {
  return g.x * g.x * c.x + g.y * g.y * c.y + g.vx * g.vx * c.vx +
         g.vy * g.vy * c.vy;
}

}  // namespace

void validate(const RiskParams& p) {
  if (!(p.gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  if (!(p.alpha > 0.0 && p.alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(p.tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  if (!(p.d_safe > 0.0)) throw std::invalid_argument("d_safe must be > 0");
  if (!(p.margin >= 0.0)) throw std::invalid_argument("margin must be >= 0");
}

double eval_h(Vec2 ego_pos, Vec2 other_pos, const RiskParams& p) {
  const double dx = ego_pos.x - other_pos.x;
  const double dy = (ego_pos.y - other_pos.y) / p.tau;
  return dx * dx + dy * dy - p.d_safe * p.d_safe;
}

double eval_h_dot(const NoisyAgentState& ego, const NoisyAgentState& other,
                  const RiskParams& p) {
  const Relative r = relative(ego, other);
  return 2.0 * r.dx * r.dvx + 2.0 / (p.tau * p.tau) * r.dy * r.dvy;
}

double eval_H_mean(const NoisyAgentState& ego, const NoisyAgentState& other,
                   const RiskParams& p) {
  return -eval_h_dot(ego, other, p) -
         p.gamma * eval_h(ego.pos_mean, other.pos_mean, p) + p.margin;
}

Gradient8 grad_H(const NoisyAgentState& ego, const NoisyAgentState& other,
                 const RiskParams& p) {
  const EgoGrad g = ego_grad(relative(ego, other), p);
  return {g.x, g.y, -g.x, -g.y, g.vx, g.vy, -g.vx, -g.vy};
}

double eval_H_variance(const NoisyAgentState& ego,
                       const NoisyAgentState& other, const RiskParams& p) {
  return quadratic_form(ego_grad(relative(ego, other), p),
                        combined_var(ego, other));
}

JointMoments joint_moments(const NoisyAgentState& ego,
                           const NoisyAgentState& other, const RiskParams& p) {
  return {eval_H_mean(ego, other, p), eval_H_variance(ego, other, p),
          grad_H(ego, other, p)};
}

double cvar_tail_multiplier(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("cvar: alpha must lie in (0, 1), got " +
                                std::to_string(alpha));
  }
  thread_local double cached_alpha = -1.0, cached_value = 0.0;
  if (alpha != cached_alpha) {
    const boost::math::normal_distribution<double> unit;
    const double z = boost::math::quantile(boost::math::complement(unit, alpha));
    cached_value = boost::math::pdf(unit, z) / alpha;
    cached_alpha = alpha;
  }
  return cached_value;
}

double cvar_gaussian(double mu, double sigma, double alpha) {
  const double k = cvar_tail_multiplier(alpha);
  if (!(sigma >= 0.0)) throw std::invalid_argument("cvar: sigma must be >= 0");
  if (sigma == 0.0) return mu;
  return mu + sigma * k;
}

double pairwise_risk(const NoisyAgentState& ego, const NoisyAgentState& other,
                     const RiskParams& p) {
  return cvar_gaussian(eval_H_mean(ego, other, p),
                       std::sqrt(eval_H_variance(ego, other, p)), p.alpha);
}

RiskWithEgoGradient pairwise_risk_with_ego_gradient(
    const NoisyAgentState& ego, const NoisyAgentState& other,
    const RiskParams& p) {
  const Relative r = relative(ego, other);
  const EgoGrad g = ego_grad(r, p);
  const CombinedVar c = combined_var(ego, other);
  const double var = quadratic_form(g, c);
  const double mean = eval_H_mean(ego, other, p);

  // d(mean)/d(ego) is the ego half of grad_H.
  RiskWithEgoGradient out{mean, g.x, g.y, g.vx, g.vy};
  if (var > 0.0) {
    const double k = cvar_tail_multiplier(p.alpha);
    const double sigma = std::sqrt(var);
    out.risk += k * sigma;
    // H is quadratic, so the gradient is affine in the ego means.
    const double inv_tau2 = 1.0 / (p.tau * p.tau);
    const double wx = c.x * g.x, wy = c.y * g.y, wvx = c.vx * g.vx,
                 wvy = c.vy * g.vy;
    const double s = k / sigma;
    out.d_x += s * (wx * (-2.0 * p.gamma) + wvx * (-2.0));
    out.d_y += s * (wy * (-2.0 * p.gamma * inv_tau2) + wvy * (-2.0 * inv_tau2));
    out.d_vx += s * (wx * (-2.0));
    out.d_vy += s * (wy * (-2.0 * inv_tau2));
  }
  return out;
}

std::optional<double> aggregate_risk(const NoisyAgentState& ego,
                                     std::span<const NoisyAgentState> others,
                                     std::span<const RiskParams> per_pair) {
  if (others.size() != per_pair.size()) {
    throw std::invalid_argument("aggregate_risk: " +
                                std::to_string(others.size()) +
                                " neighbors but " +
                                std::to_string(per_pair.size()) + " params");
  }
  std::optional<double> worst;
  for (std::size_t i = 0; i < others.size(); ++i) {
    const double r = pairwise_risk(ego, others[i], per_pair[i]);
    if (!worst || r > *worst) worst = r;
  }
  return worst;
}

bool check_safety_constraint(double risk, double tol) { return risk <= tol; }

double trajectory_safety_bound(double alpha, int steps) {
  return std::pow(1.0 - alpha, steps);
}

RiskParams pair_params(const RiskParams& base, const VehicleGeometry& ego,
                       const VehicleGeometry& other, const PairSizing& sizing) {
  RiskParams p = base;
  p.d_safe = 0.5 * (ego.body_length + other.body_length) + sizing.buffer_long;
  const double lateral =
      0.5 * (ego.body_width + other.body_width) + sizing.buffer_lat;
  p.tau = lateral / p.d_safe;
  return p;
}

double estimate_controller_margin(double v_rel_max, double d_max,
                                  double u_max, double v_max, double gamma,
                                  double dt) {
  return (2.0 * v_rel_max + 2.0 * gamma * d_max + 2.0 * u_max) * v_max * dt;
}

}  // namespace riskmpc
