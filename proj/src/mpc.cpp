#include "riskmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "box_newton.hpp"

namespace riskmpc {

void validate(const MpcConfig& cfg) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("mpc: " + what); };
  if (cfg.horizon < 1) fail("horizon must be >= 1");
  if (!(cfg.dt > 0)) fail("dt must be > 0");
  if (!(cfg.p_s >= 0)) fail("p_s must be >= 0");
  if (cfg.lane_centers.empty()) fail("lane_centers must not be empty");
  const CostWeights& w = cfg.weights;
  if (!(w.w_v >= 0 && w.w_y >= 0 && w.w_a >= 0 && w.w_steer >= 0 && w.w_dsteer >= 0))
    fail("cost weights must be >= 0");
  const StateBounds& sb = cfg.state_bounds;
  if (!(sb.y_min < sb.y_max && sb.v_min < sb.v_max && sb.phi_min < sb.phi_max))
    fail("state bounds need min < max");
  const InputBounds& ib = cfg.input_bounds;
  if (!(ib.accel_min < ib.accel_max && ib.steer_min < ib.steer_max))
    fail("input bounds need min < max");
  if (!(ib.steer_min > -1.5 && ib.steer_max < 1.5)) fail("steer bounds must stay below pi/2");
  if (!(cfg.steer_rate_max > 0)) fail("steer_rate_max must be > 0");
  if (!(cfg.risk_tol >= 0)) fail("risk_tol must be >= 0");
  validate(cfg.ego_geometry);
}

const char* to_string(MpcStatus s) {
  switch (s) {
    case MpcStatus::optimal: return "optimal";
    case MpcStatus::max_iter: return "max_iter";
    case MpcStatus::infeasible: return "infeasible";
  }
  return "?";
}

std::vector<NoisyAgentState> predict_neighbors(std::span<const NoisyAgentState> others,
                                               int t, double dt,
                                               const PredictionGrowth& growth) {
  std::vector<NoisyAgentState> out(others.begin(), others.end());
  const double horizon = t * dt;
  for (NoisyAgentState& o : out) {
    o.pos_mean.x += o.vel_mean.x * horizon;
    o.pos_mean.y += o.vel_mean.y * horizon;
    o.pos_cov.xx += growth.pos * t;
    o.pos_cov.yy += growth.pos * t;
    o.vel_cov.xx += growth.vel * t;
    o.vel_cov.yy += growth.vel * t;
  }
  return out;
}

namespace {

// Signed offset from the nearest lane center.
double signed_lane_offset(double y, std::span<const double> centers) {
  double best = y - centers[0];
  for (std::size_t k = 1; k < centers.size(); ++k) {
    const double off = y - centers[k];
    if (std::abs(off) < std::abs(best)) best = off;
  }
  return best;
}

}  // namespace

double lane_offset(double y, std::span<const double> lane_centers) {
  return std::abs(signed_lane_offset(y, lane_centers));
}

double terminal_cost(const EgoState& s, const MpcConfig& cfg) {
  const double dv = s.v - cfg.v_ref;
  const double dy = signed_lane_offset(s.y, cfg.lane_centers);
  return cfg.weights.w_v * dv * dv + cfg.weights.w_y * dy * dy;
}

double stage_cost(const EgoState& s, const ControlInput& u, const ControlInput& u_prev,
                  const MpcConfig& cfg) {
  const CostWeights& w = cfg.weights;
  const double ds = u.steer - u_prev.steer;
  return terminal_cost(s, cfg) + w.w_a * u.accel * u.accel +
         w.w_steer * u.steer * u.steer + w.w_dsteer * ds * ds;
}

NoisyAgentState ego_as_agent(const EgoState& s, const MpcConfig& cfg) {
  return {{s.x, s.y},
          {s.v * std::cos(s.phi), s.v * std::sin(s.phi)},
          cfg.ego_pos_cov,
          cfg.ego_vel_cov};
}

std::vector<EgoState> rollout(const EgoState& s0, std::span<const ControlInput> controls,
                              const MpcConfig& cfg) {
  std::vector<EgoState> states;
  states.reserve(controls.size() + 1);
  states.push_back(s0);
  for (const ControlInput& u : controls) {
    states.push_back(bicycle_step(states.back(), u, cfg.ego_geometry, cfg.dt));
  }
  return states;
}

std::vector<std::optional<double>> predicted_risks(std::span<const EgoState> states,
                                                   std::span<const NoisyAgentState> others,
                                                   std::span<const RiskParams> per_pair,
                                                   const MpcConfig& cfg) {
  std::vector<std::optional<double>> out;
  out.reserve(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto pred = predict_neighbors(others, static_cast<int>(t), cfg.dt, cfg.growth);
    out.push_back(aggregate_risk(ego_as_agent(states[t], cfg), pred, per_pair));
  }
  return out;
}

namespace {

// A box side the initial state already violates cannot constrain the plan;
// it is lifted for that solve so the task cost can steer back.
StateBounds recovery_bounds(const StateBounds& sb, const EgoState& s0) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  StateBounds out = sb;
  if (s0.y > sb.y_max) out.y_max = kInf;
  if (s0.y < sb.y_min) out.y_min = -kInf;
  if (s0.v > sb.v_max) out.v_max = kInf;
  if (s0.v < sb.v_min) out.v_min = -kInf;
  if (s0.phi > sb.phi_max) out.phi_max = kInf;
  if (s0.phi < sb.phi_min) out.phi_min = -kInf;
  return out;
}

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Horizon problem in the flattened decision vector z = [a_0, steer_0, ...].
class HorizonProblem {
 public:
  HorizonProblem(const EgoState& s0, std::span<const NoisyAgentState> others,
                 std::span<const RiskParams> per_pair, const MpcConfig& cfg,
                 const ControlInput& previous)
      : s0_(s0), per_pair_(per_pair), cfg_(cfg), previous_(previous),
        n_(cfg.horizon), pairs_(static_cast<int>(others.size())),
        bounds_(recovery_bounds(cfg.state_bounds, s0)) {
    if (others.size() != per_pair.size()) {
      throw std::invalid_argument("solve_mpc: neighbor/params size mismatch");
    }
    predicted_.reserve(n_ + 1);
    for (int t = 0; t <= n_; ++t) {
      predicted_.push_back(predict_neighbors(others, t, cfg.dt, cfg.growth));
    }
  }

  int size() const { return 2 * n_; }

  // Risk constraints for t = 1..N-1 (t = 0 does not depend on the controls),
  // state boxes for t = 1..N, steering magnitude both ways for t = 0..N-1.
  int constraint_count() const { return (n_ - 1) * pairs_ + 6 * n_ + 2 * n_; }

  // The solver works on [a_t, steer_t - steer_{t-1}] so the steering-rate
  // bound is a box.
  VectorXd lower() const {
    VectorXd lo(size());
    for (int t = 0; t < n_; ++t) {
      lo[2 * t] = cfg_.input_bounds.accel_min;
      lo[2 * t + 1] = -cfg_.steer_rate_max;
    }
    return lo;
  }
  VectorXd upper() const {
    VectorXd hi(size());
    for (int t = 0; t < n_; ++t) {
      hi[2 * t] = cfg_.input_bounds.accel_max;
      hi[2 * t + 1] = cfg_.steer_rate_max;
    }
    return hi;
  }

  VectorXd increments_to_controls(const VectorXd& x) const {
    VectorXd z = x;
    double steer = previous_.steer;
    for (int t = 0; t < n_; ++t) {
      steer += x[2 * t + 1];
      z[2 * t + 1] = steer;
    }
    return z;
  }

  VectorXd controls_to_increments(const VectorXd& z) const {
    VectorXd x = z;
    double prev = previous_.steer;
    for (int t = 0; t < n_; ++t) {
      x[2 * t + 1] = z[2 * t + 1] - prev;
      prev = z[2 * t + 1];
    }
    return x;
  }

  // Chain rule from control-space to increment-space gradients.
  void gradient_to_increments(VectorXd& g) const {
    double tail = 0.0;
    for (int t = n_ - 1; t >= 0; --t) {
      tail += g[2 * t + 1];
      g[2 * t + 1] = tail;
    }
  }

  void hessian_to_increments(MatrixXd& h) const {
    for (int t = n_ - 2; t >= 0; --t) h.row(2 * t + 1) += h.row(2 * t + 3);
    for (int t = n_ - 2; t >= 0; --t) h.col(2 * t + 1) += h.col(2 * t + 3);
  }

  static std::vector<ControlInput> to_controls(const VectorXd& z) {
    std::vector<ControlInput> u(static_cast<std::size_t>(z.size() / 2));
    for (std::size_t t = 0; t < u.size(); ++t) u[t] = {z[2 * t], z[2 * t + 1]};
    return u;
  }

  static VectorXd to_vector(std::span<const ControlInput> u) {
    VectorXd z(2 * static_cast<Eigen::Index>(u.size()));
    for (std::size_t t = 0; t < u.size(); ++t) {
      z[2 * t] = u[t].accel;
      z[2 * t + 1] = u[t].steer;
    }
    return z;
  }

  // Augmented-Lagrangian state. Inactive when lambda is empty.
  struct Penalty {
    VectorXd lambda;
    double rho = 0.0;
  };

  // Objective plus the penalty terms. Fills grad if non-null, the internal
  // constraint values (with backoffs) if cons is non-null, and a
  // Gauss-Newton Hessian of the merit if hess is non-null.
  double evaluate(const VectorXd& z, const Penalty* pen, VectorXd* grad, VectorXd* cons,
                  MatrixXd* hess = nullptr) const {
    const CostWeights& w = cfg_.weights;
    const SolverSettings& ss = cfg_.solver;
    const double ps = cfg_.risk_weight();

    std::vector<EgoState> s(n_ + 1);
    s[0] = s0_;
    for (int t = 0; t < n_; ++t) {
      s[t + 1] = bicycle_step(s[t], {z[2 * t], z[2 * t + 1]}, cfg_.ego_geometry, cfg_.dt);
    }

    // Direct partials with respect to states and inputs.
    std::vector<std::array<double, 4>> ds(n_ + 1, {0, 0, 0, 0});
    std::vector<std::array<double, 2>> du(n_, {0, 0});
    const bool want_grad = grad != nullptr;

    std::vector<StepJacobian> jac;
    if (want_grad || hess) {
      jac.reserve(n_);
      for (int t = 0; t < n_; ++t) {
        jac.push_back(bicycle_step_jacobian(s[t], {z[2 * t], z[2 * t + 1]}, cfg_.ego_geometry,
                                            cfg_.dt));
      }
    }
    // Forward sensitivities d s_t / d z, only for the Hessian.
    std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>> sens;
    if (hess) {
      sens.assign(n_ + 1, Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, size()));
      for (int t = 0; t < n_; ++t) {
        Eigen::Matrix4d a;
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) a(r, c) = jac[t].ds[r][c];
        sens[t + 1] = a * sens[t];
        for (int r = 0; r < 4; ++r) {
          sens[t + 1](r, 2 * t) += jac[t].du[r][0];
          sens[t + 1](r, 2 * t + 1) += jac[t].du[r][1];
        }
      }
      hess->setZero(size(), size());
    }
    VectorXd row(hess ? size() : 0);
    auto add_outer = [&](double weight) { hess->noalias() += weight * row * row.transpose(); };

    double value = 0.0;
    double risk_sum = 0.0;
    for (int t = 0; t <= n_; ++t) {
      const double dv = s[t].v - cfg_.v_ref;
      const double dy = signed_lane_offset(s[t].y, cfg_.lane_centers);
      if (t > 0) {
        // The t = 0 state term is a constant.
        value += w.w_v * dv * dv + w.w_y * dy * dy;
        ds[t][2] += 2.0 * w.w_v * dv;
        ds[t][1] += 2.0 * w.w_y * dy;
        if (hess) {
          row = sens[t].row(2).transpose();
          add_outer(2.0 * w.w_v);
          row = sens[t].row(1).transpose();
          add_outer(2.0 * w.w_y);
        }
      } else {
        value += w.w_v * dv * dv + w.w_y * dy * dy;
      }
      if (t < n_) {
        const double a = z[2 * t], st = z[2 * t + 1];
        const double st_prev = t == 0 ? previous_.steer : z[2 * t - 1];
        value += w.w_a * a * a + w.w_steer * st * st +
                 w.w_dsteer * (st - st_prev) * (st - st_prev);
        du[t][0] += 2.0 * w.w_a * a;
        du[t][1] += 2.0 * w.w_steer * st + 2.0 * w.w_dsteer * (st - st_prev);
        if (t > 0) du[t - 1][1] -= 2.0 * w.w_dsteer * (st - st_prev);
        if (hess) {
          MatrixXd& h = *hess;
          h(2 * t, 2 * t) += 2.0 * w.w_a;
          h(2 * t + 1, 2 * t + 1) += 2.0 * (w.w_steer + w.w_dsteer);
          if (t > 0) {
            h(2 * t - 1, 2 * t - 1) += 2.0 * w.w_dsteer;
            h(2 * t + 1, 2 * t - 1) -= 2.0 * w.w_dsteer;
            h(2 * t - 1, 2 * t + 1) -= 2.0 * w.w_dsteer;
          }
        }
      }
    }

    int ci = 0;
    auto constraint = [&](double g, int t, const std::array<double, 4>* dgs, int u_idx,
                          int u_comp, double u_sign) {
      if (cons) (*cons)[ci] = g;
      if (pen) {
        const double lam = pen->lambda[ci];
        const double shifted = lam + pen->rho * g;
        if (shifted > 0.0) {
          value += lam * g + 0.5 * pen->rho * g * g;
          if (want_grad) {
            if (dgs) {
              for (int k = 0; k < 4; ++k) ds[t][k] += shifted * (*dgs)[k];
            }
            if (u_idx >= 0) du[u_idx][u_comp] += shifted * u_sign;
          }
          if (hess) {
            row.setZero();
            if (dgs) {
              for (int k = 0; k < 4; ++k) row += (*dgs)[k] * sens[t].row(k).transpose();
            }
            if (u_idx >= 0) row[2 * u_idx + u_comp] += u_sign;
            add_outer(pen->rho);
          }
        } else {
          value -= lam * lam / (2.0 * pen->rho);
        }
      }
      ++ci;
    };

    // Risk terms.
    for (int t = 0; t <= n_; ++t) {
      if (pairs_ == 0) break;
      const NoisyAgentState ego = ego_as_agent(s[t], cfg_);
      const double c = std::cos(s[t].phi), sn = std::sin(s[t].phi), v = s[t].v;
      double worst = -std::numeric_limits<double>::infinity();
      std::array<double, 4> worst_grad{};
      for (int i = 0; i < pairs_; ++i) {
        const RiskWithEgoGradient r =
            pairwise_risk_with_ego_gradient(ego, predicted_[t][i], per_pair_[i]);
        const std::array<double, 4> dr{r.d_x, r.d_y, r.d_vx * c + r.d_vy * sn,
                                       -r.d_vx * v * sn + r.d_vy * v * c};
        if (r.risk > worst) {
          worst = r.risk;
          worst_grad = dr;
        }
        if (t >= 1 && t < n_) {
          constraint(r.risk - cfg_.risk_tol + ss.risk_backoff, t, &dr, -1, 0, 0.0);
        }
      }
      risk_sum += worst;
      if (want_grad && ps != 0.0) {
        for (int k = 0; k < 4; ++k) ds[t][k] += ps * worst_grad[k];
      }
    }
    value += ps * risk_sum;

    // State boxes.
    const StateBounds& sb = bounds_;
    for (int t = 1; t <= n_; ++t) {
      const std::array<double, 4> e_y{0, 1, 0, 0}, e_v{0, 0, 1, 0}, e_phi{0, 0, 0, 1};
      const std::array<double, 4> m_y{0, -1, 0, 0}, m_v{0, 0, -1, 0}, m_phi{0, 0, 0, -1};
      constraint(s[t].y - sb.y_max + ss.state_backoff, t, &e_y, -1, 0, 0.0);
      constraint(sb.y_min - s[t].y + ss.state_backoff, t, &m_y, -1, 0, 0.0);
      constraint(s[t].v - sb.v_max + ss.state_backoff, t, &e_v, -1, 0, 0.0);
      constraint(sb.v_min - s[t].v + ss.state_backoff, t, &m_v, -1, 0, 0.0);
      constraint(s[t].phi - sb.phi_max + ss.state_backoff, t, &e_phi, -1, 0, 0.0);
      constraint(sb.phi_min - s[t].phi + ss.state_backoff, t, &m_phi, -1, 0, 0.0);
    }

    // Steering magnitude (the rate is a box in increment space).
    const InputBounds& ib = cfg_.input_bounds;
    for (int t = 0; t < n_; ++t) {
      constraint(z[2 * t + 1] - ib.steer_max + ss.state_backoff, t, nullptr, t, 1, 1.0);
      constraint(ib.steer_min - z[2 * t + 1] + ss.state_backoff, t, nullptr, t, 1, -1.0);
    }

    if (want_grad) {
      // Adjoint sweep through the rollout.
      std::array<double, 4> adj = ds[n_];
      grad->resize(size());
      for (int t = n_ - 1; t >= 0; --t) {
        const StepJacobian& j = jac[t];
        for (int c = 0; c < 2; ++c) {
          double acc = du[t][c];
          for (int r = 0; r < 4; ++r) acc += j.du[r][c] * adj[r];
          (*grad)[2 * t + c] = acc;
        }
        std::array<double, 4> next = ds[t];
        for (int c = 0; c < 4; ++c) {
          for (int r = 0; r < 4; ++r) next[c] += j.ds[r][c] * adj[r];
        }
        adj = next;
      }
    }
    return value;
  }

  double task_and_risk(const VectorXd& z) const { return evaluate(z, nullptr, nullptr, nullptr); }

 private:
  EgoState s0_;
  std::span<const RiskParams> per_pair_;
  const MpcConfig& cfg_;
  ControlInput previous_;
  int n_;
  int pairs_;
  StateBounds bounds_;
  std::vector<std::vector<NoisyAgentState>> predicted_;
};

struct Attempt {
  VectorXd z;
  double objective = std::numeric_limits<double>::infinity();
  double max_internal_violation = std::numeric_limits<double>::infinity();
  bool stationary = false;
  int iterations = 0;
};

Attempt run_augmented_lagrangian(const HorizonProblem& prob, const VectorXd& controls,
                                 const SolverSettings& ss) {
  const VectorXd lo = prob.lower(), hi = prob.upper();
  VectorXd x = prob.controls_to_increments(controls).cwiseMax(lo).cwiseMin(hi);
  HorizonProblem::Penalty pen{VectorXd::Zero(prob.constraint_count()), ss.rho_init};
  VectorXd cons(prob.constraint_count());

  // Internal constraints sit inside the exact limits by the backoffs, so a
  // violation well below them still certifies.
  const double feas_tol = 0.1 * std::min(ss.risk_backoff, ss.state_backoff);
  Attempt out;
  double prev_violation = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < ss.max_outer; ++outer) {
    const detail::NewtonObjective merit = [&](const VectorXd& xi, VectorXd* g, MatrixXd* h) {
      const double f = prob.evaluate(prob.increments_to_controls(xi), &pen, g, nullptr, h);
      if (g) prob.gradient_to_increments(*g);
      if (h) prob.hessian_to_increments(*h);
      return f;
    };
    const detail::NewtonResult inner =
        detail::minimize_box_newton(merit, x, lo, hi, ss.max_inner, ss.stationarity_tol);
    out.iterations += inner.iterations;

    const VectorXd z = prob.increments_to_controls(x);
    prob.evaluate(z, nullptr, nullptr, &cons);
    const double violation = std::max(0.0, cons.maxCoeff());
    double complementarity = 0.0;
    for (Eigen::Index j = 0; j < cons.size(); ++j) {
      pen.lambda[j] = std::max(0.0, pen.lambda[j] + pen.rho * cons[j]);
      complementarity = std::max(complementarity, std::min(-cons[j], pen.lambda[j]));
    }
    out.stationary = inner.converged && complementarity <= feas_tol;
    if (violation <= feas_tol && out.stationary) break;
    if (violation > 0.25 * prev_violation) pen.rho = std::min(pen.rho * ss.rho_growth, ss.rho_max);
    prev_violation = violation;
  }
  VectorXd z = prob.increments_to_controls(x);
  prob.evaluate(z, nullptr, nullptr, &cons);
  out.max_internal_violation = std::max(0.0, cons.maxCoeff());
  out.objective = prob.task_and_risk(z);
  out.z = std::move(z);
  return out;
}

std::vector<std::vector<ControlInput>> initial_guesses(const MpcConfig& cfg,
                                                       const SolveOptions& opts) {
  const int n = cfg.horizon;
  std::vector<std::vector<ControlInput>> seeds;
  if (static_cast<int>(opts.warm_start.size()) == n) seeds.push_back(opts.warm_start);
  seeds.emplace_back(n, ControlInput{0.0, 0.0});
  if (cfg.solver.lateral_seeds) {
    for (double sign : {1.0, -1.0}) {
      std::vector<ControlInput> u(n);
      double steer = opts.previous.steer;
      for (int t = 0; t < n; ++t) {
        const double target = t < n / 2 ? sign * 0.1 : -sign * 0.1;
        steer += std::clamp(target - steer, -cfg.steer_rate_max, cfg.steer_rate_max);
        u[t] = {0.0, steer};
      }
      seeds.push_back(std::move(u));
    }
  }
  return seeds;
}

}  // namespace

double objective(std::span<const ControlInput> controls, const EgoState& s0,
                 std::span<const NoisyAgentState> others, std::span<const RiskParams> per_pair,
                 const MpcConfig& cfg, const ControlInput& previous) {
  if (static_cast<int>(controls.size()) != cfg.horizon) {
    throw std::invalid_argument("objective: controls length must equal the horizon");
  }
  const HorizonProblem prob(s0, others, per_pair, cfg, previous);
  return prob.task_and_risk(HorizonProblem::to_vector(controls));
}

std::vector<double> objective_gradient(std::span<const ControlInput> controls,
                                       const EgoState& s0,
                                       std::span<const NoisyAgentState> others,
                                       std::span<const RiskParams> per_pair,
                                       const MpcConfig& cfg, const ControlInput& previous) {
  const HorizonProblem prob(s0, others, per_pair, cfg, previous);
  VectorXd g;
  prob.evaluate(HorizonProblem::to_vector(controls), nullptr, &g, nullptr);
  return {g.data(), g.data() + g.size()};
}

Certification certify(const EgoState& s0, std::span<const ControlInput> controls,
                      std::span<const NoisyAgentState> others,
                      std::span<const RiskParams> per_pair, const MpcConfig& cfg,
                      const ControlInput& previous) {
  Certification c;
  const auto states = rollout(s0, controls, cfg);
  const auto risks = predicted_risks(states, others, per_pair, cfg);
  const int n = static_cast<int>(controls.size());
  c.max_risk_violation = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < n; ++t) {
    if (risks[t]) c.max_risk_violation = std::max(c.max_risk_violation, *risks[t] - cfg.risk_tol);
  }
  const StateBounds sb = recovery_bounds(cfg.state_bounds, s0);
  c.max_state_violation = -std::numeric_limits<double>::infinity();
  for (int t = 1; t <= n; ++t) {
    const EgoState& s = states[t];
    c.max_state_violation = std::max({c.max_state_violation, s.y - sb.y_max, sb.y_min - s.y,
                                      s.v - sb.v_max, sb.v_min - s.v, s.phi - sb.phi_max,
                                      sb.phi_min - s.phi});
  }
  const InputBounds& ib = cfg.input_bounds;
  c.max_input_violation = -std::numeric_limits<double>::infinity();
  c.max_rate_violation = -std::numeric_limits<double>::infinity();
  double prev = previous.steer;
  for (const ControlInput& u : controls) {
    c.max_input_violation =
        std::max({c.max_input_violation, u.accel - ib.accel_max, ib.accel_min - u.accel,
                  u.steer - ib.steer_max, ib.steer_min - u.steer});
    c.max_rate_violation = std::max(c.max_rate_violation, std::abs(u.steer - prev) - cfg.steer_rate_max);
    prev = u.steer;
  }
  c.ok = c.max_risk_violation <= 0.0 && c.max_state_violation <= 0.0 &&
         c.max_input_violation <= 0.0 && c.max_rate_violation <= 1e-12;
  return c;
}

MpcSolution fallback_brake(const EgoState& s0, std::span<const NoisyAgentState> others,
                           std::span<const RiskParams> per_pair, const MpcConfig& cfg) {
  MpcSolution sol;
  sol.controls.assign(cfg.horizon, ControlInput{cfg.input_bounds.accel_min, 0.0});
  sol.predicted_states = rollout(s0, sol.controls, cfg);
  sol.predicted_risks = predicted_risks(sol.predicted_states, others, per_pair, cfg);
  sol.objective = objective(sol.controls, s0, others, per_pair, cfg);
  sol.status = MpcStatus::infeasible;
  return sol;
}

MpcSolution solve_mpc(const EgoState& s0, std::span<const NoisyAgentState> others,
                      std::span<const RiskParams> per_pair, const MpcConfig& cfg,
                      const SolveOptions& opts) {
  const HorizonProblem prob(s0, others, per_pair, cfg, opts.previous);

  // The current risk cannot be changed by any control.
  const auto r0 = aggregate_risk(ego_as_agent(s0, cfg),
                                 predict_neighbors(others, 0, cfg.dt, cfg.growth), per_pair);
  if (r0 && !check_safety_constraint(*r0, cfg.risk_tol)) {
    return fallback_brake(s0, others, per_pair, cfg);
  }

  std::optional<Attempt> best;
  int iterations = 0;
  for (const auto& seed : initial_guesses(cfg, opts)) {
    Attempt a = run_augmented_lagrangian(prob, HorizonProblem::to_vector(seed), cfg.solver);
    iterations += a.iterations;
    const auto u = HorizonProblem::to_controls(a.z);
    {
      auto cc = certify(s0, u, others, per_pair, cfg, opts.previous);
      if (!cc.ok) continue;
    }
    if (!best || a.objective < best->objective) best = std::move(a);
  }
  if (!best) {
    MpcSolution fb = fallback_brake(s0, others, per_pair, cfg);
    fb.iterations = iterations;
    return fb;
  }

  MpcSolution sol;
  sol.controls = HorizonProblem::to_controls(best->z);
  sol.predicted_states = rollout(s0, sol.controls, cfg);
  sol.predicted_risks = predicted_risks(sol.predicted_states, others, per_pair, cfg);
  sol.objective = best->objective;
  sol.status = best->stationary ? MpcStatus::optimal : MpcStatus::max_iter;
  sol.iterations = iterations;
  return sol;
}

}  // namespace riskmpc
