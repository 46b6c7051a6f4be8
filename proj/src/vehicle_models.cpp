#include "riskmpc/vehicle_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace riskmpc {

namespace {

constexpr double kPi = std::numbers::pi;

struct Derivative {
  double x, y, v, phi;
};

Derivative bicycle_rhs(const EgoState& s, const ControlInput& u,
                       const VehicleGeometry& geom) {
  const double beta = slip_angle(u.steer);
  return {s.v * std::cos(s.phi + beta), s.v * std::sin(s.phi + beta), u.accel,
          s.v / geom.wheelbase * std::sin(beta)};
}

}  // namespace

double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

double slip_angle(double steer) { return std::atan(0.5 * std::tan(steer)); }

double slip_angle_derivative(double steer) {
  const double t = std::tan(steer);
  const double sec2 = 1.0 + t * t;
  return 0.5 * sec2 / (1.0 + 0.25 * t * t);
}

EgoState bicycle_step(const EgoState& s, const ControlInput& u,
                      const VehicleGeometry& geom, double dt) {
  const Derivative d = bicycle_rhs(s, u, geom);
  return {s.x + d.x * dt, s.y + d.y * dt, std::max(0.0, s.v + d.v * dt),
          wrap_angle(s.phi + d.phi * dt)};
}

EgoState bicycle_step_rk4(const EgoState& s, const ControlInput& u,
                          const VehicleGeometry& geom, double dt) {
  auto offset = [&](const Derivative& k, double h) {
    return EgoState{s.x + h * k.x, s.y + h * k.y, s.v + h * k.v,
                    s.phi + h * k.phi};
  };
  const Derivative k1 = bicycle_rhs(s, u, geom);
  const Derivative k2 = bicycle_rhs(offset(k1, 0.5 * dt), u, geom);
  const Derivative k3 = bicycle_rhs(offset(k2, 0.5 * dt), u, geom);
  const Derivative k4 = bicycle_rhs(offset(k3, dt), u, geom);
  const double w = dt / 6.0;
  return {s.x + w * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
          s.y + w * (k1.y + 2 * k2.y + 2 * k3.y + k4.y),
          std::max(0.0, s.v + w * (k1.v + 2 * k2.v + 2 * k3.v + k4.v)),
          wrap_angle(s.phi + w * (k1.phi + 2 * k2.phi + 2 * k3.phi + k4.phi))};
}

StepJacobian bicycle_step_jacobian(const EgoState& s, const ControlInput& u,
                                   const VehicleGeometry& geom, double dt) {
  const double beta = slip_angle(u.steer);
  const double dbeta = slip_angle_derivative(u.steer);
  const double c = std::cos(s.phi + beta);
  const double sn = std::sin(s.phi + beta);
  const double l = geom.wheelbase;

  StepJacobian j{};
  // x
  j.ds[0][0] = 1.0;
  j.ds[0][2] = c * dt;
  j.ds[0][3] = -s.v * sn * dt;
  j.du[0][1] = -s.v * sn * dt * dbeta;
  // y
  j.ds[1][1] = 1.0;
  j.ds[1][2] = sn * dt;
  j.ds[1][3] = s.v * c * dt;
  j.du[1][1] = s.v * c * dt * dbeta;
  // v, zero past the clamp
  if (s.v + u.accel * dt > 0.0) {
    j.ds[2][2] = 1.0;
    j.du[2][0] = dt;
  }
  // phi
  j.ds[3][2] = std::sin(beta) / l * dt;
  j.ds[3][3] = 1.0;
  j.du[3][1] = s.v / l * std::cos(beta) * dbeta * dt;
  return j;
}

double idm_desired_gap(double v, double delta_v, const IdmParams& p) {
  return p.s0 + v * p.T + v * delta_v / (2.0 * std::sqrt(p.a_max * p.b));
}

double idm_accel(double v, std::optional<double> gap, double delta_v,
                 const IdmParams& p) {
  double a = p.a_max * (1.0 - std::pow(v / p.v0, p.exponent));
  if (gap) {
    if (!(*gap > 0.0)) {
      throw std::invalid_argument("idm_accel: non-positive gap to leader");
    }
    const double ratio = idm_desired_gap(v, delta_v, p) / *gap;
    a -= p.a_max * ratio * ratio;
  }
  return std::clamp(a, -p.b_emergency, p.a_max);
}

void validate(const IdmParams& p) {
  if (!(p.v0 > 0 && p.T > 0 && p.s0 > 0 && p.a_max > 0 && p.b > 0 &&
        p.exponent > 0 && p.b_emergency > 0)) {
    throw std::invalid_argument("IDM parameters must be strictly positive");
  }
}

void validate(const VehicleGeometry& g) {
  if (!(g.wheelbase > 0 && g.body_length > 0 && g.body_width > 0)) {
    throw std::invalid_argument("vehicle geometry must be strictly positive");
  }
}

}  // namespace riskmpc
