#pragma once

#include <optional>

namespace riskmpc {

/// Kinematic bicycle state. Heading is kept in (-pi, pi].
struct EgoState {
  double x = 0.0;    // longitudinal position [m]
  double y = 0.0;    // lateral position [m]
  double v = 0.0;    // speed [m/s]
  double phi = 0.0;  // heading [rad]
};

struct ControlInput {
  double accel = 0.0;  // [m/s^2]
  double steer = 0.0;  // front-wheel angle [rad]
};

struct VehicleGeometry {
  double wheelbase = 4.0;
  double body_length = 5.0;
  double body_width = 2.0;
};

struct IdmParams {
  double v0 = 15.0;        // desired speed [m/s]
  double T = 1.5;          // time headway [s]
  double s0 = 2.0;         // jam distance [m]
  double a_max = 1.5;      // [m/s^2]
  double b = 2.0;          // comfortable deceleration [m/s^2]
  double exponent = 4.0;
  double b_emergency = 6.0;  // lower clamp on the returned acceleration
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Side-slip angle at the center of gravity, rear axle ratio 1/2.
double slip_angle(double steer);

/// d(slip_angle)/d(steer).
double slip_angle_derivative(double steer);

/// One explicit-Euler step of the kinematic bicycle model.
EgoState bicycle_step(const EgoState& s, const ControlInput& u,
                      const VehicleGeometry& geom, double dt);

/// Classical RK4 step with the input held constant over dt. Used as the
/// reference integrator; speed is clamped at zero only at the end.
EgoState bicycle_step_rk4(const EgoState& s, const ControlInput& u,
                          const VehicleGeometry& geom, double dt);

/// Partial derivatives of one Euler step, row-major 4x4 (state) and 4x2
/// (input), in the order (x, y, v, phi) and (accel, steer).
struct StepJacobian {
  double ds[4][4];
  double du[4][2];
};

StepJacobian bicycle_step_jacobian(const EgoState& s, const ControlInput& u,
                                   const VehicleGeometry& geom, double dt);

/// IDM acceleration. `gap` is the bumper-to-bumper distance to the leader
/// (nullopt on a free road), `delta_v` the approach rate v - v_leader.
/// Throws std::invalid_argument for a non-positive gap.
double idm_accel(double v, std::optional<double> gap, double delta_v,
                 const IdmParams& p);

/// Desired dynamic gap s* of the IDM.
double idm_desired_gap(double v, double delta_v, const IdmParams& p);

void validate(const IdmParams& p);
void validate(const VehicleGeometry& g);

}  // namespace riskmpc
