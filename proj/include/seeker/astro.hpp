#pragma once

// Two-body dynamics, Earth-fixed observer kinematics and the angles-only
// measurement model shared by every other module.

#include "seeker/types.hpp"

namespace seeker::astro {

inline constexpr double kMu = 398600.4418;          // km^3/s^2
inline constexpr double kEarthRadius = 6378.137;    // km
inline constexpr double kEarthRate = 7.2921159e-5;  // rad/s

/// Seconds since the scenario reference epoch.
struct Epoch {
    double t = 0.0;

    friend Epoch operator+(Epoch e, double dt) { return Epoch{e.t + dt}; }
    friend double operator-(Epoch a, Epoch b) { return a.t - b.t; }
};

/// Inertial position (km) and velocity (km/s).
struct StateVector {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();

    Vec6 stacked() const {
        Vec6 x;
        x << position, velocity;
        return x;
    }
    static StateVector from(const Eigen::Ref<const Vec>& x) {
        return StateVector{x.head<3>(), x.segment<3>(3)};
    }
};

struct KeplerianElements {
    double a = 0.0;  // km
    double e = 0.0;
    double i = 0.0;  // rad
    double raan = 0.0;
    double argp = 0.0;
    double true_anomaly = 0.0;
};

struct ObserverSite {
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
    double altitude_km = 0.0;
};

struct AngleMeasurement {
    double ra = 0.0;   // [0, 2pi)
    double dec = 0.0;  // [-pi/2, pi/2]

    Vec2 vec() const { return {ra, dec}; }
};

/// Semimajor axis (negative when unbound) and eccentricity of an orbit.
struct OrbitShape {
    double a = 0.0;
    double e = 0.0;
    double periapsis() const { return a * (1.0 - e); }
};

double wrap_two_pi(double angle);
double wrap_pi(double angle);

StateVector kepler_to_cartesian(const KeplerianElements& el, double mu = kMu);
KeplerianElements cartesian_to_kepler(const StateVector& sv, double mu = kMu);
OrbitShape orbit_shape(const StateVector& sv, double mu = kMu);

/// Solves M = E - e sin E for E.
double solve_kepler(double mean_anomaly, double e);

/// Exact Kepler flow for any conic (eccentric-anomaly form for bound orbits,
/// universal variables otherwise).
StateVector propagate_two_body(const StateVector& sv, double dt, double mu = kMu);

/// `earth_angle0` is the Earth rotation angle (rad) at t = 0.
StateVector site_state(const ObserverSite& site, Epoch epoch, double earth_angle0 = 0.0);

AngleMeasurement measure_radec(const StateVector& target, const StateVector& observer);
AngleMeasurement measure_radec(const Vec3& target_position, const Vec3& observer_position);

/// d(ra, dec)/d(position, velocity); the velocity block is identically zero.
Mat26 measurement_jacobian(const StateVector& target, const StateVector& observer);
Mat26 measurement_jacobian(const Vec3& target_position, const Vec3& observer_position);

}  // namespace seeker::astro
