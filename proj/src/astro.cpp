#include "seeker/astro.hpp"

#include <cmath>
#include <sstream>

namespace seeker::astro {

namespace {

constexpr int kKeplerMaxIter = 50;
constexpr double kKeplerTol = 1e-12;
constexpr double kDegenerate = 1e-10;

// Solves x - c sin x + s (1 - cos x) = m, with c^2 + s^2 = e^2 < 1.
// With c = e, s = 0 this is Kepler's equation; with c = e cos E0,
// s = e sin E0 it gives the eccentric-anomaly change from E0.
double solve_kepler_generic(double m, double c, double s) {
    const double turns = std::floor((m + kPi) / kTwoPi);
    const double reduced = m - turns * kTwoPi;
    auto f = [&](double x) { return x - c * std::sin(x) + s * (1.0 - std::cos(x)) - reduced; };
    auto df = [&](double x) { return 1.0 - c * std::cos(x) + s * std::sin(x); };

    double x = reduced;
    for (int it = 0; it < kKeplerMaxIter; ++it) {
        const double step = f(x) / df(x);
        x -= step;
        if (std::abs(step) < kKeplerTol) return x + turns * kTwoPi;
    }

    // Newton stalled; f is monotone so bisection on a bracket of width 2(|c|+2|s|) converges.
    double lo = reduced - 3.0, hi = reduced + 3.0;
    for (int it = 0; it < kKeplerMaxIter; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) hi = mid; else lo = mid;
        if (hi - lo < kKeplerTol) return 0.5 * (lo + hi) + turns * kTwoPi;
    }
    std::ostringstream msg;
    msg << "Kepler equation did not converge (M=" << m << ", c=" << c << ", s=" << s << ")";
    throw NumericalError(msg.str());
}

Mat3 perifocal_to_inertial(double raan, double i, double argp) {
    return (Eigen::AngleAxisd(raan, Vec3::UnitZ()) * Eigen::AngleAxisd(i, Vec3::UnitX()) *
            Eigen::AngleAxisd(argp, Vec3::UnitZ()))
        .toRotationMatrix();
}

}  // namespace

double wrap_two_pi(double angle) {
    double w = std::fmod(angle, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;
    return w;
}

double wrap_pi(double angle) {
    double w = wrap_two_pi(angle);
    if (w > kPi) w -= kTwoPi;
    return w;
}

StateVector kepler_to_cartesian(const KeplerianElements& el, double mu) {
    if (!(el.e >= 0.0 && el.e < 1.0)) throw InvalidInput("kepler_to_cartesian: requires 0 <= e < 1");
    if (!(el.a > 0.0)) throw InvalidInput("kepler_to_cartesian: requires a > 0");

    const double p = el.a * (1.0 - el.e * el.e);
    const double cnu = std::cos(el.true_anomaly);
    const double snu = std::sin(el.true_anomaly);
    const double r = p / (1.0 + el.e * cnu);
    const double vscale = std::sqrt(mu / p);

    const Mat3 rot = perifocal_to_inertial(el.raan, el.i, el.argp);
    return StateVector{rot * Vec3(r * cnu, r * snu, 0.0),
                       rot * Vec3(-vscale * snu, vscale * (el.e + cnu), 0.0)};
}

OrbitShape orbit_shape(const StateVector& sv, double mu) {
    const double r = sv.position.norm();
    const double v2 = sv.velocity.squaredNorm();
    const double energy = 0.5 * v2 - mu / r;
    const Vec3 evec = ((v2 - mu / r) * sv.position - sv.position.dot(sv.velocity) * sv.velocity) / mu;
    return OrbitShape{-mu / (2.0 * energy), evec.norm()};
}

KeplerianElements cartesian_to_kepler(const StateVector& sv, double mu) {
    const Vec3& r = sv.position;
    const Vec3& v = sv.velocity;
    const double rn = r.norm();
    if (!(rn > 0.0)) throw InvalidInput("cartesian_to_kepler: zero position");

    const Vec3 h = r.cross(v);
    const double hn = h.norm();
    if (hn < kDegenerate * rn * std::max(v.norm(), 1e-300))
        throw NumericalError("cartesian_to_kepler: rectilinear orbit (vanishing angular momentum)");

    const Vec3 node = Vec3::UnitZ().cross(h);
    const double nn = node.norm();
    const Vec3 evec = ((v.squaredNorm() - mu / rn) * r - r.dot(v) * v) / mu;
    const double e = evec.norm();
    const double energy = 0.5 * v.squaredNorm() - mu / rn;

    KeplerianElements el;
    el.a = -mu / (2.0 * energy);
    el.e = e;
    el.i = std::atan2(std::hypot(h.x(), h.y()), h.z());

    const bool equatorial = nn < kDegenerate * hn;
    const bool circular = e < kDegenerate;
    const Vec3 hhat = h / hn;

    el.raan = equatorial ? 0.0 : wrap_two_pi(std::atan2(node.y(), node.x()));
    // Reference direction in the orbit plane from which argp is measured.
    const Vec3 ref = equatorial ? Vec3::UnitX().eval() : (node / nn).eval();
    const Vec3 ref_perp = hhat.cross(ref);

    if (circular) {
        el.argp = 0.0;
        el.true_anomaly = wrap_two_pi(std::atan2(r.dot(ref_perp), r.dot(ref)));
    } else {
        el.argp = wrap_two_pi(std::atan2(evec.dot(ref_perp), evec.dot(ref)));
        const Vec3 ehat = evec / e;
        el.true_anomaly = wrap_two_pi(std::atan2(r.dot(hhat.cross(ehat)), r.dot(ehat)));
    }
    return el;
}

double solve_kepler(double mean_anomaly, double e) {
    if (!(e >= 0.0 && e < 1.0)) throw InvalidInput("solve_kepler: requires 0 <= e < 1");
    return solve_kepler_generic(mean_anomaly, e, 0.0);
}

namespace {

// Stumpff functions C(z), S(z).
void stumpff(double z, double& c, double& s) {
    if (z > 1e-6) {
        const double sz = std::sqrt(z);
        c = (1.0 - std::cos(sz)) / z;
        s = (sz - std::sin(sz)) / (sz * z);
    } else if (z < -1e-6) {
        const double sz = std::sqrt(-z);
        c = (std::cosh(sz) - 1.0) / (-z);
        s = (std::sinh(sz) - sz) / (sz * -z);
    } else {
        c = 0.5 - z / 24.0 + z * z / 720.0;
        s = 1.0 / 6.0 - z / 120.0 + z * z / 5040.0;
    }
}

// Universal-variable form, used for unbound and near-parabolic states.
StateVector propagate_universal(const StateVector& sv, double dt, double mu, double alpha) {
    const Vec3& r0 = sv.position;
    const Vec3& v0 = sv.velocity;
    const double r0n = r0.norm();
    const double sqmu = std::sqrt(mu);
    const double sigma0 = r0.dot(v0) / sqmu;
    const double target = sqmu * dt;

    // F(x) is strictly increasing in x (dF/dx = r > 0).
    auto eval = [&](double x, double& f, double& df) {
        double c, s;
        const double z = alpha * x * x;
        stumpff(z, c, s);
        f = sigma0 * x * x * c + (1.0 - alpha * r0n) * x * x * x * s + r0n * x - target;
        df = x * x * c + sigma0 * x * (1.0 - z * s) + r0n * (1.0 - z * c);
    };

    double x = target / r0n;
    double f = 0.0, df = 0.0;
    bool converged = false;
    for (int it = 0; it < kKeplerMaxIter; ++it) {
        eval(x, f, df);
        const double step = f / df;
        if (!std::isfinite(step)) break;
        x -= step;
        if (std::abs(step) <= kKeplerTol * std::max(1.0, std::abs(x))) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        double lo = 0.0, hi = 0.0, step = target / r0n;
        if (step == 0.0) step = 1.0;
        eval(0.0, f, df);
        // f(0) = -target; walk outward until the sign changes.
        double probe = step;
        for (int it = 0; it < 200; ++it, probe *= 2.0) {
            eval(probe, f, df);
            if ((dt > 0.0 && f > 0.0) || (dt < 0.0 && f < 0.0)) break;
        }
        lo = std::min(0.0, probe);
        hi = std::max(0.0, probe);
        for (int it = 0; it < 400; ++it) {
            x = 0.5 * (lo + hi);
            eval(x, f, df);
            if (f > 0.0) hi = x; else lo = x;
            if (hi - lo <= kKeplerTol * std::max(1.0, std::abs(x))) break;
        }
        if (!std::isfinite(x)) throw NumericalError("propagate_two_body: universal Kepler equation did not converge");
    }

    double c, s;
    const double z = alpha * x * x;
    stumpff(z, c, s);
    const double r = x * x * c + sigma0 * x * (1.0 - z * s) + r0n * (1.0 - z * c);
    const double fl = 1.0 - x * x / r0n * c;
    const double gl = dt - x * x * x / sqmu * s;
    const double fdot = sqmu / (r * r0n) * x * (z * s - 1.0);
    const double gdot = 1.0 - x * x / r * c;
    return StateVector{fl * r0 + gl * v0, fdot * r0 + gdot * v0};
}

}  // namespace

StateVector propagate_two_body(const StateVector& sv, double dt, double mu) {
    if (!std::isfinite(dt)) throw InvalidInput("propagate_two_body: non-finite dt");
    if (dt == 0.0) return sv;

    const Vec3& r0 = sv.position;
    const Vec3& v0 = sv.velocity;
    const double r0n = r0.norm();
    if (!(r0n > 0.0)) throw InvalidInput("propagate_two_body: zero position");
    const double alpha = 2.0 / r0n - v0.squaredNorm() / mu;  // 1/a
    // Bound orbits far from parabolic use the eccentric-anomaly form.
    if (!(alpha * r0n > 1e-3)) return propagate_universal(sv, dt, mu, alpha);

    const double a = 1.0 / alpha;
    const double sqrt_a = std::sqrt(a);
    const double sigma0 = r0.dot(v0) / std::sqrt(mu);
    const double n = std::sqrt(mu * alpha * alpha * alpha);

    const double ecos = 1.0 - r0n * alpha;
    const double esin = sigma0 / sqrt_a;
    const double dE = solve_kepler_generic(n * dt, ecos, esin);

    const double c = std::cos(dE);
    const double s = std::sin(dE);
    const double r = a + (r0n - a) * c + sigma0 * sqrt_a * s;

    // Lagrange coefficients in terms of the eccentric-anomaly change.
    const double f = 1.0 - a / r0n * (1.0 - c);
    const double g = dt - std::sqrt(a * a * a / mu) * (dE - s);
    const double fdot = -std::sqrt(mu * a) / (r * r0n) * s;
    const double gdot = 1.0 - a / r * (1.0 - c);

    return StateVector{f * r0 + g * v0, fdot * r0 + gdot * v0};
}

StateVector site_state(const ObserverSite& site, Epoch epoch, double earth_angle0) {
    const double lat = site.latitude_deg * kDeg;
    const double theta = site.longitude_deg * kDeg + earth_angle0 + kEarthRate * epoch.t;
    const double rad = kEarthRadius + site.altitude_km;
    const Vec3 pos(rad * std::cos(lat) * std::cos(theta), rad * std::cos(lat) * std::sin(theta),
                   rad * std::sin(lat));
    const Vec3 omega(0.0, 0.0, kEarthRate);
    return StateVector{pos, omega.cross(pos)};
}

AngleMeasurement measure_radec(const Vec3& target_position, const Vec3& observer_position) {
    const Vec3 los = target_position - observer_position;
    const double range = los.norm();
    if (!(range > 0.0)) throw InvalidInput("measure_radec: zero range");
    const double horiz = std::hypot(los.x(), los.y());
    const double ra = horiz > 0.0 ? wrap_two_pi(std::atan2(los.y(), los.x())) : 0.0;
    return AngleMeasurement{ra, std::atan2(los.z(), horiz)};
}

AngleMeasurement measure_radec(const StateVector& target, const StateVector& observer) {
    return measure_radec(target.position, observer.position);
}

Mat26 measurement_jacobian(const Vec3& target_position, const Vec3& observer_position) {
    const Vec3 los = target_position - observer_position;
    const double rho2 = los.squaredNorm();
    if (!(rho2 > 0.0)) throw InvalidInput("measurement_jacobian: zero range");
    const double s2 = los.x() * los.x() + los.y() * los.y();
    const double s = std::sqrt(s2);

    Mat26 jac = Mat26::Zero();
    if (s > 0.0) {
        jac(0, 0) = -los.y() / s2;
        jac(0, 1) = los.x() / s2;
        jac(1, 0) = -los.x() * los.z() / (rho2 * s);
        jac(1, 1) = -los.y() * los.z() / (rho2 * s);
        jac(1, 2) = s / rho2;
    }
    return jac;
}

Mat26 measurement_jacobian(const StateVector& target, const StateVector& observer) {
    return measurement_jacobian(target.position, observer.position);
}

}  // namespace seeker::astro
