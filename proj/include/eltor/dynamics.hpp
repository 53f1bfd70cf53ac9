#pragma once

// Planar N-planet dynamics in heliocentric canonical variables: orbital
// element conversions, the Poincare chart, and long-term symplectic
// integration with an SBAB/SABA splitting whose drift is an exact Kepler
// propagator per planet.

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eltor/series.hpp"

namespace eltor::dynamics {

struct OrbitalElements {
    double a = 0.0;    // semi-major axis
    double e = 0.0;    // eccentricity
    double M = 0.0;    // mean anomaly
    double peri = 0.0; // perihelion longitude
};

struct BodySystem {
    double G = 1.0;
    double m0 = 0.0;              // central mass
    std::vector<double> m;        // planet masses
    std::vector<OrbitalElements> elements;

    int n_planets() const { return static_cast<int>(m.size()); }
    double beta(int j) const { return m0 * m[j] / (m0 + m[j]); }
    double grav_param(int j) const { return G * (m0 + m[j]); }
    double mass_ratio() const; // max_j m_j / m0

    // The Table-style planar SJSU configuration (AU, yr, G = 1, m0 = (2 pi)^2).
    static BodySystem sjsu();
};

// Heliocentric planar positions r_j and conjugate momenta rtilde_j.
struct CartesianState {
    std::vector<double> rx, ry, px, py;
    int n() const { return static_cast<int>(rx.size()); }
};

struct PoincareState {
    std::vector<double> Lambda, lambda, xi, eta;
};

// --- element-level conversions (single planet, two-body sense) ------------

// Poincare variables of one planet from its elements; throws for e >= 1.
void poincare_variables(const BodySystem& sys, int j, const OrbitalElements& el,
                        double& Lambda, double& lambda, double& xi,
                        double& eta);
OrbitalElements elements_from_poincare(const BodySystem& sys, int j,
                                       double Lambda, double lambda, double xi,
                                       double eta);

// Position and conjugate momentum of planet j from elements and back.
void elements_to_cartesian(const BodySystem& sys, int j,
                           const OrbitalElements& el, double& rx, double& ry,
                           double& px, double& py);
OrbitalElements cartesian_to_elements(const BodySystem& sys, int j, double rx,
                                      double ry, double px, double py);

CartesianState system_to_cartesian(const BodySystem& sys);

// The chart E: (Lambda, lambda, xi, eta) -> (r, rtilde), and its inverse.
CartesianState poincare_to_cartesian(const BodySystem& sys,
                                     const PoincareState& ps);
PoincareState cartesian_to_poincare(const BodySystem& sys,
                                    const CartesianState& cs);

// --- conserved quantities ---------------------------------------------------

double total_energy(const BodySystem& sys, const CartesianState& s);
double angular_momentum(const BodySystem& sys, const CartesianState& s);

// --- symplectic integration -------------------------------------------------

enum class Scheme { SBAB3, SABA3 };
enum class Precision { Standard, Extended };

struct IntegratorConfig {
    double dt = 0.04;            // yr
    Scheme scheme = Scheme::SBAB3;
    Precision precision = Precision::Extended;
    double sample_every = 1.0;   // yr; must be an integer multiple of dt
};

struct Trajectory {
    double t0 = 0.0;
    double dt_sample = 1.0;
    int n_planets = 0;
    std::vector<double> t;
    std::vector<CartesianState> states;

    std::size_t size() const { return t.size(); }
    // xi_l + i eta_l sampled along the trajectory.
    std::vector<std::complex<double>> secular_signal(const BodySystem& sys,
                                                     int planet) const;
    // Lambda_l exp(i lambda_l) sampled along the trajectory.
    std::vector<std::complex<double>> fast_signal(const BodySystem& sys,
                                                  int planet) const;
};

// Integrates for t_span years, sampling every cfg.sample_every years
// (including t = 0).  Throws on collision or non-finite state, with the
// failure time in the message.
Trajectory integrate(const BodySystem& sys, const CartesianState& state0,
                     double t_span, const IntegratorConfig& cfg);

// Streaming variant: on_sample(t, state) is called per sample and nothing is
// stored.
void integrate_stream(
    const BodySystem& sys, const CartesianState& state0, double t_span,
    const IntegratorConfig& cfg,
    const std::function<void(double, const CartesianState&)>& on_sample);

// Reference non-symplectic integrator (adaptive embedded Runge-Kutta 5(4))
// for cross-checks; integrates the exact equations of motion of the full
// Hamiltonian to the given local tolerance.
CartesianState integrate_rk(const BodySystem& sys, const CartesianState& s0,
                            double t_span, double tol = 1e-13);

// Trajectory CSV: one row per sample,
// t, then per planet x, y, vx, vy, a, e, M, peri, xi, eta.
void write_trajectory_csv(const std::string& path, const BodySystem& sys,
                          const Trajectory& traj);
// Little-endian binary sample store (doubles; header then rows of raw state).
void write_trajectory_store(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_store(const std::string& path);

} // namespace eltor::dynamics
