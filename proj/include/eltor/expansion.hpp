#pragma once

// Construction of the initial Hamiltonian: the planar planetary Hamiltonian
// in Poincare variables, Taylor-expanded in the fast actions around Lambda*
// and in the secular pairs around the origin, Fourier-expanded in the fast
// angles, with the averaged secular quadratic part diagonalized.

#include <vector>

#include "eltor/dynamics.hpp"
#include "eltor/series.hpp"

namespace eltor::expansion {

using dynamics::BodySystem;
using series::ClassTag;
using series::Dimensions;
using series::PoissonSeries;
using series::TruncationLimits;

struct ExpansionConfig {
    TruncationLimits limits{3, 8, 18}; // (b1)-(b3) caps for the perturbation
    int kepler_order = 4;              // Taylor order of the Keplerian part
    int trig_margin = 12;              // extra working harmonics before the final cut
    // semi-major averaging window (yr) and integrator step
    double average_span = 65536.0;
    double average_dt = 0.04;
};

struct DiagonalizingMap {
    int n2 = 0;
    std::vector<double> Q; // row-major n2 x n2, xi = Q x and eta = Q y

    std::vector<double> apply(const std::vector<double>& v) const;      // Q v
    std::vector<double> apply_inverse(const std::vector<double>& v) const; // Q^T v
};

struct InitialHamiltonian {
    Dimensions dims;
    TruncationLimits limits;     // storage limits of the assembled series
    BodySystem system;
    std::vector<double> lambda_star; // Lambda*
    std::vector<double> a_star;      // averaged semi-major axes
    std::vector<double> n_star;      // Keplerian mean motions at Lambda*
    std::vector<double> nu0;         // secular frequencies of the quadratic part
    DiagonalizingMap diag;
    double mu = 0.0;                 // max planet/star mass ratio
    double dropped_constant = 0.0;   // F0(Lambda*), removed at assembly
    // Everything except omega0 . p and sum nu0_j (x_j^2 + y_j^2)/2, blocked
    // by homogeneous degrees and Fourier block (well ordered for K).
    int K = 2;
    std::vector<std::pair<ClassTag, PoissonSeries>> blocks;

    PoissonSeries assembled() const; // headers + blocks recombined (one series)
    series::PhasePoint to_internal(const dynamics::PoincareState& ps) const;
    dynamics::PoincareState to_poincare(const series::PhasePoint& pt) const;
};

// Time averages of the osculating semi-major axes over t_span years.
std::vector<double> average_semimajor(const BodySystem& sys, double t_span,
                                      double dt);

// Taylor blocks of the Keplerian part around Lambda*: index m of the returned
// vector holds the degree-(m+2) homogeneous polynomial in L (the linear part
// n*.L is reported separately through n_star()).
std::vector<PoissonSeries> kepler_part(const BodySystem& sys,
                                       const std::vector<double>& lambda_star,
                                       int order, const Dimensions& dims,
                                       const TruncationLimits& lim);
std::vector<double> kepler_mean_motions(const BodySystem& sys,
                                        const std::vector<double>& lambda_star);
double kepler_value(const BodySystem& sys,
                    const std::vector<double>& lambda_star);

// Heliocentric position (complex x + iy) and conjugate momentum of one planet
// as truncated series of (L, lambda, xi, eta) around (Lambda*_j, 0, 0); dims
// of the returned series are {1, 1}.
struct PlanetSeries {
    PoissonSeries zx, zy; // position components
    PoissonSeries px, py; // conjugate momentum components
};
PlanetSeries two_body_series(const BodySystem& sys, int planet,
                             double lambda_star, const TruncationLimits& lim);

// Re-keys a {1,1}-dimensional per-planet series into the full algebra.
PoissonSeries embed_planet(const PoissonSeries& s, const Dimensions& full,
                           int planet);

// T1 + U1 expanded in (L, lambda, xi, eta); throws if a semi-major ratio is
// too close to 1 for the inverse-distance binomial series.
PoissonSeries disturbing_expansion(const BodySystem& sys,
                                   const std::vector<double>& lambda_star,
                                   const ExpansionConfig& cfg);

// Diagonalization of the lambda-averaged secular quadratic part.  Returns the
// orthogonal map and the frequencies nu0 (all of one sign, else throws).
void diagonalize_secular(const PoissonSeries& h02_avg, DiagonalizingMap& map,
                         std::vector<double>& nu0);

// Substitutes xi = Q x, eta = Q y through a series.
PoissonSeries apply_diagonalizing(const PoissonSeries& s,
                                  const DiagonalizingMap& map);

// Full pipeline: averaging (unless a_star is provided), two-body series,
// disturbing function, diagonalization, re-blocking.
InitialHamiltonian build_initial_hamiltonian(
    const BodySystem& sys, const ExpansionConfig& cfg, int K,
    const std::vector<double>* a_star_override = nullptr);

// Direct numeric evaluation of the full Hamiltonian F at the cartesian
// image of an internal phase point; oracle for the expansion.
double cartesian_hamiltonian_at(const InitialHamiltonian& ham,
                                const series::PhasePoint& pt);

} // namespace eltor::expansion
