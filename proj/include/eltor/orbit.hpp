#pragma once

// Composition of the full coordinate chain: the Lie-series normalization maps,
// the secular diagonalization, the fast-action translation and the Poincare
// chart, realized as numeric point maps.  Supports the semi-analytic orbit:
// the quasi-periodic flow in normal-form coordinates pushed to heliocentric
// cartesian states.

#include <vector>

#include "eltor/dynamics.hpp"
#include "eltor/expansion.hpp"
#include "eltor/normalizer.hpp"
#include "eltor/series.hpp"

namespace eltor::orbit {

using series::Dimensions;
using series::PhasePoint;
using series::PoissonSeries;
using series::TruncationLimits;

// Cached Lie transport of the coordinate functions under one generator.
struct GeneratorTransport {
    PoissonSeries chi;
    // increments exp(L_chi) c - c for every coordinate function
    std::vector<PoissonSeries> dp, dq, dx, dy;
};

class TransformChain {
public:
    // Builds the chain through step R = state.r.  The generator list is kept
    // in point-application order for the normal-form -> original map.
    static TransformChain build(const expansion::InitialHamiltonian& ham,
                                const normalizer::NormalizationState& state);
    // Chain with no normalization steps (R = 0).
    static TransformChain trivial(const expansion::InitialHamiltonian& ham);

    const Dimensions& dims() const { return dims_; }
    const std::vector<double>& omega() const { return omega_; }
    const std::vector<double>& lambda_star() const { return lambda_star_; }
    const dynamics::BodySystem& system() const { return system_; }
    int steps() const { return r_; }

    // K^(r): normal-form coordinates -> the coordinates of H^(0).
    PhasePoint push_point(const PhasePoint& z_normal) const;
    // Inverse map (original -> normal form).
    PhasePoint pull_point(const PhasePoint& z_original) const;

    // E o T_Lambda* o D applied to an internal point / and back.
    dynamics::CartesianState internal_to_cartesian(const PhasePoint& z) const;
    PhasePoint cartesian_to_internal(const dynamics::CartesianState& s) const;

    // C^(r) = E o T o D o K^(r) and its inverse.
    dynamics::CartesianState to_cartesian(const PhasePoint& z_normal) const;
    PhasePoint from_cartesian(const dynamics::CartesianState& s) const;

    // Cartesian state of the torus point with fast phases Q0.
    dynamics::CartesianState
    torus_initial_condition(const std::vector<double>& Q0) const;
    // C^(r)(0, Q0 + omega t, 0, 0).
    dynamics::CartesianState flow_on_torus(const std::vector<double>& Q0,
                                           double t) const;

private:
    Dimensions dims_;
    TruncationLimits limits_;
    dynamics::BodySystem system_;
    expansion::DiagonalizingMap diag_;
    std::vector<double> lambda_star_;
    std::vector<double> omega_;
    int r_ = 0;
    // point-application order for push_point: step R first (D2, Y2, X2,
    // chi1, chi0), down to step 1
    std::vector<GeneratorTransport> transports_;

    PhasePoint apply(const GeneratorTransport& t, const PhasePoint& z,
                     double sign) const;
};

// Transport of the coordinate functions under exp(L_chi) (the increments).
GeneratorTransport make_transport(const PoissonSeries& chi,
                                  const Dimensions& dims,
                                  const TruncationLimits& limits);

} // namespace eltor::orbit
