#pragma once

// Action-angle rewriting of series that are homogeneous of degree 1 or 2 in
// the secular pairs: x_l = sqrt(2 J_l) cos(phi_l), y_l = sqrt(2 J_l) sin(phi_l).
// A term is  coeff * prod_l (2 J_l)^(rho_l / 2) * {cos|sin}(k.q + m.phi)
// with rho_l in {0,1,2}, |m_l| <= rho_l and m_l of the same parity as rho_l.
// Degree-1 terms carry sqrt(2 J_j), degree-2 terms 2 sqrt(J_i J_j).

#include "eltor/series.hpp"

namespace eltor::series {

struct AATermKey {
    static constexpr int kMax = 12;
    std::array<std::int8_t, kMax> rho{}; // radial powers, indices 0..n2
    std::array<std::int8_t, kMax> k{};   // q harmonics, indices 0..n1
    std::array<std::int8_t, kMax> m{};   // phi harmonics, indices 0..n2
    std::uint8_t parity = 0;             // 0 cos, 1 sin

    bool operator==(const AATermKey&) const = default;
    bool operator<(const AATermKey& o) const {
        if (rho != o.rho) return rho < o.rho;
        if (k != o.k) return k < o.k;
        if (m != o.m) return m < o.m;
        return parity < o.parity;
    }
};

struct AATerm {
    AATermKey key;
    double coeff = 0.0;
};

class AAExpansion {
public:
    AAExpansion() = default;
    AAExpansion(Dimensions dims, int degree) : dims_(dims), degree_(degree) {}

    const Dimensions& dims() const { return dims_; }
    int degree() const { return degree_; }
    const std::vector<AATerm>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    double norm1() const;

    // phi-dependent part (m != 0) and phi-average (m == 0).
    AAExpansion angle_dependent_part() const;
    AAExpansion angle_average() const;

    // Used by to_action_angle and the homological solvers.
    void accumulate(const AATermKey& key, double coeff);
    void compact(double drop_threshold);

private:
    Dimensions dims_;
    int degree_ = 0;
    std::vector<AATerm> terms_;
};

// Exact rewriting; throws if f is not homogeneous of degree 1 or 2 in (x, y)
// or depends on p.
AAExpansion to_action_angle(const PoissonSeries& f);

// Exact inverse rewriting back to polynomial form.
PoissonSeries from_action_angle(const AAExpansion& g,
                                const TruncationLimits& lim);

// Canonicalize the joint harmonic (k, m): flips the sign so the first nonzero
// entry (k first, then m) is positive; returns the coefficient factor.
double canonicalize_joint_harmonic(const Dimensions& dims, AATermKey& key);

} // namespace eltor::series
