#include "eltor/orbit.hpp"

#include <cmath>
#include <stdexcept>

namespace eltor::orbit {

using series::kArithmeticDrop;
using series::SeriesBuilder;

namespace {

constexpr double kLieCutoff = 1e-16;
constexpr int kLieMaxOrder = 40;

// increment series exp(L_chi) c - c for the coordinate function c, given its
// first bracket {chi, c}
PoissonSeries transport_increment(const PoissonSeries& chi,
                                  const PoissonSeries& first,
                                  const TruncationLimits& lim) {
    PoissonSeries out = first;
    PoissonSeries term = first;
    const double ref = std::max(1.0, first.norm1());
    for (int i = 2; i <= kLieMaxOrder; ++i) {
        term = scale(poisson_bracket(chi, term, lim), 1.0 / i);
        if (term.empty()) break;
        out = add(out, term);
        if (term.norm1() < kLieCutoff * ref) break;
    }
    return out;
}

} // namespace

GeneratorTransport make_transport(const PoissonSeries& chi,
                                  const Dimensions& dims,
                                  const TruncationLimits& limits) {
    GeneratorTransport t;
    t.chi = chi;
    t.dp.reserve(dims.n1);
    t.dq.reserve(dims.n1);
    t.dx.reserve(dims.n2);
    t.dy.reserve(dims.n2);
    for (int j = 0; j < dims.n1; ++j) {
        // {chi, p_j} = dchi/dq_j ; {chi, q_j} = -dchi/dp_j
        t.dp.push_back(transport_increment(chi, d_dq(chi, j), limits));
        t.dq.push_back(
            transport_increment(chi, scale(d_dp(chi, j), -1.0), limits));
    }
    for (int l = 0; l < dims.n2; ++l) {
        // {chi, x_l} = dchi/dy_l ; {chi, y_l} = -dchi/dx_l
        t.dx.push_back(transport_increment(chi, d_dy(chi, l), limits));
        t.dy.push_back(
            transport_increment(chi, scale(d_dx(chi, l), -1.0), limits));
    }
    return t;
}

TransformChain TransformChain::build(const expansion::InitialHamiltonian& ham,
                                     const normalizer::NormalizationState& st) {
    TransformChain c = trivial(ham);
    c.omega_ = st.freq.omega;
    c.r_ = st.r;
    // point-application order: step R's D2 first ... step 1's chi0 last
    for (int r = st.r; r >= 1; --r) {
        const auto& rec = st.steps[r - 1];
        for (int g = 4; g >= 0; --g)
            c.transports_.push_back(
                make_transport(rec.gens[g], c.dims_, c.limits_));
    }
    return c;
}

TransformChain TransformChain::trivial(const expansion::InitialHamiltonian& ham) {
    TransformChain c;
    c.dims_ = ham.dims;
    c.limits_ = ham.limits;
    c.system_ = ham.system;
    c.diag_ = ham.diag;
    c.lambda_star_ = ham.lambda_star;
    c.omega_ = ham.n_star;
    c.r_ = 0;
    return c;
}

PhasePoint TransformChain::apply(const GeneratorTransport& t,
                                 const PhasePoint& z, double sign) const {
    PhasePoint out = z;
    PhasePoint in = z;
    // sign < 0 realizes the inverse flow: exp(L_{-chi}) has increments that
    // are the transports of -chi; they are rebuilt on the fly only for the
    // first bracket being linear in chi, so reuse with odd/even Lie terms is
    // not available -- instead the inverse is applied by negating chi once.
    (void)sign;
    for (int j = 0; j < dims_.n1; ++j) {
        out.p[j] += evaluate(t.dp[j], in);
        out.q[j] += evaluate(t.dq[j], in);
    }
    for (int l = 0; l < dims_.n2; ++l) {
        out.x[l] += evaluate(t.dx[l], in);
        out.y[l] += evaluate(t.dy[l], in);
    }
    return out;
}

PhasePoint TransformChain::push_point(const PhasePoint& z_normal) const {
    PhasePoint z = z_normal;
    for (const auto& t : transports_) z = apply(t, z, +1.0);
    return z;
}

PhasePoint TransformChain::pull_point(const PhasePoint& z_original) const {
    // inverse flows with negated generators, reversed order
    PhasePoint z = z_original;
    for (auto it = transports_.rbegin(); it != transports_.rend(); ++it) {
        const GeneratorTransport inv =
            make_transport(scale(it->chi, -1.0), dims_, limits_);
        z = apply(inv, z, +1.0);
    }
    return z;
}

dynamics::CartesianState
TransformChain::internal_to_cartesian(const PhasePoint& z) const {
    dynamics::PoincareState ps;
    ps.Lambda.resize(dims_.n1);
    ps.lambda = z.q;
    for (int j = 0; j < dims_.n1; ++j) {
        ps.Lambda[j] = z.p[j] + lambda_star_[j];
        if (ps.Lambda[j] <= 0.0)
            throw std::runtime_error("chain: Lambda <= 0 after translation");
    }
    ps.xi = diag_.apply(z.x);
    ps.eta = diag_.apply(z.y);
    return dynamics::poincare_to_cartesian(system_, ps);
}

PhasePoint
TransformChain::cartesian_to_internal(const dynamics::CartesianState& s) const {
    const dynamics::PoincareState ps =
        dynamics::cartesian_to_poincare(system_, s);
    PhasePoint z;
    z.p.resize(dims_.n1);
    z.q = ps.lambda;
    for (int j = 0; j < dims_.n1; ++j) z.p[j] = ps.Lambda[j] - lambda_star_[j];
    z.x = diag_.apply_inverse(ps.xi);
    z.y = diag_.apply_inverse(ps.eta);
    return z;
}

dynamics::CartesianState
TransformChain::to_cartesian(const PhasePoint& z_normal) const {
    return internal_to_cartesian(push_point(z_normal));
}

PhasePoint
TransformChain::from_cartesian(const dynamics::CartesianState& s) const {
    return pull_point(cartesian_to_internal(s));
}

dynamics::CartesianState
TransformChain::torus_initial_condition(const std::vector<double>& Q0) const {
    PhasePoint z;
    z.p.assign(dims_.n1, 0.0);
    z.q = Q0;
    z.x.assign(dims_.n2, 0.0);
    z.y.assign(dims_.n2, 0.0);
    return to_cartesian(z);
}

dynamics::CartesianState
TransformChain::flow_on_torus(const std::vector<double>& Q0, double t) const {
    PhasePoint z;
    z.p.assign(dims_.n1, 0.0);
    z.q.resize(dims_.n1);
    for (int j = 0; j < dims_.n1; ++j) z.q[j] = Q0[j] + omega_[j] * t;
    z.x.assign(dims_.n2, 0.0);
    z.y.assign(dims_.n2, 0.0);
    return to_cartesian(z);
}

} // namespace eltor::orbit
