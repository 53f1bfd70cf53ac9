#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "eltor/expansion.hpp"
#include "eltor/numeric.hpp"
#include "helpers.hpp"

using namespace eltor;
using namespace eltor::expansion;
using namespace eltor::series;
using dynamics::BodySystem;
using dynamics::OrbitalElements;
using eltor::numeric::kTwoPi;

namespace {

// Small shared fixture: a reduced-limit initial Hamiltonian built once.
const ExpansionConfig& small_cfg() {
    static ExpansionConfig cfg = [] {
        ExpansionConfig c;
        c.limits = TruncationLimits{2, 6, 22};
        c.kepler_order = 4;
        c.trig_margin = 8;
        return c;
    }();
    return cfg;
}

const InitialHamiltonian& small_ham() {
    static InitialHamiltonian ham = [] {
        const BodySystem sys = BodySystem::sjsu();
        const std::vector<double> a0 = {sys.elements[0].a, sys.elements[1].a,
                                        sys.elements[2].a};
        return build_initial_hamiltonian(sys, small_cfg(), 2, &a0);
    }();
    return ham;
}

} // namespace

TEST_CASE("two-body series against the direct element conversion") {
    const BodySystem sys = BodySystem::sjsu();
    const int j = 0;
    const double Lstar =
        sys.beta(j) * std::sqrt(sys.grav_param(j) * sys.elements[j].a);
    const TruncationLimits lim{3, 8, 12};
    const PlanetSeries ps = two_body_series(sys, j, Lstar, lim);

    std::mt19937 rng(42);
    std::uniform_real_distribution<double> ue(0.0, 0.04), uang(0.0, kTwoPi),
        uL(-5e-4, 5e-4);
    for (int rep = 0; rep < 25; ++rep) {
        const double e = ue(rng), lambda = uang(rng), peri = uang(rng);
        const double L = uL(rng) * Lstar;
        const double rho = std::sqrt(1.0 - std::sqrt(1.0 - e * e));
        const double xi = std::sqrt(2.0 * (Lstar + L)) * rho * std::cos(peri);
        const double eta = -std::sqrt(2.0 * (Lstar + L)) * rho * std::sin(peri);
        const OrbitalElements el =
            dynamics::elements_from_poincare(sys, j, Lstar + L, lambda, xi, eta);
        double rx, ry, px, py;
        dynamics::elements_to_cartesian(sys, j, el, rx, ry, px, py);

        PhasePoint pt;
        pt.p = {L};
        pt.q = {lambda};
        pt.x = {xi};
        pt.y = {eta};
        CHECK(evaluate(ps.zx, pt) == doctest::Approx(rx).scale(5.0).epsilon(2e-9));
        CHECK(evaluate(ps.zy, pt) == doctest::Approx(ry).scale(5.0).epsilon(2e-9));
        CHECK(evaluate(ps.px, pt) == doctest::Approx(px).scale(0.1).epsilon(2e-9));
        CHECK(evaluate(ps.py, pt) == doctest::Approx(py).scale(0.1).epsilon(2e-9));
    }
}

TEST_CASE("kepler part") {
    const BodySystem sys = BodySystem::sjsu();
    std::vector<double> Lstar(3);
    for (int j = 0; j < 3; ++j)
        Lstar[j] = sys.beta(j) * std::sqrt(sys.grav_param(j) * sys.elements[j].a);

    SUBCASE("mean motions match the closed form and the reported magnitude") {
        const std::vector<double> n = kepler_mean_motions(sys, Lstar);
        for (int j = 0; j < 3; ++j) {
            const double expect =
                std::sqrt(sys.grav_param(j) / std::pow(sys.elements[j].a, 3));
            CHECK(n[j] == doctest::Approx(expect).epsilon(1e-12));
        }
        // Uranus mean motion ~ 7.46e-2 rad/yr (period ~ 84 yr)
        CHECK(n[2] == doctest::Approx(7.4598e-2).epsilon(1.5e-3));
    }
    SUBCASE("Taylor blocks against finite differences of F0") {
        const Dimensions dims{3, 3};
        const TruncationLimits lim{4, 8, 0};
        const auto blocks = kepler_part(sys, Lstar, 4, dims, lim);
        REQUIRE(blocks.size() == 3); // degrees 2, 3, 4
        // long-double 5-point stencil with Richardson extrapolation keeps
        // the fourth-derivative oracle at ~1e-9 relative accuracy
        auto at = [&](long double v) {
            long double f = 0.0L;
            for (int j = 0; j < 3; ++j) {
                const long double mg = sys.grav_param(j);
                const long double be = sys.beta(j);
                const long double lam = Lstar[j] + (j == 0 ? v : 0.0L);
                f -= mg * mg * be * be * be / (2.0L * lam * lam);
            }
            return f;
        };
        auto d4_of = [&](long double h) {
            return (at(2 * h) - 4 * at(h) + 6 * at(0) - 4 * at(-h) +
                    at(-2 * h)) / (h * h * h * h);
        };
        // the 5-point stencil error is O(h^2), so extrapolate with factor 4
        const long double h = 4e-3L * Lstar[0];
        const double expect =
            static_cast<double>((4.0L * d4_of(h / 2) - d4_of(h)) / 3.0L) / 24.0;
        PhasePoint unit{{1, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        const double got = evaluate(blocks[2], unit); // degree-4 block at L=e1
        CHECK(got == doctest::Approx(expect).epsilon(1e-8));
    }
    SUBCASE("invalid Lambda rejected") {
        std::vector<double> bad = Lstar;
        bad[1] = -1.0;
        CHECK_THROWS(kepler_mean_motions(sys, bad));
    }
}

TEST_CASE("disturbing expansion: circular-orbit Fourier against quadrature") {
    // Two planets on circular orbits: the degree-(0,0) part must reproduce
    // T1_circ + U1_circ, with U1 cross-checked against a direct DFT of the
    // inverse mutual distance over the synodic angle.
    BodySystem sys = BodySystem::sjsu();
    sys.m.resize(2);
    sys.elements.resize(2);
    const double a1 = sys.elements[0].a, a2 = sys.elements[1].a;
    std::vector<double> Lstar(2);
    for (int j = 0; j < 2; ++j)
        Lstar[j] = sys.beta(j) * std::sqrt(sys.grav_param(j) * sys.elements[j].a);

    ExpansionConfig cfg;
    cfg.limits = TruncationLimits{1, 2, 26};
    cfg.trig_margin = 4;
    const PoissonSeries pert = disturbing_expansion(sys, Lstar, cfg);
    const Dimensions d{2, 2};
    const PoissonSeries circ = pert.homogeneous_part(0, 0);

    // analytic circular kinetic coupling: b1 n1 a1 b2 n2 a2 cos(psi) / m0
    const double n1 = std::sqrt(sys.grav_param(0) / (a1 * a1 * a1));
    const double n2 = std::sqrt(sys.grav_param(1) / (a2 * a2 * a2));
    const double t1c = sys.beta(0) * sys.beta(1) * n1 * a1 * n2 * a2 / sys.m0;

    const int N = 64;
    std::vector<double> invd(N);
    for (int i = 0; i < N; ++i) {
        const double psi = kTwoPi * i / N;
        const double dx = a1 * std::cos(psi) - a2;
        const double dy = a1 * std::sin(psi);
        invd[i] = 1.0 / std::hypot(dx, dy);
    }
    for (int k = 0; k <= 12; ++k) {
        double ck = 0.0;
        for (int i = 0; i < N; ++i)
            ck += invd[i] * std::cos(k * kTwoPi * i / N);
        ck *= (k == 0 ? 1.0 : 2.0) / N;
        const double u1_expect = -sys.G * sys.m[0] * sys.m[1] * ck;
        std::vector<int> dp(2, 0), dxy(4, 0), kk{k, -k};
        auto [key, fac] = TermKey::make(d, dp, dxy, kk, Parity::Cos);
        double got = circ.coefficient(key) * fac;
        if (k == 1) got -= t1c;
        CHECK(got == doctest::Approx(u1_expect).epsilon(1e-8));
    }
}

TEST_CASE("disturbing expansion coefficients are O(mu)") {
    const BodySystem sys = BodySystem::sjsu();
    std::vector<double> Lstar(3);
    for (int j = 0; j < 3; ++j)
        Lstar[j] = sys.beta(j) * std::sqrt(sys.grav_param(j) * sys.elements[j].a);
    ExpansionConfig cfg;
    cfg.limits = TruncationLimits{2, 4, 8};
    cfg.trig_margin = 4;
    const PoissonSeries pert = disturbing_expansion(sys, Lstar, cfg);
    const std::vector<double> n = kepler_mean_motions(sys, Lstar);
    double nmax = 0.0;
    for (double v : n) nmax = std::max(nmax, std::abs(v));
    // the low-degree blocks driving the normalization (2 j1 + j2 <= 2);
    // higher secular degrees carry growing (2 Lambda)^(-j2/2) factors from
    // the cartesian secular variables and are not O(mu) coefficientwise
    const Dimensions d{3, 3};
    double cmax = 0.0;
    for (const auto& t : pert.terms())
        if (2 * t.key.degree_p(d) + t.key.degree_xy(d) <= 2)
            cmax = std::max(cmax, std::abs(t.coeff));
    CHECK(cmax <= 10.0 * sys.mass_ratio() * nmax);
}

TEST_CASE("orbit-crossing geometry rejected") {
    BodySystem sys = BodySystem::sjsu();
    sys.m.resize(2);
    sys.elements.resize(2);
    sys.elements[1].a = sys.elements[0].a * 1.05;
    std::vector<double> Lstar(2);
    for (int j = 0; j < 2; ++j)
        Lstar[j] = sys.beta(j) * std::sqrt(sys.grav_param(j) * sys.elements[j].a);
    ExpansionConfig cfg;
    cfg.limits = TruncationLimits{1, 2, 6};
    CHECK_THROWS(disturbing_expansion(sys, Lstar, cfg));
}

TEST_CASE("diagonalize_secular") {
    const Dimensions d{1, 2};
    const TruncationLimits lim{2, 4, 4};
    auto quad = [&](double a11, double a12, double a22) {
        SeriesBuilder b(d, lim);
        std::vector<int> dp(1, 0), dxy(4, 0), k(1, 0);
        dxy = {2, 0, 0, 0}; b.add(dp, dxy, k, Parity::Cos, 0.5 * a11);
        dxy = {0, 0, 2, 0}; b.add(dp, dxy, k, Parity::Cos, 0.5 * a11);
        dxy = {0, 2, 0, 0}; b.add(dp, dxy, k, Parity::Cos, 0.5 * a22);
        dxy = {0, 0, 0, 2}; b.add(dp, dxy, k, Parity::Cos, 0.5 * a22);
        dxy = {1, 1, 0, 0}; b.add(dp, dxy, k, Parity::Cos, a12);
        dxy = {0, 0, 1, 1}; b.add(dp, dxy, k, Parity::Cos, a12);
        return std::move(b).build();
    };
    SUBCASE("already diagonal") {
        DiagonalizingMap map;
        std::vector<double> nu;
        diagonalize_secular(quad(2.0, 0.0, 3.0), map, nu);
        CHECK(nu[0] == doctest::Approx(2.0));
        CHECK(nu[1] == doctest::Approx(3.0));
        CHECK(std::abs(map.Q[0]) == doctest::Approx(1.0));
        CHECK(std::abs(map.Q[3]) == doctest::Approx(1.0));
    }
    SUBCASE("textbook [[2,1],[1,2]]") {
        DiagonalizingMap map;
        std::vector<double> nu;
        diagonalize_secular(quad(2.0, 1.0, 2.0), map, nu);
        CHECK(nu[0] == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(nu[1] == doctest::Approx(3.0).epsilon(1e-13));
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        for (double q : map.Q)
            CHECK(std::abs(q) == doctest::Approx(inv_sqrt2).epsilon(1e-12));
    }
    SUBCASE("mixed signs rejected") {
        DiagonalizingMap map;
        std::vector<double> nu;
        CHECK_THROWS(diagonalize_secular(quad(2.0, 0.0, -3.0), map, nu));
    }
    SUBCASE("the transformed quadratic is diagonal") {
        DiagonalizingMap map;
        std::vector<double> nu;
        const PoissonSeries h = quad(1.5, 0.7, 2.5);
        diagonalize_secular(h, map, nu);
        const PoissonSeries hd = apply_diagonalizing(h, map);
        for (const auto& t : hd.terms()) {
            int slot = -1;
            for (int l = 0; l < 2; ++l)
                if (t.key.dx(d, l) == 2 || t.key.dy(d, l) == 2) slot = l;
            if (slot < 0) {
                CHECK(std::abs(t.coeff) <= 1e-12); // off-diagonal residue
                continue;
            }
            CHECK(std::abs(t.coeff - 0.5 * nu[slot]) <= 1e-12);
        }
    }
}

TEST_CASE("SJSU initial hamiltonian") {
    const InitialHamiltonian& ham = small_ham();

    SUBCASE("mu and frequencies") {
        CHECK(ham.mu == doctest::Approx(9.5478e-4).epsilon(1e-3));
        for (double v : ham.nu0) {
            CHECK(v < 0.0);
            CHECK(std::abs(v) >= 1e-5);
            CHECK(std::abs(v) <= 1e-2);
        }
        double numin = 1e9;
        for (double v : ham.nu0) numin = std::min(numin, std::abs(v));
        CHECK(numin >= 1.108e-5 / 3.0);
        CHECK(numin <= 1.108e-5 * 3.0);
    }

    SUBCASE("diagonalizing map is orthogonal (canonical)") {
        const int n2 = ham.diag.n2;
        for (int i = 0; i < n2; ++i)
            for (int j = 0; j < n2; ++j) {
                double dot = 0.0;
                for (int a = 0; a < n2; ++a)
                    dot += ham.diag.Q[a * n2 + i] * ham.diag.Q[a * n2 + j];
                CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0)
                                 .scale(1.0)
                                 .epsilon(1e-12));
            }
    }

    SUBCASE("blocks satisfy hypotheses (A) and (B)") {
        for (const auto& [tag, part] : ham.blocks)
            CHECK(in_class(part, tag, ham.K, true));
    }

    SUBCASE("d'Alembert parity: (0,1) blocks hold only odd harmonics") {
        for (const auto& [tag, part] : ham.blocks) {
            if (tag.j1 != 0 || tag.j2 != 1) continue;
            for (const auto& t : part.terms())
                CHECK(t.key.trig_degree(ham.dims) % 2 == 1);
        }
    }

    SUBCASE("series evaluation matches the cartesian Hamiltonian") {
        const PoissonSeries H = ham.assembled();
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> uq(0.0, kTwoPi),
            usec(-0.01, 0.01), up(-1e-4, 1e-4);
        for (int rep = 0; rep < 20; ++rep) {
            PhasePoint pt;
            for (int j = 0; j < 3; ++j) {
                pt.p.push_back(up(rng) * ham.lambda_star[j]);
                pt.q.push_back(uq(rng));
                pt.x.push_back(usec(rng) * std::sqrt(ham.lambda_star[j]));
                pt.y.push_back(usec(rng) * std::sqrt(ham.lambda_star[j]));
            }
            const double series_val = ham.dropped_constant + evaluate(H, pt);
            const double exact = cartesian_hamiltonian_at(ham, pt);
            CHECK(series_val == doctest::Approx(exact).epsilon(1e-6));
        }
    }
}

TEST_CASE("average semimajor axes") {
    SUBCASE("two-body limit returns the initial value") {
        BodySystem sys = BodySystem::sjsu();
        sys.m[1] *= 1e-30;
        sys.m[2] *= 1e-30;
        const auto a = average_semimajor(sys, 200.0, 0.04);
        CHECK(a[0] == doctest::Approx(sys.elements[0].a).epsilon(1e-12));
    }
    SUBCASE("SJSU averages converge near the osculating values") {
        const BodySystem sys = BodySystem::sjsu();
        const auto a16 = average_semimajor(sys, 65536.0, 0.04);
        CHECK(a16[0] == doctest::Approx(5.2046).epsilon(5e-3));
        const auto a17 = average_semimajor(sys, 131072.0, 0.04);
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(a17[j] - a16[j]) / a16[j] <= 1e-4);
    }
}
