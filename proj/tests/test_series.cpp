#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "eltor/series.hpp"
#include "helpers.hpp"

using namespace eltor::series;
using testutil::max_coeff_diff;
using testutil::random_series;

namespace {

const Dimensions kDims{3, 3};
const TruncationLimits kLim{3, 8, 18};

PoissonSeries omega_dot_p(const Dimensions& d, const TruncationLimits& lim,
                          const std::vector<double>& omega) {
    SeriesBuilder b(d, lim);
    std::vector<int> dp(d.n1, 0), dxy(2 * d.n2, 0), k(d.n1, 0);
    for (int j = 0; j < d.n1; ++j) {
        dp.assign(d.n1, 0);
        dp[j] = 1;
        b.add(dp, dxy, k, Parity::Cos, omega[j]);
    }
    return std::move(b).build();
}

} // namespace

TEST_CASE("termkey canonicalization") {
    std::vector<int> dp{0, 0, 0}, dxy(6, 0);
    std::vector<int> k{-1, 2, 0};
    auto [key, factor] = TermKey::make(kDims, dp, dxy, k, Parity::Sin);
    CHECK(factor == -1.0);
    CHECK(key.k(kDims, 0) == 1);
    CHECK(key.k(kDims, 1) == -2);

    auto [key2, f2] = TermKey::make(kDims, dp, dxy, k, Parity::Cos);
    CHECK(f2 == 1.0);
    CHECK(key2.k(kDims, 0) == 1);

    std::vector<int> kz{0, 0, 0};
    auto [key3, f3] = TermKey::make(kDims, dp, dxy, kz, Parity::Sin);
    (void)key3;
    CHECK(f3 == 0.0); // sin(0) is identically zero
}

TEST_CASE("bracket of cos(k.q) with omega.p") {
    // {cos(q1), 2 p1} = -2 sin(q1)
    const PoissonSeries f =
        PoissonSeries::harmonic(kDims, kLim, std::vector<int>{1, 0, 0},
                                Parity::Cos);
    const PoissonSeries g = omega_dot_p(kDims, kLim, {2.0, 0.0, 0.0});
    const PoissonSeries br = poisson_bracket(f, g);
    const PoissonSeries expect =
        PoissonSeries::harmonic(kDims, kLim, std::vector<int>{1, 0, 0},
                                Parity::Sin, -2.0);
    CHECK(max_coeff_diff(br, expect) == 0.0);
}

TEST_CASE("bracket of two q-only series vanishes") {
    const PoissonSeries f = PoissonSeries::harmonic(
        kDims, kLim, std::vector<int>{1, -1, 0}, Parity::Cos, 0.7);
    const PoissonSeries g = PoissonSeries::harmonic(
        kDims, kLim, std::vector<int>{0, 2, -1}, Parity::Sin, 1.3);
    CHECK(poisson_bracket(f, g).empty());
}

TEST_CASE("secular bracket against dense polynomial oracle") {
    // {x1 y1, (x1^2 + y1^2)/2} = y1^2 - x1^2, checked against direct
    // differentiation of dense polynomials in (x1, y1).
    const Dimensions d{1, 1};
    const TruncationLimits lim{3, 8, 6};
    const PoissonSeries x = PoissonSeries::secular_x(d, lim, 0);
    const PoissonSeries y = PoissonSeries::secular_y(d, lim, 0);
    const PoissonSeries f = mul(x, y);
    const PoissonSeries g =
        scale(add(mul(x, x), mul(y, y)), 0.5);
    const PoissonSeries br = poisson_bracket(f, g);

    // dense oracle: p(x,y) coefficients indexed [i][j] for x^i y^j
    auto dense = [](const PoissonSeries& s) {
        std::array<std::array<double, 5>, 5> c{};
        const Dimensions dd{1, 1};
        for (const auto& t : s.terms())
            c[t.key.dx(dd, 0)][t.key.dy(dd, 0)] += t.coeff;
        return c;
    };
    auto df = dense(f), dg = dense(g);
    std::array<std::array<double, 5>, 5> expect{};
    // {f,g} = df/dy dg/dx - df/dx dg/dy
    for (int i = 0; i <= 3; ++i)
        for (int j = 0; j <= 3; ++j)
            for (int a = 0; a <= 3; ++a)
                for (int b = 0; b <= 3; ++b) {
                    if (j >= 1 && a >= 1)
                        expect[i + a - 1][j - 1 + b] +=
                            df[i][j] * j * dg[a][b] * a;
                    if (i >= 1 && b >= 1)
                        expect[i - 1 + a][j + b - 1] -=
                            df[i][j] * i * dg[a][b] * b;
                }
    auto got = dense(br);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(got[i][j] == doctest::Approx(expect[i][j]).epsilon(1e-14));
    // closed form under this bracket orientation: {x y, J} = x^2 - y^2,
    // i.e. d/dphi (J sin 2 phi) with {phi, J} = +1
    CHECK(got[2][0] == doctest::Approx(1.0));
    CHECK(got[0][2] == doctest::Approx(-1.0));
}

TEST_CASE("bracket antisymmetry and bilinearity on random series") {
    std::mt19937 rng(12345);
    for (int rep = 0; rep < 10; ++rep) {
        const PoissonSeries f = random_series(rng, kDims, kLim, 30);
        const PoissonSeries g = random_series(rng, kDims, kLim, 30);
        const PoissonSeries fg = poisson_bracket(f, g);
        const PoissonSeries gf = poisson_bracket(g, f);
        CHECK(max_coeff_diff(fg, scale(gf, -1.0)) <= 1e-12 * (1.0 + fg.norm1()));
    }
}

TEST_CASE("Jacobi identity on small instances") {
    const Dimensions d{1, 1};
    // generous limits so no truncation interferes with associativity
    const TruncationLimits lim{6, 12, 8};
    const TruncationLimits gen{2, 3, 2};
    std::mt19937 rng(999);
    for (int rep = 0; rep < 8; ++rep) {
        PoissonSeries f = random_series(rng, d, gen, 6).with_limits(lim);
        PoissonSeries g = random_series(rng, d, gen, 6).with_limits(lim);
        PoissonSeries h = random_series(rng, d, gen, 6).with_limits(lim);
        PoissonSeries sum = add(
            add(poisson_bracket(poisson_bracket(f, g), h),
                poisson_bracket(poisson_bracket(g, h), f)),
            poisson_bracket(poisson_bracket(h, f), g));
        double m = 0.0;
        for (const auto& t : sum.terms()) m = std::max(m, std::abs(t.coeff));
        CHECK(m <= 1e-12);
    }
}

TEST_CASE("Leibniz rule on small instances") {
    const Dimensions d{2, 1};
    const TruncationLimits lim{6, 12, 8};
    const TruncationLimits gen{2, 3, 2};
    std::mt19937 rng(777);
    for (int rep = 0; rep < 8; ++rep) {
        PoissonSeries f = random_series(rng, d, gen, 5).with_limits(lim);
        PoissonSeries g = random_series(rng, d, gen, 5).with_limits(lim);
        PoissonSeries h = random_series(rng, d, gen, 5).with_limits(lim);
        const PoissonSeries lhs = poisson_bracket(f, mul(g, h));
        const PoissonSeries rhs =
            add(mul(poisson_bracket(f, g), h), mul(g, poisson_bracket(f, h)));
        CHECK(max_coeff_diff(lhs, rhs) <= 1e-12 * (1.0 + lhs.norm1()));
    }
}

TEST_CASE("lie transform identities") {
    const Dimensions d{1, 0};
    const TruncationLimits lim{3, 8, 10};
    const PoissonSeries H = omega_dot_p(d, lim, {1.5});

    SUBCASE("zero generator leaves H unchanged") {
        const PoissonSeries chi = PoissonSeries::zero(d, lim);
        CHECK(max_coeff_diff(lie_transform(chi, H, 10), H) == 0.0);
    }
    SUBCASE("chi = a sin q terminates at first order") {
        const double a = 0.25;
        const PoissonSeries chi = PoissonSeries::harmonic(
            d, lim, std::vector<int>{1}, Parity::Sin, a);
        const PoissonSeries out = lie_transform(chi, H, 10);
        // exp(L_chi)(w p) = w p + a w cos q
        SeriesBuilder b(d, lim);
        b.add_series(H);
        std::vector<int> dp{0}, dxy{}, k{1};
        b.add(dp, dxy, k, Parity::Cos, a * 1.5);
        CHECK(max_coeff_diff(out, std::move(b).build()) <= 1e-15);
    }
    SUBCASE("negative max_order is an error") {
        CHECK_THROWS(lie_transform(H, H, -1));
    }
}

TEST_CASE("lie transform against numeric flow of the generator") {
    // Toy one-degree-of-freedom check: exp(L_chi)H evaluated at a point must
    // match H at the numerically integrated time-1 flow of chi, to the order
    // of the neglected Lie remainder.
    const Dimensions d{1, 0};
    const TruncationLimits lim{6, 12, 12};
    const double eps = 1e-3;
    SeriesBuilder cb(d, lim);
    {
        std::vector<int> dp{1}, dxy{}, k{1};
        cb.add(dp, dxy, k, Parity::Sin, eps);
        dp[0] = 0;
        k[0] = 2;
        cb.add(dp, dxy, k, Parity::Cos, 0.5 * eps);
    }
    const PoissonSeries chi = std::move(cb).build();
    SeriesBuilder hb(d, lim);
    {
        std::vector<int> dp{1}, dxy{}, k{0};
        hb.add(dp, dxy, k, Parity::Cos, 0.7);
        dp[0] = 2;
        hb.add(dp, dxy, k, Parity::Cos, 0.3);
        dp[0] = 0;
        k[0] = 1;
        hb.add(dp, dxy, k, Parity::Cos, 0.2);
    }
    const PoissonSeries H = std::move(hb).build();
    const PoissonSeries transformed = lie_transform(chi, H, 3);

    // flow of chi: dq/dt = -dchi/dp, dp/dt = dchi/dq  (matches L_chi f = {chi, f})
    const PoissonSeries dchi_dp = d_dp(chi, 0);
    const PoissonSeries dchi_dq = d_dq(chi, 0);
    auto flow = [&](double p, double q) {
        const int steps = 2000;
        const double h = 1.0 / steps;
        for (int i = 0; i < steps; ++i) { // RK4 on the small vector field
            auto deriv = [&](double pp, double qq) {
                PhasePoint pt{{pp}, {qq}, {}, {}};
                return std::pair<double, double>{evaluate(dchi_dq, pt),
                                                 -evaluate(dchi_dp, pt)};
            };
            auto [k1p, k1q] = deriv(p, q);
            auto [k2p, k2q] = deriv(p + 0.5 * h * k1p, q + 0.5 * h * k1q);
            auto [k3p, k3q] = deriv(p + 0.5 * h * k2p, q + 0.5 * h * k2q);
            auto [k4p, k4q] = deriv(p + h * k3p, q + h * k3q);
            p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
            q += h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
        }
        return std::pair<double, double>{p, q};
    };
    for (double q0 : {0.3, 1.7, 4.0}) {
        const double p0 = 0.8;
        auto [p1, q1] = flow(p0, q0);
        PhasePoint image{{p1}, {q1}, {}, {}};
        PhasePoint orig{{p0}, {q0}, {}, {}};
        const double lhs = evaluate(transformed, orig);
        const double rhs = evaluate(H, image);
        CHECK(std::abs(lhs - rhs) <= 1e-11);
    }
}

TEST_CASE("reorder_fourier blocks and partition") {
    SUBCASE("cos(3 q1) with K = 2 lands in s = 2") {
        const PoissonSeries f = PoissonSeries::harmonic(
            kDims, kLim, std::vector<int>{3, 0, 0}, Parity::Cos);
        const auto parts = reorder_fourier(f, 2);
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].first.s == 2);
    }
    SUBCASE("constant lands in (0,0,0)") {
        const PoissonSeries f = PoissonSeries::constant(kDims, kLim, 3.5);
        const auto parts = reorder_fourier(f, 2);
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].first == ClassTag{0, 0, 0});
    }
    SUBCASE("partition recombines exactly and is class-correct") {
        std::mt19937 rng(2024);
        const PoissonSeries f = random_series(rng, kDims, kLim, 50);
        const auto parts = reorder_fourier(f, 2);
        PoissonSeries sum = PoissonSeries::zero(kDims, kLim);
        for (const auto& [tag, part] : parts) {
            CHECK(in_class(part, tag, 2, true));
            sum = add(sum, part);
        }
        CHECK(max_coeff_diff(sum, f) == 0.0);
    }
}

TEST_CASE("series norm") {
    CHECK(PoissonSeries::zero(kDims, kLim).norm1() == 0.0);
    SeriesBuilder b(kDims, kLim);
    std::vector<int> dp(3, 0), dxy(6, 0);
    b.add(dp, dxy, std::vector<int>{1, 0, 0}, Parity::Cos, 2.0);
    b.add(dp, dxy, std::vector<int>{0, 1, 0}, Parity::Sin, -3.0);
    CHECK(std::move(b).build().norm1() == 5.0);

    std::mt19937 rng(55);
    for (int rep = 0; rep < 10; ++rep) {
        const PoissonSeries f = random_series(rng, kDims, kLim, 20);
        const PoissonSeries g = random_series(rng, kDims, kLim, 20);
        CHECK(add(f, g).norm1() <= f.norm1() + g.norm1() + 1e-12);
    }
}

TEST_CASE("evaluate") {
    std::mt19937 rng(31415);
    SUBCASE("vanishing cases") {
        PoissonSeries f = random_series(rng, kDims, kLim, 40);
        // remove constants and pure-q terms: keep only terms with some
        // polynomial dependence
        SeriesBuilder b(kDims, kLim);
        for (const auto& t : f.terms())
            if (t.key.degree_p(kDims) + t.key.degree_xy(kDims) > 0)
                b.add_canonical(t.key, t.coeff);
        f = std::move(b).build();
        PhasePoint pt{{0, 0, 0}, {0.3, 1.2, 2.2}, {0, 0, 0}, {0, 0, 0}};
        CHECK(evaluate(f, pt) == 0.0);
    }
    SUBCASE("omega.p at p = (1,1,1)") {
        const PoissonSeries f = omega_dot_p(kDims, kLim, {1, 2, 3});
        PhasePoint pt{{1, 1, 1}, {0.5, 0.6, 0.7}, {0, 0, 0}, {0, 0, 0}};
        CHECK(evaluate(f, pt) == doctest::Approx(6.0).epsilon(1e-15));
    }
    SUBCASE("direct and factored strategies agree") {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int rep = 0; rep < 10; ++rep) {
            const PoissonSeries f = random_series(rng, kDims, kLim, 60);
            PhasePoint pt{{u(rng), u(rng), u(rng)},
                          {3 * u(rng), 3 * u(rng), 3 * u(rng)},
                          {u(rng), u(rng), u(rng)},
                          {u(rng), u(rng), u(rng)}};
            const double a = evaluate(f, pt);
            const double b = evaluate_direct(f, pt);
            CHECK(std::abs(a - b) <= 1e-13 * (1.0 + std::abs(a)));
        }
    }
}

TEST_CASE("dimension mismatch raises") {
    const PoissonSeries f = PoissonSeries::constant(kDims, kLim, 1.0);
    const PoissonSeries g = PoissonSeries::constant(Dimensions{2, 2}, kLim, 1.0);
    CHECK_THROWS(poisson_bracket(f, g));
    CHECK_THROWS(add(f, g));
}

TEST_CASE("truncation respects limits on arithmetic") {
    const Dimensions d{1, 1};
    const TruncationLimits lim{2, 4, 3};
    std::mt19937 rng(7);
    const PoissonSeries f = random_series(rng, d, lim, 25);
    const PoissonSeries g = random_series(rng, d, lim, 25);
    const PoissonSeries prod = mul(f, g);
    for (const auto& t : prod.terms()) CHECK(t.key.within(d, lim));
}
