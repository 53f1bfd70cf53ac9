#include "eltor/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <future>
#include <unordered_map>

#include "eltor/numeric.hpp"

namespace eltor::expansion {

using series::kArithmeticDrop;
using series::Parity;
using series::SeriesBuilder;
using series::Term;
using series::TermKey;

namespace {

const Dimensions kPlanetDims{1, 1};

// ---- complex series helper --------------------------------------------------

struct CSeries {
    PoissonSeries re, im;
};

CSeries cadd(const CSeries& a, const CSeries& b) {
    return {add(a.re, b.re), add(a.im, b.im)};
}
CSeries csub(const CSeries& a, const CSeries& b) {
    return {sub(a.re, b.re), sub(a.im, b.im)};
}
CSeries cmul(const CSeries& a, const CSeries& b) {
    return {sub(mul(a.re, b.re), mul(a.im, b.im)),
            add(mul(a.re, b.im), mul(a.im, b.re))};
}
CSeries cmul_real(const CSeries& a, const PoissonSeries& r) {
    return {mul(a.re, r), mul(a.im, r)};
}
CSeries cscale(const CSeries& a, double c) {
    return {scale(a.re, c), scale(a.im, c)};
}
CSeries cscale_i(const CSeries& a) { // multiply by i
    return {scale(a.im, -1.0), a.re};
}
CSeries conj(const CSeries& a) { return {a.re, scale(a.im, -1.0)}; }

// multiply by e^{i lambda} (harmonic shift via cos + i sin)
CSeries cmul_expilambda(const CSeries& a) {
    const Dimensions& d = a.re.dims();
    const PoissonSeries c = PoissonSeries::harmonic(
        d, a.re.limits(), std::vector<int>{1}, Parity::Cos);
    const PoissonSeries s = PoissonSeries::harmonic(
        d, a.re.limits(), std::vector<int>{1}, Parity::Sin);
    return cmul(a, CSeries{c, s});
}

// (1 + u)^alpha truncated at u-degree max_pow; u must have zero constant term.
PoissonSeries binomial_series(const PoissonSeries& u, double alpha,
                              int max_pow) {
    PoissonSeries out = PoissonSeries::constant(u.dims(), u.limits(), 1.0);
    PoissonSeries upow = out;
    double coeff = 1.0;
    for (int k = 1; k <= max_pow; ++k) {
        coeff *= (alpha - (k - 1)) / k;
        upow = mul(upow, u);
        if (upow.empty()) break;
        out = add(out, scale(upow, coeff));
    }
    return out;
}

// exp(i delta) for a small real series delta (no constant term).
CSeries cexp_of_small(const PoissonSeries& delta, int max_pow) {
    CSeries out{PoissonSeries::constant(delta.dims(), delta.limits(), 1.0),
                PoissonSeries::zero(delta.dims(), delta.limits())};
    CSeries term = out;
    const CSeries idelta{PoissonSeries::zero(delta.dims(), delta.limits()),
                         delta};
    for (int k = 1; k <= max_pow; ++k) {
        term = cscale(cmul(term, idelta), 1.0 / k);
        if (term.re.empty() && term.im.empty()) break;
        out = cadd(out, term);
    }
    return out;
}

// 1/(1 + u) truncated; u has no constant term.
PoissonSeries geometric_inverse(const PoissonSeries& u, int max_pow) {
    PoissonSeries out = PoissonSeries::constant(u.dims(), u.limits(), 1.0);
    PoissonSeries upow = out;
    for (int k = 1; k <= max_pow; ++k) {
        upow = mul(upow, u);
        if (upow.empty()) break;
        out = add(out, scale(upow, k % 2 ? -1.0 : 1.0));
    }
    return out;
}

} // namespace

std::vector<double> DiagonalizingMap::apply(const std::vector<double>& v) const {
    std::vector<double> out(n2, 0.0);
    for (int i = 0; i < n2; ++i)
        for (int a = 0; a < n2; ++a) out[i] += Q[i * n2 + a] * v[a];
    return out;
}

std::vector<double>
DiagonalizingMap::apply_inverse(const std::vector<double>& v) const {
    std::vector<double> out(n2, 0.0);
    for (int i = 0; i < n2; ++i)
        for (int a = 0; a < n2; ++a) out[i] += Q[a * n2 + i] * v[a];
    return out;
}

std::vector<double> average_semimajor(const BodySystem& sys, double t_span,
                                      double dt) {
    dynamics::IntegratorConfig cfg;
    cfg.dt = dt;
    cfg.sample_every = 1.0;
    cfg.precision = dynamics::Precision::Extended;
    const dynamics::CartesianState s0 = dynamics::system_to_cartesian(sys);
    std::vector<long double> acc(sys.n_planets(), 0.0L);
    long count = 0;
    dynamics::integrate_stream(
        sys, s0, t_span, cfg,
        [&](double, const dynamics::CartesianState& s) {
            for (int j = 0; j < sys.n_planets(); ++j)
                acc[j] += dynamics::cartesian_to_elements(sys, j, s.rx[j],
                                                          s.ry[j], s.px[j],
                                                          s.py[j])
                              .a;
            ++count;
        });
    std::vector<double> out(sys.n_planets());
    for (int j = 0; j < sys.n_planets(); ++j)
        out[j] = static_cast<double>(acc[j] / count);
    return out;
}

std::vector<double> kepler_mean_motions(const BodySystem& sys,
                                        const std::vector<double>& lambda_star) {
    std::vector<double> n(sys.n_planets());
    for (int j = 0; j < sys.n_planets(); ++j) {
        if (lambda_star[j] <= 0.0)
            throw std::invalid_argument("kepler_mean_motions: Lambda* <= 0");
        const double mg = sys.grav_param(j);
        const double b = sys.beta(j);
        n[j] = mg * mg * b * b * b / std::pow(lambda_star[j], 3);
    }
    return n;
}

double kepler_value(const BodySystem& sys,
                    const std::vector<double>& lambda_star) {
    double f = 0.0;
    for (int j = 0; j < sys.n_planets(); ++j) {
        const double mg = sys.grav_param(j);
        const double b = sys.beta(j);
        f -= mg * mg * b * b * b / (2.0 * lambda_star[j] * lambda_star[j]);
    }
    return f;
}

std::vector<PoissonSeries> kepler_part(const BodySystem& sys,
                                       const std::vector<double>& lambda_star,
                                       int order, const Dimensions& dims,
                                       const TruncationLimits& lim) {
    if (order < 2) throw std::invalid_argument("kepler_part: order < 2");
    std::vector<PoissonSeries> out;
    for (int m = 2; m <= order; ++m) {
        SeriesBuilder b(dims, lim);
        std::vector<int> dp(dims.n1, 0), dxy(2 * dims.n2, 0), k(dims.n1, 0);
        for (int j = 0; j < sys.n_planets(); ++j) {
            if (lambda_star[j] <= 0.0)
                throw std::invalid_argument("kepler_part: Lambda* <= 0");
            const double mg = sys.grav_param(j);
            const double be = sys.beta(j);
            // F0_j(Lambda) = -mg^2 be^3 / (2 Lambda^2); Taylor term of degree m:
            // -(mg^2 be^3 / 2) (-1)^m (m+1) Lambda*^-(2+m) L^m
            const double c = -0.5 * mg * mg * be * be * be *
                             (m % 2 ? -1.0 : 1.0) * (m + 1) /
                             std::pow(lambda_star[j], m + 2);
            dp.assign(dims.n1, 0);
            dp[j] = m;
            b.add(dp, dxy, k, Parity::Cos, c);
        }
        out.push_back(std::move(b).build());
    }
    return out;
}

PlanetSeries two_body_series(const BodySystem& sys, int planet,
                             double lambda_star, const TruncationLimits& lim) {
    const Dimensions d = kPlanetDims;
    const double mg = sys.grav_param(planet);
    const double beta = sys.beta(planet);
    const double a_star = std::pow(lambda_star / (beta * std::sqrt(mg)), 2);
    const int max_sec = lim.max_l;

    // u = L / Lambda*
    const PoissonSeries u = PoissonSeries::action(d, lim, 0, 1.0 / lambda_star);

    // sigma = (xi - i eta) / sqrt(2 Lambda)
    const PoissonSeries inv_sqrt_2L =
        scale(binomial_series(u, -0.5, lim.max_j1),
              1.0 / std::sqrt(2.0 * lambda_star));
    const CSeries xi_minus_ieta{
        PoissonSeries::secular_x(d, lim, 0),
        scale(PoissonSeries::secular_y(d, lim, 0), -1.0)};
    const CSeries sigma = cmul_real(xi_minus_ieta, inv_sqrt_2L);
    const PoissonSeries sig2 =
        add(mul(sigma.re, sigma.re), mul(sigma.im, sigma.im)); // sigma sigmabar
    const PoissonSeries one_minus_half_sig2 =
        sub(PoissonSeries::constant(d, lim, 1.0), scale(sig2, 0.5));

    // complex eccentricity: ehat = sigma sqrt(2 - sigma sigmabar)
    const PoissonSeries sqrt_2_minus =
        scale(binomial_series(scale(sig2, -0.5), 0.5, max_sec / 2 + 1),
              std::sqrt(2.0));
    const CSeries ehat = cmul_real(sigma, sqrt_2_minus);
    const CSeries ehat_bar = conj(ehat);

    // eccentric longitude F = lambda + Im[ehat_bar e^{iF}], solved by
    // fixed-point iteration in the deviation delta = F - lambda
    PoissonSeries delta = PoissonSeries::zero(d, lim);
    for (int it = 0; it < max_sec + 1; ++it) {
        const CSeries eiF = cmul_expilambda(cexp_of_small(delta, max_sec));
        delta = cmul(ehat_bar, eiF).im;
    }
    const CSeries eiF = cmul_expilambda(cexp_of_small(delta, max_sec));
    const CSeries eiF_conj = conj(eiF);

    // position: z = a [ e^{iF} (1 - ss/2) + sigma^2 e^{-iF}/2 - ehat ]
    const PoissonSeries a_series =
        scale(binomial_series(u, 2.0, lim.max_j1), a_star);
    CSeries bracket = cadd(cmul_real(eiF, one_minus_half_sig2),
                           cscale(cmul(cmul(sigma, sigma), eiF_conj), 0.5));
    bracket = csub(bracket, ehat);
    const CSeries z = cmul_real(bracket, a_series);

    // velocity: v = i (mg beta/Lambda) (a/r) [ (1-ss/2) e^{iF} - sigma^2 e^{-iF}/2 ]
    const PoissonSeries r_over_a_minus1 =
        scale(cmul(ehat_bar, eiF).re, -1.0); // r/a = 1 - Re[ehat_bar e^{iF}]
    const PoissonSeries a_over_r = geometric_inverse(r_over_a_minus1, max_sec);
    const PoissonSeries na_series =
        scale(binomial_series(u, -1.0, lim.max_j1), mg * beta / lambda_star);
    const CSeries vbracket =
        csub(cmul_real(eiF, one_minus_half_sig2),
             cscale(cmul(cmul(sigma, sigma), eiF_conj), 0.5));
    const CSeries v =
        cscale_i(cmul_real(cmul_real(vbracket, a_over_r), na_series));

    PlanetSeries out;
    out.zx = z.re;
    out.zy = z.im;
    out.px = scale(v.re, beta);
    out.py = scale(v.im, beta);
    return out;
}

PoissonSeries embed_planet(const PoissonSeries& s, const Dimensions& full,
                           int planet) {
    const Dimensions d = s.dims();
    if (d.n1 != 1 || d.n2 != 1)
        throw std::invalid_argument("embed_planet: source must be {1,1}");
    SeriesBuilder b(full, s.limits());
    std::vector<int> dp(full.n1, 0), dxy(2 * full.n2, 0), k(full.n1, 0);
    for (const auto& t : s.terms()) {
        dp.assign(full.n1, 0);
        dxy.assign(2 * full.n2, 0);
        k.assign(full.n1, 0);
        dp[planet] = t.key.dp(d, 0);
        dxy[planet] = t.key.dx(d, 0);
        dxy[full.n2 + planet] = t.key.dy(d, 0);
        k[planet] = t.key.k(d, 0);
        b.add(dp, dxy, k, t.key.parity(), t.coeff);
    }
    return std::move(b).build();
}

PoissonSeries disturbing_expansion(const BodySystem& sys,
                                   const std::vector<double>& lambda_star,
                                   const ExpansionConfig& cfg) {
    const int n = sys.n_planets();
    const Dimensions full{n, n};
    TruncationLimits work = cfg.limits;
    work.max_trig += cfg.trig_margin;

    TruncationLimits planet_lim = work;
    planet_lim.max_trig = std::min(work.max_trig, work.max_l + work.max_j1 + 2);

    std::vector<PlanetSeries> planets;
    std::vector<double> a_star(n);
    for (int j = 0; j < n; ++j) {
        planets.push_back(two_body_series(sys, j, lambda_star[j], planet_lim));
        a_star[j] = std::pow(
            lambda_star[j] / (sys.beta(j) * std::sqrt(sys.grav_param(j))), 2);
    }
    std::vector<PoissonSeries> zx(n), zy(n), px(n), py(n);
    for (int j = 0; j < n; ++j) {
        zx[j] = embed_planet(planets[j].zx, full, j);
        zy[j] = embed_planet(planets[j].zy, full, j);
        px[j] = embed_planet(planets[j].px, full, j);
        py[j] = embed_planet(planets[j].py, full, j);
    }

    // pair contributions are independent; compute them concurrently
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    auto pair_contribution = [&](int i, int j) {
        SeriesBuilder total(full, work);
        {
            // kinetic coupling
            total.add_series(
                scale(add(mul(px[i], px[j], work), mul(py[i], py[j], work)),
                      1.0 / sys.m0));
        }
        {

            // inverse mutual distance
            const double a_in = std::min(a_star[i], a_star[j]);
            const double a_out = std::max(a_star[i], a_star[j]);
            const double alpha = a_in / a_out;
            if (alpha > 0.9)
                throw std::runtime_error(
                    "disturbing_expansion: semi-major axes too close for the "
                    "binomial expansion of the mutual distance");

            const PoissonSeries dx = sub(zx[i], zx[j]);
            const PoissonSeries dy = sub(zy[i], zy[j]);
            const PoissonSeries delta2 =
                add(mul(dx, dx, work), mul(dy, dy, work));
            // circular part: the degree-(0,0) content, a function of the
            // synodic angle only
            const PoissonSeries circ = delta2.homogeneous_part(0, 0);
            const PoissonSeries vres = sub(delta2, circ);

            // Fourier series of D^{-s} for s = 1/2, 3/2, ...
            auto inv_dist_fourier = [&](double s_exp) {
                SeriesBuilder fb(full, work);
                std::vector<int> dp(full.n1, 0), dxy(2 * full.n2, 0),
                    k(full.n1, 0);
                const double scale_out = std::pow(a_out, -2.0 * s_exp);
                for (int kk = 0; kk <= work.max_trig; ++kk) {
                    double c =
                        numeric::laplace_coefficient(s_exp, kk, alpha) *
                        scale_out;
                    if (kk == 0) c *= 0.5;
                    if (std::abs(c) < 1e-25) continue;
                    k.assign(full.n1, 0);
                    k[i] = kk;
                    k[j] = -kk;
                    fb.add(dp, dxy, k, Parity::Cos, c);
                }
                return std::move(fb).build();
            };

            // 1/Delta = sum_m binom(-1/2, m) vres^m D^{-m-1/2}
            const double gmm = -sys.G * sys.m[i] * sys.m[j];
            PoissonSeries vpow = PoissonSeries::constant(full, work, 1.0);
            double binom = 1.0;
            for (int m = 0; m <= work.max_l; ++m) {
                if (m > 0) {
                    binom *= (-0.5 - (m - 1)) / m;
                    vpow = mul(vpow, vres, work);
                    if (vpow.empty()) break;
                }
                mul_accumulate(total, vpow, inv_dist_fourier(m + 0.5),
                               gmm * binom);
            }
        }
        return std::move(total).build(kArithmeticDrop);
    };

    std::vector<std::future<PoissonSeries>> futures;
    for (std::size_t pi = 1; pi < pairs.size(); ++pi)
        futures.push_back(std::async(std::launch::async, pair_contribution,
                                     pairs[pi].first, pairs[pi].second));
    SeriesBuilder total(full, work);
    total.add_series(pair_contribution(pairs[0].first, pairs[0].second));
    for (auto& f : futures) total.add_series(f.get());
    return std::move(total).build(kArithmeticDrop);
}

void diagonalize_secular(const PoissonSeries& h02_avg, DiagonalizingMap& map,
                         std::vector<double>& nu0) {
    const Dimensions d = h02_avg.dims();
    const int n2 = d.n2;
    // expected form: 1/2 sum_ij A_ij (xi_i xi_j + eta_i eta_j)
    std::vector<double> Axx(n2 * n2, 0.0), Ayy(n2 * n2, 0.0);
    double cross = 0.0, scale_ref = 0.0;
    for (const auto& t : h02_avg.terms()) {
        if (t.key.degree_p(d) != 0 || t.key.degree_xy(d) != 2 ||
            !t.key.harmonic_zero(d))
            throw std::invalid_argument(
                "diagonalize_secular: input is not an angle-free quadratic");
        scale_ref = std::max(scale_ref, std::abs(t.coeff));
        int nx = 0, ny = 0;
        for (int l = 0; l < n2; ++l) {
            nx += t.key.dx(d, l);
            ny += t.key.dy(d, l);
        }
        if (nx == 1 && ny == 1) {
            cross = std::max(cross, std::abs(t.coeff));
            continue;
        }
        std::vector<double>& A = nx == 2 ? Axx : Ayy;
        int a = -1, b2 = -1;
        for (int l = 0; l < n2; ++l) {
            const int e = nx == 2 ? t.key.dx(d, l) : t.key.dy(d, l);
            if (e == 2) a = b2 = l;
            if (e == 1) (a < 0 ? a : b2) = l;
        }
        if (a == b2) {
            A[a * n2 + a] += 2.0 * t.coeff;
        } else {
            A[a * n2 + b2] += t.coeff;
            A[b2 * n2 + a] += t.coeff;
        }
    }
    if (cross > 1e-12 * std::max(scale_ref, 1e-300))
        throw std::runtime_error(
            "diagonalize_secular: xi-eta cross terms present");
    for (int i = 0; i < n2 * n2; ++i)
        if (std::abs(Axx[i] - Ayy[i]) > 1e-10 * std::max(scale_ref, 1e-300))
            throw std::runtime_error(
                "diagonalize_secular: xi and eta quadratic forms differ");

    std::vector<double> evec;
    numeric::eigen_symmetric(Axx, n2, nu0, evec);

    for (int i = 0; i + 1 < n2; ++i)
        if (std::abs(nu0[i + 1] - nu0[i]) < 1e-12 * std::max(scale_ref, 1e-300))
            throw std::runtime_error("diagonalize_secular: degenerate spectrum");
    bool all_neg = true, all_pos = true;
    for (double v : nu0) {
        all_neg = all_neg && v < 0.0;
        all_pos = all_pos && v > 0.0;
    }
    if (!all_neg && !all_pos) {
        std::string msg = "diagonalize_secular: mixed-sign frequencies:";
        for (double v : nu0) msg += " " + std::to_string(v);
        throw std::runtime_error(msg);
    }

    map.n2 = n2;
    map.Q = evec; // columns are eigenvectors; xi = Q x
    // gauge fix: largest entry of each column positive
    for (int jcol = 0; jcol < n2; ++jcol) {
        int imax = 0;
        for (int i = 1; i < n2; ++i)
            if (std::abs(map.Q[i * n2 + jcol]) >
                std::abs(map.Q[imax * n2 + jcol]))
                imax = i;
        if (map.Q[imax * n2 + jcol] < 0.0)
            for (int i = 0; i < n2; ++i) map.Q[i * n2 + jcol] *= -1.0;
    }
}

PoissonSeries apply_diagonalizing(const PoissonSeries& s,
                                  const DiagonalizingMap& map) {
    const Dimensions d = s.dims();
    const int n2 = d.n2;
    if (map.n2 != n2)
        throw std::invalid_argument("apply_diagonalizing: dims mismatch");

    // expansion of one xy-monomial under the substitution, memoized
    using Expansion = std::vector<std::pair<std::uint64_t, double>>;
    std::unordered_map<std::uint64_t, Expansion> memo;

    auto pack = [n2](const int* e) {
        std::uint64_t v = 0;
        for (int i = 0; i < 2 * n2; ++i)
            v |= std::uint64_t(e[i] & 0xF) << (4 * i);
        return v;
    };
    auto unpack = [n2](std::uint64_t v, int* e) {
        for (int i = 0; i < 2 * n2; ++i) e[i] = int((v >> (4 * i)) & 0xF);
    };

    auto expand_monomial = [&](std::uint64_t key) -> const Expansion& {
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        int e[12];
        unpack(key, e);
        std::unordered_map<std::uint64_t, double> acc;
        acc.emplace(0, 1.0);
        int w[12];
        for (int slot = 0; slot < 2 * n2; ++slot) {
            const bool is_x = slot < n2;
            const int src = is_x ? slot : slot - n2;
            for (int rep = 0; rep < e[slot]; ++rep) {
                std::unordered_map<std::uint64_t, double> next;
                next.reserve(acc.size() * n2);
                for (const auto& [mk, mc] : acc) {
                    unpack(mk, w);
                    for (int a = 0; a < n2; ++a) {
                        const double q = map.Q[src * n2 + a];
                        if (q == 0.0) continue;
                        const int tslot = is_x ? a : n2 + a;
                        w[tslot] += 1;
                        next[pack(w)] += mc * q;
                        w[tslot] -= 1;
                    }
                }
                acc = std::move(next);
            }
        }
        Expansion flat(acc.begin(), acc.end());
        std::sort(flat.begin(), flat.end());
        return memo.emplace(key, std::move(flat)).first->second;
    };

    SeriesBuilder b(d, s.limits());
    b.reserve(s.size() * 2);
    int e[12];
    for (const auto& t : s.terms()) {
        for (int i = 0; i < 2 * n2; ++i) e[i] = t.key.raw(d.n1 + i);
        const Expansion& ex = expand_monomial(pack(e));
        for (const auto& [mk, mc] : ex) {
            TermKey key = t.key;
            unpack(mk, e);
            for (int i = 0; i < 2 * n2; ++i) key.set_raw(d.n1 + i, e[i]);
            b.add_canonical(key, t.coeff * mc);
        }
    }
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries InitialHamiltonian::assembled() const {
    SeriesBuilder b(dims, limits);
    std::vector<int> dp(dims.n1, 0), dxy(2 * dims.n2, 0), k(dims.n1, 0);
    for (int j = 0; j < dims.n1; ++j) {
        dp.assign(dims.n1, 0);
        dp[j] = 1;
        b.add(dp, dxy, k, Parity::Cos, n_star[j]);
    }
    dp.assign(dims.n1, 0);
    for (int l = 0; l < dims.n2; ++l) {
        dxy.assign(2 * dims.n2, 0);
        dxy[l] = 2;
        b.add(dp, dxy, k, Parity::Cos, 0.5 * nu0[l]);
        dxy[l] = 0;
        dxy[dims.n2 + l] = 2;
        b.add(dp, dxy, k, Parity::Cos, 0.5 * nu0[l]);
    }
    for (const auto& [tag, part] : blocks) b.add_series(part);
    return std::move(b).build();
}

series::PhasePoint
InitialHamiltonian::to_internal(const dynamics::PoincareState& ps) const {
    series::PhasePoint pt;
    pt.p.resize(dims.n1);
    pt.q = ps.lambda;
    for (int j = 0; j < dims.n1; ++j) pt.p[j] = ps.Lambda[j] - lambda_star[j];
    pt.x = diag.apply_inverse(ps.xi); // x = Q^T xi
    pt.y = diag.apply_inverse(ps.eta);
    return pt;
}

dynamics::PoincareState
InitialHamiltonian::to_poincare(const series::PhasePoint& pt) const {
    dynamics::PoincareState ps;
    ps.Lambda.resize(dims.n1);
    ps.lambda = pt.q;
    for (int j = 0; j < dims.n1; ++j) ps.Lambda[j] = pt.p[j] + lambda_star[j];
    ps.xi = diag.apply(pt.x);
    ps.eta = diag.apply(pt.y);
    return ps;
}

InitialHamiltonian build_initial_hamiltonian(
    const BodySystem& sys, const ExpansionConfig& cfg, int K,
    const std::vector<double>* a_star_override) {
    InitialHamiltonian ham;
    const int n = sys.n_planets();
    ham.dims = Dimensions{n, n};
    ham.system = sys;
    ham.K = K;
    ham.mu = sys.mass_ratio();

    ham.a_star = a_star_override
                     ? *a_star_override
                     : average_semimajor(sys, cfg.average_span, cfg.average_dt);
    ham.lambda_star.resize(n);
    for (int j = 0; j < n; ++j)
        ham.lambda_star[j] =
            sys.beta(j) * std::sqrt(sys.grav_param(j) * ham.a_star[j]);
    ham.n_star = kepler_mean_motions(sys, ham.lambda_star);
    ham.dropped_constant = kepler_value(sys, ham.lambda_star);

    // storage limits keep the full Keplerian Taylor order alongside the
    // (b1)-capped perturbation
    ham.limits = cfg.limits;
    ham.limits.max_j1 = std::max(cfg.limits.max_j1, cfg.kepler_order);
    ham.limits.max_l = std::max(cfg.limits.max_l, 2 * cfg.kepler_order);

    const std::vector<PoissonSeries> kep = kepler_part(
        sys, ham.lambda_star, cfg.kepler_order, ham.dims, ham.limits);
    const PoissonSeries pert = disturbing_expansion(sys, ham.lambda_star, cfg);

    // diagonalize the lambda-average of the secular quadratic part
    const PoissonSeries h02_avg =
        pert.homogeneous_part(0, 2).angle_free_part();
    std::vector<double> nu0;
    diagonalize_secular(h02_avg, ham.diag, nu0);
    ham.nu0 = nu0;

    PoissonSeries pert_diag =
        apply_diagonalizing(pert.truncated(cfg.limits), ham.diag);

    // remove the header quadratic sum nu_l (x_l^2 + y_l^2)/2
    {
        SeriesBuilder b(ham.dims, pert_diag.limits());
        b.add_series(pert_diag);
        std::vector<int> dp(n, 0), dxy(2 * n, 0), k(n, 0);
        for (int l = 0; l < n; ++l) {
            dxy.assign(2 * n, 0);
            dxy[l] = 2;
            b.add(dp, dxy, k, Parity::Cos, -0.5 * nu0[l]);
            dxy[l] = 0;
            dxy[n + l] = 2;
            b.add(dp, dxy, k, Parity::Cos, -0.5 * nu0[l]);
        }
        pert_diag = std::move(b).build(kArithmeticDrop);
    }

    // assemble blocks: Keplerian Taylor terms + re-blocked perturbation
    PoissonSeries rest = pert_diag.with_limits(ham.limits);
    for (const auto& kp : kep) rest = add(rest, kp);
    ham.blocks = reorder_fourier(rest, K);
    return ham;
}

double cartesian_hamiltonian_at(const InitialHamiltonian& ham,
                                const series::PhasePoint& pt) {
    const dynamics::PoincareState ps = ham.to_poincare(pt);
    const dynamics::CartesianState cs =
        dynamics::poincare_to_cartesian(ham.system, ps);
    return dynamics::total_energy(ham.system, cs);
}

} // namespace eltor::expansion
