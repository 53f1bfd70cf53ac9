#include "eltor/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "eltor/numeric.hpp"

namespace eltor::dynamics {

using numeric::kPi;
using numeric::kTwoPi;

double BodySystem::mass_ratio() const {
    double mu = 0.0;
    for (double mj : m) mu = std::max(mu, mj / m0);
    return mu;
}

BodySystem BodySystem::sjsu() {
    BodySystem sys;
    sys.G = 1.0;
    sys.m0 = kTwoPi * kTwoPi;
    sys.m = {sys.m0 / 1047.355, sys.m0 / 3498.5, sys.m0 / 22902.98};
    sys.elements = {
        {5.20463727204700266, 0.04785365972484999, 3.04525729444853654,
         0.24927354029554571},
        {9.54108529142232165, 0.05460848595674678, 5.32199311882584869,
         1.61225062288036902},
        {19.2231635458410572, 0.04858667407651962, 0.19431922829271914,
         2.99374344439246487}};
    return sys;
}

// --- element conversions ---------------------------------------------------

void poincare_variables(const BodySystem& sys, int j, const OrbitalElements& el,
                        double& Lambda, double& lambda, double& xi,
                        double& eta) {
    if (el.e < 0.0 || el.e >= 1.0)
        throw std::invalid_argument("poincare_variables: eccentricity >= 1");
    Lambda = sys.beta(j) * std::sqrt(sys.grav_param(j) * el.a);
    lambda = el.M + el.peri;
    const double rho = std::sqrt(1.0 - std::sqrt(1.0 - el.e * el.e));
    xi = std::sqrt(2.0 * Lambda) * rho * std::cos(el.peri);
    eta = -std::sqrt(2.0 * Lambda) * rho * std::sin(el.peri);
}

OrbitalElements elements_from_poincare(const BodySystem& sys, int j,
                                       double Lambda, double lambda, double xi,
                                       double eta) {
    if (Lambda <= 0.0)
        throw std::invalid_argument("elements_from_poincare: Lambda <= 0");
    const double rho2 = (xi * xi + eta * eta) / (2.0 * Lambda);
    if (rho2 >= 1.0)
        throw std::invalid_argument(
            "elements_from_poincare: xi^2 + eta^2 >= 2 Lambda");
    OrbitalElements el;
    const double bg = sys.beta(j) * std::sqrt(sys.grav_param(j));
    el.a = (Lambda / bg) * (Lambda / bg);
    el.e = std::sqrt(rho2 * (2.0 - rho2));
    el.peri = (xi == 0.0 && eta == 0.0) ? 0.0 : std::atan2(-eta, xi);
    el.M = lambda - el.peri;
    return el;
}

void elements_to_cartesian(const BodySystem& sys, int j,
                           const OrbitalElements& el, double& rx, double& ry,
                           double& px, double& py) {
    if (el.e < 0.0 || el.e >= 1.0)
        throw std::invalid_argument("elements_to_cartesian: e >= 1");
    const double mu = sys.grav_param(j);
    const double beta = sys.beta(j);
    const double E = numeric::solve_kepler(el.M, el.e);
    const double cE = std::cos(E), sE = std::sin(E);
    const double se = std::sqrt(1.0 - el.e * el.e);
    const double xo = el.a * (cE - el.e);
    const double yo = el.a * se * sE;
    const double n = std::sqrt(mu / (el.a * el.a * el.a));
    const double denom = 1.0 - el.e * cE;
    const double vxo = -el.a * n * sE / denom;
    const double vyo = el.a * n * se * cE / denom;
    const double cw = std::cos(el.peri), sw = std::sin(el.peri);
    rx = cw * xo - sw * yo;
    ry = sw * xo + cw * yo;
    px = beta * (cw * vxo - sw * vyo);
    py = beta * (sw * vxo + cw * vyo);
}

OrbitalElements cartesian_to_elements(const BodySystem& sys, int j, double rx,
                                      double ry, double px, double py) {
    const double mu = sys.grav_param(j);
    const double beta = sys.beta(j);
    const double vx = px / beta, vy = py / beta;
    const double r = std::hypot(rx, ry);
    const double v2 = vx * vx + vy * vy;
    const double energy = 0.5 * v2 - mu / r;
    if (energy >= 0.0)
        throw std::invalid_argument("cartesian_to_elements: orbit not bound");
    OrbitalElements el;
    el.a = -mu / (2.0 * energy);
    const double rv = rx * vx + ry * vy;
    // Laplace-Runge-Lenz vector / mu gives (e cos peri, e sin peri).
    const double ex = ((v2 - mu / r) * rx - rv * vx) / mu;
    const double ey = ((v2 - mu / r) * ry - rv * vy) / mu;
    el.e = std::hypot(ex, ey);
    el.peri = (ex == 0.0 && ey == 0.0) ? 0.0 : std::atan2(ey, ex);
    const double theta = std::atan2(ry, rx);        // true longitude
    const double f = theta - el.peri;               // true anomaly
    const double E = std::atan2(std::sqrt(1.0 - el.e * el.e) * std::sin(f),
                                el.e + std::cos(f));
    el.M = E - el.e * std::sin(E);
    return el;
}

CartesianState system_to_cartesian(const BodySystem& sys) {
    CartesianState s;
    const int n = sys.n_planets();
    s.rx.resize(n); s.ry.resize(n); s.px.resize(n); s.py.resize(n);
    for (int j = 0; j < n; ++j)
        elements_to_cartesian(sys, j, sys.elements[j], s.rx[j], s.ry[j],
                              s.px[j], s.py[j]);
    return s;
}

CartesianState poincare_to_cartesian(const BodySystem& sys,
                                     const PoincareState& ps) {
    CartesianState s;
    const int n = sys.n_planets();
    s.rx.resize(n); s.ry.resize(n); s.px.resize(n); s.py.resize(n);
    for (int j = 0; j < n; ++j) {
        const OrbitalElements el = elements_from_poincare(
            sys, j, ps.Lambda[j], ps.lambda[j], ps.xi[j], ps.eta[j]);
        elements_to_cartesian(sys, j, el, s.rx[j], s.ry[j], s.px[j], s.py[j]);
    }
    return s;
}

PoincareState cartesian_to_poincare(const BodySystem& sys,
                                    const CartesianState& cs) {
    PoincareState ps;
    const int n = cs.n();
    ps.Lambda.resize(n); ps.lambda.resize(n); ps.xi.resize(n); ps.eta.resize(n);
    for (int j = 0; j < n; ++j) {
        const double mu = sys.grav_param(j);
        const double beta = sys.beta(j);
        const double vx = cs.px[j] / beta, vy = cs.py[j] / beta;
        const double r = std::hypot(cs.rx[j], cs.ry[j]);
        const double v2 = vx * vx + vy * vy;
        const double energy = 0.5 * v2 - mu / r;
        if (energy >= 0.0)
            throw std::invalid_argument("cartesian_to_poincare: orbit not bound");
        const double a = -mu / (2.0 * energy);
        const double rv = cs.rx[j] * vx + cs.ry[j] * vy;
        const double ex = ((v2 - mu / r) * cs.rx[j] - rv * vx) / mu;
        const double ey = ((v2 - mu / r) * cs.ry[j] - rv * vy) / mu;
        const double e2 = ex * ex + ey * ey;
        ps.Lambda[j] = beta * std::sqrt(mu * a);
        // sqrt((1 - sqrt(1-e^2)) / e^2) = 1 / sqrt(1 + sqrt(1-e^2)): regular
        // at e = 0, so xi, eta come straight from the eccentricity vector.
        const double g = 1.0 / (1.0 + std::sqrt(std::max(0.0, 1.0 - e2)));
        const double amp = std::sqrt(2.0 * ps.Lambda[j] * g);
        ps.xi[j] = amp * ex;
        ps.eta[j] = -amp * ey;
        const OrbitalElements el =
            cartesian_to_elements(sys, j, cs.rx[j], cs.ry[j], cs.px[j], cs.py[j]);
        ps.lambda[j] = el.M + el.peri;
    }
    return ps;
}

// --- conserved quantities ----------------------------------------------------

double total_energy(const BodySystem& sys, const CartesianState& s) {
    long double T0 = 0.0L, U0 = 0.0L, T1 = 0.0L, U1 = 0.0L;
    const int n = s.n();
    for (int j = 0; j < n; ++j) {
        const long double p2 = (long double)s.px[j] * s.px[j] +
                               (long double)s.py[j] * s.py[j];
        T0 += 0.5L * (sys.m0 + sys.m[j]) / (sys.m0 * sys.m[j]) * p2;
        U0 -= sys.G * sys.m0 * sys.m[j] /
              std::hypot((long double)s.rx[j], (long double)s.ry[j]);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            T1 += ((long double)s.px[i] * s.px[j] +
                   (long double)s.py[i] * s.py[j]) / sys.m0;
            const long double dx = s.rx[i] - s.rx[j], dy = s.ry[i] - s.ry[j];
            U1 -= sys.G * sys.m[i] * sys.m[j] / std::sqrt(dx * dx + dy * dy);
        }
    return static_cast<double>(T0 + U0 + T1 + U1);
}

double angular_momentum(const BodySystem& sys, const CartesianState& s) {
    (void)sys;
    long double L = 0.0L;
    for (int j = 0; j < s.n(); ++j)
        L += (long double)s.rx[j] * s.py[j] - (long double)s.ry[j] * s.px[j];
    return static_cast<double>(L);
}

// --- symplectic splitting ----------------------------------------------------

namespace {

template <typename Real>
struct NState {
    std::vector<Real> rx, ry, px, py;
};

template <typename Real>
NState<Real> widen(const CartesianState& s) {
    NState<Real> o;
    const int n = s.n();
    o.rx.assign(s.rx.begin(), s.rx.end());
    o.ry.assign(s.ry.begin(), s.ry.end());
    o.px.assign(s.px.begin(), s.px.end());
    o.py.assign(s.py.begin(), s.py.end());
    (void)n;
    return o;
}

template <typename Real>
CartesianState narrow(const NState<Real>& s) {
    CartesianState o;
    o.rx.assign(s.rx.begin(), s.rx.end());
    o.ry.assign(s.ry.begin(), s.ry.end());
    o.px.assign(s.px.begin(), s.px.end());
    o.py.assign(s.py.begin(), s.py.end());
    return o;
}

// Exact Kepler advance of (r, v) for gravitational parameter mu over dt,
// through the eccentric-anomaly difference equation; regular at e = 0.
template <typename Real>
void kepler_drift(Real mu, Real dt, Real& rx, Real& ry, Real& vx, Real& vy) {
    const Real r0 = std::sqrt(rx * rx + ry * ry);
    const Real v2 = vx * vx + vy * vy;
    const Real alpha = Real(2) / r0 - v2 / mu; // 1/a
    if (!(alpha > Real(0)))
        throw std::runtime_error("kepler_drift: orbit not elliptic");
    const Real a = Real(1) / alpha;
    const Real n = std::sqrt(mu / (a * a * a));
    const Real sigma0 = (rx * vx + ry * vy) / std::sqrt(mu);
    const Real c = Real(1) - r0 / a;        // e cos E0
    const Real s = sigma0 / std::sqrt(a);   // e sin E0
    const Real dM = n * dt;

    // Solve x - c sin x + s (1 - cos x) = dM  (monotone: F' >= 1 - e > 0).
    Real x = dM;
    const Real tol = std::numeric_limits<Real>::epsilon() * Real(16) *
                     (std::abs(dM) + Real(1));
    for (int it = 0; it < 60; ++it) {
        const Real sx = std::sin(x), cx = std::cos(x);
        const Real F = x - c * sx + s * (Real(1) - cx) - dM;
        if (std::abs(F) <= tol) break;
        const Real Fp = Real(1) - c * cx + s * sx;
        x -= F / Fp;
    }
    const Real sx = std::sin(x), cx = std::cos(x);
    const Real r1 = a + (r0 - a) * cx + sigma0 * std::sqrt(a) * sx;
    const Real f = Real(1) - (a / r0) * (Real(1) - cx);
    const Real g = dt + (sx - x) / n;
    const Real fdot = -std::sqrt(mu * a) * sx / (r0 * r1);
    const Real gdot = Real(1) - (a / r1) * (Real(1) - cx);
    const Real nrx = f * rx + g * vx;
    const Real nry = f * ry + g * vy;
    const Real nvx = fdot * rx + gdot * vx;
    const Real nvy = fdot * ry + gdot * vy;
    rx = nrx; ry = nry; vx = nvx; vy = nvy;
}

template <typename Real>
struct Splitting {
    const BodySystem* sys;
    std::vector<Real> beta, mu;

    explicit Splitting(const BodySystem& s) : sys(&s) {
        for (int j = 0; j < s.n_planets(); ++j) {
            beta.push_back(static_cast<Real>(s.beta(j)));
            mu.push_back(static_cast<Real>(s.grav_param(j)));
        }
    }

    void drift(NState<Real>& st, Real dt) const { // flow of T0 + U0
        for (std::size_t j = 0; j < beta.size(); ++j) {
            Real vx = st.px[j] / beta[j], vy = st.py[j] / beta[j];
            kepler_drift(mu[j], dt, st.rx[j], st.ry[j], vx, vy);
            st.px[j] = beta[j] * vx;
            st.py[j] = beta[j] * vy;
        }
    }

    void kick_t1(NState<Real>& st, Real dt) const { // flow of T1
        const Real inv_m0 = Real(1) / static_cast<Real>(sys->m0);
        Real sx = 0, sy = 0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            sx += st.px[j];
            sy += st.py[j];
        }
        for (std::size_t j = 0; j < beta.size(); ++j) {
            st.rx[j] += dt * inv_m0 * (sx - st.px[j]);
            st.ry[j] += dt * inv_m0 * (sy - st.py[j]);
        }
    }

    void kick_u1(NState<Real>& st, Real dt) const { // flow of U1
        const std::size_t n = beta.size();
        const Real G = static_cast<Real>(sys->G);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const Real dx = st.rx[i] - st.rx[j];
                const Real dy = st.ry[i] - st.ry[j];
                const Real d2 = dx * dx + dy * dy;
                const Real d = std::sqrt(d2);
                if (!(d > Real(1e-8)))
                    throw std::runtime_error("integrate: close encounter");
                const Real f = G * static_cast<Real>(sys->m[i]) *
                               static_cast<Real>(sys->m[j]) / (d2 * d);
                st.px[i] -= dt * f * dx;
                st.py[i] -= dt * f * dy;
                st.px[j] += dt * f * dx;
                st.py[j] += dt * f * dy;
            }
    }

    void kick(NState<Real>& st, Real dt) const { // symmetric split of T1 + U1
        kick_t1(st, dt / Real(2));
        kick_u1(st, dt);
        kick_t1(st, dt / Real(2));
    }

    void step(NState<Real>& st, Real dt, Scheme scheme) const {
        if (scheme == Scheme::SBAB3) {
            // Lobatto nodes: d = (1/12, 5/12, 5/12, 1/12),
            // c = ((5 - sqrt5)/10, sqrt5/5, (5 - sqrt5)/10).
            const Real d1 = Real(1) / Real(12);
            const Real d2 = Real(5) / Real(12);
            const Real sqrt5 = std::sqrt(Real(5));
            const Real c1 = (Real(5) - sqrt5) / Real(10);
            const Real c2 = sqrt5 / Real(5);
            kick(st, d1 * dt);
            drift(st, c1 * dt);
            kick(st, d2 * dt);
            drift(st, c2 * dt);
            kick(st, d2 * dt);
            drift(st, c1 * dt);
            kick(st, d1 * dt);
        } else {
            // Gauss nodes: c = (1/2 - sqrt15/10, sqrt15/10, ...),
            // d = (5/18, 8/18, 5/18).
            const Real sqrt15 = std::sqrt(Real(15));
            const Real c1 = Real(1) / Real(2) - sqrt15 / Real(10);
            const Real c2 = sqrt15 / Real(10);
            const Real d1 = Real(5) / Real(18);
            const Real d2 = Real(8) / Real(18);
            drift(st, c1 * dt);
            kick(st, d1 * dt);
            drift(st, c2 * dt);
            kick(st, d2 * dt);
            drift(st, c2 * dt);
            kick(st, d1 * dt);
            drift(st, c1 * dt);
        }
    }
};

template <typename Real>
void run_integration(
    const BodySystem& sys, const CartesianState& state0, double t_span,
    const IntegratorConfig& cfg,
    const std::function<void(double, const CartesianState&)>& on_sample) {
    if (cfg.dt == 0.0) throw std::invalid_argument("integrate: dt == 0");
    const long steps_per_sample = std::lround(cfg.sample_every / std::abs(cfg.dt));
    if (steps_per_sample < 1 ||
        std::abs(steps_per_sample * std::abs(cfg.dt) - cfg.sample_every) > 1e-9)
        throw std::invalid_argument(
            "integrate: sample_every must be an integer multiple of dt");
    const long n_samples = static_cast<long>(t_span / cfg.sample_every);

    Splitting<Real> split(sys);
    NState<Real> st = widen<Real>(state0);
    const Real dt = static_cast<Real>(cfg.dt);

    on_sample(0.0, state0);
    for (long s = 1; s <= n_samples; ++s) {
        for (long i = 0; i < steps_per_sample; ++i)
            split.step(st, dt, cfg.scheme);
        const double t = static_cast<double>(s) * cfg.sample_every;
        for (std::size_t j = 0; j < split.beta.size(); ++j)
            if (!std::isfinite(static_cast<double>(st.rx[j])) ||
                !std::isfinite(static_cast<double>(st.px[j])))
                throw std::runtime_error("integrate: state diverged at t = " +
                                         std::to_string(t));
        on_sample(t, narrow(st));
    }
}

} // namespace

Trajectory integrate(const BodySystem& sys, const CartesianState& state0,
                     double t_span, const IntegratorConfig& cfg) {
    Trajectory traj;
    traj.dt_sample = cfg.sample_every;
    traj.n_planets = sys.n_planets();
    const long n_samples = static_cast<long>(t_span / cfg.sample_every) + 1;
    traj.t.reserve(n_samples);
    traj.states.reserve(n_samples);
    integrate_stream(sys, state0, t_span, cfg,
                     [&traj](double t, const CartesianState& s) {
                         traj.t.push_back(t);
                         traj.states.push_back(s);
                     });
    return traj;
}

void integrate_stream(
    const BodySystem& sys, const CartesianState& state0, double t_span,
    const IntegratorConfig& cfg,
    const std::function<void(double, const CartesianState&)>& on_sample) {
    if (cfg.precision == Precision::Extended)
        run_integration<long double>(sys, state0, t_span, cfg, on_sample);
    else
        run_integration<double>(sys, state0, t_span, cfg, on_sample);
}

std::vector<std::complex<double>>
Trajectory::secular_signal(const BodySystem& sys, int planet) const {
    std::vector<std::complex<double>> sig;
    sig.reserve(states.size());
    for (const auto& s : states) {
        const PoincareState ps = cartesian_to_poincare(sys, s);
        sig.emplace_back(ps.xi[planet], ps.eta[planet]);
    }
    return sig;
}

std::vector<std::complex<double>>
Trajectory::fast_signal(const BodySystem& sys, int planet) const {
    std::vector<std::complex<double>> sig;
    sig.reserve(states.size());
    for (const auto& s : states) {
        const PoincareState ps = cartesian_to_poincare(sys, s);
        sig.push_back(ps.Lambda[planet] *
                      std::exp(std::complex<double>(0.0, ps.lambda[planet])));
    }
    return sig;
}

// --- reference Runge-Kutta ---------------------------------------------------

namespace {

using LD = long double;

void deriv(const BodySystem& sys, const std::vector<LD>& y,
           std::vector<LD>& dy) {
    const int n = sys.n_planets();
    dy.assign(4 * n, 0.0L);
    // layout: [rx ry]*n then [px py]*n
    LD spx = 0.0L, spy = 0.0L;
    for (int j = 0; j < n; ++j) {
        spx += y[2 * n + 2 * j];
        spy += y[2 * n + 2 * j + 1];
    }
    for (int j = 0; j < n; ++j) {
        const LD px = y[2 * n + 2 * j], py = y[2 * n + 2 * j + 1];
        dy[2 * j] = (sys.m0 + sys.m[j]) / (sys.m0 * sys.m[j]) * px +
                    (spx - px) / sys.m0;
        dy[2 * j + 1] = (sys.m0 + sys.m[j]) / (sys.m0 * sys.m[j]) * py +
                        (spy - py) / sys.m0;
    }
    for (int j = 0; j < n; ++j) {
        const LD rx = y[2 * j], ry = y[2 * j + 1];
        const LD r = std::sqrt(rx * rx + ry * ry);
        LD fx = -sys.G * sys.m0 * sys.m[j] * rx / (r * r * r);
        LD fy = -sys.G * sys.m0 * sys.m[j] * ry / (r * r * r);
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const LD dx = rx - y[2 * i], dyy = ry - y[2 * i + 1];
            const LD d = std::sqrt(dx * dx + dyy * dyy);
            fx -= sys.G * sys.m[i] * sys.m[j] * dx / (d * d * d);
            fy -= sys.G * sys.m[i] * sys.m[j] * dyy / (d * d * d);
        }
        dy[2 * n + 2 * j] = fx;
        dy[2 * n + 2 * j + 1] = fy;
    }
}

} // namespace

CartesianState integrate_rk(const BodySystem& sys, const CartesianState& s0,
                            double t_span, double tol) {
    const int n = sys.n_planets();
    std::vector<LD> y(4 * n);
    for (int j = 0; j < n; ++j) {
        y[2 * j] = s0.rx[j];
        y[2 * j + 1] = s0.ry[j];
        y[2 * n + 2 * j] = s0.px[j];
        y[2 * n + 2 * j + 1] = s0.py[j];
    }
    // Dormand-Prince 5(4) tableau.
    static const LD A[7][6] = {
        {},
        {1.0L / 5},
        {3.0L / 40, 9.0L / 40},
        {44.0L / 45, -56.0L / 15, 32.0L / 9},
        {19372.0L / 6561, -25360.0L / 2187, 64448.0L / 6561, -212.0L / 729},
        {9017.0L / 3168, -355.0L / 33, 46732.0L / 5247, 49.0L / 176,
         -5103.0L / 18656},
        {35.0L / 384, 0.0L, 500.0L / 1113, 125.0L / 192, -2187.0L / 6784,
         11.0L / 84}};
    static const LD B5[7] = {35.0L / 384,     0.0L,          500.0L / 1113,
                             125.0L / 192,    -2187.0L / 6784, 11.0L / 84,
                             0.0L};
    static const LD B4[7] = {5179.0L / 57600,  0.0L,
                             7571.0L / 16695,  393.0L / 640,
                             -92097.0L / 339200, 187.0L / 2100,
                             1.0L / 40};

    LD t = 0.0L, h = 1e-3L;
    const LD tend = t_span;
    std::vector<LD> k[7], yt(4 * n), y5(4 * n), y4(4 * n);
    while (t < tend) {
        if (t + h > tend) h = tend - t;
        deriv(sys, y, k[0]);
        for (int s = 1; s < 7; ++s) {
            for (int i = 0; i < 4 * n; ++i) {
                LD acc = y[i];
                for (int r = 0; r < s; ++r) acc += h * A[s][r] * k[r][i];
                yt[i] = acc;
            }
            deriv(sys, yt, k[s]);
        }
        LD err = 0.0L;
        for (int i = 0; i < 4 * n; ++i) {
            LD v5 = y[i], v4 = y[i];
            for (int s = 0; s < 7; ++s) {
                v5 += h * B5[s] * k[s][i];
                v4 += h * B4[s] * k[s][i];
            }
            y5[i] = v5;
            y4[i] = v4;
            err = std::max(err,
                           std::abs(v5 - v4) / (std::abs(v5) + 1.0L));
        }
        // error-per-unit-time control keeps the accumulated error ~ tol * t
        const LD budget = tol * h;
        if (err <= budget) {
            t += h;
            y = y5;
        }
        const LD fac = err > 0.0L
                           ? std::min(5.0L, std::max(0.2L, 0.9L * std::pow(budget / err, 0.25L)))
                           : 5.0L;
        h *= fac;
        if (h < 1e-12L)
            throw std::runtime_error("integrate_rk: step size underflow");
    }
    CartesianState out;
    out.rx.resize(n); out.ry.resize(n); out.px.resize(n); out.py.resize(n);
    for (int j = 0; j < n; ++j) {
        out.rx[j] = static_cast<double>(y[2 * j]);
        out.ry[j] = static_cast<double>(y[2 * j + 1]);
        out.px[j] = static_cast<double>(y[2 * n + 2 * j]);
        out.py[j] = static_cast<double>(y[2 * n + 2 * j + 1]);
    }
    return out;
}

// --- trajectory output --------------------------------------------------------

void write_trajectory_csv(const std::string& path, const BodySystem& sys,
                          const Trajectory& traj) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
    std::fprintf(f, "t");
    for (int j = 1; j <= traj.n_planets; ++j)
        std::fprintf(f,
                     ",x_%d,y_%d,vx_%d,vy_%d,a_%d,e_%d,M_%d,peri_%d,xi_%d,eta_%d",
                     j, j, j, j, j, j, j, j, j, j);
    std::fprintf(f, "\n");
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const CartesianState& s = traj.states[i];
        std::fprintf(f, "%.17e", traj.t[i]);
        const PoincareState ps = cartesian_to_poincare(sys, s);
        for (int j = 0; j < traj.n_planets; ++j) {
            const OrbitalElements el =
                cartesian_to_elements(sys, j, s.rx[j], s.ry[j], s.px[j], s.py[j]);
            const double beta = sys.beta(j);
            std::fprintf(f,
                         ",%.17e,%.17e,%.17e,%.17e,%.17e,%.17e,%.17e,%.17e,"
                         "%.17e,%.17e",
                         s.rx[j], s.ry[j], s.px[j] / beta, s.py[j] / beta, el.a,
                         el.e, el.M, el.peri, ps.xi[j], ps.eta[j]);
        }
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

void write_trajectory_store(const std::string& path, const Trajectory& traj) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_trajectory_store: cannot open " + path);
    const char magic[8] = {'E', 'L', 'T', 'R', 'J', '1', 0, 0};
    f.write(magic, 8);
    auto put_u64 = [&f](std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    };
    auto put_f64 = [&f](double v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    };
    put_u64(static_cast<std::uint64_t>(traj.n_planets));
    put_u64(traj.size());
    put_f64(traj.t0);
    put_f64(traj.dt_sample);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        put_f64(traj.t[i]);
        const CartesianState& s = traj.states[i];
        for (int j = 0; j < traj.n_planets; ++j) {
            put_f64(s.rx[j]); put_f64(s.ry[j]);
            put_f64(s.px[j]); put_f64(s.py[j]);
        }
    }
}

Trajectory read_trajectory_store(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_trajectory_store: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::string(magic, 5) != "ELTRJ")
        throw std::runtime_error("read_trajectory_store: bad magic");
    auto get_u64 = [&f]() {
        std::uint64_t v;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    auto get_f64 = [&f]() {
        double v;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    Trajectory traj;
    traj.n_planets = static_cast<int>(get_u64());
    const std::uint64_t count = get_u64();
    traj.t0 = get_f64();
    traj.dt_sample = get_f64();
    traj.t.reserve(count);
    traj.states.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        traj.t.push_back(get_f64());
        CartesianState s;
        s.rx.resize(traj.n_planets); s.ry.resize(traj.n_planets);
        s.px.resize(traj.n_planets); s.py.resize(traj.n_planets);
        for (int j = 0; j < traj.n_planets; ++j) {
            s.rx[j] = get_f64(); s.ry[j] = get_f64();
            s.px[j] = get_f64(); s.py[j] = get_f64();
        }
        traj.states.push_back(std::move(s));
    }
    if (!f) throw std::runtime_error("read_trajectory_store: truncated file");
    return traj;
}

} // namespace eltor::dynamics
