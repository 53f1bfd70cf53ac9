#include "eltor/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace eltor::numeric {

namespace {

double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }

} // namespace

void eigen_symmetric(const std::vector<double>& matrix, int n,
                     std::vector<double>& eigenvalues,
                     std::vector<double>& eigenvectors) {
    if (static_cast<int>(matrix.size()) != n * n)
        throw std::invalid_argument("eigen_symmetric: bad matrix size");
    std::vector<double> a = matrix; // working copy, becomes the rotations
    std::vector<double> d(n), e(n);

    // Householder reduction to tridiagonal form (tred2).
    for (int i = n - 1; i >= 1; --i) {
        const int l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (int k = 0; k <= l; ++k) scale += std::abs(a[i * n + k]);
            if (scale == 0.0) {
                e[i] = a[i * n + l];
            } else {
                for (int k = 0; k <= l; ++k) {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                double f = a[i * n + l];
                double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                f = 0.0;
                for (int j = 0; j <= l; ++j) {
                    a[j * n + i] = a[i * n + j] / h;
                    g = 0.0;
                    for (int k = 0; k <= j; ++k) g += a[j * n + k] * a[i * n + k];
                    for (int k = j + 1; k <= l; ++k)
                        g += a[k * n + j] * a[i * n + k];
                    e[j] = g / h;
                    f += e[j] * a[i * n + j];
                }
                const double hh = f / (h + h);
                for (int j = 0; j <= l; ++j) {
                    f = a[i * n + j];
                    e[j] = g = e[j] - hh * f;
                    for (int k = 0; k <= j; ++k)
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        const int l = i - 1;
        if (d[i] != 0.0) {
            for (int j = 0; j <= l; ++j) {
                double g = 0.0;
                for (int k = 0; k <= l; ++k) g += a[i * n + k] * a[k * n + j];
                for (int k = 0; k <= l; ++k) a[k * n + j] -= g * a[k * n + i];
            }
        }
        d[i] = a[i * n + i];
        a[i * n + i] = 1.0;
        for (int j = 0; j <= l; ++j) a[j * n + i] = a[i * n + j] = 0.0;
    }

    // Implicit-shift QL on the tridiagonal (tqli).
    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (iter++ == 50)
                    throw std::runtime_error("eigen_symmetric: QL did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = hypot2(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = hypot2(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (int k = 0; k < n; ++k) {
                        f = a[k * n + i + 1];
                        a[k * n + i + 1] = s * a[k * n + i] + c * f;
                        a[k * n + i] = c * a[k * n + i] - s * f;
                    }
                }
                if (r == 0.0 && m - 1 >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }

    // Sort ascending, permuting eigenvector columns alongside.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (d[order[j]] < d[order[i]]) std::swap(order[i], order[j]);
    eigenvalues.resize(n);
    eigenvectors.assign(n * n, 0.0);
    for (int j = 0; j < n; ++j) {
        eigenvalues[j] = d[order[j]];
        for (int i = 0; i < n; ++i) eigenvectors[i * n + j] = a[i * n + order[j]];
    }
}

void fft_pow2(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft_pow2: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

double laplace_coefficient(double s, int k, double alpha) {
    if (alpha <= 0.0 || alpha >= 1.0)
        throw std::invalid_argument("laplace_coefficient: alpha outside (0,1)");
    if (k < 0) k = -k;
    // prefix 2 (s)_k / k! alpha^k
    long double pre = 2.0L;
    for (int i = 0; i < k; ++i)
        pre *= (static_cast<long double>(s) + i) * alpha / (i + 1);
    // F(s, s+k; k+1; alpha^2) by the ratio recurrence.
    const long double z = static_cast<long double>(alpha) * alpha;
    long double term = 1.0L, sum = 1.0L;
    for (int i = 0; i < 4000; ++i) {
        term *= (s + i) * (s + k + i) / ((k + 1.0L + i) * (1.0L + i)) * z;
        sum += term;
        if (std::abs(static_cast<double>(term)) <
            1e-19 * std::abs(static_cast<double>(sum)))
            return static_cast<double>(pre * sum);
    }
    throw std::runtime_error("laplace_coefficient: series did not converge");
}

namespace {

template <typename Real>
Real kepler_impl(Real M, Real e, Real tol, int max_iter) {
    if (e < Real(0) || e >= Real(1))
        throw std::invalid_argument("solve_kepler: eccentricity outside [0,1)");
    const Real two_pi = Real(2) * Real(kPi);
    // reduce M to [-pi, pi] for a well-behaved start
    Real m = std::fmod(M, two_pi);
    if (m > Real(kPi)) m -= two_pi;
    if (m < -Real(kPi)) m += two_pi;
    Real E = m + e * std::sin(m); // Danby-style starter
    Real lo = m - e, hi = m + e;
    for (int it = 0; it < max_iter; ++it) {
        const Real f = E - e * std::sin(E) - m;
        if (std::abs(f) <= tol) return E + (M - m);
        const Real fp = Real(1) - e * std::cos(E);
        Real step = f / fp;
        Real En = E - step;
        if (En < lo || En > hi) En = (lo + hi) / Real(2); // bisection fallback
        if (f > Real(0)) hi = E; else lo = E;
        E = En;
    }
    return E + (M - m);
}

} // namespace

double solve_kepler(double M, double e, double tol, int max_iter) {
    return kepler_impl<double>(M, e, tol, max_iter);
}

long double solve_kepler_ld(long double M, long double e, long double tol,
                            int max_iter) {
    return kepler_impl<long double>(M, e, tol, max_iter);
}

LinearFit linear_fit(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    if (n < 3 || y.size() != n)
        throw std::invalid_argument("linear_fit: need matching series, n >= 3");
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) { tm += t[i]; ym += y[i]; }
    tm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
    }
    LinearFit fit;
    fit.slope = sty / stt;
    fit.intercept = ym - fit.slope * tm;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * t[i];
        rss += r * r;
    }
    fit.slope_stderr =
        std::sqrt(rss / (static_cast<double>(n) - 2.0) / stt);
    return fit;
}

} // namespace eltor::numeric
