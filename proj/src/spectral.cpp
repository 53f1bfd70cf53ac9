#include "eltor/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include "eltor/numeric.hpp"

namespace eltor::spectral {

using numeric::kPi;
using numeric::kTwoPi;

namespace {

using CLD = std::complex<long double>;

// Hanning weights w_n = 1 - cos(2 pi n / (N-1)); zero at both ends, mean 1.
std::vector<long double> hanning(std::size_t n) {
    std::vector<long double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 1.0L - std::cos(kTwoPi * static_cast<long double>(i) /
                               static_cast<long double>(n - 1));
    return w;
}

// <f, e^{i zeta t}>_w with trapezoid-equivalent summation (the window
// vanishes at the endpoints).  The complex rotator is re-synchronized
// periodically to keep the recurrence exact over millions of samples.
CLD projection(const std::vector<std::complex<double>>& f,
               const std::vector<long double>& w, double dt, double t0,
               long double zeta) {
    const std::size_t n = f.size();
    CLD acc = 0.0L;
    long double wsum = 0.0L;
    const CLD step = std::exp(CLD(0.0L, -zeta * dt));
    CLD rot = std::exp(CLD(0.0L, -zeta * t0));
    for (std::size_t i = 0; i < n; ++i) {
        if ((i & 4095u) == 0u)
            rot = std::exp(CLD(0.0L, -zeta * (t0 + dt * static_cast<long double>(i))));
        acc += w[i] * rot * CLD(f[i].real(), f[i].imag());
        wsum += w[i];
        rot *= step;
    }
    return acc / wsum;
}

struct Basis {
    std::vector<long double> w;
    double dt, t0;
    const std::vector<std::complex<double>>* signal;
    std::vector<double> zetas;

    CLD inner_basis(double za, double zb) const {
        // <e^{i zb t}, e^{i za t}>_w
        const std::size_t n = signal->size();
        CLD acc = 0.0L;
        long double wsum = 0.0L;
        const long double dz = static_cast<long double>(zb) - za;
        const CLD step = std::exp(CLD(0.0L, dz * dt));
        CLD rot = std::exp(CLD(0.0L, dz * t0));
        for (std::size_t i = 0; i < n; ++i) {
            if ((i & 4095u) == 0u)
                rot = std::exp(CLD(0.0L, dz * (t0 + dt * static_cast<long double>(i))));
            acc += w[i] * rot;
            wsum += w[i];
            rot *= step;
        }
        return acc / wsum;
    }

    // least-squares amplitudes of all zetas against the original signal
    std::vector<std::complex<double>> fit() const {
        const int m = static_cast<int>(zetas.size());
        std::vector<CLD> G(m * m), b(m);
        for (int i = 0; i < m; ++i) {
            b[i] = projection(*signal, w, dt, t0, zetas[i]);
            for (int j = 0; j < m; ++j) G[i * m + j] = inner_basis(zetas[i], zetas[j]);
        }
        // Gaussian elimination with partial pivoting
        std::vector<int> piv(m);
        for (int i = 0; i < m; ++i) piv[i] = i;
        for (int col = 0; col < m; ++col) {
            int best = col;
            for (int r = col + 1; r < m; ++r)
                if (std::abs(G[r * m + col]) > std::abs(G[best * m + col]))
                    best = r;
            if (best != col) {
                for (int j = 0; j < m; ++j) std::swap(G[col * m + j], G[best * m + j]);
                std::swap(b[col], b[best]);
            }
            const CLD d = G[col * m + col];
            if (std::abs(d) < 1e-30L)
                throw std::runtime_error("decompose: singular basis");
            for (int r = col + 1; r < m; ++r) {
                const CLD f = G[r * m + col] / d;
                if (f == CLD(0.0L)) continue;
                for (int j = col; j < m; ++j) G[r * m + j] -= f * G[col * m + j];
                b[r] -= f * b[col];
            }
        }
        std::vector<std::complex<double>> a(m);
        for (int i = m - 1; i >= 0; --i) {
            CLD s = b[i];
            for (int j = i + 1; j < m; ++j)
                s -= G[i * m + j] * CLD(a[j].real(), a[j].imag());
            const CLD v = s / G[i * m + i];
            a[i] = {static_cast<double>(v.real()), static_cast<double>(v.imag())};
        }
        return a;
    }
};

} // namespace

std::complex<double> weighted_projection(const Signal& signal, double zeta) {
    const auto w = hanning(signal.samples.size());
    const CLD v = projection(signal.samples, w, signal.dt, signal.t0, zeta);
    return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
}

std::vector<SpectrumComponent> decompose(const Signal& signal,
                                         int n_components,
                                         const DecomposeOptions& opt) {
    if (n_components < 1)
        throw std::invalid_argument("decompose: n_components < 1");
    const std::size_t n = signal.samples.size();
    if (n < 2) throw std::invalid_argument("decompose: signal too short");

    const auto w = hanning(n);
    const double T = signal.dt * static_cast<double>(n - 1);
    const double resolution = kTwoPi / T;

    Basis basis{w, signal.dt, signal.t0, &signal.samples, {}};
    std::vector<SpectrumComponent> out;
    std::vector<std::complex<double>> residual = signal.samples;

    for (int comp = 0; comp < n_components; ++comp) {
        // coarse scan: FFT of the windowed residual, zero-padded x4
        std::size_t npad = 1;
        while (npad < 4 * n) npad <<= 1;
        std::vector<std::complex<double>> buf(npad, {0.0, 0.0});
        for (std::size_t i = 0; i < n; ++i)
            buf[i] = residual[i] * static_cast<double>(w[i]);
        numeric::fft_pow2(buf, -1);
        std::size_t imax = 0;
        double vmax = 0.0;
        for (std::size_t i = 0; i < npad; ++i) {
            const double v = std::norm(buf[i]);
            if (v > vmax) { vmax = v; imax = i; }
        }
        // signed frequency of the peak bin
        double zeta = kTwoPi * static_cast<double>(imax) /
                      (static_cast<double>(npad) * signal.dt);
        if (imax > npad / 2)
            zeta -= kTwoPi / signal.dt;

        // refine the maximizer of |<residual, e^{i zeta t}>_w| by golden
        // section, then ternary shrink to the frequency tolerance
        Signal res_sig{residual, signal.dt, signal.t0};
        auto amp = [&](double z) {
            return std::abs(projection(residual, w, signal.dt, signal.t0, z));
        };
        double lo = zeta - 1.5 * kTwoPi / (static_cast<double>(npad) * signal.dt);
        double hi = zeta + 1.5 * kTwoPi / (static_cast<double>(npad) * signal.dt);
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = amp(x1), f2 = amp(x2);
        while (hi - lo > opt.freq_tol) {
            if (f1 < f2) {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = amp(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = amp(x1);
            }
        }
        zeta = 0.5 * (lo + hi);

        SpectrumComponent sc;
        sc.zeta = zeta;
        for (const auto& prev : out)
            if (std::abs(prev.zeta - zeta) < resolution)
                sc.resolution_warning = true;

        // refit all amplitudes against the original signal
        basis.zetas.push_back(zeta);
        const auto amps = basis.fit();
        sc.c = amps.back();
        if (std::abs(sc.c) < opt.amplitude_floor) {
            basis.zetas.pop_back();
            break;
        }
        for (std::size_t i = 0; i < out.size(); ++i) out[i].c = amps[i];
        out.push_back(sc);

        // rebuild the residual from the full model
        residual = signal.samples;
        for (std::size_t i = 0; i < n; ++i) {
            const long double t =
                signal.t0 + signal.dt * static_cast<long double>(i);
            CLD model = 0.0L;
            for (std::size_t j = 0; j < basis.zetas.size(); ++j)
                model += CLD(amps[j].real(), amps[j].imag()) *
                         std::exp(CLD(0.0L, basis.zetas[j] * t));
            residual[i] -= std::complex<double>(
                static_cast<double>(model.real()),
                static_cast<double>(model.imag()));
        }
    }
    return out;
}

void match_harmonics(std::vector<SpectrumComponent>& components,
                     const std::vector<double>& omega, int kmax) {
    const int n = static_cast<int>(omega.size());
    // enumerate all k with |k|_1 <= kmax once
    std::vector<std::vector<int>> klist;
    std::vector<int> k(n, 0);
    std::function<void(int, int)> rec = [&](int idx, int budget) {
        if (idx == n) {
            klist.push_back(k);
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            k[idx] = v;
            rec(idx + 1, budget - std::abs(v));
        }
        k[idx] = 0;
    };
    rec(0, kmax);
    auto l1 = [](const std::vector<int>& v) {
        int s = 0;
        for (int x : v) s += std::abs(x);
        return s;
    };
    for (auto& sc : components) {
        double best = std::numeric_limits<double>::infinity();
        const std::vector<int>* bk = nullptr;
        for (const auto& cand : klist) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += cand[j] * omega[j];
            const double r = std::abs(sc.zeta - dot);
            if (r < best - 1e-18 ||
                (std::abs(r - best) <= 1e-18 && bk &&
                 (l1(cand) < l1(*bk) || (l1(cand) == l1(*bk) && cand < *bk)))) {
                best = r;
                bk = &cand;
            }
        }
        sc.k = *bk;
        sc.residual = best;
    }
}

double fast_frequency(const Signal& signal) {
    const auto comps = decompose(signal, 2);
    if (comps.empty()) throw std::runtime_error("fast_frequency: empty signal");
    if (comps.size() > 1 &&
        std::abs(comps[1].c) >= 0.9 * std::abs(comps[0].c))
        throw std::runtime_error(
            "fast_frequency: dominant component ambiguous");
    return comps[0].zeta;
}

double reconstruction_error(const Signal& signal,
                            const std::vector<SpectrumComponent>& components) {
    double worst = 0.0;
    for (std::size_t i = 0; i < signal.samples.size(); ++i) {
        const long double t =
            signal.t0 + signal.dt * static_cast<long double>(i);
        CLD model = 0.0L;
        for (const auto& sc : components)
            model += CLD(sc.c.real(), sc.c.imag()) *
                     std::exp(CLD(0.0L, sc.zeta * t));
        const CLD diff = CLD(signal.samples[i].real(),
                             signal.samples[i].imag()) - model;
        worst = std::max(worst, static_cast<double>(std::abs(diff)));
    }
    return worst;
}

void write_spectrum_csv(const std::string& path,
                        const std::vector<SpectrumComponent>& components) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_spectrum_csv: cannot open " + path);
    const int n = components.empty() ? 0
                                     : static_cast<int>(components[0].k.size());
    std::fprintf(f, "j,zeta");
    for (int j = 1; j <= n; ++j) std::fprintf(f, ",k%d", j);
    std::fprintf(f, ",residual,abs_c\n");
    for (std::size_t j = 0; j < components.size(); ++j) {
        const auto& sc = components[j];
        std::fprintf(f, "%zu,%.17e", j, sc.zeta);
        for (int v : sc.k) std::fprintf(f, ",%d", v);
        std::fprintf(f, ",%.3e,%.17e\n", sc.residual, std::abs(sc.c));
    }
    std::fclose(f);
}

} // namespace eltor::spectral
