#pragma once

// Frequency analysis of uniformly sampled complex signals: iterative
// extraction of the dominant exponentials under a Hanning-weighted inner
// product, and matching of the extracted frequencies to integer combinations
// of a fast-frequency vector.

#include <complex>
#include <string>
#include <vector>

namespace eltor::spectral {

struct Signal {
    std::vector<std::complex<double>> samples;
    double dt = 1.0; // yr between samples
    double t0 = 0.0;
};

struct SpectrumComponent {
    double zeta = 0.0;               // rad/yr
    std::complex<double> c{0.0, 0.0};
    std::vector<int> k;              // matched harmonic (empty before matching)
    double residual = 0.0;           // |zeta - k . omega|
    bool resolution_warning = false; // too close to a previous component
};

struct DecomposeOptions {
    double amplitude_floor = 1e-12; // stop when |c| falls below
    double freq_tol = 1e-12;        // refinement tolerance (rad/yr)
};

// Iterative extraction of up to n_components exponentials, near-decreasing in
// amplitude.  After each new frequency the amplitudes of all components are
// re-fit against the original signal under the weighted inner product.
std::vector<SpectrumComponent> decompose(const Signal& signal,
                                         int n_components,
                                         const DecomposeOptions& opt = {});

// Fills k/residual with argmin_{|k| <= kmax} |zeta - k . omega|; ties prefer
// smaller |k|, then lexicographic order.
void match_harmonics(std::vector<SpectrumComponent>& components,
                     const std::vector<double>& omega, int kmax = 20);

// Frequency of the dominant component; throws if the second component is
// within 10% of the leading amplitude.
double fast_frequency(const Signal& signal);

// max_t |signal - sum c_j exp(i zeta_j t)|
double reconstruction_error(const Signal& signal,
                            const std::vector<SpectrumComponent>& components);

// Weighted projection <f, e^{i zeta t}>_w used by the extraction; exposed for
// tests.
std::complex<double> weighted_projection(const Signal& signal, double zeta);

// Table-shaped CSV: j, zeta, k1..kn, residual, |c|.
void write_spectrum_csv(const std::string& path,
                        const std::vector<SpectrumComponent>& components);

} // namespace eltor::spectral
