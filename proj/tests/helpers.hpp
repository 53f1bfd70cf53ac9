#pragma once

// Shared helpers for the test suites: deterministic random series generators
// and small comparison utilities.

#include <cmath>
#include <random>
#include <vector>

#include "eltor/series.hpp"

namespace testutil {

using eltor::series::Dimensions;
using eltor::series::Parity;
using eltor::series::PoissonSeries;
using eltor::series::SeriesBuilder;
using eltor::series::TruncationLimits;

// Random series with n_terms monomials drawn inside the limits.
inline PoissonSeries random_series(std::mt19937& rng, const Dimensions& dims,
                                   const TruncationLimits& lim, int n_terms,
                                   double coeff_scale = 1.0) {
    std::uniform_real_distribution<double> coeff(-coeff_scale, coeff_scale);
    std::uniform_int_distribution<int> pick_j1(0, lim.max_j1);
    std::uniform_int_distribution<int> pick_trig(0, lim.max_trig);
    std::uniform_int_distribution<int> parity(0, 1);
    SeriesBuilder b(dims, lim);
    for (int t = 0; t < n_terms; ++t) {
        std::vector<int> dp(dims.n1, 0), dxy(2 * dims.n2, 0), k(dims.n1, 0);
        int j1 = pick_j1(rng);
        for (int i = 0; i < j1; ++i)
            dp[std::uniform_int_distribution<int>(0, dims.n1 - 1)(rng)] += 1;
        const int max_j2 = lim.max_l - 2 * j1;
        if (max_j2 < 0) continue;
        int j2 = std::uniform_int_distribution<int>(0, max_j2)(rng);
        for (int i = 0; i < j2 && dims.n2 > 0; ++i)
            dxy[std::uniform_int_distribution<int>(0, 2 * dims.n2 - 1)(rng)] += 1;
        int trig = pick_trig(rng);
        for (int i = 0; i < trig; ++i) {
            const int j = std::uniform_int_distribution<int>(0, dims.n1 - 1)(rng);
            k[j] += std::uniform_int_distribution<int>(0, 1)(rng) ? 1 : -1;
        }
        b.add(dp, dxy, k, parity(rng) ? Parity::Sin : Parity::Cos, coeff(rng));
    }
    return std::move(b).build();
}

// Largest absolute coefficient difference between two series.
inline double max_coeff_diff(const PoissonSeries& a, const PoissonSeries& b) {
    const PoissonSeries d = eltor::series::sub(a, b);
    double m = 0.0;
    for (const auto& t : d.terms()) m = std::max(m, std::abs(t.coeff));
    return m;
}

} // namespace testutil
