#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace eltor::numeric {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

// Eigen-decomposition of a real symmetric matrix (row-major n x n) by
// Householder tridiagonalization followed by implicit-shift QL.  Returns
// eigenvalues ascending; eigvecs column j (eigvecs[i*n+j]) belongs to
// eigenvalues[j].  Throws if the QL sweep fails to converge.
void eigen_symmetric(const std::vector<double>& matrix, int n,
                     std::vector<double>& eigenvalues,
                     std::vector<double>& eigenvectors);

// In-place radix-2 complex FFT (size must be a power of two);
// sign = -1 forward, +1 inverse (inverse is unscaled).
void fft_pow2(std::vector<std::complex<double>>& a, int sign);

// Laplace coefficient b^k_s(alpha): the Fourier cosine coefficient of
// (1 - 2 alpha cos psi + alpha^2)^(-s),
//   (1 - 2a cos psi + a^2)^(-s) = 1/2 b^0_s + sum_{k>=1} b^k_s cos(k psi),
// for half-integer s > 0 and 0 < alpha < 1, via the hypergeometric series
//   b^k_s = 2 (s)_k / k! alpha^k F(s, s+k; k+1; alpha^2).
double laplace_coefficient(double s, int k, double alpha);

// Solves E - e sin E = M for the eccentric anomaly (elliptic, 0 <= e < 1).
// Newton iteration with bisection fallback; |f(E)| <= tol on exit.
double solve_kepler(double mean_anomaly, double eccentricity,
                    double tol = 1e-15, int max_iter = 50);
long double solve_kepler_ld(long double mean_anomaly, long double eccentricity,
                            long double tol = 1e-18L, int max_iter = 60);

// Ordinary least squares y ~ a + b t; returns slope b and its standard error.
struct LinearFit {
    double slope = 0.0;
    double slope_stderr = 0.0;
    double intercept = 0.0;
};
LinearFit linear_fit(const std::vector<double>& t, const std::vector<double>& y);

} // namespace eltor::numeric
