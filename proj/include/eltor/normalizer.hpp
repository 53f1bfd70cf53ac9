#pragma once

// The normalization step: solve the five homological equations (chi0, chi1,
// X2, Y2, D2), transport the Hamiltonian through the corresponding Lie
// series, absorb the angle-free linear parts into the frequencies, and keep
// the expansion blocked by order with trig degree <= s K per block.

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eltor/action_angle.hpp"
#include "eltor/expansion.hpp"
#include "eltor/series.hpp"

namespace eltor::normalizer {

using series::ClassTag;
using series::Dimensions;
using series::PoissonSeries;
using series::TruncationLimits;

struct FrequencyPair {
    std::vector<double> omega; // fast frequencies (rad/yr)
    std::vector<double> Omega; // transverse frequencies (rad/yr)
};

struct NonResonanceConfig {
    double alpha = 1e-4; // floor for divisors involving k . omega
    double beta = 1e-6;  // floor for divisors built from Omega alone
    int K = 2;
};

enum class DivisorFamily {
    FastOnly,    // |k . omega|
    Melnikov1,   // |k . omega +- Omega_j|
    OmegaSingle, // |Omega_j|
    Melnikov2,   // |k . omega +- Omega_i +- Omega_j|
    OmegaPair    // ||l| = 2 combinations of Omega|
};

const char* divisor_family_name(DivisorFamily f);

class ResonanceError : public std::runtime_error {
public:
    ResonanceError(DivisorFamily family, std::vector<int> k, std::vector<int> m,
                   double divisor, double floor);
    DivisorFamily family;
    std::vector<int> k; // fast harmonic
    std::vector<int> m; // secular harmonic (signs of the Omega combination)
    double divisor;
    double floor;
};

struct DivisorEntry {
    DivisorFamily family;
    double min_abs = 0.0;
    std::vector<int> k, m; // attaining combination
    double floor = 0.0;
    bool pass = false;
};

struct DivisorReport {
    int rK = 0;
    std::array<DivisorEntry, 5> families;
    bool pass() const {
        for (const auto& e : families)
            if (!e.pass) return false;
        return true;
    }
};

struct StepRecord {
    int r = 0;
    // generators in application order: chi0, chi1, X2, Y2, D2
    std::array<PoissonSeries, 5> gens;
    std::array<double, 5> gen_norms{};
    std::array<double, 5> rhs_norms{};
    std::array<double, 5> residual_norms{}; // homological-equation residuals
    double vanish_defect = 0.0; // post-step norm of the targeted blocks
};

struct NormalizationState {
    Dimensions dims;
    TruncationLimits limits;
    int K = 2;
    int order_cap = 0;
    int r = 0; // completed steps
    FrequencyPair freq;
    FrequencyPair freq0;  // frequencies at ingestion (n*, nu0)
    double constant = 0.0;
    double dropped_constant = 0.0; // carried over from the expansion
    std::map<int, PoissonSeries> orders;
    std::vector<StepRecord> steps;

    static NormalizationState from_initial(const expansion::InitialHamiltonian& ham);

    PoissonSeries header_series() const; // omega.p + Omega.J
    // content of P_{j1,j2} within one order block (empty series if absent)
    PoissonSeries block(int j1, int j2, int s) const;
    PoissonSeries assembled() const; // header + all orders (constant excluded)
    double total_norm() const;       // l1 norm of header + orders
    // ClassTag view of the blocked expansion, for checkpoints and checks.
    std::vector<std::pair<ClassTag, PoissonSeries>> tagged_blocks() const;
};

// --- homological solvers -----------------------------------------------------
// Each takes the collected right-hand side (already restricted to the content
// the generator removes), divides term by term, and throws ResonanceError if
// a divisor falls below its floor.  The returned generator chi satisfies
// {chi, Z} + rhs = 0 with Z the relevant normal-form header.

PoissonSeries solve_chi0(const PoissonSeries& rhs_angle_dependent,
                         const FrequencyPair& freq, int rK,
                         const NonResonanceConfig& cfg);
PoissonSeries solve_chi1(const PoissonSeries& rhs_degree1,
                         const FrequencyPair& freq, int rK,
                         const NonResonanceConfig& cfg);
PoissonSeries solve_X2(const PoissonSeries& rhs_p_linear,
                       const FrequencyPair& freq, int rK,
                       const NonResonanceConfig& cfg);
PoissonSeries solve_Y2(const PoissonSeries& rhs_degree2,
                       const FrequencyPair& freq, int rK,
                       const NonResonanceConfig& cfg);
PoissonSeries solve_D2(const PoissonSeries& rhs_angle_free_deg2,
                       const FrequencyPair& freq,
                       const NonResonanceConfig& cfg);

// omega_j += coefficient of p_j; Omega_j += coefficient of J_j.  Inputs must
// be a pure angle-free linear form in p and a pure phi-averaged quadratic.
FrequencyPair update_frequencies(const FrequencyPair& freq,
                                 const PoissonSeries& f10_angle_free,
                                 const PoissonSeries& f02_averaged);

DivisorReport check_nonresonance(const FrequencyPair& freq, int rK,
                                 const NonResonanceConfig& cfg);

// One full normalization step (stages I, II, III and the frequency update).
NormalizationState normalize_step(const NormalizationState& state,
                                  const NonResonanceConfig& cfg);

// Convenience driver: R steps with per-step records kept in the state.
NormalizationState normalize(const NormalizationState& initial, int R,
                             const NonResonanceConfig& cfg);

} // namespace eltor::normalizer
