#pragma once

// Truncated Poisson-series algebra: polynomials in the fast actions p and the
// secular cartesian pairs (x, y), with finite Fourier series in the fast
// angles q.  This is the carrier type for every Hamiltonian, generating
// function and coordinate expansion in the library.

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace eltor::series {

struct Dimensions {
    int n1 = 0;  // fast degrees of freedom (p, q)
    int n2 = 0;  // secular degrees of freedom (x, y)

    int poly_slots() const { return n1 + 2 * n2; }
    int slots() const { return 2 * n1 + 2 * n2; }
    bool operator==(const Dimensions&) const = default;
};

struct TruncationLimits {
    int max_j1 = 3;    // degree in p
    int max_l = 8;     // bound on 2*j1 + j2
    int max_trig = 18; // bound on |k|_1

    bool operator==(const TruncationLimits&) const = default;
};

// Componentwise tighter of two limit sets.
TruncationLimits tighter(const TruncationLimits& a, const TruncationLimits& b);

enum class Parity : std::uint8_t { Cos = 0, Sin = 1 };

// One monomial signature: exponents over p, exponents over (x, y), integer
// harmonic over q and the trig parity, packed into a fixed-width byte array
// so keys hash and compare as raw memory.  Layout: dp[0..n1), dx[0..n2),
// dy[0..n2), k[0..n1).
class TermKey {
public:
    static constexpr int kMaxSlots = 24;
    static constexpr int kMaxExponent = 15;
    static constexpr int kMaxHarmonic = 127;

    TermKey() = default;

    // Canonicalizing constructor: flips the harmonic sign so the first
    // nonzero entry of k is positive and reports the induced coefficient
    // factor (+1, -1, or 0 when the term is identically zero).
    static std::pair<TermKey, double> make(const Dimensions& dims,
                                           std::span<const int> dp,
                                           std::span<const int> dxy,
                                           std::span<const int> k,
                                           Parity parity);

    // Raw slot access for the arithmetic kernels; layout as documented above.
    std::int8_t raw(int slot) const { return v_[slot]; }
    void set_raw(int slot, int v) { v_[slot] = static_cast<std::int8_t>(v); }
    void set_parity(Parity p) { parity_ = static_cast<std::uint8_t>(p); }

    int dp(const Dimensions&, int j) const { return v_[j]; }
    int dx(const Dimensions& d, int l) const { return v_[d.n1 + l]; }
    int dy(const Dimensions& d, int l) const { return v_[d.n1 + d.n2 + l]; }
    int dxy(const Dimensions& d, int i) const { return v_[d.n1 + i]; }
    int k(const Dimensions& d, int j) const { return v_[d.n1 + 2 * d.n2 + j]; }
    Parity parity() const { return static_cast<Parity>(parity_); }

    int degree_p(const Dimensions& d) const;    // j1
    int degree_xy(const Dimensions& d) const;   // j2
    int trig_degree(const Dimensions& d) const; // |k|_1
    bool harmonic_zero(const Dimensions& d) const;

    bool within(const Dimensions& d, const TruncationLimits& lim) const;

    bool operator==(const TermKey& o) const {
        return parity_ == o.parity_ && v_ == o.v_;
    }
    // Lexicographic on (dp, dxy, k, parity); the canonical term order.
    bool operator<(const TermKey& o) const {
        if (v_ != o.v_) return v_ < o.v_;
        return parity_ < o.parity_;
    }

    std::size_t hash() const;

private:
    std::array<std::int8_t, kMaxSlots> v_{};
    std::uint8_t parity_ = 0;
    friend class SeriesBuilder;
    friend class PoissonSeries;
};

struct TermKeyHash {
    std::size_t operator()(const TermKey& k) const { return k.hash(); }
};

struct Term {
    TermKey key;
    double coeff = 0.0;
    bool operator==(const Term&) const = default;
};

struct PhasePoint {
    std::vector<double> p, q, x, y;
};

class PoissonSeries;

// Accumulates terms (open-addressing hash) and emits an immutable, sorted
// series.
class SeriesBuilder {
public:
    SeriesBuilder(Dimensions dims, TruncationLimits limits);

    // Adds coeff * p^dp * (x,y)^dxy * {cos|sin}(k . q), canonicalizing the
    // harmonic sign and dropping anything outside the limits.
    void add(std::span<const int> dp, std::span<const int> dxy,
             std::span<const int> k, Parity parity, double coeff);
    // Adds a pre-canonical key (no re-canonicalization; caller guarantees it).
    void add_canonical(const TermKey& key, double coeff);
    // Merges a whole series, optionally scaled.
    void add_series(const PoissonSeries& s, double scale = 1.0);

    void reserve(std::size_t n);

    // drop_threshold: terms with |coeff| < threshold are discarded.
    PoissonSeries build(double drop_threshold = 0.0) &&;

    const Dimensions& dims() const { return dims_; }
    const TruncationLimits& limits() const { return limits_; }

private:
    struct Slot {
        TermKey key;
        double coeff;
        bool used = false;
    };
    void grow();

    Dimensions dims_;
    TruncationLimits limits_;
    std::vector<Slot> slots_;
    std::size_t mask_ = 0;
    std::size_t count_ = 0;
};

// Immutable truncated Taylor-Fourier series.  Terms are kept sorted by key,
// so iteration order (and any serialized form) is deterministic.
class PoissonSeries {
public:
    PoissonSeries() = default;
    PoissonSeries(Dimensions dims, TruncationLimits limits);

    static PoissonSeries zero(Dimensions dims, TruncationLimits limits);
    static PoissonSeries constant(Dimensions dims, TruncationLimits limits,
                                  double value);
    // c * p_j
    static PoissonSeries action(Dimensions d, TruncationLimits lim, int j,
                                double c = 1.0);
    // c * {cos|sin}(k . q)
    static PoissonSeries harmonic(Dimensions d, TruncationLimits lim,
                                  std::span<const int> k, Parity parity,
                                  double c = 1.0);
    // c * x_l  /  c * y_l
    static PoissonSeries secular_x(Dimensions d, TruncationLimits lim, int l,
                                   double c = 1.0);
    static PoissonSeries secular_y(Dimensions d, TruncationLimits lim, int l,
                                   double c = 1.0);

    const Dimensions& dims() const { return dims_; }
    const TruncationLimits& limits() const { return limits_; }
    const std::vector<Term>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    // Sum of |coefficients| (the l1 norm used for every diagnostic).
    double norm1() const;

    double coefficient(const TermKey& key) const;

    // Degree masks used to skip vacuous derivative passes.
    bool depends_on_p(int j) const;
    bool depends_on_q(int j) const;
    bool depends_on_x(int l) const;
    bool depends_on_y(int l) const;
    int max_degree_p() const;
    int max_degree_xy() const;
    int max_trig_degree() const;

    PoissonSeries truncated(const TruncationLimits& lim) const;
    PoissonSeries with_limits(const TruncationLimits& lim) const;

    // Part of the series with the given homogeneous degrees (j1 in p, j2 in
    // (x,y)); pass -1 to leave a degree unconstrained.
    PoissonSeries homogeneous_part(int j1, int j2) const;
    // Terms with k == 0 / k != 0.
    PoissonSeries angle_free_part() const;
    PoissonSeries angle_dependent_part() const;

    bool operator==(const PoissonSeries& o) const {
        return dims_ == o.dims_ && terms_ == o.terms_;
    }

private:
    Dimensions dims_;
    TruncationLimits limits_;
    std::vector<Term> terms_;
    friend class SeriesBuilder;
};

// Arithmetic drop threshold: coefficients below this after an operation are
// removed to keep term counts bounded.
inline constexpr double kArithmeticDrop = 1e-30;

PoissonSeries add(const PoissonSeries& f, const PoissonSeries& g);
PoissonSeries sub(const PoissonSeries& f, const PoissonSeries& g);
PoissonSeries scale(const PoissonSeries& f, double c);
PoissonSeries mul(const PoissonSeries& f, const PoissonSeries& g);
// mul truncated to explicit limits (tighter of operand limits also applies).
PoissonSeries mul(const PoissonSeries& f, const PoissonSeries& g,
                  const TruncationLimits& lim);
// Accumulates prefactor * f * g into the builder (truncated to its limits).
void mul_accumulate(SeriesBuilder& b, const PoissonSeries& f,
                    const PoissonSeries& g, double prefactor);

PoissonSeries d_dp(const PoissonSeries& f, int j);
PoissonSeries d_dq(const PoissonSeries& f, int j);
PoissonSeries d_dx(const PoissonSeries& f, int l);
PoissonSeries d_dy(const PoissonSeries& f, int l);

// {f, g} = sum_j (df/dq_j dg/dp_j - df/dp_j dg/dq_j)
//        + sum_l (df/dy_l dg/dx_l - df/dx_l dg/dy_l)
PoissonSeries poisson_bracket(const PoissonSeries& f, const PoissonSeries& g);
PoissonSeries poisson_bracket(const PoissonSeries& f, const PoissonSeries& g,
                              const TruncationLimits& lim);

// exp(L_chi) H = sum_i (1/i!) L_chi^i H with L_chi H = {chi, H}.
// Terms are accumulated until they vanish, their norm falls below
// norm_cutoff * norm1(H), or max_order brackets have been applied.
PoissonSeries lie_transform(const PoissonSeries& chi, const PoissonSeries& H,
                            int max_order, double norm_cutoff = 1e-16);

struct ClassTag {
    int j1 = 0;
    int j2 = 0;
    int s = 0;
    bool operator==(const ClassTag&) const = default;
    bool operator<(const ClassTag& o) const {
        if (j1 != o.j1) return j1 < o.j1;
        if (j2 != o.j2) return j2 < o.j2;
        return s < o.s;
    }
};

// Does every term of f lie in P_{j1,j2}^{(sK)}? With well_ordered set, terms
// of blocks s >= 1 must additionally have |k| > (s-1)K.
bool in_class(const PoissonSeries& f, const ClassTag& tag, int K,
              bool well_ordered = false);

// Partition by homogeneous degrees and Fourier block s = ceil(|k|/K)
// (s = 0 for k = 0).  Recombining the parts reproduces f exactly.
std::vector<std::pair<ClassTag, PoissonSeries>>
reorder_fourier(const PoissonSeries& f, int K);

inline double series_norm(const PoissonSeries& f) { return f.norm1(); }

// Numeric value at a phase point.  Both strategies are exposed so they can
// cross-check each other: "direct" sums term by term, "factored" groups terms
// by harmonic and reuses power tables.
double evaluate(const PoissonSeries& f, const PhasePoint& pt);
double evaluate_direct(const PoissonSeries& f, const PhasePoint& pt);

} // namespace eltor::series
