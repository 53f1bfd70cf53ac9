#include "eltor/normalizer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>

namespace eltor::normalizer {

using series::AAExpansion;
using series::AATermKey;
using series::kArithmeticDrop;
using series::Parity;
using series::SeriesBuilder;
using series::TermKey;
using series::from_action_angle;
using series::to_action_angle;

namespace {

constexpr double kLieCutoff = 1e-16;
constexpr int kLieMaxOrder = 40;

// Coefficients far below the chain cutoff are rounding noise; dropping them
// after each bracket keeps the tail of a non-terminating Lie series from
// carrying hundreds of thousands of irrelevant terms.
PoissonSeries drop_small(const PoissonSeries& f, double threshold) {
    SeriesBuilder b(f.dims(), f.limits());
    b.reserve(f.size());
    for (const auto& t : f.terms())
        if (std::abs(t.coeff) >= threshold) b.add_canonical(t.key, t.coeff);
    return std::move(b).build();
}

// splits a series into its angle-free pure-J part, its angle-free rest, ...
bool is_pure_action_linear(const PoissonSeries& s) {
    const Dimensions& d = s.dims();
    for (const auto& t : s.terms()) {
        if (!t.key.harmonic_zero(d)) return false;
        if (t.key.degree_p(d) != 1 || t.key.degree_xy(d) != 0) return false;
    }
    return true;
}

} // namespace

const char* divisor_family_name(DivisorFamily f) {
    switch (f) {
        case DivisorFamily::FastOnly: return "k.omega";
        case DivisorFamily::Melnikov1: return "k.omega+-Omega";
        case DivisorFamily::OmegaSingle: return "Omega";
        case DivisorFamily::Melnikov2: return "k.omega+-Omega+-Omega";
        case DivisorFamily::OmegaPair: return "Omega-pair";
    }
    return "?";
}

ResonanceError::ResonanceError(DivisorFamily family_, std::vector<int> k_,
                               std::vector<int> m_, double divisor_,
                               double floor__)
    : std::runtime_error([&] {
          std::string msg = "resonance: |";
          msg += divisor_family_name(family_);
          msg += "| = " + std::to_string(std::abs(divisor_)) +
                 " below floor " + std::to_string(floor__) + " at k = (";
          for (std::size_t i = 0; i < k_.size(); ++i)
              msg += (i ? "," : "") + std::to_string(k_[i]);
          msg += "), m = (";
          for (std::size_t i = 0; i < m_.size(); ++i)
              msg += (i ? "," : "") + std::to_string(m_[i]);
          msg += ")";
          return msg;
      }()),
      family(family_), k(std::move(k_)), m(std::move(m_)), divisor(divisor_),
      floor(floor__) {}

NormalizationState
NormalizationState::from_initial(const expansion::InitialHamiltonian& ham) {
    NormalizationState st;
    st.dims = ham.dims;
    st.limits = ham.limits;
    st.K = ham.K;
    st.order_cap = (ham.limits.max_trig + ham.K - 1) / ham.K + 1;
    st.r = 0;
    st.freq.omega = ham.n_star;
    st.freq.Omega = ham.nu0;
    st.dropped_constant = ham.dropped_constant;

    for (const auto& [tag, part] : ham.blocks) {
        const int s = std::min(tag.s, st.order_cap);
        auto it = st.orders.find(s);
        if (it == st.orders.end())
            st.orders.emplace(s, part);
        else
            it->second = add(it->second, part);
    }

    // absorb angle-free content that belongs to the normal-form header:
    // constants, the linear-in-p average, and the phi-averaged quadratic.
    auto it0 = st.orders.find(0);
    if (it0 != st.orders.end()) {
        const Dimensions& d = st.dims;
        // symmetric x_l^2 / y_l^2 content -> Omega; asymmetric residue stays
        std::vector<double> cx(d.n2, 0.0), cy(d.n2, 0.0);
        for (const auto& t : it0->second.terms()) {
            if (!t.key.harmonic_zero(d) || t.key.degree_p(d) != 0 ||
                t.key.degree_xy(d) != 2)
                continue;
            for (int l = 0; l < d.n2; ++l) {
                if (t.key.dx(d, l) == 2) cx[l] += t.coeff;
                if (t.key.dy(d, l) == 2) cy[l] += t.coeff;
            }
        }
        SeriesBuilder keep(d, st.limits);
        for (const auto& t : it0->second.terms()) {
            const bool k0 = t.key.harmonic_zero(d);
            const int j1 = t.key.degree_p(d);
            const int j2 = t.key.degree_xy(d);
            if (k0 && j1 == 0 && j2 == 0) {
                st.constant += t.coeff;
                continue;
            }
            if (k0 && j1 == 1 && j2 == 0) {
                for (int j = 0; j < d.n1; ++j)
                    if (t.key.dp(d, j) == 1) st.freq.omega[j] += t.coeff;
                continue;
            }
            if (k0 && j1 == 0 && j2 == 2) {
                int slot = -1;
                bool is_x = false;
                for (int l = 0; l < d.n2; ++l) {
                    if (t.key.dx(d, l) == 2) { slot = l; is_x = true; }
                    if (t.key.dy(d, l) == 2) { slot = l; }
                }
                if (slot >= 0) {
                    const double cavg = 0.5 * (cx[slot] + cy[slot]);
                    keep.add_canonical(t.key, t.coeff - cavg);
                    if (is_x) st.freq.Omega[slot] += 2.0 * cavg;
                    continue;
                }
            }
            keep.add_canonical(t.key, t.coeff);
        }
        it0->second = std::move(keep).build(series::kArithmeticDrop);
    }
    st.freq0 = st.freq;
    return st;
}

PoissonSeries NormalizationState::header_series() const {
    SeriesBuilder b(dims, limits);
    std::vector<int> dp(dims.n1, 0), dxy(2 * dims.n2, 0), k(dims.n1, 0);
    for (int j = 0; j < dims.n1; ++j) {
        dp.assign(dims.n1, 0);
        dp[j] = 1;
        b.add(dp, dxy, k, Parity::Cos, freq.omega[j]);
    }
    dp.assign(dims.n1, 0);
    for (int l = 0; l < dims.n2; ++l) {
        dxy.assign(2 * dims.n2, 0);
        dxy[l] = 2;
        b.add(dp, dxy, k, Parity::Cos, 0.5 * freq.Omega[l]);
        dxy[l] = 0;
        dxy[dims.n2 + l] = 2;
        b.add(dp, dxy, k, Parity::Cos, 0.5 * freq.Omega[l]);
    }
    return std::move(b).build();
}

PoissonSeries NormalizationState::block(int j1, int j2, int s) const {
    auto it = orders.find(s);
    if (it == orders.end()) return PoissonSeries::zero(dims, limits);
    return it->second.homogeneous_part(j1, j2);
}

PoissonSeries NormalizationState::assembled() const {
    PoissonSeries out = header_series();
    for (const auto& [s, part] : orders) out = add(out, part);
    return out;
}

double NormalizationState::total_norm() const {
    double n = header_series().norm1();
    for (const auto& [s, part] : orders) n += part.norm1();
    return n;
}

std::vector<std::pair<ClassTag, PoissonSeries>>
NormalizationState::tagged_blocks() const {
    std::vector<std::pair<ClassTag, PoissonSeries>> out;
    for (const auto& [s, part] : orders) {
        // split by homogeneous degrees inside the order block
        std::map<std::pair<int, int>, SeriesBuilder> split;
        for (const auto& t : part.terms()) {
            const std::pair<int, int> dk{t.key.degree_p(dims),
                                         t.key.degree_xy(dims)};
            auto it = split.find(dk);
            if (it == split.end())
                it = split.emplace(dk, SeriesBuilder(dims, limits)).first;
            it->second.add_canonical(t.key, t.coeff);
        }
        for (auto& [dk, builder] : split)
            out.emplace_back(ClassTag{dk.first, dk.second, s},
                             std::move(builder).build());
    }
    return out;
}

// --- solvers -------------------------------------------------------------

PoissonSeries solve_chi0(const PoissonSeries& rhs, const FrequencyPair& freq,
                         int rK, const NonResonanceConfig& cfg) {
    const Dimensions& d = rhs.dims();
    SeriesBuilder b(d, rhs.limits());
    for (const auto& t : rhs.terms()) {
        if (t.key.degree_p(d) != 0 || t.key.degree_xy(d) != 0)
            throw std::invalid_argument("solve_chi0: rhs not in P_00");
        if (t.key.harmonic_zero(d))
            throw std::invalid_argument("solve_chi0: rhs has a constant part");
        if (t.key.trig_degree(d) > rK)
            throw std::invalid_argument("solve_chi0: harmonic above rK");
        double div = 0.0;
        std::vector<int> kvec(d.n1);
        for (int j = 0; j < d.n1; ++j) {
            kvec[j] = t.key.k(d, j);
            div += kvec[j] * freq.omega[j];
        }
        if (std::abs(div) < cfg.alpha)
            throw ResonanceError(DivisorFamily::FastOnly, kvec, {}, div,
                                 cfg.alpha);
        TermKey key = t.key;
        double c;
        if (t.key.parity() == Parity::Cos) { // c cos -> -c sin / div
            key.set_parity(Parity::Sin);
            c = -t.coeff / div;
        } else { // c sin -> +c cos / div
            key.set_parity(Parity::Cos);
            c = t.coeff / div;
        }
        b.add_canonical(key, c);
    }
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries solve_X2(const PoissonSeries& rhs, const FrequencyPair& freq,
                       int rK, const NonResonanceConfig& cfg) {
    const Dimensions& d = rhs.dims();
    SeriesBuilder b(d, rhs.limits());
    for (const auto& t : rhs.terms()) {
        if (t.key.degree_p(d) != 1 || t.key.degree_xy(d) != 0)
            throw std::invalid_argument("solve_X2: rhs not in P_10");
        if (t.key.harmonic_zero(d))
            throw std::invalid_argument("solve_X2: rhs has angle-free part");
        if (t.key.trig_degree(d) > rK)
            throw std::invalid_argument("solve_X2: harmonic above rK");
        double div = 0.0;
        std::vector<int> kvec(d.n1);
        for (int j = 0; j < d.n1; ++j) {
            kvec[j] = t.key.k(d, j);
            div += kvec[j] * freq.omega[j];
        }
        if (std::abs(div) < cfg.alpha)
            throw ResonanceError(DivisorFamily::FastOnly, kvec, {}, div,
                                 cfg.alpha);
        TermKey key = t.key;
        double c;
        if (t.key.parity() == Parity::Cos) {
            key.set_parity(Parity::Sin);
            c = -t.coeff / div;
        } else {
            key.set_parity(Parity::Cos);
            c = t.coeff / div;
        }
        b.add_canonical(key, c);
    }
    return std::move(b).build(kArithmeticDrop);
}

namespace {

// shared by chi1 (degree 1), Y2 (degree 2) and D2 (degree 2, k = 0)
PoissonSeries solve_action_angle(const PoissonSeries& rhs,
                                 const FrequencyPair& freq, int rK,
                                 const NonResonanceConfig& cfg,
                                 bool require_k_zero) {
    const Dimensions& d = rhs.dims();
    const AAExpansion aa = to_action_angle(rhs);
    AAExpansion out(d, aa.degree());
    for (const auto& t : aa.terms()) {
        int ktrig = 0;
        double div = 0.0;
        std::vector<int> kvec(d.n1), mvec(d.n2);
        for (int j = 0; j < d.n1; ++j) {
            kvec[j] = t.key.k[j];
            ktrig += std::abs(kvec[j]);
            div += kvec[j] * freq.omega[j];
        }
        int mabs = 0;
        for (int l = 0; l < d.n2; ++l) {
            mvec[l] = t.key.m[l];
            mabs += std::abs(mvec[l]);
            div += mvec[l] * freq.Omega[l];
        }
        if (require_k_zero && ktrig != 0)
            throw std::invalid_argument("solve_D2: rhs depends on q");
        if (ktrig > rK)
            throw std::invalid_argument("solver: harmonic above rK");
        if (ktrig == 0 && mabs == 0)
            throw std::invalid_argument("solver: phi-average present in rhs");

        DivisorFamily fam;
        double floor;
        if (ktrig == 0) {
            fam = mabs == 1 ? DivisorFamily::OmegaSingle
                            : DivisorFamily::OmegaPair;
            floor = cfg.beta;
        } else {
            fam = mabs == 1 ? DivisorFamily::Melnikov1
                            : DivisorFamily::Melnikov2;
            floor = cfg.alpha;
        }
        if (std::abs(div) < floor)
            throw ResonanceError(fam, kvec, mvec, div, floor);

        AATermKey key = t.key;
        double c;
        if (t.key.parity == 0) { // cos -> -sin / div
            key.parity = 1;
            c = -t.coeff / div;
        } else { // sin -> +cos / div
            key.parity = 0;
            c = t.coeff / div;
        }
        out.accumulate(key, c);
    }
    out.compact(kArithmeticDrop);
    return from_action_angle(out, rhs.limits());
}

} // namespace

PoissonSeries solve_chi1(const PoissonSeries& rhs, const FrequencyPair& freq,
                         int rK, const NonResonanceConfig& cfg) {
    if (rhs.empty()) return rhs;
    return solve_action_angle(rhs, freq, rK, cfg, false);
}

PoissonSeries solve_Y2(const PoissonSeries& rhs, const FrequencyPair& freq,
                       int rK, const NonResonanceConfig& cfg) {
    if (rhs.empty()) return rhs;
    return solve_action_angle(rhs, freq, rK, cfg, false);
}

PoissonSeries solve_D2(const PoissonSeries& rhs, const FrequencyPair& freq,
                       const NonResonanceConfig& cfg) {
    if (rhs.empty()) return rhs;
    return solve_action_angle(rhs, freq, 0, cfg, true);
}

FrequencyPair update_frequencies(const FrequencyPair& freq,
                                 const PoissonSeries& f10_angle_free,
                                 const PoissonSeries& f02_averaged) {
    FrequencyPair out = freq;
    const Dimensions& d = f10_angle_free.dims();
    if (!is_pure_action_linear(f10_angle_free))
        throw std::invalid_argument(
            "update_frequencies: f10 is not a pure linear form in p");
    for (const auto& t : f10_angle_free.terms())
        for (int j = 0; j < d.n1; ++j)
            if (t.key.dp(d, j) == 1) out.omega[j] += t.coeff;

    // f02 must be sum_l c_l (x_l^2 + y_l^2) with equal x/y coefficients
    const Dimensions& d2 = f02_averaged.dims();
    std::vector<double> cx(d2.n2, 0.0), cy(d2.n2, 0.0);
    for (const auto& t : f02_averaged.terms()) {
        if (!t.key.harmonic_zero(d2) || t.key.degree_p(d2) != 0 ||
            t.key.degree_xy(d2) != 2)
            throw std::invalid_argument(
                "update_frequencies: f02 is not an angle-free quadratic");
        int slot = -1;
        for (int l = 0; l < d2.n2; ++l) {
            if (t.key.dx(d2, l) == 2) { slot = l; cx[l] += t.coeff; }
            if (t.key.dy(d2, l) == 2) { slot = l; cy[l] += t.coeff; }
        }
        if (slot < 0)
            throw std::invalid_argument(
                "update_frequencies: cross terms present in f02");
    }
    for (int l = 0; l < d2.n2; ++l) {
        if (std::abs(cx[l] - cy[l]) >
            1e-9 * std::max({std::abs(cx[l]), std::abs(cy[l]), 1e-300}))
            throw std::invalid_argument(
                "update_frequencies: f02 is not a phi average");
        out.Omega[l] += cx[l] + cy[l]; // = 2 c_l, i.e. Omega += 2c for c J_l
    }
    return out;
}

DivisorReport check_nonresonance(const FrequencyPair& freq, int rK,
                                 const NonResonanceConfig& cfg) {
    const int n1 = static_cast<int>(freq.omega.size());
    const int n2 = static_cast<int>(freq.Omega.size());
    DivisorReport rep;
    rep.rK = rK;
    auto& fams = rep.families;
    fams[0].family = DivisorFamily::FastOnly;
    fams[1].family = DivisorFamily::Melnikov1;
    fams[2].family = DivisorFamily::OmegaSingle;
    fams[3].family = DivisorFamily::Melnikov2;
    fams[4].family = DivisorFamily::OmegaPair;
    for (auto& e : fams) e.min_abs = std::numeric_limits<double>::infinity();

    auto consider = [&](DivisorEntry& e, double div, const std::vector<int>& k,
                        const std::vector<int>& m) {
        if (std::abs(div) < e.min_abs) {
            e.min_abs = std::abs(div);
            e.k = k;
            e.m = m;
        }
    };

    // enumerate canonical k with 0 < |k| <= rK (first nonzero positive)
    std::vector<int> k(n1, 0);
    std::vector<std::vector<int>> klist;
    std::function<void(int, int)> rec = [&](int idx, int budget) {
        if (idx == n1) {
            for (int j = 0; j < n1; ++j)
                if (k[j] != 0) {
                    if (k[j] > 0) klist.push_back(k);
                    return;
                }
            return;
        }
        for (int v = -budget; v <= budget; ++v) {
            k[idx] = v;
            rec(idx + 1, budget - std::abs(v));
        }
        k[idx] = 0;
    };
    rec(0, rK);

    const std::vector<int> mzero(n2, 0);
    for (const auto& kk : klist) {
        double kw = 0.0;
        for (int j = 0; j < n1; ++j) kw += kk[j] * freq.omega[j];
        consider(fams[0], kw, kk, mzero);
        for (int l = 0; l < n2; ++l)
            for (int s : {-1, +1}) {
                std::vector<int> m(n2, 0);
                m[l] = s;
                consider(fams[1], kw + s * freq.Omega[l], kk, m);
            }
        for (int i = 0; i < n2; ++i)
            for (int j2 = i; j2 < n2; ++j2)
                for (int si : {-1, +1})
                    for (int sj : {-1, +1}) {
                        std::vector<int> m(n2, 0);
                        m[i] += si;
                        m[j2] += sj;
                        consider(fams[3],
                                 kw + si * freq.Omega[i] + sj * freq.Omega[j2],
                                 kk, m);
                    }
    }
    const std::vector<int> kzero(n1, 0);
    for (int l = 0; l < n2; ++l) {
        std::vector<int> m(n2, 0);
        m[l] = 1;
        consider(fams[2], freq.Omega[l], kzero, m);
    }
    for (int i = 0; i < n2; ++i)
        for (int j2 = i; j2 < n2; ++j2)
            for (int si : {-1, +1})
                for (int sj : {-1, +1}) {
                    if (i == j2 && si != sj) continue; // identically zero
                    std::vector<int> m(n2, 0);
                    m[i] += si;
                    m[j2] += sj;
                    const double div =
                        si * freq.Omega[i] + sj * freq.Omega[j2];
                    consider(fams[4], div, kzero, m);
                }

    fams[0].floor = cfg.alpha;
    fams[1].floor = cfg.alpha;
    fams[2].floor = cfg.beta;
    fams[3].floor = cfg.alpha;
    fams[4].floor = cfg.beta;
    for (auto& e : fams) e.pass = e.min_abs >= e.floor;
    return rep;
}

// --- the step -------------------------------------------------------------

namespace {

// Content selectors for the five stages.
struct TargetSelector {
    int j1, j2;
    bool angle_dependent_only; // k != 0 content only
    bool angle_free_only;      // k == 0 content only
    int min_order;             // 1 for chi0/X2/Y2, 0 for chi1/D2
};

// Collects (and removes nothing yet) the targeted content per order.
std::map<int, PoissonSeries> collect_targets(const NormalizationState& st,
                                             int r, const TargetSelector& sel) {
    std::map<int, PoissonSeries> out;
    for (const auto& [s, part] : st.orders) {
        if (s < sel.min_order || s > r) continue;
        PoissonSeries sub = part.homogeneous_part(sel.j1, sel.j2);
        if (sel.angle_dependent_only) sub = sub.angle_dependent_part();
        if (sel.angle_free_only) sub = sub.angle_free_part();
        if (!sub.empty()) out.emplace(s, std::move(sub));
    }
    return out;
}

PoissonSeries merge(const std::map<int, PoissonSeries>& parts,
                    const Dimensions& dims, const TruncationLimits& lim) {
    PoissonSeries out = PoissonSeries::zero(dims, lim);
    for (const auto& [s, p] : parts) out = add(out, p);
    return out;
}

// Applies exp(L_chi) to the blocked Hamiltonian.  The targeted content is
// cancelled exactly against the first Lie term of the header; the remaining
// header chain and the ordinary block transforms are accumulated with order
// tags s + i r.  Returns the residual of the homological equation.
double apply_lie(NormalizationState& st, const PoissonSeries& chi, int r,
                 const std::map<int, PoissonSeries>& targets,
                 double* rhs_norm_out) {
    const double href = st.total_norm();
    const PoissonSeries header = st.header_series();
    const PoissonSeries rhs = merge(targets, st.dims, st.limits);
    if (rhs_norm_out) *rhs_norm_out = rhs.norm1();

    std::map<int, SeriesBuilder> out;
    auto deposit = [&](int s, const PoissonSeries& p) {
        if (p.empty()) return;
        const int tag = std::min(s, st.order_cap);
        auto it = out.find(tag);
        if (it == out.end())
            it = out.emplace(tag, SeriesBuilder(st.dims, st.limits)).first;
        it->second.add_series(p);
    };

    // ordinary blocks: i = 0 copies, i >= 1 bracket chains
    const double chain_drop = 2e-17 * href;
    for (const auto& [s, part] : st.orders) {
        deposit(s, part);
        if (chi.empty()) continue;
        PoissonSeries term = part;
        for (int i = 1; i <= kLieMaxOrder; ++i) {
            term = drop_small(
                scale(poisson_bracket(chi, term, st.limits), 1.0 / i),
                chain_drop);
            if (term.empty()) break;
            deposit(s + i * r, term);
            if (term.norm1() < kLieCutoff * href) break;
        }
    }

    // header chain: first term cancels the targets exactly; the residual of
    // the homological equation is deposited honestly at order r.
    const PoissonSeries b1 =
        chi.empty() ? PoissonSeries::zero(st.dims, st.limits)
                    : poisson_bracket(chi, header, st.limits);
    const PoissonSeries residual = add(b1, rhs);
    for (const auto& [s, tgt] : targets) deposit(s, scale(tgt, -1.0));
    deposit(r, residual);

    // continue the chain from b1 (exactly: -targets + residual, per order)
    if (!chi.empty()) {
        std::map<int, PoissonSeries> prev;
        for (const auto& [s, tgt] : targets) {
            auto it = prev.find(s);
            if (it == prev.end())
                prev.emplace(s, scale(tgt, -1.0));
            else
                it->second = add(it->second, scale(tgt, -1.0));
        }
        if (!residual.empty()) {
            auto it = prev.find(r);
            if (it == prev.end())
                prev.emplace(r, residual);
            else
                it->second = add(it->second, residual);
        }
        for (int i = 2; i <= kLieMaxOrder; ++i) {
            std::map<int, PoissonSeries> next;
            double nrm = 0.0;
            for (const auto& [s, p] : prev) {
                PoissonSeries t = drop_small(
                    scale(poisson_bracket(chi, p, st.limits), 1.0 / i),
                    chain_drop);
                if (t.empty()) continue;
                nrm += t.norm1();
                const int tag = std::min(s + r, st.order_cap);
                auto it = next.find(tag);
                if (it == next.end())
                    next.emplace(tag, std::move(t));
                else
                    it->second = add(it->second, t);
            }
            if (next.empty()) break;
            for (const auto& [s, p] : next) deposit(s, p);
            if (nrm < kLieCutoff * href) break;
            prev = std::move(next);
        }
    }

    st.orders.clear();
    for (auto& [s, builder] : out) {
        PoissonSeries p = std::move(builder).build(kArithmeticDrop);
        if (!p.empty()) st.orders.emplace(s, std::move(p));
    }
    return residual.norm1();
}

} // namespace

NormalizationState normalize_step(const NormalizationState& state,
                                  const NonResonanceConfig& cfg) {
    NormalizationState st = state;
    const int r = st.r + 1;
    const int rK = r * st.K;
    if (rK > st.limits.max_trig)
        throw std::invalid_argument(
            "normalize_step: r K exceeds the trigonometric limit");

    StepRecord rec;
    rec.r = r;
    auto stage_t0 = std::chrono::steady_clock::now();
    auto stage_tick = [&stage_t0](const char* name) {
        auto t1 = std::chrono::steady_clock::now();
        std::fprintf(stderr, "[stage %s: %.1f s]\n", name,
                     std::chrono::duration<double>(t1 - stage_t0).count());
        stage_t0 = t1;
    };

    // ---- stage I: chi0 removes the q-only content of orders 1..r ----------
    {
        // angle-free (0,0) content of orders <= r is an inert constant
        for (auto& [s, part] : st.orders) {
            if (s > r) continue;
            const PoissonSeries c0 =
                part.homogeneous_part(0, 0).angle_free_part();
            if (!c0.empty()) {
                st.constant += c0.terms().front().coeff;
                part = sub(part, c0);
            }
        }
        const auto targets =
            collect_targets(st, r, {0, 0, true, false, 1});
        const PoissonSeries rhs = merge(targets, st.dims, st.limits);
        const PoissonSeries chi0 = solve_chi0(rhs, st.freq, rK, cfg);
        rec.residual_norms[0] = apply_lie(st, chi0, r, targets,
                                          &rec.rhs_norms[0]);
        rec.gens[0] = chi0;
        rec.gen_norms[0] = chi0.norm1();
        stage_tick("I");
    }

    // ---- stage II: chi1 removes the (0,1) content of orders 0..r ----------
    {
        const auto targets =
            collect_targets(st, r, {0, 1, false, false, 0});
        const PoissonSeries rhs = merge(targets, st.dims, st.limits);
        const PoissonSeries chi1 = solve_chi1(rhs, st.freq, rK, cfg);
        rec.residual_norms[1] = apply_lie(st, chi1, r, targets,
                                          &rec.rhs_norms[1]);
        rec.gens[1] = chi1;
        rec.gen_norms[1] = chi1.norm1();
        stage_tick("II");
    }

    // ---- stage III a: X2 removes the angle-dependent (1,0) content --------
    {
        const auto targets =
            collect_targets(st, r, {1, 0, true, false, 1});
        const PoissonSeries rhs = merge(targets, st.dims, st.limits);
        const PoissonSeries x2 = solve_X2(rhs, st.freq, rK, cfg);
        rec.residual_norms[2] = apply_lie(st, x2, r, targets,
                                          &rec.rhs_norms[2]);
        rec.gens[2] = x2;
        rec.gen_norms[2] = x2.norm1();
        stage_tick("IIIa");
    }

    // ---- stage III b: Y2 removes the angle-dependent (0,2) content --------
    {
        const auto targets =
            collect_targets(st, r, {0, 2, true, false, 1});
        const PoissonSeries rhs = merge(targets, st.dims, st.limits);
        const PoissonSeries y2 = solve_Y2(rhs, st.freq, rK, cfg);
        rec.residual_norms[3] = apply_lie(st, y2, r, targets,
                                          &rec.rhs_norms[3]);
        rec.gens[3] = y2;
        rec.gen_norms[3] = y2.norm1();
        stage_tick("IIIb");
    }

    // ---- stage III c: D2 removes the phi-dependent angle-free (0,2) -------
    {
        auto all = collect_targets(st, r, {0, 2, false, true, 0});
        // keep only the phi-dependent part in the targets; the phi average
        // feeds the frequency update below
        std::map<int, PoissonSeries> targets;
        for (const auto& [s, p] : all) {
            const AAExpansion aa = to_action_angle(p);
            const PoissonSeries dep =
                from_action_angle(aa.angle_dependent_part(), st.limits);
            if (!dep.empty()) targets.emplace(s, dep);
        }
        const PoissonSeries rhs = merge(targets, st.dims, st.limits);
        const PoissonSeries d2 = solve_D2(rhs, st.freq, cfg);
        rec.residual_norms[4] = apply_lie(st, d2, r, targets,
                                          &rec.rhs_norms[4]);
        rec.gens[4] = d2;
        rec.gen_norms[4] = d2.norm1();
        stage_tick("IIIc");
    }

    // ---- frequency update: absorb the angle-free linear parts -------------
    {
        std::map<int, PoissonSeries> f10 =
            collect_targets(st, r, {1, 0, false, true, 0});
        std::map<int, PoissonSeries> f02raw =
            collect_targets(st, r, {0, 2, false, true, 0});
        // keep only the phi-average (residuals of the D2 cancellation leave
        // phi-dependent round-off behind, which stays in the blocks)
        std::map<int, PoissonSeries> f02;
        for (const auto& [s, p] : f02raw) {
            const PoissonSeries avg =
                from_action_angle(to_action_angle(p).angle_average(),
                                  st.limits);
            if (!avg.empty()) f02.emplace(s, avg);
        }
        const PoissonSeries f10s = merge(f10, st.dims, st.limits);
        const PoissonSeries f02s = merge(f02, st.dims, st.limits);
        st.freq = update_frequencies(st.freq, f10s, f02s);
        for (const auto& [s, p] : f10) {
            auto it = st.orders.find(s);
            it->second = sub(it->second, p);
        }
        for (const auto& [s, p] : f02) {
            auto it = st.orders.find(s);
            it->second = sub(it->second, p);
        }
    }

    // drop empty order blocks, measure the post-step defect of the targets
    for (auto it = st.orders.begin(); it != st.orders.end();) {
        if (it->second.empty())
            it = st.orders.erase(it);
        else
            ++it;
    }
    double defect = 0.0;
    for (const auto& [s, part] : st.orders) {
        if (s > r) continue;
        defect += part.homogeneous_part(0, 0).angle_dependent_part().norm1();
        defect += part.homogeneous_part(0, 1).norm1();
        defect += part.homogeneous_part(1, 0).norm1();
        defect += part.homogeneous_part(0, 2).norm1();
        defect += part.homogeneous_part(0, 0).angle_free_part().norm1();
    }
    rec.vanish_defect = defect;

    st.r = r;
    st.steps.push_back(std::move(rec));
    return st;
}

NormalizationState normalize(const NormalizationState& initial, int R,
                             const NonResonanceConfig& cfg) {
    NormalizationState st = initial;
    for (int r = st.r; r < R; ++r) st = normalize_step(st, cfg);
    return st;
}

} // namespace eltor::normalizer
