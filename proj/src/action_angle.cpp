#include "eltor/action_angle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace eltor::series {

double AAExpansion::norm1() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.coeff);
    return s;
}

AAExpansion AAExpansion::angle_dependent_part() const {
    AAExpansion out(dims_, degree_);
    for (const auto& t : terms_) {
        bool flat = true;
        for (int l = 0; l < dims_.n2; ++l)
            if (t.key.m[l] != 0) { flat = false; break; }
        if (!flat) out.terms_.push_back(t);
    }
    return out;
}

AAExpansion AAExpansion::angle_average() const {
    AAExpansion out(dims_, degree_);
    for (const auto& t : terms_) {
        bool flat = true;
        for (int l = 0; l < dims_.n2; ++l)
            if (t.key.m[l] != 0) { flat = false; break; }
        if (flat) out.terms_.push_back(t);
    }
    return out;
}

void AAExpansion::accumulate(const AATermKey& key, double coeff) {
    terms_.push_back({key, coeff});
}

void AAExpansion::compact(double drop_threshold) {
    std::map<AATermKey, double> acc;
    for (const auto& t : terms_) acc[t.key] += t.coeff;
    terms_.clear();
    for (const auto& [k, c] : acc)
        if (std::abs(c) > drop_threshold) terms_.push_back({k, c});
}

double canonicalize_joint_harmonic(const Dimensions& dims, AATermKey& key) {
    int first = 0;
    for (int j = 0; j < dims.n1 && first == 0; ++j)
        if (key.k[j] != 0) first = key.k[j] > 0 ? 1 : -1;
    for (int l = 0; l < dims.n2 && first == 0; ++l)
        if (key.m[l] != 0) first = key.m[l] > 0 ? 1 : -1;
    if (first == 0)
        return key.parity == 0 ? 1.0 : 0.0; // sin(0) vanishes
    if (first > 0) return 1.0;
    for (int j = 0; j < dims.n1; ++j) key.k[j] = -key.k[j];
    for (int l = 0; l < dims.n2; ++l) key.m[l] = -key.m[l];
    return key.parity == 0 ? 1.0 : -1.0;
}

namespace {

// A secular factor expressed over phi: x_l -> (m=+e_l, cos), y_l -> (m=+e_l, sin).
struct PhiFactor {
    int index;
    Parity parity;
};

// trig(A) * trig(B) -> 1/2 trig(A-B) +- 1/2 trig(A+B) bookkeeping shared by
// the two multiplies below.
struct TrigHalf {
    int sign;      // harmonic combination: a + sign*b
    Parity parity;
    double factor; // +-1/2
};

std::array<TrigHalf, 2> trig_product(Parity pa, Parity pb) {
    if (pa == Parity::Cos && pb == Parity::Cos)
        return {{{-1, Parity::Cos, 0.5}, {+1, Parity::Cos, 0.5}}};
    if (pa == Parity::Sin && pb == Parity::Sin)
        return {{{-1, Parity::Cos, 0.5}, {+1, Parity::Cos, -0.5}}};
    if (pa == Parity::Sin && pb == Parity::Cos)
        return {{{-1, Parity::Sin, 0.5}, {+1, Parity::Sin, 0.5}}};
    return {{{-1, Parity::Sin, -0.5}, {+1, Parity::Sin, 0.5}}};
}

} // namespace

AAExpansion to_action_angle(const PoissonSeries& f) {
    const Dimensions& d = f.dims();
    if (f.empty())
        throw std::invalid_argument("to_action_angle: empty series has no degree");
    const int degree = f.terms().front().key.degree_xy(d);
    if (degree != 1 && degree != 2)
        throw std::invalid_argument("to_action_angle: degree must be 1 or 2");
    AAExpansion out(d, degree);

    for (const auto& t : f.terms()) {
        if (t.key.degree_p(d) != 0)
            throw std::invalid_argument("to_action_angle: p dependence");
        if (t.key.degree_xy(d) != degree)
            throw std::invalid_argument("to_action_angle: inhomogeneous input");

        // Collect the secular factors of this monomial.
        std::vector<PhiFactor> factors;
        for (int l = 0; l < d.n2; ++l) {
            for (int e = 0; e < t.key.dx(d, l); ++e)
                factors.push_back({l, Parity::Cos});
            for (int e = 0; e < t.key.dy(d, l); ++e)
                factors.push_back({l, Parity::Sin});
        }

        // Seed: the q-harmonic of the term, rho = 0.
        AATermKey seed{};
        for (int j = 0; j < d.n1; ++j)
            seed.k[j] = static_cast<std::int8_t>(t.key.k(d, j));
        seed.parity = static_cast<std::uint8_t>(t.key.parity());

        std::vector<std::pair<AATermKey, double>> work{{seed, t.coeff}};
        for (const auto& fac : factors) {
            std::vector<std::pair<AATermKey, double>> next;
            next.reserve(2 * work.size());
            for (const auto& [key, c] : work) {
                for (const TrigHalf& half :
                     trig_product(key.parity == 0 ? Parity::Cos : Parity::Sin,
                                  fac.parity)) {
                    AATermKey nk = key;
                    nk.rho[fac.index] =
                        static_cast<std::int8_t>(nk.rho[fac.index] + 1);
                    nk.m[fac.index] = static_cast<std::int8_t>(
                        nk.m[fac.index] + half.sign);
                    nk.parity = static_cast<std::uint8_t>(half.parity);
                    next.emplace_back(nk, c * half.factor);
                }
            }
            work = std::move(next);
        }
        for (auto& [key, c] : work) {
            const double factor = canonicalize_joint_harmonic(d, key);
            if (factor != 0.0) out.accumulate(key, factor * c);
        }
    }
    out.compact(kArithmeticDrop);
    return out;
}

PoissonSeries from_action_angle(const AAExpansion& g,
                                const TruncationLimits& lim) {
    const Dimensions& d = g.dims();
    SeriesBuilder b(d, lim);

    // Partially expanded term: xy exponents fixed so far, remaining trig in
    // (k over q, m over remaining phi), coefficient.
    struct Partial {
        std::array<int, TermKey::kMaxSlots> dxy{};
        AATermKey trig;
        double coeff;
    };

    for (const auto& t : g.terms()) {
        std::vector<Partial> work{{{}, t.key, t.coeff}};
        for (int l = 0; l < d.n2; ++l) {
            const int rho = t.key.rho[l];
            if (rho == 0) continue;
            std::vector<Partial> next;
            next.reserve(2 * work.size());
            for (const auto& w : work) {
                const int m = w.trig.m[l];
                const bool is_cos = w.trig.parity == 0;
                auto emit = [&](int dx, int dy, Parity parity, double f) {
                    if (f == 0.0) return;
                    Partial n = w;
                    n.dxy[l] += dx;
                    n.dxy[d.n2 + l] += dy;
                    n.trig.m[l] = 0;
                    n.trig.rho[l] = 0;
                    n.trig.parity = static_cast<std::uint8_t>(parity);
                    n.coeff = w.coeff * f;
                    next.push_back(n);
                };
                if (rho == 1) {
                    // sqrt(2J) trig(A + m*phi), m = +-1
                    const int s = m;
                    if (is_cos) {
                        emit(1, 0, Parity::Cos, 1.0);   // x cos A
                        emit(0, 1, Parity::Sin, -s);    // -s y sin A
                    } else {
                        emit(1, 0, Parity::Sin, 1.0);   // x sin A
                        emit(0, 1, Parity::Cos, s);     // +s y cos A
                    }
                } else if (m == 0) {
                    // 2J trig(A) = (x^2 + y^2) trig(A)
                    emit(2, 0, is_cos ? Parity::Cos : Parity::Sin, 1.0);
                    emit(0, 2, is_cos ? Parity::Cos : Parity::Sin, 1.0);
                } else {
                    // 2J trig(A +- 2 phi)
                    const int s = m > 0 ? 1 : -1;
                    if (is_cos) {
                        emit(2, 0, Parity::Cos, 1.0);    // (x^2 - y^2) cos A
                        emit(0, 2, Parity::Cos, -1.0);
                        Partial xy = w;                  // -+ 2xy sin A
                        xy.dxy[l] += 1;
                        xy.dxy[d.n2 + l] += 1;
                        xy.trig.m[l] = 0;
                        xy.trig.rho[l] = 0;
                        xy.trig.parity = static_cast<std::uint8_t>(Parity::Sin);
                        xy.coeff = w.coeff * (-2.0 * s);
                        next.push_back(xy);
                    } else {
                        emit(2, 0, Parity::Sin, 1.0);    // (x^2 - y^2) sin A
                        emit(0, 2, Parity::Sin, -1.0);
                        Partial xy = w;                  // +- 2xy cos A
                        xy.dxy[l] += 1;
                        xy.dxy[d.n2 + l] += 1;
                        xy.trig.m[l] = 0;
                        xy.trig.rho[l] = 0;
                        xy.trig.parity = static_cast<std::uint8_t>(Parity::Cos);
                        xy.coeff = w.coeff * (2.0 * s);
                        next.push_back(xy);
                    }
                }
            }
            work = std::move(next);
        }
        std::vector<int> dp(d.n1, 0), dxy(2 * d.n2, 0), k(d.n1, 0);
        for (const auto& w : work) {
            for (int i = 0; i < 2 * d.n2; ++i) dxy[i] = w.dxy[i];
            for (int j = 0; j < d.n1; ++j) k[j] = w.trig.k[j];
            b.add(dp, dxy, k,
                  w.trig.parity == 0 ? Parity::Cos : Parity::Sin, w.coeff);
        }
    }
    return std::move(b).build(kArithmeticDrop);
}

} // namespace eltor::series
