#include "eltor/series.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace eltor::series {

TruncationLimits tighter(const TruncationLimits& a, const TruncationLimits& b) {
    return {std::min(a.max_j1, b.max_j1), std::min(a.max_l, b.max_l),
            std::min(a.max_trig, b.max_trig)};
}

namespace {

void check_dims(const Dimensions& d) {
    if (d.n1 < 1 || d.n2 < 0 || d.slots() > TermKey::kMaxSlots)
        throw std::invalid_argument("series: unsupported dimensions");
}

} // namespace

std::pair<TermKey, double> TermKey::make(const Dimensions& dims,
                                         std::span<const int> dp,
                                         std::span<const int> dxy,
                                         std::span<const int> k,
                                         Parity parity) {
    if (static_cast<int>(dp.size()) != dims.n1 ||
        static_cast<int>(dxy.size()) != 2 * dims.n2 ||
        static_cast<int>(k.size()) != dims.n1)
        throw std::invalid_argument("TermKey: span sizes do not match dims");

    TermKey key;
    double factor = 1.0;

    int first_nonzero = 0;
    for (int j = 0; j < dims.n1; ++j) {
        if (k[j] != 0) { first_nonzero = k[j] > 0 ? 1 : -1; break; }
    }
    const int flip = first_nonzero < 0 ? -1 : 1;
    if (flip < 0 && parity == Parity::Sin) factor = -factor;
    if (first_nonzero == 0 && parity == Parity::Sin)
        return {key, 0.0}; // sin(0) term is identically zero

    int pos = 0;
    for (int j = 0; j < dims.n1; ++j) {
        if (dp[j] < 0 || dp[j] > kMaxExponent)
            throw std::out_of_range("TermKey: p exponent out of range");
        key.v_[pos++] = static_cast<std::int8_t>(dp[j]);
    }
    for (int i = 0; i < 2 * dims.n2; ++i) {
        if (dxy[i] < 0 || dxy[i] > kMaxExponent)
            throw std::out_of_range("TermKey: xy exponent out of range");
        key.v_[pos++] = static_cast<std::int8_t>(dxy[i]);
    }
    for (int j = 0; j < dims.n1; ++j) {
        const int kj = flip * k[j];
        if (kj < -kMaxHarmonic || kj > kMaxHarmonic)
            throw std::out_of_range("TermKey: harmonic out of range");
        key.v_[pos++] = static_cast<std::int8_t>(kj);
    }
    key.parity_ = static_cast<std::uint8_t>(parity);
    return {key, factor};
}

int TermKey::degree_p(const Dimensions& d) const {
    int s = 0;
    for (int j = 0; j < d.n1; ++j) s += v_[j];
    return s;
}

int TermKey::degree_xy(const Dimensions& d) const {
    int s = 0;
    for (int i = 0; i < 2 * d.n2; ++i) s += v_[d.n1 + i];
    return s;
}

int TermKey::trig_degree(const Dimensions& d) const {
    int s = 0;
    for (int j = 0; j < d.n1; ++j) s += std::abs(v_[d.n1 + 2 * d.n2 + j]);
    return s;
}

bool TermKey::harmonic_zero(const Dimensions& d) const {
    for (int j = 0; j < d.n1; ++j)
        if (v_[d.n1 + 2 * d.n2 + j] != 0) return false;
    return true;
}

bool TermKey::within(const Dimensions& d, const TruncationLimits& lim) const {
    const int j1 = degree_p(d);
    if (j1 > lim.max_j1) return false;
    if (2 * j1 + degree_xy(d) > lim.max_l) return false;
    return trig_degree(d) <= lim.max_trig;
}

std::size_t TermKey::hash() const {
    std::uint64_t w[3];
    std::memcpy(w, v_.data(), 24);
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ parity_;
    for (std::uint64_t x : w) {
        x *= 0xff51afd7ed558ccdull;
        x ^= x >> 33;
        h = (h ^ x) * 0xc4ceb9fe1a85ec53ull;
    }
    return h ^ (h >> 29);
}

SeriesBuilder::SeriesBuilder(Dimensions dims, TruncationLimits limits)
    : dims_(dims), limits_(limits) {
    check_dims(dims);
    slots_.resize(64);
    mask_ = 63;
}

void SeriesBuilder::reserve(std::size_t n) {
    std::size_t cap = 64;
    while (cap < 2 * n) cap <<= 1;
    if (cap <= slots_.size()) return;
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(cap, Slot{});
    mask_ = cap - 1;
    count_ = 0;
    for (const auto& s : old)
        if (s.used) add_canonical(s.key, s.coeff);
}

void SeriesBuilder::grow() {
    std::vector<Slot> old = std::move(slots_);
    slots_.assign(old.size() * 2, Slot{});
    mask_ = slots_.size() - 1;
    count_ = 0;
    for (const auto& s : old)
        if (s.used) {
            std::size_t i = s.key.hash() & mask_;
            while (slots_[i].used) i = (i + 1) & mask_;
            slots_[i].key = s.key;
            slots_[i].coeff = s.coeff;
            slots_[i].used = true;
            ++count_;
        }
}

void SeriesBuilder::add(std::span<const int> dp, std::span<const int> dxy,
                        std::span<const int> k, Parity parity, double coeff) {
    if (coeff == 0.0) return;
    auto [key, factor] = TermKey::make(dims_, dp, dxy, k, parity);
    if (factor == 0.0) return;
    add_canonical(key, factor * coeff);
}

void SeriesBuilder::add_canonical(const TermKey& key, double coeff) {
    if (coeff == 0.0) return;
    if (!key.within(dims_, limits_)) return;
    std::size_t i = key.hash() & mask_;
    while (slots_[i].used) {
        if (slots_[i].key == key) {
            slots_[i].coeff += coeff;
            return;
        }
        i = (i + 1) & mask_;
    }
    slots_[i].key = key;
    slots_[i].coeff = coeff;
    slots_[i].used = true;
    if (++count_ * 8 > slots_.size() * 5) grow();
}

void SeriesBuilder::add_series(const PoissonSeries& s, double scale) {
    if (!(s.dims() == dims_))
        throw std::invalid_argument("add_series: dimension mismatch");
    for (const auto& t : s.terms()) add_canonical(t.key, scale * t.coeff);
}

PoissonSeries SeriesBuilder::build(double drop_threshold) && {
    PoissonSeries out(dims_, limits_);
    out.terms_.reserve(count_);
    for (const auto& s : slots_) {
        if (!s.used || s.coeff == 0.0 || std::abs(s.coeff) <= drop_threshold)
            continue;
        out.terms_.push_back({s.key, s.coeff});
    }
    std::sort(out.terms_.begin(), out.terms_.end(),
              [](const Term& a, const Term& b) { return a.key < b.key; });
    return out;
}

PoissonSeries::PoissonSeries(Dimensions dims, TruncationLimits limits)
    : dims_(dims), limits_(limits) {
    check_dims(dims);
}

PoissonSeries PoissonSeries::zero(Dimensions dims, TruncationLimits limits) {
    return PoissonSeries(dims, limits);
}

PoissonSeries PoissonSeries::constant(Dimensions dims, TruncationLimits limits,
                                      double value) {
    SeriesBuilder b(dims, limits);
    std::vector<int> dp(dims.n1, 0), dxy(2 * dims.n2, 0), k(dims.n1, 0);
    b.add(dp, dxy, k, Parity::Cos, value);
    return std::move(b).build();
}

PoissonSeries PoissonSeries::action(Dimensions d, TruncationLimits lim, int j,
                                    double c) {
    SeriesBuilder b(d, lim);
    std::vector<int> dp(d.n1, 0), dxy(2 * d.n2, 0), k(d.n1, 0);
    dp[j] = 1;
    b.add(dp, dxy, k, Parity::Cos, c);
    return std::move(b).build();
}

PoissonSeries PoissonSeries::harmonic(Dimensions d, TruncationLimits lim,
                                      std::span<const int> k, Parity parity,
                                      double c) {
    SeriesBuilder b(d, lim);
    std::vector<int> dp(d.n1, 0), dxy(2 * d.n2, 0);
    b.add(dp, dxy, k, parity, c);
    return std::move(b).build();
}

PoissonSeries PoissonSeries::secular_x(Dimensions d, TruncationLimits lim,
                                       int l, double c) {
    SeriesBuilder b(d, lim);
    std::vector<int> dp(d.n1, 0), dxy(2 * d.n2, 0), k(d.n1, 0);
    dxy[l] = 1;
    b.add(dp, dxy, k, Parity::Cos, c);
    return std::move(b).build();
}

PoissonSeries PoissonSeries::secular_y(Dimensions d, TruncationLimits lim,
                                       int l, double c) {
    SeriesBuilder b(d, lim);
    std::vector<int> dp(d.n1, 0), dxy(2 * d.n2, 0), k(d.n1, 0);
    dxy[d.n2 + l] = 1;
    b.add(dp, dxy, k, Parity::Cos, c);
    return std::move(b).build();
}

double PoissonSeries::norm1() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.coeff);
    return s;
}

double PoissonSeries::coefficient(const TermKey& key) const {
    auto it = std::lower_bound(
        terms_.begin(), terms_.end(), key,
        [](const Term& t, const TermKey& k) { return t.key < k; });
    if (it != terms_.end() && it->key == key) return it->coeff;
    return 0.0;
}

bool PoissonSeries::depends_on_p(int j) const {
    for (const auto& t : terms_)
        if (t.key.dp(dims_, j) != 0) return true;
    return false;
}

bool PoissonSeries::depends_on_q(int j) const {
    for (const auto& t : terms_)
        if (t.key.k(dims_, j) != 0) return true;
    return false;
}

bool PoissonSeries::depends_on_x(int l) const {
    for (const auto& t : terms_)
        if (t.key.dx(dims_, l) != 0) return true;
    return false;
}

bool PoissonSeries::depends_on_y(int l) const {
    for (const auto& t : terms_)
        if (t.key.dy(dims_, l) != 0) return true;
    return false;
}

int PoissonSeries::max_degree_p() const {
    int m = 0;
    for (const auto& t : terms_) m = std::max(m, t.key.degree_p(dims_));
    return m;
}

int PoissonSeries::max_degree_xy() const {
    int m = 0;
    for (const auto& t : terms_) m = std::max(m, t.key.degree_xy(dims_));
    return m;
}

int PoissonSeries::max_trig_degree() const {
    int m = 0;
    for (const auto& t : terms_) m = std::max(m, t.key.trig_degree(dims_));
    return m;
}

PoissonSeries PoissonSeries::truncated(const TruncationLimits& lim) const {
    PoissonSeries out(dims_, tighter(limits_, lim));
    out.terms_.reserve(terms_.size());
    for (const auto& t : terms_)
        if (t.key.within(dims_, out.limits_)) out.terms_.push_back(t);
    return out;
}

PoissonSeries PoissonSeries::with_limits(const TruncationLimits& lim) const {
    PoissonSeries out(dims_, lim);
    out.terms_.reserve(terms_.size());
    for (const auto& t : terms_)
        if (t.key.within(dims_, lim)) out.terms_.push_back(t);
    return out;
}

PoissonSeries PoissonSeries::homogeneous_part(int j1, int j2) const {
    PoissonSeries out(dims_, limits_);
    for (const auto& t : terms_) {
        if (j1 >= 0 && t.key.degree_p(dims_) != j1) continue;
        if (j2 >= 0 && t.key.degree_xy(dims_) != j2) continue;
        out.terms_.push_back(t);
    }
    return out;
}

PoissonSeries PoissonSeries::angle_free_part() const {
    PoissonSeries out(dims_, limits_);
    for (const auto& t : terms_)
        if (t.key.harmonic_zero(dims_)) out.terms_.push_back(t);
    return out;
}

PoissonSeries PoissonSeries::angle_dependent_part() const {
    PoissonSeries out(dims_, limits_);
    for (const auto& t : terms_)
        if (!t.key.harmonic_zero(dims_)) out.terms_.push_back(t);
    return out;
}

namespace {

void require_same_dims(const PoissonSeries& f, const PoissonSeries& g,
                       const char* op) {
    if (!(f.dims() == g.dims()))
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

} // namespace

PoissonSeries add(const PoissonSeries& f, const PoissonSeries& g) {
    require_same_dims(f, g, "add");
    SeriesBuilder b(f.dims(), tighter(f.limits(), g.limits()));
    b.reserve(f.size() + g.size());
    b.add_series(f);
    b.add_series(g);
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries sub(const PoissonSeries& f, const PoissonSeries& g) {
    require_same_dims(f, g, "sub");
    SeriesBuilder b(f.dims(), tighter(f.limits(), g.limits()));
    b.reserve(f.size() + g.size());
    b.add_series(f);
    b.add_series(g, -1.0);
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries scale(const PoissonSeries& f, double c) {
    SeriesBuilder b(f.dims(), f.limits());
    b.reserve(f.size());
    b.add_series(f, c);
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries mul(const PoissonSeries& f, const PoissonSeries& g) {
    return mul(f, g, tighter(f.limits(), g.limits()));
}

void mul_accumulate(SeriesBuilder& b, const PoissonSeries& f,
                    const PoissonSeries& g, double prefactor) {
    require_same_dims(f, g, "mul");
    const Dimensions& d = f.dims();
    const TruncationLimits& out_lim = b.limits();

    const int n1 = d.n1, n2 = d.n2;
    std::array<std::int8_t, TermKey::kMaxSlots> buf;

    // Pre-extract degrees so the inner loop can cut impossible pairs early.
    struct Meta { int l; int j1; int trig; };
    auto meta_of = [&d](const PoissonSeries& s) {
        std::vector<Meta> m(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            const TermKey& k = s.terms()[i].key;
            const int j1 = k.degree_p(d);
            m[i] = {2 * j1 + k.degree_xy(d), j1, k.trig_degree(d)};
        }
        return m;
    };
    const auto fm = meta_of(f), gm = meta_of(g);
    // iterate g in ascending combined degree so the cap breaks the loop early
    std::vector<std::uint32_t> g_order(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) g_order[i] = i;
    std::sort(g_order.begin(), g_order.end(),
              [&gm](std::uint32_t a, std::uint32_t b) { return gm[a].l < gm[b].l; });

    for (std::size_t i = 0; i < f.size(); ++i) {
        const Term& tf = f.terms()[i];
        for (std::uint32_t idx : g_order) {
            const std::size_t jj = idx;
            const Term& tg = g.terms()[jj];
            if (fm[i].l + gm[jj].l > out_lim.max_l) break;
            if (fm[i].j1 + gm[jj].j1 > out_lim.max_j1) continue;

            // polynomial part: exponents add
            bool exp_ok = true;
            for (int s = 0; s < n1 + 2 * n2; ++s) {
                const int e = tf.key.raw(s) + tg.key.raw(s);
                if (e > TermKey::kMaxExponent) { exp_ok = false; break; }
                buf[s] = static_cast<std::int8_t>(e);
            }
            if (!exp_ok) continue;

            const double c = 0.5 * prefactor * tf.coeff * tg.coeff;
            const Parity pa = tf.key.parity(), pb = tg.key.parity();

            // trig product: half goes to k_f - k_g, half to k_f + k_g
            for (int side = 0; side < 2; ++side) {
                const int sgn = side == 0 ? -1 : +1; // k_f + sgn*k_g
                Parity parity;
                double cc = c;
                if (pa == Parity::Cos && pb == Parity::Cos) {
                    parity = Parity::Cos;                 // 1/2 cos both sides
                } else if (pa == Parity::Sin && pb == Parity::Sin) {
                    parity = Parity::Cos;                 // 1/2 cos(dif) - 1/2 cos(sum)
                    if (sgn > 0) cc = -cc;
                } else if (pa == Parity::Sin && pb == Parity::Cos) {
                    parity = Parity::Sin;                 // 1/2 sin both sides
                } else {
                    parity = Parity::Sin;                 // -1/2 sin(dif) + 1/2 sin(sum)
                    if (sgn < 0) cc = -cc;
                }

                int trig = 0;
                int first_nonzero = 0;
                for (int s = 0; s < n1; ++s) {
                    const int idx = n1 + 2 * n2 + s;
                    const int kk = tf.key.raw(idx) + sgn * tg.key.raw(idx);
                    if (first_nonzero == 0 && kk != 0)
                        first_nonzero = kk > 0 ? 1 : -1;
                    trig += std::abs(kk);
                    buf[idx] = 0; // provisional; filled below with flip applied
                }
                if (trig > out_lim.max_trig) continue;
                if (first_nonzero == 0 && parity == Parity::Sin) continue;
                const int flip = first_nonzero < 0 ? -1 : 1;
                if (flip < 0 && parity == Parity::Sin) cc = -cc;

                TermKey key;
                for (int s = 0; s < n1 + 2 * n2; ++s) key.set_raw(s, buf[s]);
                bool ok = true;
                for (int s = 0; s < n1; ++s) {
                    const int idx = n1 + 2 * n2 + s;
                    const int kk =
                        flip * (tf.key.raw(idx) + sgn * tg.key.raw(idx));
                    if (kk < -TermKey::kMaxHarmonic ||
                        kk > TermKey::kMaxHarmonic) { ok = false; break; }
                    key.set_raw(idx, kk);
                }
                if (!ok) continue;
                key.set_parity(parity);
                b.add_canonical(key, cc);
            }
        }
    }
}

PoissonSeries mul(const PoissonSeries& f, const PoissonSeries& g,
                  const TruncationLimits& lim) {
    const TruncationLimits out_lim =
        tighter(lim, tighter(f.limits(), g.limits()));
    SeriesBuilder b(f.dims(), out_lim);
    b.reserve(f.size() + g.size());
    mul_accumulate(b, f, g, 1.0);
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries d_dp(const PoissonSeries& f, int j) {
    const Dimensions& d = f.dims();
    SeriesBuilder b(d, f.limits());
    for (const auto& t : f.terms()) {
        const int e = t.key.dp(d, j);
        if (e == 0) continue;
        TermKey key = t.key;
        key.set_raw(j, e - 1);
        b.add_canonical(key, e * t.coeff);
    }
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries d_dq(const PoissonSeries& f, int j) {
    const Dimensions& d = f.dims();
    SeriesBuilder b(d, f.limits());
    for (const auto& t : f.terms()) {
        const int kj = t.key.k(d, j);
        if (kj == 0) continue;
        // d/dq cos(k.q) = -k_j sin(k.q); d/dq sin(k.q) = k_j cos(k.q)
        TermKey key = t.key;
        double c;
        if (t.key.parity() == Parity::Cos) {
            key.set_parity(Parity::Sin);
            c = -kj * t.coeff;
        } else {
            key.set_parity(Parity::Cos);
            c = kj * t.coeff;
        }
        b.add_canonical(key, c);
    }
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries d_dx(const PoissonSeries& f, int l) {
    const Dimensions& d = f.dims();
    SeriesBuilder b(d, f.limits());
    for (const auto& t : f.terms()) {
        const int e = t.key.dx(d, l);
        if (e == 0) continue;
        TermKey key = t.key;
        key.set_raw(d.n1 + l, e - 1);
        b.add_canonical(key, e * t.coeff);
    }
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries d_dy(const PoissonSeries& f, int l) {
    const Dimensions& d = f.dims();
    SeriesBuilder b(d, f.limits());
    for (const auto& t : f.terms()) {
        const int e = t.key.dy(d, l);
        if (e == 0) continue;
        TermKey key = t.key;
        key.set_raw(d.n1 + d.n2 + l, e - 1);
        b.add_canonical(key, e * t.coeff);
    }
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries poisson_bracket(const PoissonSeries& f, const PoissonSeries& g) {
    return poisson_bracket(f, g, tighter(f.limits(), g.limits()));
}

PoissonSeries poisson_bracket(const PoissonSeries& f, const PoissonSeries& g,
                              const TruncationLimits& lim) {
    require_same_dims(f, g, "poisson_bracket");
    const Dimensions& d = f.dims();
    // Bracketing can transiently need one more p-degree / xy-degree than the
    // output keeps; products are truncated to `lim` directly.
    SeriesBuilder b(d, tighter(lim, tighter(f.limits(), g.limits())));
    for (int j = 0; j < d.n1; ++j) {
        const bool fq = f.depends_on_q(j), gp = g.depends_on_p(j);
        const bool fp = f.depends_on_p(j), gq = g.depends_on_q(j);
        if (fq && gp) mul_accumulate(b, d_dq(f, j), d_dp(g, j), 1.0);
        if (fp && gq) mul_accumulate(b, d_dp(f, j), d_dq(g, j), -1.0);
    }
    for (int l = 0; l < d.n2; ++l) {
        const bool fy = f.depends_on_y(l), gx = g.depends_on_x(l);
        const bool fx = f.depends_on_x(l), gy = g.depends_on_y(l);
        if (fy && gx) mul_accumulate(b, d_dy(f, l), d_dx(g, l), 1.0);
        if (fx && gy) mul_accumulate(b, d_dx(f, l), d_dy(g, l), -1.0);
    }
    return std::move(b).build(kArithmeticDrop);
}

PoissonSeries lie_transform(const PoissonSeries& chi, const PoissonSeries& H,
                            int max_order, double norm_cutoff) {
    if (max_order < 0)
        throw std::invalid_argument("lie_transform: max_order < 0");
    require_same_dims(chi, H, "lie_transform");
    const TruncationLimits lim = tighter(chi.limits(), H.limits());
    const double ref = H.norm1();
    PoissonSeries out = H.with_limits(lim);
    PoissonSeries term = out;
    for (int i = 1; i <= max_order; ++i) {
        term = scale(poisson_bracket(chi, term, lim), 1.0 / i);
        if (term.empty()) break;
        out = add(out, term);
        if (term.norm1() < norm_cutoff * ref) break;
    }
    return out;
}

bool in_class(const PoissonSeries& f, const ClassTag& tag, int K,
              bool well_ordered) {
    const Dimensions& d = f.dims();
    for (const auto& t : f.terms()) {
        if (t.key.degree_p(d) != tag.j1) return false;
        if (t.key.degree_xy(d) != tag.j2) return false;
        const int trig = t.key.trig_degree(d);
        if (trig > tag.s * K) return false;
        if (well_ordered && tag.s >= 1 && trig <= (tag.s - 1) * K)
            return false;
    }
    return true;
}

std::vector<std::pair<ClassTag, PoissonSeries>>
reorder_fourier(const PoissonSeries& f, int K) {
    if (K < 1) throw std::invalid_argument("reorder_fourier: K < 1");
    const Dimensions& d = f.dims();
    std::map<ClassTag, SeriesBuilder> buckets;
    for (const auto& t : f.terms()) {
        const int trig = t.key.trig_degree(d);
        const ClassTag tag{t.key.degree_p(d), t.key.degree_xy(d),
                           trig == 0 ? 0 : (trig + K - 1) / K};
        auto it = buckets.find(tag);
        if (it == buckets.end())
            it = buckets.emplace(tag, SeriesBuilder(d, f.limits())).first;
        it->second.add_canonical(t.key, t.coeff);
    }
    std::vector<std::pair<ClassTag, PoissonSeries>> out;
    out.reserve(buckets.size());
    for (auto& [tag, builder] : buckets)
        out.emplace_back(tag, std::move(builder).build());
    return out;
}

double evaluate_direct(const PoissonSeries& f, const PhasePoint& pt) {
    const Dimensions& d = f.dims();
    double total = 0.0;
    for (const auto& t : f.terms()) {
        double v = t.coeff;
        for (int j = 0; j < d.n1; ++j)
            for (int e = 0; e < t.key.dp(d, j); ++e) v *= pt.p[j];
        for (int l = 0; l < d.n2; ++l) {
            for (int e = 0; e < t.key.dx(d, l); ++e) v *= pt.x[l];
            for (int e = 0; e < t.key.dy(d, l); ++e) v *= pt.y[l];
        }
        double phase = 0.0;
        for (int j = 0; j < d.n1; ++j) phase += t.key.k(d, j) * pt.q[j];
        v *= t.key.parity() == Parity::Cos ? std::cos(phase) : std::sin(phase);
        total += v;
    }
    return total;
}

double evaluate(const PoissonSeries& f, const PhasePoint& pt) {
    const Dimensions& d = f.dims();
    if (static_cast<int>(pt.p.size()) != d.n1 ||
        static_cast<int>(pt.q.size()) != d.n1 ||
        static_cast<int>(pt.x.size()) != d.n2 ||
        static_cast<int>(pt.y.size()) != d.n2)
        throw std::invalid_argument("evaluate: point dims mismatch");

    // Power tables for every polynomial variable.
    const int n_poly = d.poly_slots();
    std::vector<std::vector<double>> pow_tab(n_poly);
    auto fill = [&](int slot, double v, int max_e) {
        auto& tab = pow_tab[slot];
        tab.resize(max_e + 1);
        tab[0] = 1.0;
        for (int e = 1; e <= max_e; ++e) tab[e] = tab[e - 1] * v;
    };
    std::vector<int> max_e(n_poly, 0);
    for (const auto& t : f.terms())
        for (int s = 0; s < n_poly; ++s)
            max_e[s] = std::max<int>(max_e[s], t.key.raw(s));
    for (int j = 0; j < d.n1; ++j) fill(j, pt.p[j], max_e[j]);
    for (int l = 0; l < d.n2; ++l) {
        fill(d.n1 + l, pt.x[l], max_e[d.n1 + l]);
        fill(d.n1 + d.n2 + l, pt.y[l], max_e[d.n1 + d.n2 + l]);
    }

    // Group by harmonic: terms are key-sorted, so equal (k, parity) runs are
    // not contiguous in general; accumulate per-harmonic sums in a map keyed
    // by the packed harmonic bytes.
    struct HarmKey {
        std::array<std::int8_t, 8> k{};
        std::uint8_t parity = 0;
        bool operator==(const HarmKey&) const = default;
    };
    struct HarmHash {
        std::size_t operator()(const HarmKey& h) const {
            std::size_t v = 1469598103934665603ull;
            for (auto b : h.k) { v ^= static_cast<std::uint8_t>(b); v *= 1099511628211ull; }
            v ^= h.parity; v *= 1099511628211ull;
            return v;
        }
    };
    std::unordered_map<HarmKey, double, HarmHash> groups;
    groups.reserve(f.size() / 4 + 8);
    for (const auto& t : f.terms()) {
        double v = t.coeff;
        for (int s = 0; s < n_poly; ++s) v *= pow_tab[s][t.key.raw(s)];
        HarmKey hk;
        for (int j = 0; j < d.n1; ++j) hk.k[j] = t.key.raw(n_poly + j);
        hk.parity = static_cast<std::uint8_t>(t.key.parity());
        groups[hk] += v;
    }
    double total = 0.0;
    for (const auto& [hk, v] : groups) {
        double phase = 0.0;
        for (int j = 0; j < d.n1; ++j) phase += hk.k[j] * pt.q[j];
        total += v * (hk.parity == 0 ? std::cos(phase) : std::sin(phase));
    }
    return total;
}

} // namespace eltor::series
