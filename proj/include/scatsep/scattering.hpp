#pragma once

// Two-layer scattering network and the scattering covariance statistics.
//
// Scale indices in CoeffIndex are 1-based: j = 1..N are band-pass channels
// (N = J*Q, j = 1 the finest) and j = N+1 is the low-pass. Internally channels
// are 0-based (c = j - 1).
//
// With U_j = x * psi_j, M_j = |U_j| for band-pass j, and M~_j = M_j - Ave(M_j):
//   phi1[j]      = Ave |U_j|                       j = 1..N+1
//   phi2[j]      = Ave |U_j|^2                     j = 1..N+1
//   phi3[j; a]   = Ave U_j M~_{j-a}                j = 2..N+1, a = 1..j-1
//   phi4[j; a,b] = Ave V_{j,k} conj(V_{j-a,k})     j = 1..N, a = 0..j-1, k = j-b = j+1..N+1
// where V_{j,k} = M~_j * psi_k. Envelopes are centred so that the low-pass
// channel never picks up the envelope mean; band-pass outputs are unaffected.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scatsep/common.hpp"
#include "scatsep/fft.hpp"
#include "scatsep/wavelet.hpp"

namespace scatsep {

enum class CoeffFamily : std::uint8_t { phi1, phi2, phi3, phi4 };

inline std::string_view to_string(CoeffFamily f) {
    switch (f) {
        case CoeffFamily::phi1: return "phi1";
        case CoeffFamily::phi2: return "phi2";
        case CoeffFamily::phi3: return "phi3";
        case CoeffFamily::phi4: return "phi4";
    }
    return "unknown";
}

struct CoeffIndex {
    CoeffFamily family = CoeffFamily::phi1;
    int j = 0;
    int a = 0;  // phi3, phi4
    int b = 0;  // phi4 only, always negative
    bool complex_flag = false;

    bool operator==(const CoeffIndex&) const = default;
};

/// Ordered coefficient enumeration for N band-pass channels. Cross layouts
/// omit phi1.
class CoeffLayout {
public:
    CoeffLayout(std::size_t bandpass, bool cross) : n_(bandpass), cross_(cross) {
        const int N = static_cast<int>(n_);
        if (!cross_)
            for (int j = 1; j <= N + 1; ++j) push({CoeffFamily::phi1, j, 0, 0, false});
        phi2_begin_ = entries_.size();
        for (int j = 1; j <= N + 1; ++j) push({CoeffFamily::phi2, j, 0, 0, cross_});
        phi3_begin_ = entries_.size();
        for (int j = 2; j <= N + 1; ++j)
            for (int a = 1; a < j; ++a) push({CoeffFamily::phi3, j, a, 0, cross_ || j <= N});
        phi4_begin_ = entries_.size();
        for (int j = 1; j <= N; ++j)
            for (int a = 0; a < j; ++a)
                for (int k = j + 1; k <= N + 1; ++k)
                    push({CoeffFamily::phi4, j, a, j - k, cross_ || (a > 0 && k <= N)});

        // phi4 grouped by k keeps the V_{., k} rows touched together in cache.
        order_.resize(entries_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        std::stable_sort(order_.begin() + static_cast<std::ptrdiff_t>(phi4_begin_), order_.end(),
                         [&](std::size_t p, std::size_t q) { return entries_[p].b - entries_[p].j > entries_[q].b - entries_[q].j; });

        const std::size_t n1 = n_ + 1;
        const std::size_t expected = (cross_ ? 0 : n1) + n1 + n_ * n1 / 2 + n_ * n1 * (n_ + 2) / 6;
        if (entries_.size() != expected) throw Error("coefficient enumeration does not match closed-form count");
    }

    std::size_t bandpass() const noexcept { return n_; }
    bool cross() const noexcept { return cross_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<CoeffIndex>& entries() const noexcept { return entries_; }
    const CoeffIndex& operator[](std::size_t i) const noexcept { return entries_[i]; }
    /// Cache-friendly traversal order of the entries.
    const std::vector<std::size_t>& order() const noexcept { return order_; }
    std::size_t phi2_begin() const noexcept { return phi2_begin_; }
    std::size_t phi3_begin() const noexcept { return phi3_begin_; }
    std::size_t phi4_begin() const noexcept { return phi4_begin_; }

    std::size_t count(CoeffFamily f) const noexcept {
        return static_cast<std::size_t>(
            std::count_if(entries_.begin(), entries_.end(), [f](const CoeffIndex& c) { return c.family == f; }));
    }

private:
    void push(CoeffIndex c) { entries_.push_back(c); }

    std::size_t n_;
    bool cross_;
    std::vector<CoeffIndex> entries_;
    std::vector<std::size_t> order_;
    std::size_t phi2_begin_ = 0, phi3_begin_ = 0, phi4_begin_ = 0;
};

/// Flattened scattering covariance with its index map.
struct ScatCov {
    std::vector<Complex> values;
    std::vector<CoeffIndex> index;
    int J = 0;
    int Q = 0;
    std::size_t d = 0;
    bool cross = false;

    std::size_t size() const noexcept { return values.size(); }

    /// Position of the given coefficient, or size() when absent.
    std::size_t find(CoeffFamily family, int j, int a = 0, int b = 0) const noexcept {
        for (std::size_t i = 0; i < index.size(); ++i) {
            const auto& c = index[i];
            if (c.family == family && c.j == j && c.a == a && c.b == b) return i;
        }
        return index.size();
    }
};

namespace detail {

/// |z| without hypot's overflow protection; activations stay far from the
/// double range limits.
inline double modulus(Complex z) noexcept { return std::sqrt(z.real() * z.real() + z.imag() * z.imag()); }

}  // namespace detail

/// Index of the layer-2 pair (j, k), 0-based channels with j < k <= n.
inline std::size_t pair_index(std::size_t n, std::size_t j, std::size_t k) noexcept {
    return j * n - j * (j - 1) / 2 + (k - j - 1);
}
inline std::size_t pair_count(std::size_t n) noexcept { return n * (n + 1) / 2; }

/// Reusable FFT scratch for one thread.
struct ScatWorkspace {
    ComplexBuffer spec, scratch, half;
    RealBuffer real, real2;

    explicit ScatWorkspace(std::size_t d)
        : spec(d / 2 + 1), scratch(d), half(d / 2 + 1), real(d), real2(d) {}
};

/// Every activation of the network for one signal: U (layer 1), centred
/// envelopes M~ with their means, and V (centred layer 2).
struct ScatLayers {
    std::size_t n = 0;  // band-pass channels
    std::size_t d = 0;
    ComplexBuffer U;       // (n+1) x d
    RealBuffer Mc;         // n x d
    std::vector<double> mean_M;
    ComplexBuffer V;       // pair_count(n) x d

    ScatLayers() = default;
    ScatLayers(std::size_t bandpass, std::size_t len)
        : n(bandpass), d(len), U((bandpass + 1) * len), Mc(bandpass * len), mean_M(bandpass),
          V(pair_count(bandpass) * len) {}

    const Complex* u(std::size_t c) const noexcept { return U.data() + c * d; }
    Complex* u(std::size_t c) noexcept { return U.data() + c * d; }
    const double* mc(std::size_t c) const noexcept { return Mc.data() + c * d; }
    double* mc(std::size_t c) noexcept { return Mc.data() + c * d; }
    const Complex* v(std::size_t j, std::size_t k) const noexcept { return V.data() + pair_index(n, j, k) * d; }
    Complex* v(std::size_t j, std::size_t k) noexcept { return V.data() + pair_index(n, j, k) * d; }

    /// Runs the network on x (length d).
    void compute(std::span<const double> x, const FilterBank& fb, ScatWorkspace& ws) {
        if (x.size() != d || fb.d() != d || fb.bandpass_count() != n)
            throw InvalidArgument("scattering: signal length " + std::to_string(x.size()) +
                                  " does not match filter bank length " + std::to_string(fb.d()));
        const Fft& fft = Fft::get(d);
        std::copy(x.begin(), x.end(), ws.real.begin());
        fft.forward_real(ws.real.data(), ws.spec.data());
        for (std::size_t c = 0; c <= n; ++c)
            detail::filter_half_spectrum(fb, c, ws.spec.data(), u(c), ws.scratch.data(), ws.real2.data());
        const double inv = 1.0 / static_cast<double>(d);
        for (std::size_t j = 0; j < n; ++j) {
            const Complex* uj = u(j);
            double* m = mc(j);
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                m[t] = detail::modulus(uj[t]);
                s += m[t];
            }
            s *= inv;
            mean_M[j] = s;
            for (std::size_t t = 0; t < d; ++t) m[t] -= s;
            std::copy(m, m + d, ws.real.begin());
            fft.forward_real(ws.real.data(), ws.spec.data());
            for (std::size_t k = j + 1; k <= n; ++k)
                detail::filter_half_spectrum(fb, k, ws.spec.data(), v(j, k), ws.scratch.data(), ws.real2.data());
        }
    }
};

namespace detail {

// The reductions keep two interleaved partial sums per component (fixed
// order, so results stay deterministic) to shorten the add dependency chain.
// d is even for every admissible bank.

inline Complex mean_product(const Complex* a, const Complex* b, std::size_t d) noexcept {
    auto* p = reinterpret_cast<const double*>(a);
    auto* q = reinterpret_cast<const double*>(b);
    double r0 = 0, r1 = 0, i0 = 0, i1 = 0;
    for (std::size_t i = 0; i < 2 * d; i += 4) {
        r0 += p[i] * q[i] - p[i + 1] * q[i + 1];
        i0 += p[i] * q[i + 1] + p[i + 1] * q[i];
        r1 += p[i + 2] * q[i + 2] - p[i + 3] * q[i + 3];
        i1 += p[i + 2] * q[i + 3] + p[i + 3] * q[i + 2];
    }
    return Complex(r0 + r1, i0 + i1) / static_cast<double>(d);
}

/// Ave(a conj(b)).
inline Complex mean_conj_product(const Complex* a, const Complex* b, std::size_t d) noexcept {
    auto* p = reinterpret_cast<const double*>(a);
    auto* q = reinterpret_cast<const double*>(b);
    double r0 = 0, r1 = 0, i0 = 0, i1 = 0;
    for (std::size_t i = 0; i < 2 * d; i += 4) {
        r0 += p[i] * q[i] + p[i + 1] * q[i + 1];
        i0 += p[i + 1] * q[i] - p[i] * q[i + 1];
        r1 += p[i + 2] * q[i + 2] + p[i + 3] * q[i + 3];
        i1 += p[i + 3] * q[i + 2] - p[i + 2] * q[i + 3];
    }
    return Complex(r0 + r1, i0 + i1) / static_cast<double>(d);
}

inline Complex mean_real_product(const Complex* a, const double* r, std::size_t d) noexcept {
    auto* p = reinterpret_cast<const double*>(a);
    double r0 = 0, r1 = 0, i0 = 0, i1 = 0;
    for (std::size_t t = 0; t < d; t += 2) {
        r0 += p[2 * t] * r[t];
        i0 += p[2 * t + 1] * r[t];
        r1 += p[2 * t + 2] * r[t + 1];
        i1 += p[2 * t + 3] * r[t + 1];
    }
    return Complex(r0 + r1, i0 + i1) / static_cast<double>(d);
}

}  // namespace detail

/// Statistics of one signal (auto layout) or of a pair (cross layout, x
/// against y). `out` must hold layout.size() values.
inline void compute_statistics(const CoeffLayout& layout, const ScatLayers& x, const ScatLayers& y,
                               Complex* out) {
    const std::size_t d = x.d;
    const double inv = 1.0 / static_cast<double>(d);
    for (std::size_t i : layout.order()) {
        const CoeffIndex& c = layout[i];
        const std::size_t j = static_cast<std::size_t>(c.j - 1);
        switch (c.family) {
            case CoeffFamily::phi1: {
                const Complex* u = x.u(j);
                double s = 0.0;
                for (std::size_t t = 0; t < d; ++t) s += detail::modulus(u[t]);
                out[i] = s * inv;
                break;
            }
            case CoeffFamily::phi2:
                if (layout.cross()) {
                    out[i] = detail::mean_conj_product(x.u(j), y.u(j), d);
                } else {
                    const Complex* u = x.u(j);
                    double s = 0.0;
                    for (std::size_t t = 0; t < d; ++t) s += std::norm(u[t]);
                    out[i] = s * inv;
                }
                break;
            case CoeffFamily::phi3:
                out[i] = detail::mean_real_product(x.u(j), y.mc(j - static_cast<std::size_t>(c.a)), d);
                break;
            case CoeffFamily::phi4: {
                const std::size_t k = static_cast<std::size_t>(c.j - c.b - 1);
                const std::size_t j2 = j - static_cast<std::size_t>(c.a);
                out[i] = detail::mean_conj_product(x.v(j, k), y.v(j2, k), d);
                break;
            }
        }
    }
}

inline ScatCov make_scat_cov(const CoeffLayout& layout, const FilterBank& fb) {
    ScatCov cov;
    cov.values.assign(layout.size(), Complex{});
    cov.index = layout.entries();
    cov.J = fb.J();
    cov.Q = fb.Q();
    cov.d = fb.d();
    cov.cross = layout.cross();
    return cov;
}

/// Phi(x).
inline ScatCov scat_cov(std::span<const double> x, const FilterBank& fb) {
    CoeffLayout layout(fb.bandpass_count(), false);
    ScatWorkspace ws(fb.d());
    ScatLayers L(fb.bandpass_count(), fb.d());
    L.compute(x, fb, ws);
    ScatCov cov = make_scat_cov(layout, fb);
    compute_statistics(layout, L, L, cov.values.data());
    return cov;
}
inline ScatCov scat_cov(const Waveform& x, const FilterBank& fb) { return scat_cov(x.view(), fb); }

/// Phi(x, y): second-order coefficients correlating x against y.
inline ScatCov scat_cross_cov(std::span<const double> x, std::span<const double> y, const FilterBank& fb) {
    if (x.size() != y.size())
        throw InvalidArgument("scat_cross_cov: lengths differ (" + std::to_string(x.size()) + " vs " +
                              std::to_string(y.size()) + ")");
    CoeffLayout layout(fb.bandpass_count(), true);
    ScatWorkspace ws(fb.d());
    ScatLayers Lx(fb.bandpass_count(), fb.d()), Ly(fb.bandpass_count(), fb.d());
    Lx.compute(x, fb, ws);
    Ly.compute(y, fb, ws);
    ScatCov cov = make_scat_cov(layout, fb);
    compute_statistics(layout, Lx, Ly, cov.values.data());
    return cov;
}
inline ScatCov scat_cross_cov(const Waveform& x, const Waveform& y, const FilterBank& fb) {
    return scat_cross_cov(x.view(), y.view(), fb);
}

/// Layer 1 (Wx) and uncentred layer 2 (|x * psi_j1| * psi_j2, j1 < j2).
struct ScatteringCoeffs {
    MultiScaleCoeffs layer1;
    std::vector<std::pair<int, int>> pairs;  // 1-based (j1, j2)
    ComplexBuffer layer2_data;

    std::span<const Complex> layer2(int j1, int j2) const {
        for (std::size_t p = 0; p < pairs.size(); ++p)
            if (pairs[p].first == j1 && pairs[p].second == j2)
                return {layer2_data.data() + p * layer1.d, layer1.d};
        throw InvalidArgument("layer2 pair (" + std::to_string(j1) + ", " + std::to_string(j2) +
                              ") is not admissible");
    }
};

inline ScatteringCoeffs scattering_transform(std::span<const double> x, const FilterBank& fb) {
    ScatteringCoeffs out;
    out.layer1 = wavelet_transform(x, fb);
    const std::size_t n = fb.bandpass_count(), d = fb.d();
    const Fft& fft = Fft::get(d);
    out.layer2_data.resize(pair_count(n) * d);
    ScatWorkspace ws(d);
    for (std::size_t j = 0; j < n; ++j) {
        auto u = out.layer1.channel(j);
        for (std::size_t t = 0; t < d; ++t) ws.real[t] = detail::modulus(u[t]);
        fft.forward_real(ws.real.data(), ws.spec.data());
        for (std::size_t k = j + 1; k <= n; ++k) {
            out.pairs.emplace_back(static_cast<int>(j + 1), static_cast<int>(k + 1));
            detail::filter_half_spectrum(fb, k, ws.spec.data(), out.layer2_data.data() + pair_index(n, j, k) * d,
                                         ws.scratch.data(), ws.real2.data());
        }
    }
    return out;
}
inline ScatteringCoeffs scattering_transform(const Waveform& x, const FilterBank& fb) {
    return scattering_transform(x.view(), fb);
}

/// One row of the normalized dashboard. Per-scale rows carry j; reduced rows
/// (averaged over band-pass j) have j = 0.
struct DashboardRow {
    CoeffFamily family = CoeffFamily::phi1;
    int j = 0;
    int a = 0;
    int b = 0;
    Complex value;
    bool present = true;
};

struct DashboardTable {
    std::vector<DashboardRow> rows;

    /// First row matching the key, or nullptr.
    const DashboardRow* find(CoeffFamily family, int j, int a = 0, int b = 0) const noexcept {
        for (const auto& r : rows)
            if (r.family == family && r.j == j && r.a == a && r.b == b) return &r;
        return nullptr;
    }

    /// Columns: family,j,a,b,real,imag. Absent entries leave real/imag empty.
    void write_csv(std::ostream& os) const {
        os << "family,j,a,b,real,imag\n";
        os.precision(17);
        for (const auto& r : rows) {
            os << to_string(r.family) << ',' << r.j << ',' << r.a << ',' << r.b << ',';
            if (r.present) os << r.value.real() << ',' << r.value.imag();
            else os << ',';
            os << '\n';
        }
    }
};

/// Normalized, scale-reduced view of an auto scattering covariance:
///   phi1 rows: phi1[j] / sqrt(phi2[j]) for every j;
///   phi2 rows: phi2[j] / sum_j phi2[j] (relative spectrum);
///   phi3 rows: mean over band-pass j of phi3[j;a] / sqrt(phi2[j] phi2[j-a]);
///   phi4 rows: mean over band-pass j, k of phi4[j;a,b] / sqrt(phi2[j] phi2[j-a]).
inline DashboardTable dashboard(const ScatCov& cov, double eps_floor = 1e-24) {
    if (cov.cross) throw InvalidArgument("dashboard expects an auto scattering covariance");
    const int N = cov.J * cov.Q;
    std::vector<double> p2(static_cast<std::size_t>(N + 2), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < cov.size(); ++i)
        if (cov.index[i].family == CoeffFamily::phi2) {
            p2[static_cast<std::size_t>(cov.index[i].j)] = cov.values[i].real();
            total += cov.values[i].real();
        }
    auto ok = [&](int j) { return p2[static_cast<std::size_t>(j)] > eps_floor * total && total > 0.0; };

    DashboardTable table;
    for (std::size_t i = 0; i < cov.size(); ++i) {
        const auto& c = cov.index[i];
        if (c.family == CoeffFamily::phi1) {
            DashboardRow r{CoeffFamily::phi1, c.j, 0, 0, {}, ok(c.j)};
            if (r.present) r.value = cov.values[i] / std::sqrt(p2[static_cast<std::size_t>(c.j)]);
            table.rows.push_back(r);
        }
    }
    for (int j = 1; j <= N + 1; ++j) {
        DashboardRow r{CoeffFamily::phi2, j, 0, 0, {}, total > 0.0};
        if (r.present) r.value = p2[static_cast<std::size_t>(j)] / total;
        table.rows.push_back(r);
    }

    struct Acc {
        Complex sum;
        int count = 0;
    };
    std::vector<Acc> acc3(static_cast<std::size_t>(N + 1));
    // phi4 key (a, b) with 0 <= a < N, 1 <= -b < N.
    std::vector<Acc> acc4(static_cast<std::size_t>(N * N));
    for (std::size_t i = 0; i < cov.size(); ++i) {
        const auto& c = cov.index[i];
        if (c.family == CoeffFamily::phi3 && c.j <= N) {
            if (!ok(c.j) || !ok(c.j - c.a)) continue;
            auto& s = acc3[static_cast<std::size_t>(c.a)];
            s.sum += cov.values[i] / std::sqrt(p2[static_cast<std::size_t>(c.j)] *
                                               p2[static_cast<std::size_t>(c.j - c.a)]);
            ++s.count;
        } else if (c.family == CoeffFamily::phi4 && c.j - c.b <= N) {
            if (!ok(c.j) || !ok(c.j - c.a)) continue;
            auto& s = acc4[static_cast<std::size_t>(c.a * N - c.b)];
            s.sum += cov.values[i] / std::sqrt(p2[static_cast<std::size_t>(c.j)] *
                                               p2[static_cast<std::size_t>(c.j - c.a)]);
            ++s.count;
        }
    }
    for (int a = 1; a < N; ++a) {
        const auto& s = acc3[static_cast<std::size_t>(a)];
        DashboardRow r{CoeffFamily::phi3, 0, a, 0, {}, s.count > 0};
        if (r.present) r.value = s.sum / static_cast<double>(s.count);
        table.rows.push_back(r);
    }
    for (int a = 0; a < N - 1; ++a)
        for (int b = -1; a - b < N; --b) {
            const auto& s = acc4[static_cast<std::size_t>(a * N - b)];
            DashboardRow r{CoeffFamily::phi4, 0, a, b, {}, s.count > 0};
            if (r.present) r.value = s.sum / static_cast<double>(s.count);
            table.rows.push_back(r);
        }
    return table;
}

}  // namespace scatsep
