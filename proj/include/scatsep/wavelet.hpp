#pragma once

// Dyadic analytic wavelet filter banks built on the DFT grid, and the wavelet
// transform W computed by circular convolution in the frequency domain.
//
// Conventions. Frequencies are in radians per sample, bin k of a length-d grid
// sits at 2*pi*k/d. The mother wavelet psi concentrates on [pi, 2*pi]; band-pass
// channel c (0-based) is psi dilated by 2^(1 + c/Q), so with Q = 1 channel c is
// the paper-style scale j = c + 1 covering [2^-j pi, 2^-j+1 pi]. The last channel
// is the low-pass phi_J. Band-pass responses vanish on negative frequencies and
// carry a factor sqrt(2) on interior positive bins so that ||Wx|| = ||x|| for
// real x; the Littlewood-Paley profile is therefore
//
//   p(w) = 1/2 sum_c |psi_c(w)|^2 + |phi(w)|^2   for 0 < w < pi,
//   p(pi) = sum_c |psi_c(pi)|^2 + |phi(pi)|^2,
//
// which equals 1 exactly by construction.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scatsep/common.hpp"
#include "scatsep/fft.hpp"

namespace scatsep {

enum class WaveletFamily { battle_lemarie, morlet_renormalized };

inline std::string_view to_string(WaveletFamily f) {
    switch (f) {
        case WaveletFamily::battle_lemarie: return "battle_lemarie";
        case WaveletFamily::morlet_renormalized: return "morlet_renormalized";
    }
    return "unknown";
}

inline WaveletFamily parse_wavelet_family(std::string_view name) {
    if (name == "battle_lemarie" || name == "battle-lemarie") return WaveletFamily::battle_lemarie;
    if (name == "morlet_renormalized" || name == "morlet-renormalized" || name == "morlet") return WaveletFamily::morlet_renormalized;
    throw InvalidArgument("unknown wavelet family '" + std::string(name) + "'");
}

namespace detail {

// Degree of the spline generating the Battle-Lemarie wavelet. Degree 11 is the
// lowest odd degree that keeps >= 95% of the mother's energy inside
// [pi, 2*pi]; the cubic one only reaches 87%.
inline constexpr int kSplineDegree = 11;

// sum_k sinc((w + 2 pi k)/2)^n, 2*pi periodic, strictly positive.
inline double spline_autocorrelation(double w, int n) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::remainder(w, two_pi);
    double sum = 0.0;
    for (int k = -4; k <= 4; ++k) {
        double z = 0.5 * (r + two_pi * k);
        double s = std::abs(z) < 1e-300 ? 1.0 : std::sin(z) / z;
        sum += std::pow(s, n);
    }
    return sum;
}

/// |psi(w)|^2 of the orthonormal Battle-Lemarie wavelet for w > 0. Satisfies
/// sum_j |psi(2^j w)|^2 = 1 for every w > 0.
inline double battle_lemarie_energy(double w) {
    if (!(w > 0.0)) return 0.0;
    const int n = 2 * kSplineDegree + 2;
    double q = std::sin(0.25 * w);
    double lead = std::pow(4.0 * q * q / w, n);
    if (lead == 0.0) return 0.0;
    double num = spline_autocorrelation(0.5 * w + std::numbers::pi, n);
    double den = spline_autocorrelation(w, n) * spline_autocorrelation(0.5 * w, n);
    return lead * num / den;
}

/// Squared zero-mean analytic Morlet response centred at 1.5 pi.
inline double morlet_energy(double w) {
    if (!(w > 0.0)) return 0.0;
    constexpr double xi = 1.5 * std::numbers::pi;
    constexpr double sigma = 0.35 * std::numbers::pi;
    const double s2 = 2.0 * sigma * sigma;
    double m = std::exp(-(w - xi) * (w - xi) / s2) - std::exp(-(w * w + xi * xi) / s2);
    return m * m;
}

inline double mother_energy(WaveletFamily family, double w) {
    return family == WaveletFamily::battle_lemarie ? battle_lemarie_energy(w) : morlet_energy(w);
}

}  // namespace detail

/// Frequency responses of J*Q analytic band-pass filters plus one low-pass,
/// sampled on the full length-d DFT grid. Responses are real-valued (zero-phase
/// in the frequency domain); band-pass impulse responses are complex.
class FilterBank {
public:
    FilterBank(int J, int Q, std::size_t d, WaveletFamily family, RealBuffer responses)
        : J_(J), Q_(Q), d_(d), family_(family), responses_(std::move(responses)) {
        if (responses_.size() != channels() * d_)
            throw InvalidArgument("filter bank response storage has the wrong size");
    }

    int J() const noexcept { return J_; }
    int Q() const noexcept { return Q_; }
    std::size_t d() const noexcept { return d_; }
    WaveletFamily family() const noexcept { return family_; }

    std::size_t bandpass_count() const noexcept { return static_cast<std::size_t>(J_ * Q_); }
    std::size_t channels() const noexcept { return bandpass_count() + 1; }
    std::size_t lowpass_channel() const noexcept { return bandpass_count(); }
    bool is_lowpass(std::size_t c) const noexcept { return c == bandpass_count(); }

    std::span<const double> response(std::size_t c) const noexcept {
        return {responses_.data() + c * d_, d_};
    }

    /// Copy with one channel's response set to zero (diagnostics only).
    FilterBank with_channel_zeroed(std::size_t c) const {
        RealBuffer r = responses_;
        std::fill(r.begin() + static_cast<std::ptrdiff_t>(c * d_),
                  r.begin() + static_cast<std::ptrdiff_t>((c + 1) * d_), 0.0);
        return FilterBank(J_, Q_, d_, family_, std::move(r));
    }

private:
    int J_;
    int Q_;
    std::size_t d_;
    WaveletFamily family_;
    RealBuffer responses_;
};

/// Builds the bank for (J, Q, d). d must be a power of two with
/// J*Q + 1 <= log2(d).
inline FilterBank build_filter_bank(int J, int Q, std::size_t d, WaveletFamily family) {
    if (J < 1) throw InvalidArgument("J must be >= 1");
    if (Q < 1) throw InvalidArgument("Q must be >= 1");
    if (!is_power_of_two(d) || d < 4)
        throw InvalidArgument("signal length " + std::to_string(d) + " is not a power of two >= 4");
    if (J * Q + 1 > ilog2(d))
        throw InvalidArgument("J*Q + 1 = " + std::to_string(J * Q + 1) + " exceeds log2(d) = " +
                              std::to_string(ilog2(d)));

    const std::size_t nbp = static_cast<std::size_t>(J * Q);
    const std::size_t half = d / 2;
    const double dq = 1.0 / Q;
    RealBuffer resp((nbp + 1) * d, 0.0);
    std::vector<double> raw(nbp);

    for (std::size_t k = 1; k <= half; ++k) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(d);
        for (std::size_t c = 0; c < nbp; ++c)
            raw[c] = detail::mother_energy(family, std::exp2(1.0 + c * dq) * w);
        // Dilations finer than the first channel alias past Nyquist on the
        // grid; the first channel absorbs their energy.
        for (int i = 1; i <= 12 * Q; ++i) raw[0] += detail::mother_energy(family, std::exp2(1.0 - i * dq) * w);
        double low = 0.0;
        for (int i = 1; i <= 60 * Q; ++i) {
            double t = detail::mother_energy(family, std::exp2(J + i * dq) * w);
            low += t;
            if (t < 1e-40 * (low + 1e-300) && i > 4 * Q) break;
        }
        double profile = low;
        for (double v : raw) profile += v;
        if (!(profile > 0.0)) throw Error("degenerate Littlewood-Paley profile at bin " + std::to_string(k));

        const double gain = (k == half) ? 1.0 : 2.0;
        for (std::size_t c = 0; c < nbp; ++c) resp[c * d + k] = std::sqrt(gain * raw[c] / profile);
        double phi = std::sqrt(low / profile);
        resp[nbp * d + k] = phi;
        if (k != half) resp[nbp * d + (d - k)] = phi;
    }
    resp[nbp * d] = 1.0;
    return FilterBank(J, Q, d, family, std::move(resp));
}

/// Littlewood-Paley profile on the positive bins 1..d/2 (entry i is bin i+1).
inline std::vector<double> littlewood_paley_profile(const FilterBank& fb) {
    const std::size_t d = fb.d(), half = d / 2;
    std::vector<double> p(half, 0.0);
    for (std::size_t k = 1; k <= half; ++k) {
        double bp = 0.0;
        for (std::size_t c = 0; c < fb.bandpass_count(); ++c) {
            double v = fb.response(c)[k];
            bp += v * v;
        }
        double lo = fb.response(fb.lowpass_channel())[k];
        p[k - 1] = (k == half ? bp : 0.5 * bp) + lo * lo;
    }
    return p;
}

/// Output of W: one complex row of length d per channel, low-pass last.
struct MultiScaleCoeffs {
    std::size_t channels = 0;
    std::size_t d = 0;
    ComplexBuffer data;

    MultiScaleCoeffs() = default;
    MultiScaleCoeffs(std::size_t ch, std::size_t len) : channels(ch), d(len), data(ch * len) {}

    std::span<Complex> channel(std::size_t c) noexcept { return {data.data() + c * d, d}; }
    std::span<const Complex> channel(std::size_t c) const noexcept { return {data.data() + c * d, d}; }

    double energy() const noexcept {
        double e = 0.0;
        for (const auto& z : data) e += std::norm(z);
        return e;
    }
};

namespace detail {

/// Applies channel c to a real signal given its half spectrum (bins 0..d/2).
/// Writes d complex samples to `out`; `scratch` must hold d values.
inline void filter_half_spectrum(const FilterBank& fb, std::size_t c, const Complex* half_spec,
                                 Complex* out, Complex* scratch, double* real_scratch) {
    const std::size_t d = fb.d(), half = d / 2;
    const Fft& fft = Fft::get(d);
    const double inv = 1.0 / static_cast<double>(d);
    auto psi = fb.response(c);
    if (fb.is_lowpass(c)) {
        for (std::size_t k = 0; k <= half; ++k) scratch[k] = half_spec[k] * psi[k];
        fft.inverse_real(scratch, real_scratch);
        for (std::size_t t = 0; t < d; ++t) out[t] = Complex(real_scratch[t] * inv, 0.0);
    } else {
        for (std::size_t k = 0; k <= half; ++k) scratch[k] = half_spec[k] * (psi[k] * inv);
        std::fill(scratch + half + 1, scratch + d, Complex{});
        fft.inverse(scratch, out);
    }
}

/// Accumulates the half spectrum H (bins 0..d/2) of Re(W_c^H g) * d for one
/// channel, where g is a length-d complex gradient. `scratch` holds d values.
inline void accumulate_adjoint(const FilterBank& fb, std::size_t c, const Complex* g, Complex* H,
                               Complex* scratch) {
    const std::size_t d = fb.d(), half = d / 2;
    const Fft& fft = Fft::get(d);
    auto psi = fb.response(c);
    fft.forward(g, scratch);
    if (fb.is_lowpass(c)) {
        for (std::size_t k = 0; k <= half; ++k) {
            Complex mirror = std::conj(scratch[(d - k) % d]) * psi[(d - k) % d];
            H[k] += 0.5 * (scratch[k] * psi[k] + mirror);
        }
    } else {
        H[0] += scratch[0].real() * psi[0];
        for (std::size_t k = 1; k < half; ++k) H[k] += 0.5 * scratch[k] * psi[k];
        H[half] += (scratch[half] * psi[half]).real();
    }
}

}  // namespace detail

/// Wx: channel c holds the circular convolution of x with filter c.
inline MultiScaleCoeffs wavelet_transform(std::span<const double> x, const FilterBank& fb) {
    const std::size_t d = fb.d();
    if (x.size() != d)
        throw InvalidArgument("wavelet_transform: signal length " + std::to_string(x.size()) +
                              " does not match filter bank length " + std::to_string(d));
    const Fft& fft = Fft::get(d);
    RealBuffer xin(x.begin(), x.end()), rscratch(d);
    ComplexBuffer spec(d / 2 + 1), scratch(d);
    fft.forward_real(xin.data(), spec.data());
    MultiScaleCoeffs out(fb.channels(), d);
    for (std::size_t c = 0; c < fb.channels(); ++c)
        detail::filter_half_spectrum(fb, c, spec.data(), out.channel(c).data(), scratch.data(),
                                     rscratch.data());
    return out;
}

inline MultiScaleCoeffs wavelet_transform(const Waveform& x, const FilterBank& fb) {
    return wavelet_transform(x.view(), fb);
}

/// Adjoint of W restricted to real inputs: returns Re(W^H g), so that
/// Re<Wx, g> = <x, wavelet_adjoint(g)> for every real x.
inline std::vector<double> wavelet_adjoint(const MultiScaleCoeffs& g, const FilterBank& fb) {
    const std::size_t d = fb.d();
    if (g.d != d || g.channels != fb.channels())
        throw InvalidArgument("wavelet_adjoint: coefficient shape does not match filter bank");
    const Fft& fft = Fft::get(d);
    ComplexBuffer H(d / 2 + 1), scratch(d), gin(d);
    for (std::size_t c = 0; c < fb.channels(); ++c) {
        auto ch = g.channel(c);
        std::copy(ch.begin(), ch.end(), gin.begin());
        detail::accumulate_adjoint(fb, c, gin.data(), H.data(), scratch.data());
    }
    RealBuffer r(d);
    fft.inverse_real(H.data(), r.data());
    std::vector<double> out(d);
    for (std::size_t t = 0; t < d; ++t) out[t] = r[t] / static_cast<double>(d);
    return out;
}

}  // namespace scatsep
