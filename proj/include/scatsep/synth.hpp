#pragma once

// Synthetic signals: multifractal random walk increments, one-sided glitch
// trains, and linear mixtures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "scatsep/common.hpp"
#include "scatsep/fft.hpp"

namespace scatsep {

/// splitmix64 finalizer applied to seed + (index + 1) * golden gamma. Used to
/// derive independent per-realization seeds from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct MrwParams {
    std::size_t d = 2048;
    double lambda2 = 0.04;
    double corr_scale = 512.0;  // T_c in samples
    std::uint64_t seed = 0;

    void validate() const {
        if (d < 2) throw InvalidArgument("MRW length must be >= 2");
        if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw InvalidArgument("lambda2 must be >= 0");
        if (!(corr_scale > 1.0) || corr_scale > static_cast<double>(d))
            throw InvalidArgument("corr_scale must lie in (1, d]");
    }
};

inline std::vector<double> white_noise(std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> x(d);
    for (auto& v : x) v = normal(rng);
    return x;
}

/// eps_t exp(omega_t - lambda2 ln T_c): eps is unit white noise, omega a
/// Gaussian field with covariance lambda2 max(ln(T_c / (|tau| + 1)), 0),
/// sampled exactly by circulant embedding on 2d points. Unit variance in
/// expectation.
inline Waveform mrw_increments(const MrwParams& p) {
    p.validate();
    std::vector<double> x = white_noise(p.d, derive_seed(p.seed, 0));
    if (p.lambda2 == 0.0) return Waveform(std::move(x), 1.0, "mrw");

    const std::size_t m = 2 * p.d;
    const Fft& fft = Fft::get(m);
    ComplexBuffer c(m), ev(m);
    for (std::size_t i = 0; i < m; ++i) {
        double tau = static_cast<double>(std::min(i, m - i));
        c[i] = p.lambda2 * std::max(std::log(p.corr_scale / (tau + 1.0)), 0.0);
    }
    fft.forward(c.data(), ev.data());
    double emax = 0.0, emin = 0.0;
    for (const auto& e : ev) {
        emax = std::max(emax, e.real());
        emin = std::min(emin, e.real());
    }
    if (emin < -1e-10 * emax)
        logging::warn("MRW circulant embedding is not positive definite; clipping negative eigenvalues");

    std::mt19937_64 rng(derive_seed(p.seed, 1));
    std::normal_distribution<double> normal;
    ComplexBuffer z(m), w(m);
    for (std::size_t k = 0; k < m; ++k) {
        double re = normal(rng), im = normal(rng);
        z[k] = std::sqrt(std::max(ev[k].real(), 0.0) / static_cast<double>(m)) * Complex(re, im);
    }
    fft.forward(z.data(), w.data());
    const double shift = c[0].real();
    for (std::size_t t = 0; t < p.d; ++t) x[t] *= std::exp(w[t].real() - shift);
    return Waveform(std::move(x), 1.0, "mrw");
}

struct GlitchParams {
    std::size_t d = 2048;
    int n_peaks = 4;
    double amplitude_min = 6.0;
    double amplitude_max = 12.0;
    double left_decay = 4.0;    // samples
    double right_decay = 40.0;  // samples
    std::size_t min_separation = 200;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_peaks < 0) throw InvalidArgument("n_peaks must be >= 0");
        if (!(left_decay > 0.0) || !(right_decay > 0.0)) throw InvalidArgument("glitch decays must be positive");
        if (!(amplitude_min <= amplitude_max)) throw InvalidArgument("amplitude range is empty");
        if (d == 0) throw InvalidArgument("glitch train length must be positive");
    }
};

/// Onset positions for the train, uniform with pairwise distance >=
/// min_separation (rejection sampling with restarts).
inline std::vector<std::size_t> glitch_positions(const GlitchParams& p, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(p.n_peaks);
    if (n > 1 && (n - 1) * p.min_separation >= p.d)
        throw InvalidArgument("cannot place " + std::to_string(n) + " peaks " + std::to_string(p.min_separation) +
                              " samples apart in " + std::to_string(p.d) + " samples");
    std::uniform_int_distribution<std::size_t> pos(0, p.d - 1);
    for (int restart = 0; restart < 1000; ++restart) {
        std::vector<std::size_t> out;
        for (int attempt = 0; attempt < 10000 && out.size() < n; ++attempt) {
            std::size_t t = pos(rng);
            bool ok = std::all_of(out.begin(), out.end(), [&](std::size_t q) {
                return (t > q ? t - q : q - t) >= p.min_separation;
            });
            if (ok) out.push_back(t);
        }
        if (out.size() == n) return out;
    }
    throw InvalidArgument("cannot place " + std::to_string(n) + " peaks with the requested separation");
}

/// Sum of A exp(-(t0 - t)/left_decay) for t < t0 and A exp(-(t - t0)/right_decay)
/// for t >= t0, one term per peak.
inline Waveform glitch_train(const GlitchParams& p) {
    p.validate();
    std::vector<double> x(p.d, 0.0);
    std::mt19937_64 rng(p.seed);
    std::vector<std::size_t> onsets = glitch_positions(p, rng);
    std::uniform_real_distribution<double> amp(p.amplitude_min, p.amplitude_max);
    for (std::size_t t0 : onsets) {
        const double A = amp(rng);
        for (std::size_t t = 0; t < p.d; ++t) {
            double v = t < t0 ? A * std::exp(-static_cast<double>(t0 - t) / p.left_decay)
                              : A * std::exp(-static_cast<double>(t - t0) / p.right_decay);
            x[t] += v;
        }
    }
    return Waveform(std::move(x), 1.0, "glitches");
}

/// x = a1 s1 + n.
inline Waveform mix(const Waveform& s1, const Waveform& n, double a1) {
    if (s1.size() != n.size())
        throw InvalidArgument("mix: lengths differ (" + std::to_string(s1.size()) + " vs " + std::to_string(n.size()) + ")");
    std::vector<double> x(n.size());
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = a1 * s1.samples[t] + n.samples[t];
    return Waveform(std::move(x), n.sample_rate, "mixture");
}

}  // namespace scatsep
