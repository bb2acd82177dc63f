#pragma once

// Threshold-and-template glitch remover used as a comparison baseline.
//
// Detection: block-average decimation, zero-phase Butterworth band-pass
// (second-order sections, forward-backward), first difference, threshold in
// robust standard deviations, greedy peak picking with a refractory window.
// Removal: least-squares fit of A * template(t - onset) + offset + trend on a
// local window, onset searched on a full-rate integer grid; only the template
// part is subtracted.
//
// The band-pass stands in for instrument-response deconvolution. Corner
// frequencies are fractions of the decimated Nyquist frequency, so the stage
// behaves the same for any nominal sample rate.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "scatsep/common.hpp"

namespace scatsep {

struct BaselineConfig {
    std::size_t decimation = 10;
    double band_low = 0.05;   // fraction of decimated Nyquist
    double band_high = 0.5;   // fraction of decimated Nyquist
    double threshold = 6.0;   // robust standard deviations of the derivative
    std::size_t refractory = 400;        // original samples
    std::size_t template_length = 512;   // original samples
    std::size_t fit_pre = 40;            // window samples before the onset
    std::size_t onset_search = 8;        // +/- grid after coarse localization
    double poor_fit_ratio = 0.5;         // residual / model norm above which a fit is flagged
    /// The robust scale is floored at this fraction of the largest derivative
    /// so that noiseless input still yields a finite threshold.
    double min_scale_fraction = 2e-3;

    void validate() const {
        if (decimation < 1) throw InvalidArgument("decimation factor must be >= 1");
        if (!(band_low > 0.0 && band_low < band_high && band_high < 1.0))
            throw InvalidArgument("band-pass corners must satisfy 0 < low < high < 1 (fraction of decimated Nyquist)");
        if (!(threshold > 0.0)) throw InvalidArgument("threshold must be positive");
        if (template_length < 8) throw InvalidArgument("template_length must be >= 8");
    }
};

struct GlitchDetection {
    std::size_t onset = 0;       // original sample index
    double peak = 0.0;           // derivative value at the detection
    double amplitude = 0.0;
    double offset = 0.0;
    double trend = 0.0;          // per sample, relative to the window centre
    double residual_norm = 0.0;
    bool fitted = false;
    bool poor_fit = false;
    bool skipped = false;        // singular fit
};

inline void write_detections_csv(const std::vector<GlitchDetection>& dets, std::ostream& os) {
    os << "onset,peak,amplitude,offset,trend,residual_norm,fitted,poor_fit,skipped\n";
    os.precision(17);
    for (const auto& g : dets)
        os << g.onset << ',' << g.peak << ',' << g.amplitude << ',' << g.offset << ',' << g.trend << ','
           << g.residual_norm << ',' << g.fitted << ',' << g.poor_fit << ',' << g.skipped << '\n';
}

namespace detail {

struct Biquad {
    double b0, b1, b2, a1, a2;

    void run(std::vector<double>& x) const {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : x) {
            double y = b0 * v + z1;
            z1 = b1 * v - a1 * y + z2;
            z2 = b2 * v - a2 * y;
            v = y;
        }
    }
};

/// Second-order Butterworth sections by the bilinear transform; fc in cycles
/// per sample.
inline Biquad butter_lowpass(double fc) {
    const double K = std::tan(std::numbers::pi * fc), s2 = std::numbers::sqrt2;
    const double norm = 1.0 / (1.0 + s2 * K + K * K);
    const double b0 = K * K * norm;
    return {b0, 2.0 * b0, b0, 2.0 * (K * K - 1.0) * norm, (1.0 - s2 * K + K * K) * norm};
}
inline Biquad butter_highpass(double fc) {
    const double K = std::tan(std::numbers::pi * fc), s2 = std::numbers::sqrt2;
    const double norm = 1.0 / (1.0 + s2 * K + K * K);
    return {norm, -2.0 * norm, norm, 2.0 * (K * K - 1.0) * norm, (1.0 - s2 * K + K * K) * norm};
}

struct BandPass {
    Biquad hp, lp;
    void causal(std::vector<double>& x) const {
        hp.run(x);
        lp.run(x);
    }
    /// Forward-backward pass over an odd-reflection padded copy.
    void zero_phase(std::vector<double>& x, std::size_t pad) const {
        const std::size_t n = x.size();
        pad = std::min(pad, n > 1 ? n - 1 : 0);
        std::vector<double> y(n + 2 * pad);
        for (std::size_t i = 0; i < pad; ++i) {
            y[pad - 1 - i] = 2.0 * x[0] - x[i + 1];
            y[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
        }
        std::copy(x.begin(), x.end(), y.begin() + static_cast<std::ptrdiff_t>(pad));
        causal(y);
        std::reverse(y.begin(), y.end());
        causal(y);
        std::reverse(y.begin(), y.end());
        std::copy(y.begin() + static_cast<std::ptrdiff_t>(pad), y.begin() + static_cast<std::ptrdiff_t>(pad + n),
                  x.begin());
    }
};

/// Corners in cycles per sample of a signal sampled `factor` times faster
/// than the decimated one.
inline BandPass make_band(const BaselineConfig& cfg, double factor) {
    const double nyq = 0.5 / factor;
    return {butter_highpass(cfg.band_low * nyq), butter_lowpass(cfg.band_high * nyq)};
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    return m;
}

}  // namespace detail

/// Unit step through the causal band-pass at the original rate.
inline std::vector<double> glitch_template(const BaselineConfig& cfg) {
    cfg.validate();
    std::vector<double> t(cfg.template_length, 1.0);
    detail::make_band(cfg, static_cast<double>(cfg.decimation)).causal(t);
    return t;
}

/// Band-passed first difference on the decimated grid (exposed for
/// diagnostics).
inline std::vector<double> detection_statistic(const Waveform& x, const BaselineConfig& cfg) {
    cfg.validate();
    const std::size_t D = cfg.decimation;
    if (x.size() % D != 0)
        throw InvalidArgument("decimation factor " + std::to_string(D) + " does not divide length " +
                              std::to_string(x.size()));
    const std::size_t m = x.size() / D;
    if (m < 3) throw InvalidArgument("signal too short for decimation factor " + std::to_string(D));
    std::vector<double> y(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < D; ++k) s += x.samples[i * D + k];
        y[i] = s / static_cast<double>(D);
    }
    // The band-pass rejects DC; removing the mean first keeps the start-up
    // transient of the high-pass section out of the statistic.
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(m);
    for (double& v : y) v -= mean;
    const auto band = detail::make_band(cfg, 1.0);
    const auto pad = static_cast<std::size_t>(std::ceil(6.0 / (cfg.band_low * 0.5)));
    band.zero_phase(y, pad);
    std::vector<double> dy(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) dy[i] = y[i + 1] - y[i];
    return dy;
}

inline std::vector<GlitchDetection> detect_glitches(const Waveform& x, const BaselineConfig& cfg = {}) {
    x.validate();
    const std::vector<double> dy = detection_statistic(x, cfg);
    const std::size_t D = cfg.decimation;

    std::vector<double> mag(dy.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < dy.size(); ++i) {
        mag[i] = std::abs(dy[i]);
        peak = std::max(peak, mag[i]);
    }
    const double med = detail::median(dy);
    std::vector<double> dev(dy.size());
    for (std::size_t i = 0; i < dy.size(); ++i) dev[i] = std::abs(dy[i] - med);
    const double scale = std::max(1.4826 * detail::median(dev), cfg.min_scale_fraction * peak);
    const double thr = cfg.threshold * scale;

    // local maxima above threshold, strongest first
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        if (!(mag[i] > thr)) continue;
        bool left = i == 0 || mag[i] >= mag[i - 1];
        bool right = i + 1 == mag.size() || mag[i] > mag[i + 1];
        if (left && right) cand.push_back(i);
    }
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });
    const double refr = static_cast<double>(cfg.refractory) / static_cast<double>(D);
    std::vector<std::size_t> kept;
    for (std::size_t i : cand) {
        bool clash = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return std::abs(static_cast<double>(i) - static_cast<double>(k)) < refr;
        });
        if (!clash) kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end());

    std::vector<GlitchDetection> out;
    for (std::size_t i : kept) {
        GlitchDetection g;
        g.onset = std::min((i + 1) * D, x.size() - 1);
        g.peak = dy[i];
        out.push_back(g);
    }
    return out;
}

struct DeglitchResult {
    Waveform deglitched;
    Waveform glitch_model;
    std::vector<GlitchDetection> detections;  // with fitted parameters
};

namespace detail {

struct LocalFit {
    double amplitude = 0, offset = 0, trend = 0, residual = 0, model_norm = 0;
    bool ok = false;
};

/// Least squares of y = A T + c + b (t - centre) over [lo, hi).
inline LocalFit fit_window(const std::vector<double>& x, const std::vector<double>& tmpl, std::size_t onset,
                           std::size_t lo, std::size_t hi) {
    LocalFit f;
    if (hi <= lo + 3) return f;
    const double centre = 0.5 * (static_cast<double>(lo) + static_cast<double>(hi - 1));
    std::array<std::array<double, 3>, 3> A{};
    std::array<double, 3> r{};
    for (std::size_t t = lo; t < hi; ++t) {
        const double T = t >= onset && t - onset < tmpl.size() ? tmpl[t - onset] : 0.0;
        const std::array<double, 3> phi{T, 1.0, static_cast<double>(t) - centre};
        for (int i = 0; i < 3; ++i) {
            r[i] += phi[i] * x[t];
            for (int j = 0; j < 3; ++j) A[i][j] += phi[i] * phi[j];
        }
    }
    // Gaussian elimination with partial pivoting
    std::array<int, 3> p{0, 1, 2};
    double scale = 0.0;
    for (auto& row : A)
        for (double v : row) scale = std::max(scale, std::abs(v));
    for (int c = 0; c < 3; ++c) {
        int best = c;
        for (int i = c + 1; i < 3; ++i)
            if (std::abs(A[p[i]][c]) > std::abs(A[p[best]][c])) best = i;
        std::swap(p[c], p[best]);
        if (std::abs(A[p[c]][c]) <= 1e-12 * scale) return f;
        for (int i = c + 1; i < 3; ++i) {
            double m = A[p[i]][c] / A[p[c]][c];
            for (int j = c; j < 3; ++j) A[p[i]][j] -= m * A[p[c]][j];
            r[p[i]] -= m * r[p[c]];
        }
    }
    std::array<double, 3> s{};
    for (int c = 2; c >= 0; --c) {
        double v = r[p[c]];
        for (int j = c + 1; j < 3; ++j) v -= A[p[c]][j] * s[j];
        s[c] = v / A[p[c]][c];
    }
    f.amplitude = s[0];
    f.offset = s[1];
    f.trend = s[2];
    double res = 0.0, mod = 0.0;
    for (std::size_t t = lo; t < hi; ++t) {
        const double T = t >= onset && t - onset < tmpl.size() ? tmpl[t - onset] : 0.0;
        const double g = f.amplitude * T;
        const double e = x[t] - g - f.offset - f.trend * (static_cast<double>(t) - centre);
        res += e * e;
        mod += g * g;
    }
    f.residual = std::sqrt(res);
    f.model_norm = std::sqrt(mod);
    f.ok = std::isfinite(f.amplitude);
    return f;
}

}  // namespace detail

/// Fits and subtracts the template part of each detection. The onset is first
/// localized on a full-rate grid spanning the decimation uncertainty plus the
/// template delay, then refined over +/- onset_search samples.
inline DeglitchResult fit_and_remove(const Waveform& x, const std::vector<GlitchDetection>& detections,
                                     const BaselineConfig& cfg = {}) {
    x.validate();
    const std::vector<double> tmpl = glitch_template(cfg);
    const std::size_t n = x.size(), D = cfg.decimation;

    // template delay: position of its steepest rise
    std::size_t delay = 0;
    double best_rise = -1.0;
    for (std::size_t t = 1; t < tmpl.size(); ++t)
        if (tmpl[t] - tmpl[t - 1] > best_rise) best_rise = tmpl[t] - tmpl[t - 1], delay = t;

    DeglitchResult out;
    std::vector<double> model(n, 0.0);
    for (GlitchDetection g : detections) {
        if (g.onset >= n) throw InvalidArgument("detection onset outside the signal");
        auto evaluate = [&](std::size_t onset) {
            const std::size_t lo = onset > cfg.fit_pre ? onset - cfg.fit_pre : 0;
            const std::size_t hi = std::min(n, onset + tmpl.size());
            return detail::fit_window(x.samples, tmpl, onset, lo, hi);
        };
        auto search = [&](std::size_t from, std::size_t to, std::size_t& best_onset) {
            detail::LocalFit best;
            double best_res = std::numeric_limits<double>::infinity();
            for (std::size_t o = from; o <= to; ++o) {
                auto f = evaluate(o);
                if (f.ok && f.residual < best_res) best_res = f.residual, best = f, best_onset = o;
            }
            return best;
        };
        const std::size_t reach = 2 * D + delay;
        std::size_t coarse = g.onset;
        search(g.onset > reach ? g.onset - reach : 0, std::min(n - 1, g.onset + 2 * D), coarse);
        std::size_t fine = coarse;
        auto fit = search(coarse > cfg.onset_search ? coarse - cfg.onset_search : 0,
                          std::min(n - 1, coarse + cfg.onset_search), fine);
        if (!fit.ok) {
            g.skipped = true;
            out.detections.push_back(g);
            continue;
        }
        g.onset = fine;
        g.amplitude = fit.amplitude;
        g.offset = fit.offset;
        g.trend = fit.trend;
        g.residual_norm = fit.residual;
        g.fitted = true;
        g.poor_fit = !(fit.residual <= cfg.poor_fit_ratio * fit.model_norm);
        for (std::size_t t = fine; t < std::min(n, fine + tmpl.size()); ++t) model[t] += g.amplitude * tmpl[t - fine];
        out.detections.push_back(g);
    }
    std::vector<double> clean(n);
    for (std::size_t t = 0; t < n; ++t) clean[t] = x.samples[t] - model[t];
    out.deglitched = Waveform(std::move(clean), x.sample_rate, x.label + "_deglitched");
    out.glitch_model = Waveform(std::move(model), x.sample_rate, x.label + "_glitch_model");
    return out;
}

}  // namespace scatsep
