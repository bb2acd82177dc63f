#pragma once

// Experiment presets and the stylized MRW + glitch separation trial.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "scatsep/common.hpp"
#include "scatsep/scattering.hpp"
#include "scatsep/separation.hpp"
#include "scatsep/synth.hpp"
#include "scatsep/wavelet.hpp"

namespace scatsep {

struct Preset {
    std::string name;
    std::size_t d = 2048;
    int J = 8;
    int Q = 1;
    int iterations = 500;
    double sample_rate = 1.0;
};

inline Preset preset(std::string_view name) {
    if (name == "stylized") return {"stylized", 2048, 8, 1, 500, 1.0};
    if (name == "deglitch") return {"deglitch", 2048, 8, 1, 1000, 20.0};
    if (name == "quake") return {"quake", 4096, 8, 1, 200, 20.0};
    throw InvalidArgument("unknown preset '" + std::string(name) + "' (expected stylized, deglitch or quake)");
}

struct StylizedConfig {
    std::size_t d = 2048;
    int J = 8;
    int Q = 1;
    WaveletFamily family = WaveletFamily::battle_lemarie;
    int iterations = 500;
    double lambda2 = 0.04;
    double corr_scale = 512.0;
    GlitchParams glitches;  // d and seed are overwritten per trial
};

/// Realizations of one stylized trial. Seeds: background derive_seed(seed, 0),
/// glitches derive_seed(seed, 1), snippet k derive_seed(seed, 1000 + k), so a
/// trial with K snippets uses the first K snippets of any larger trial.
struct StylizedData {
    Waveform background;
    Waveform glitches;
    Waveform observation;
    std::vector<Waveform> snippets;
};

inline Waveform stylized_noise(const StylizedConfig& cfg, std::uint64_t seed, std::string label) {
    MrwParams p;
    p.d = cfg.d;
    p.lambda2 = cfg.lambda2;
    p.corr_scale = cfg.corr_scale;
    p.seed = seed;
    Waveform w = mrw_increments(p);
    w.label = std::move(label);
    return w;
}

inline StylizedData make_stylized_data(const StylizedConfig& cfg, std::size_t K, std::uint64_t seed,
                                       bool contaminated = true) {
    StylizedData out;
    out.background = stylized_noise(cfg, derive_seed(seed, 0), "background");
    GlitchParams g = cfg.glitches;
    g.d = cfg.d;
    g.seed = derive_seed(seed, 1);
    if (!contaminated) g.n_peaks = 0;
    out.glitches = glitch_train(g);
    out.observation = mix(out.glitches, out.background, 1.0);
    out.observation.label = "observation";
    for (std::size_t k = 0; k < K; ++k) {
        char label[32];
        std::snprintf(label, sizeof label, "snippet_%04zu", k);
        out.snippets.push_back(stylized_noise(cfg, derive_seed(seed, 1000 + k), label));
    }
    return out;
}

struct TrialOutcome {
    double snr_observation = 0.0;  // x as an estimate of the background
    double snr_background = 0.0;   // x - a1 s1_hat as an estimate of the background
    double source_energy_ratio = 0.0;  // ||s1_hat||^2 / ||x||^2
    double residual_glitch_correlation = 0.0;
    SeparationResult result;
    StylizedData data;

    double improvement() const noexcept { return snr_background - snr_observation; }
};

/// |<a, b>| / (||a|| ||b||), 0 when either is zero.
inline double normalized_correlation(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return aa > 0.0 && bb > 0.0 ? std::abs(ab) / std::sqrt(aa * bb) : 0.0;
}

inline TrialOutcome run_stylized_trial(const StylizedConfig& cfg, std::size_t K, std::uint64_t seed,
                                       bool contaminated = true, const IterationCallback& progress = {}) {
    TrialOutcome out;
    out.data = make_stylized_data(cfg, K, seed, contaminated);
    SolverConfig solver;
    solver.lbfgs.max_iterations = cfg.iterations;
    solver.seed = seed;
    SeparationProblem problem(out.data.observation, out.data.snippets, 1.0,
                              build_filter_bank(cfg.J, cfg.Q, cfg.d, cfg.family), solver);
    out.result = separate(problem, progress);

    const auto& x = out.data.observation.samples;
    const auto& n = out.data.background.samples;
    out.snr_observation = snr(out.data.observation, out.data.background);
    out.snr_background = snr(out.result.background_hat, out.data.background);
    out.source_energy_ratio = squared_norm(out.result.s1_hat.view()) / squared_norm(x);
    std::vector<double> err(cfg.d);
    for (std::size_t t = 0; t < cfg.d; ++t) err[t] = out.result.background_hat.samples[t] - n[t];
    out.residual_glitch_correlation = normalized_correlation(err, out.data.glitches.samples);
    return out;
}

/// Linearly interpolated percentile (q in [0, 100]) of a non-empty sample.
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw InvalidArgument("percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct TrendPoint {
    std::size_t K = 0;
    double mean = 0.0;
    double p05 = 0.0;
    double p95 = 0.0;
};

inline TrendPoint summarize(std::size_t K, const std::vector<double>& values) {
    return {K, mean(values), percentile(values, 5.0), percentile(values, 95.0)};
}

/// Per-row mean and standard deviation of dashboards computed on an ensemble
/// of realizations, separately for the real and imaginary parts.
struct DashboardBand {
    std::vector<DashboardRow> rows;  // value = ensemble mean
    std::vector<Complex> stddev;
    std::size_t members = 0;
};

inline DashboardBand dashboard_band(const std::vector<Waveform>& ensemble, const FilterBank& fb) {
    if (ensemble.size() < 2) throw InvalidArgument("dashboard band needs at least two realizations");
    std::vector<DashboardTable> tables;
    for (const auto& w : ensemble) tables.push_back(dashboard(scat_cov(w, fb)));
    DashboardBand band;
    band.members = tables.size();
    band.rows = tables.front().rows;
    band.stddev.assign(band.rows.size(), Complex{});
    const double K = static_cast<double>(tables.size());
    for (std::size_t r = 0; r < band.rows.size(); ++r) {
        double mr = 0, mi = 0;
        for (const auto& t : tables) mr += t.rows[r].value.real(), mi += t.rows[r].value.imag();
        mr /= K, mi /= K;
        double vr = 0, vi = 0;
        for (const auto& t : tables) {
            vr += (t.rows[r].value.real() - mr) * (t.rows[r].value.real() - mr);
            vi += (t.rows[r].value.imag() - mi) * (t.rows[r].value.imag() - mi);
        }
        band.rows[r].value = {mr, mi};
        band.stddev[r] = {std::sqrt(vr / (K - 1)), std::sqrt(vi / (K - 1))};
        for (const auto& t : tables) band.rows[r].present = band.rows[r].present && t.rows[r].present;
    }
    return band;
}

}  // namespace scatsep
