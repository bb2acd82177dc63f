#pragma once

// Command-line front end: separate, deglitch-baseline, synth, snr-experiment
// and dashboard. Every run writes only under --output and ends with one
// manifest.json listing the config echo, seeds, inputs, outputs and hashes.
//
// Exit codes: 0 success, 2 configuration or input error, 3 solver abort,
// 1 anything else.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scatsep/baseline.hpp"
#include "scatsep/common.hpp"
#include "scatsep/dataio.hpp"
#include "scatsep/experiment.hpp"
#include "scatsep/parallel.hpp"
#include "scatsep/scattering.hpp"
#include "scatsep/separation.hpp"
#include "scatsep/svg.hpp"
#include "scatsep/synth.hpp"
#include "scatsep/wavelet.hpp"

namespace scatsep::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
inline std::string fnv1a64(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

/// Collects artifacts of one run and writes the manifest last.
class Run {
public:
    Run(std::string subcommand, fs::path output, const std::vector<std::string>& argv)
        : output_(std::move(output)), t0_(std::chrono::steady_clock::now()) {
        if (output_.empty()) throw InvalidArgument("--output is required");
        std::error_code ec;
        fs::create_directories(output_, ec);
        if (ec) throw IoError("cannot create output directory " + output_.string() + ": " + ec.message());
        m_["tool"] = "scatsep";
        m_["version"] = kVersion;
        m_["subcommand"] = std::move(subcommand);
        m_["argv"] = argv;
        m_["config"] = json::object();
        m_["seeds"] = json::object();
        m_["inputs"] = json::array();
        m_["outputs"] = json::array();
        m_["result"] = json::object();
    }

    json& config() { return m_["config"]; }
    json& seeds() { return m_["seeds"]; }
    json& result() { return m_["result"]; }

    fs::path path(const std::string& name) const { return output_ / name; }

    void input(const fs::path& p) { m_["inputs"].push_back({{"path", p.string()}, {"fnv1a64", fnv1a64(p)}}); }

    /// Registers a file already written under the output directory.
    void output(const std::string& name) {
        const fs::path p = path(name);
        m_["outputs"].push_back({{"path", name}, {"bytes", fs::file_size(p)}, {"fnv1a64", fnv1a64(p)}});
    }

    void text(const std::string& name, const std::string& content) {
        std::ofstream out(path(name), std::ios::binary);
        if (!out) throw IoError("cannot write " + path(name).string());
        out << content;
        out.close();
        output(name);
    }

    /// Writes a waveform as name.txt or name.f32 (+ sidecar); returns the file name.
    std::string waveform(const std::string& stem, const Waveform& w, WaveformFormat format) {
        const std::string name = stem + (format == WaveformFormat::text ? ".txt" : ".f32");
        write_waveform(w, path(name), format);
        output(name);
        if (format == WaveformFormat::raw) output(name + ".json");
        return name;
    }

    void finish() {
        m_["timings"] = {{"total_seconds",
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count()}};
        std::ofstream out(path("manifest.json"));
        if (!out) throw IoError("cannot write " + path("manifest.json").string());
        out << m_.dump(2) << '\n';
    }

private:
    fs::path output_;
    std::chrono::steady_clock::time_point t0_;
    json m_;
};

inline std::vector<double> iota_vector(std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) * scale;
    return v;
}

/// Phi2 (power spectrum per scale) of an auto covariance, ordered by j.
inline std::vector<double> phi2_spectrum(const ScatCov& cov) {
    std::vector<double> out;
    for (std::size_t i = 0; i < cov.size(); ++i)
        if (cov.index[i].family == CoeffFamily::phi2) out.push_back(cov.values[i].real());
    return out;
}

// ---------------------------------------------------------------- separate

struct SeparateOptions {
    std::string observation;
    std::string snippets;
    std::string output;
    std::string preset = "stylized";
    int iters = 0;  // 0: preset budget
    double a1 = 1.0;
    int J = 0;      // 0: preset
    int Q = 0;
    std::string family = "battle_lemarie";
    std::string format = "text";
    std::uint64_t seed = 0;
    bool preset_given = false;
};

inline int cmd_separate(const SeparateOptions& o, const std::vector<std::string>& argv) {
    const Preset p = preset(o.preset);
    const WaveformFormat format = parse_waveform_format(o.format);
    const WaveletFamily family = parse_wavelet_family(o.family);
    if (o.iters < 0) throw InvalidArgument("--iters must be positive");
    if (!fs::exists(o.observation)) throw IoError("observation file not found: " + o.observation);
    if (!fs::exists(o.snippets)) throw IoError("snippet manifest not found: " + o.snippets);

    Waveform x = read_waveform(o.observation);
    if (x.label.empty()) x.label = "observation";
    std::vector<Waveform> snippets = load_catalog(o.snippets);
    if (o.preset_given && x.size() != p.d)
        throw InvalidArgument("preset '" + p.name + "' expects windows of " + std::to_string(p.d) +
                              " samples, observation has " + std::to_string(x.size()));
    const int J = o.J > 0 ? o.J : p.J, Q = o.Q > 0 ? o.Q : p.Q;
    const int iters = o.iters > 0 ? o.iters : p.iterations;

    Run run("separate", o.output, argv);
    run.input(o.observation);
    run.input(o.snippets);
    run.config() = {{"observation", o.observation}, {"snippets", o.snippets}, {"preset", p.name},
                    {"iters", iters}, {"a1", o.a1}, {"J", J}, {"Q", Q},
                    {"family", std::string(to_string(family))}, {"format", std::string(to_string(format))},
                    {"d", x.size()}, {"K", snippets.size()}};
    run.seeds()["solver"] = o.seed;

    SolverConfig solver;
    solver.lbfgs.max_iterations = iters;
    solver.seed = o.seed;
    SeparationProblem problem(x, snippets, o.a1, build_filter_bank(J, Q, x.size(), family), solver);
    run.config()["lbfgs"] = {{"history_size", solver.lbfgs.history_size}, {"c1", solver.lbfgs.c1},
                             {"c2", solver.lbfgs.c2}, {"gradient_tolerance", solver.lbfgs.gradient_tolerance}};
    SeparationResult res = separate(problem, [&](int it, std::span<const double>, double f, double g) {
        if (it % 50 == 0) logging::info("iteration " + std::to_string(it) + " loss " + std::to_string(f) +
                                        " |grad| " + std::to_string(g));
    });

    run.waveform("s1_hat", res.s1_hat, format);
    run.waveform("background_hat", res.background_hat, format);
    {
        std::ostringstream os;
        res.write_trace_csv(os);
        run.text("loss_trace.csv", os.str());
    }

    const std::size_t d = x.size();
    std::vector<double> removed(d);
    for (std::size_t t = 0; t < d; ++t) removed[t] = x.samples[t] - res.background_hat.samples[t];
    const auto time = iota_vector(d, 1.0 / x.sample_rate);
    svg::Panel wave{"Observation, background estimate and removed component", "time (s)", "amplitude", {}, {}, false};
    wave.series.push_back({"observation x", time, x.samples, "#999999"});
    wave.series.push_back({"background estimate", time, res.background_hat.samples, svg::palette(0)});
    wave.series.push_back({"removed a1 s1", time, removed, svg::palette(1)});

    const FilterBank& fb = problem.filter_bank();
    std::vector<double> spec_n(static_cast<std::size_t>(fb.channels()), 0.0);
    for (const auto& s : problem.snippets()) {
        auto ps = phi2_spectrum(scat_cov(s, fb));
        for (std::size_t j = 0; j < ps.size(); ++j) spec_n[j] += ps[j] / static_cast<double>(problem.K());
    }
    const auto scales = iota_vector(spec_n.size());
    std::vector<double> jx(scales.size());
    for (std::size_t j = 0; j < jx.size(); ++j) jx[j] = static_cast<double>(j + 1);
    svg::Panel spec{"Power spectrum per scale (phi2)", "scale j (last = low-pass)", "phi2", {}, {}, true};
    spec.series.push_back({"x", jx, phi2_spectrum(scat_cov(x, fb)), "#999999", true});
    spec.series.push_back({"snippet mean", jx, spec_n, svg::palette(2), true});
    spec.series.push_back({"x - a1 s1", jx, phi2_spectrum(scat_cov(res.background_hat, fb)), svg::palette(0), true});

    svg::Panel trace{"Loss trace", "iteration", "loss", {}, {}, true};
    std::vector<double> it, tot;
    for (const auto& r : res.loss_trace) it.push_back(r.iteration), tot.push_back(r.terms.total);
    trace.series.push_back({"total", it, tot, svg::palette(3)});
    run.text("overlay.svg", svg::render({wave, spec, trace}));

    const LossTerms& last = res.loss_trace.back().terms;
    run.result() = {{"iterations", res.iterations_used}, {"evaluations", res.evaluations},
                    {"termination_reason", std::string(to_string(res.termination_reason))},
                    {"seconds", res.seconds},
                    {"final_loss", {{"total", last.total}, {"prior", last.prior}, {"data", last.data},
                                    {"cross", last.cross}}},
                    {"variance_floors", problem.normalization().floored}};
    run.finish();
    logging::info("separation finished: " + std::string(to_string(res.termination_reason)));
    return 0;
}

// ------------------------------------------------------- deglitch-baseline

struct BaselineOptions {
    std::string input;
    std::string output;
    std::string format = "text";
    BaselineConfig cfg;
};

inline int cmd_deglitch_baseline(const BaselineOptions& o, const std::vector<std::string>& argv) {
    const WaveformFormat format = parse_waveform_format(o.format);
    o.cfg.validate();
    if (!fs::exists(o.input)) throw IoError("input file not found: " + o.input);
    Waveform x = read_waveform(o.input);
    Run run("deglitch-baseline", o.output, argv);
    run.input(o.input);
    const auto& c = o.cfg;
    run.config() = {{"input", o.input}, {"format", std::string(to_string(format))}, {"decimation", c.decimation},
                    {"band_low", c.band_low}, {"band_high", c.band_high}, {"threshold", c.threshold},
                    {"refractory", c.refractory}, {"template_length", c.template_length},
                    {"fit_pre", c.fit_pre}, {"onset_search", c.onset_search},
                    {"poor_fit_ratio", c.poor_fit_ratio}, {"min_scale_fraction", c.min_scale_fraction}};

    const auto dets = detect_glitches(x, c);
    DeglitchResult res = fit_and_remove(x, dets, c);
    run.waveform("deglitched", res.deglitched, format);
    run.waveform("glitch_model", res.glitch_model, format);
    {
        std::ostringstream os;
        write_detections_csv(res.detections, os);
        run.text("detections.csv", os.str());
    }
    const auto time = iota_vector(x.size(), 1.0 / x.sample_rate);
    svg::Panel wave{"Baseline deglitching", "time (s)", "amplitude", {}, {}, false};
    wave.series.push_back({"input", time, x.samples, "#999999"});
    wave.series.push_back({"deglitched", time, res.deglitched.samples, svg::palette(0)});
    wave.series.push_back({"glitch model", time, res.glitch_model.samples, svg::palette(1)});
    run.text("overlay.svg", svg::render({wave}));

    std::size_t poor = 0, skipped = 0;
    for (const auto& d : res.detections) poor += d.poor_fit, skipped += d.skipped;
    run.result() = {{"detections", res.detections.size()}, {"poor_fits", poor}, {"skipped", skipped}};
    run.finish();
    return 0;
}

// ------------------------------------------------------------------- synth

struct SynthOptions {
    std::string kind = "stylized";  // mrw | white | glitches | stylized
    std::string output;
    std::string format = "text";
    std::size_t d = 2048;
    std::uint64_t seed = 0;
    std::size_t snippets = 100;
    double sample_rate = 1.0;
    double lambda2 = 0.04;
    double corr_scale = 512.0;
    GlitchParams glitch;
    bool clean = false;  // stylized: observation without glitches
};

inline int cmd_synth(const SynthOptions& o, const std::vector<std::string>& argv) {
    const WaveformFormat format = parse_waveform_format(o.format);
    if (!(o.sample_rate > 0.0)) throw InvalidArgument("--sample-rate must be positive");
    GlitchParams g = o.glitch;
    g.d = o.d;
    g.seed = o.seed;
    g.validate();
    MrwParams m{o.d, o.lambda2, o.corr_scale, o.seed};
    m.validate();
    if (o.kind != "mrw" && o.kind != "white" && o.kind != "glitches" && o.kind != "stylized")
        throw InvalidArgument("unknown --kind '" + o.kind + "' (expected mrw, white, glitches or stylized)");

    Run run("synth", o.output, argv);
    run.config() = {{"kind", o.kind}, {"format", std::string(to_string(format))}, {"d", o.d},
                    {"sample_rate", o.sample_rate}, {"lambda2", o.lambda2}, {"corr_scale", o.corr_scale},
                    {"n_peaks", g.n_peaks}, {"amplitude_min", g.amplitude_min},
                    {"amplitude_max", g.amplitude_max}, {"left_decay", g.left_decay},
                    {"right_decay", g.right_decay}, {"min_separation", g.min_separation},
                    {"snippets", o.snippets}, {"clean", o.clean}};
    run.seeds()["seed"] = o.seed;
    auto rated = [&](Waveform w) {
        w.sample_rate = o.sample_rate;
        return w;
    };

    if (o.kind == "mrw") {
        run.waveform("mrw", rated(mrw_increments(m)), format);
    } else if (o.kind == "white") {
        run.waveform("white", rated(Waveform(white_noise(o.d, o.seed), 1.0, "white")), format);
    } else if (o.kind == "glitches") {
        run.waveform("glitches", rated(glitch_train(g)), format);
    } else {
        if (o.snippets < 2) throw InvalidArgument("--snippets must be >= 2");
        StylizedConfig cfg;
        cfg.d = o.d;
        cfg.lambda2 = o.lambda2;
        cfg.corr_scale = o.corr_scale;
        cfg.glitches = g;
        StylizedData data = make_stylized_data(cfg, o.snippets, o.seed, !o.clean);
        run.seeds()["background"] = derive_seed(o.seed, 0);
        run.seeds()["glitches"] = derive_seed(o.seed, 1);
        run.seeds()["snippet_rule"] = "derive_seed(seed, 1000 + k)";
        run.waveform("observation", rated(data.observation), format);
        run.waveform("background", rated(data.background), format);
        run.waveform("glitches", rated(data.glitches), format);
        std::vector<double> pool;
        for (const auto& s : data.snippets) pool.insert(pool.end(), s.samples.begin(), s.samples.end());
        const std::string pool_name = run.waveform("snippet_pool", rated(Waveform(pool, 1.0, "snippet_pool")), format);
        std::vector<CatalogEntry> entries;
        for (std::size_t k = 0; k < data.snippets.size(); ++k)
            entries.push_back({run.path(pool_name), k * o.d, o.d, data.snippets[k].label, format, Detrend::none});
        write_catalog(entries, run.path("snippets.json"));
        run.output("snippets.json");
    }
    run.finish();
    return 0;
}

// ---------------------------------------------------------- snr-experiment

struct SnrOptions {
    std::vector<std::size_t> k_values{4, 16, 64, 100};
    int trials = 10;
    std::uint64_t seed = 0;
    std::string output;
    int iters = 500;
    std::size_t d = 2048;
    int J = 8;
    int Q = 1;
    double lambda2 = 0.04;
    double corr_scale = 512.0;
    GlitchParams glitch;
};

struct SnrRow {
    std::size_t K = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    double snr_observation = 0, snr_background = 0, energy_ratio = 0, correlation = 0;
    int iterations = 0;
};

/// Runs every (K, trial) pair; trial t uses seed derive_seed(seed, t) for all
/// K, so the snippet sets are nested across K. Jobs run in parallel, each
/// solve single-threaded, and rows come back in (K, trial) order.
inline std::vector<SnrRow> snr_experiment(const SnrOptions& o, const StylizedConfig& cfg) {
    const std::size_t jobs = o.k_values.size() * static_cast<std::size_t>(o.trials);
    std::vector<SnrRow> rows(jobs);
    const unsigned workers = worker_count(jobs);
    const unsigned saved = max_threads().load();
    if (workers > 1) max_threads() = 1;
    try {
        parallel_for(jobs, workers, [&](std::size_t i, unsigned) {
            const std::size_t K = o.k_values[i / static_cast<std::size_t>(o.trials)];
            const int t = static_cast<int>(i % static_cast<std::size_t>(o.trials));
            const std::uint64_t s = derive_seed(o.seed, static_cast<std::uint64_t>(t));
            TrialOutcome r = run_stylized_trial(cfg, K, s);
            rows[i] = {K, t, s, r.snr_observation, r.snr_background, r.source_energy_ratio,
                       r.residual_glitch_correlation, r.result.iterations_used};
            logging::info("K=" + std::to_string(K) + " trial " + std::to_string(t) + ": SNR " +
                          std::to_string(r.snr_background) + " dB");
        });
    } catch (...) {
        max_threads() = saved;
        throw;
    }
    max_threads() = saved;
    return rows;
}

inline std::string snr_csv(const std::vector<SnrRow>& rows) {
    std::string out = "k,trial,seed,snr_observation,snr_background,improvement,source_energy_ratio,"
                      "residual_correlation,iterations\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.K, r.trial,
                      static_cast<unsigned long long>(r.seed), r.snr_observation, r.snr_background,
                      r.snr_background - r.snr_observation, r.energy_ratio, r.correlation, r.iterations);
        out += buf;
    }
    return out;
}

inline int cmd_snr_experiment(const SnrOptions& o, const std::vector<std::string>& argv) {
    if (o.k_values.empty()) throw InvalidArgument("--k-values must list at least one K");
    for (std::size_t K : o.k_values)
        if (K < 2) throw InvalidArgument("every K in --k-values must be >= 2");
    if (o.trials < 1) throw InvalidArgument("--trials must be >= 1");
    if (o.iters < 1) throw InvalidArgument("--iters must be >= 1");
    StylizedConfig cfg;
    cfg.d = o.d;
    cfg.J = o.J;
    cfg.Q = o.Q;
    cfg.iterations = o.iters;
    cfg.lambda2 = o.lambda2;
    cfg.corr_scale = o.corr_scale;
    cfg.glitches = o.glitch;
    build_filter_bank(cfg.J, cfg.Q, cfg.d, cfg.family);  // validates before any output is written
    MrwParams{cfg.d, cfg.lambda2, cfg.corr_scale, 0}.validate();
    GlitchParams gp = cfg.glitches;
    gp.d = cfg.d;
    gp.validate();

    Run run("snr-experiment", o.output, argv);
    run.config() = {{"k_values", o.k_values}, {"trials", o.trials}, {"iters", o.iters}, {"d", o.d},
                    {"J", o.J}, {"Q", o.Q}, {"lambda2", o.lambda2}, {"corr_scale", o.corr_scale},
                    {"n_peaks", gp.n_peaks}, {"amplitude_min", gp.amplitude_min},
                    {"amplitude_max", gp.amplitude_max}, {"left_decay", gp.left_decay},
                    {"right_decay", gp.right_decay}, {"min_separation", gp.min_separation}};
    run.seeds()["seed"] = o.seed;
    run.seeds()["trial_rule"] = "derive_seed(seed, trial)";

    const auto rows = snr_experiment(o, cfg);
    run.text("snr.csv", snr_csv(rows));

    svg::Panel panel{"Background SNR versus number of snippets", "K", "SNR (dB)", {}, {}, false};
    svg::Series mean_bg{"mean SNR of x - s1", {}, {}, svg::palette(0), true};
    svg::Series mean_x{"mean SNR of x", {}, {}, "#999999", true};
    svg::Band band{{}, {}, {}, svg::palette(0)};
    json summary = json::array();
    for (std::size_t K : o.k_values) {
        std::vector<double> bg, obs;
        for (const auto& r : rows)
            if (r.K == K) bg.push_back(r.snr_background), obs.push_back(r.snr_observation);
        const TrendPoint tp = summarize(K, bg);
        const double kx = static_cast<double>(K);
        mean_bg.x.push_back(kx), mean_bg.y.push_back(tp.mean);
        mean_x.x.push_back(kx), mean_x.y.push_back(mean(obs));
        band.x.push_back(kx), band.lo.push_back(tp.p05), band.hi.push_back(tp.p95);
        summary.push_back({{"k", K}, {"mean_snr", tp.mean}, {"p05", tp.p05}, {"p95", tp.p95}});
    }
    panel.series = {mean_bg, mean_x};
    panel.bands = {band};
    run.text("snr.svg", svg::render({panel}));
    run.result()["summary"] = summary;
    run.finish();
    return 0;
}

// --------------------------------------------------------------- dashboard

struct DashboardOptions {
    std::vector<std::string> inputs;
    std::string snippets;  // optional ensemble for Monte Carlo bands
    std::string output;
    int J = 8;
    int Q = 1;
    std::string family = "battle_lemarie";
};

inline std::vector<double> row_positions(const std::vector<DashboardRow>& rows, CoeffFamily f) {
    std::vector<double> x;
    for (const auto& r : rows)
        if (r.family == f) x.push_back(static_cast<double>(x.size() + 1));
    return x;
}

inline std::vector<double> row_values(const std::vector<DashboardRow>& rows, CoeffFamily f, bool imag,
                                      bool modulus = false) {
    std::vector<double> y;
    for (const auto& r : rows)
        if (r.family == f) {
            const double v = modulus ? std::abs(r.value) : imag ? r.value.imag() : r.value.real();
            y.push_back(r.present ? v : std::nan(""));
        }
    return y;
}

inline int cmd_dashboard(const DashboardOptions& o, const std::vector<std::string>& argv) {
    if (o.inputs.empty()) throw InvalidArgument("--input needs at least one file");
    const WaveletFamily family = parse_wavelet_family(o.family);
    std::vector<Waveform> waves;
    for (const auto& p : o.inputs) {
        if (!fs::exists(p)) throw IoError("input file not found: " + p);
        waves.push_back(read_waveform(p));
        if (waves.back().size() != waves.front().size())
            throw InvalidArgument("incompatible lengths: " + p + " has " + std::to_string(waves.back().size()) +
                                  " samples, " + o.inputs.front() + " has " + std::to_string(waves.front().size()));
    }
    std::vector<Waveform> ensemble;
    if (!o.snippets.empty()) {
        if (!fs::exists(o.snippets)) throw IoError("snippet manifest not found: " + o.snippets);
        ensemble = load_catalog(o.snippets);
        if (ensemble.front().size() != waves.front().size())
            throw InvalidArgument("snippet length " + std::to_string(ensemble.front().size()) +
                                  " differs from input length " + std::to_string(waves.front().size()));
    }
    const FilterBank fb = build_filter_bank(o.J, o.Q, waves.front().size(), family);

    Run run("dashboard", o.output, argv);
    for (const auto& p : o.inputs) run.input(p);
    if (!o.snippets.empty()) run.input(o.snippets);
    run.config() = {{"inputs", o.inputs}, {"snippets", o.snippets}, {"J", o.J}, {"Q", o.Q},
                    {"family", std::string(to_string(family))}, {"d", waves.front().size()}};

    struct Labeled {
        std::string name;
        std::vector<DashboardRow> rows;
    };
    std::vector<Labeled> tables;
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < waves.size(); ++i) {
        std::string stem = fs::path(o.inputs[i]).stem().string();
        if (seen[stem]++ > 0) stem += "_" + std::to_string(i);
        DashboardTable t = dashboard(scat_cov(waves[i], fb));
        std::ostringstream os;
        t.write_csv(os);
        run.text("dashboard_" + stem + ".csv", os.str());
        tables.push_back({stem, t.rows});
    }

    std::optional<DashboardBand> band;
    if (!ensemble.empty()) {
        band = dashboard_band(ensemble, fb);
        std::ostringstream os;
        os << "family,j,a,b,mean_real,mean_imag,std_real,std_imag\n";
        os.precision(17);
        for (std::size_t r = 0; r < band->rows.size(); ++r) {
            const auto& row = band->rows[r];
            os << to_string(row.family) << ',' << row.j << ',' << row.a << ',' << row.b << ',' << row.value.real()
               << ',' << row.value.imag() << ',' << band->stddev[r].real() << ',' << band->stddev[r].imag() << '\n';
        }
        run.text("dashboard_ensemble.csv", os.str());
    }

    struct FamilyPanel {
        CoeffFamily f;
        const char* title;
        const char* xlabel;
        bool imag;
        bool log;
    };
    const FamilyPanel specs[] = {
        {CoeffFamily::phi1, "phi1: sparsity E|Wx| / sqrt(E|Wx|^2)", "scale j", false, false},
        {CoeffFamily::phi2, "phi2: relative power spectrum", "scale j", false, true},
        {CoeffFamily::phi3, "phi3 real part: envelope correlation", "scale gap a", false, false},
        {CoeffFamily::phi3, "phi3 imaginary part: time asymmetry", "scale gap a", true, false},
        {CoeffFamily::phi4, "phi4 real part: cross-scale envelope dependence", "entry (a, b)", false, false},
    };
    std::vector<svg::Panel> panels;
    for (const auto& s : specs) {
        svg::Panel p{s.title, s.xlabel, "", {}, {}, s.log};
        if (band) {
            auto x = row_positions(band->rows, s.f);
            std::vector<double> lo, hi;
            for (std::size_t r = 0; r < band->rows.size(); ++r)
                if (band->rows[r].family == s.f) {
                    const double m = s.imag ? band->rows[r].value.imag() : band->rows[r].value.real();
                    const double sd = s.imag ? band->stddev[r].imag() : band->stddev[r].real();
                    lo.push_back(s.log ? std::max(m - 2 * sd, 1e-300) : m - 2 * sd);
                    hi.push_back(m + 2 * sd);
                }
            p.bands.push_back({x, lo, hi, "#7f7f7f"});
        }
        for (std::size_t i = 0; i < tables.size(); ++i)
            p.series.push_back({tables[i].name, row_positions(tables[i].rows, s.f),
                                row_values(tables[i].rows, s.f, s.imag), svg::palette(i), true});
        panels.push_back(std::move(p));
    }
    run.text("dashboard.svg", svg::render(panels));
    run.finish();
    return 0;
}

// -------------------------------------------------------------------- main

inline int run(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Source separation in wavelet scattering covariance space"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

    SeparateOptions so;
    auto* sep = app.add_subcommand("separate", "Separate an observation given clean snippets");
    sep->add_option("--observation", so.observation, "Observation waveform file")->required();
    sep->add_option("--snippets", so.snippets, "Snippet catalog manifest (JSON)")->required();
    sep->add_option("--output", so.output, "Output directory")->required();
    sep->add_option("--iters", so.iters, "L-BFGS iterations (default: preset budget)");
    sep->add_option("--a1", so.a1, "Mixing coefficient of the unknown source");
    auto* preset_opt = sep->add_option("--preset", so.preset, "stylized | deglitch | quake");
    sep->add_option("--J", so.J, "Octaves (default: preset)");
    sep->add_option("--Q", so.Q, "Wavelets per octave (default: preset)");
    sep->add_option("--family", so.family, "battle_lemarie | morlet_renormalized");
    sep->add_option("--format", so.format, "Output waveform format: text | raw");
    sep->add_option("--seed", so.seed, "Recorded solver seed");

    BaselineOptions bo;
    auto* base = app.add_subcommand("deglitch-baseline", "Threshold-and-template reference deglitcher");
    base->add_option("--input", bo.input, "Input waveform")->required();
    base->add_option("--output", bo.output, "Output directory")->required();
    base->add_option("--format", bo.format, "Output waveform format: text | raw");
    base->add_option("--decimation", bo.cfg.decimation);
    base->add_option("--band-low", bo.cfg.band_low, "Low corner, fraction of decimated Nyquist");
    base->add_option("--band-high", bo.cfg.band_high, "High corner, fraction of decimated Nyquist");
    base->add_option("--threshold", bo.cfg.threshold, "Robust standard deviations");
    base->add_option("--refractory", bo.cfg.refractory, "Suppression window (samples)");
    base->add_option("--template-length", bo.cfg.template_length);
    base->add_option("--fit-pre", bo.cfg.fit_pre);
    base->add_option("--onset-search", bo.cfg.onset_search);
    base->add_option("--poor-fit-ratio", bo.cfg.poor_fit_ratio);

    SynthOptions yo;
    auto* syn = app.add_subcommand("synth", "Generate synthetic waveforms");
    syn->add_option("--kind", yo.kind, "mrw | white | glitches | stylized");
    syn->add_option("--output", yo.output, "Output directory")->required();
    syn->add_option("--format", yo.format, "text | raw");
    syn->add_option("--d", yo.d, "Samples per waveform");
    syn->add_option("--seed", yo.seed);
    syn->add_option("--snippets", yo.snippets, "Snippet count for --kind stylized");
    syn->add_option("--sample-rate", yo.sample_rate);
    syn->add_option("--lambda2", yo.lambda2, "MRW intermittency");
    syn->add_option("--corr-scale", yo.corr_scale, "MRW integral scale (samples)");
    syn->add_option("--n-peaks", yo.glitch.n_peaks);
    syn->add_option("--amp-min", yo.glitch.amplitude_min);
    syn->add_option("--amp-max", yo.glitch.amplitude_max);
    syn->add_option("--left-decay", yo.glitch.left_decay);
    syn->add_option("--right-decay", yo.glitch.right_decay);
    syn->add_option("--min-separation", yo.glitch.min_separation);
    syn->add_flag("--clean", yo.clean, "Stylized observation without glitches");

    SnrOptions no;
    auto* snr_cmd = app.add_subcommand("snr-experiment", "Background SNR versus snippet count");
    snr_cmd->add_option("--k-values", no.k_values, "Comma-separated snippet counts")->delimiter(',');
    snr_cmd->add_option("--trials", no.trials);
    snr_cmd->add_option("--seed", no.seed);
    snr_cmd->add_option("--output", no.output, "Output directory")->required();
    snr_cmd->add_option("--iters", no.iters);
    snr_cmd->add_option("--d", no.d);
    snr_cmd->add_option("--J", no.J);
    snr_cmd->add_option("--Q", no.Q);
    snr_cmd->add_option("--lambda2", no.lambda2);
    snr_cmd->add_option("--corr-scale", no.corr_scale);
    snr_cmd->add_option("--n-peaks", no.glitch.n_peaks);
    snr_cmd->add_option("--amp-min", no.glitch.amplitude_min);
    snr_cmd->add_option("--amp-max", no.glitch.amplitude_max);

    DashboardOptions dopt;
    auto* dash = app.add_subcommand("dashboard", "Normalized scattering covariance dashboards");
    dash->add_option("--input", dopt.inputs, "Waveform files to overlay")->required();
    dash->add_option("--snippets", dopt.snippets, "Optional snippet manifest for Monte Carlo bands");
    dash->add_option("--output", dopt.output, "Output directory")->required();
    dash->add_option("--J", dopt.J);
    dash->add_option("--Q", dopt.Q);
    dash->add_option("--family", dopt.family);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        max_threads() = threads;
        so.preset_given = preset_opt->count() > 0;
        if (*sep) return cmd_separate(so, args);
        if (*base) return cmd_deglitch_baseline(bo, args);
        if (*syn) return cmd_synth(yo, args);
        if (*snr_cmd) return cmd_snr_experiment(no, args);
        if (*dash) return cmd_dashboard(dopt, args);
    } catch (const NumericalError& e) {
        std::cerr << "scatsep: solver aborted: " << e.what() << '\n';
        return 3;
    } catch (const InvalidArgument& e) {
        std::cerr << "scatsep: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "scatsep: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "scatsep: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace scatsep::cli
