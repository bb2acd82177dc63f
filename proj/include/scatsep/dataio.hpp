#pragma once

// Waveform files, windowing and snippet catalogs.
//
// Text format: optional leading "# key=value" lines (sample_rate, label), then
// one sample per line. Samples are written with 17 significant digits, which
// round-trips doubles exactly.
//
// Raw format: little-endian float32 samples, with a sidecar "<path>.json"
// holding {"sample_rate", "length", "dtype": "float32le", "label"}.
//
// Catalog manifest: JSON array of
//   {"path": str, "start": int, "length": int, "label"?: str,
//    "format"?: "text" | "raw", "detrend"?: "none" | "mean" | "linear"}
// with paths relative to the manifest's directory. Windows may overlap.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scatsep/common.hpp"

namespace scatsep {

enum class WaveformFormat { text, raw };
enum class Detrend { none, mean, linear };

inline WaveformFormat parse_waveform_format(std::string_view s) {
    if (s == "text") return WaveformFormat::text;
    if (s == "raw") return WaveformFormat::raw;
    throw InvalidArgument("unknown waveform format '" + std::string(s) + "' (expected text or raw)");
}

inline std::string_view to_string(WaveformFormat f) { return f == WaveformFormat::text ? "text" : "raw"; }

/// raw for .f32/.raw/.bin extensions, text otherwise.
inline WaveformFormat infer_format(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    if (ext == ".f32" || ext == ".raw" || ext == ".bin") return WaveformFormat::raw;
    return WaveformFormat::text;
}

inline Detrend parse_detrend(std::string_view s) {
    if (s == "none") return Detrend::none;
    if (s == "mean") return Detrend::mean;
    if (s == "linear") return Detrend::linear;
    throw InvalidArgument("unknown detrend mode '" + std::string(s) + "' (expected none, mean or linear)");
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) {
    return std::filesystem::path(p.string() + ".json");
}

namespace detail {

inline void require_finite(const std::vector<double>& v, const std::filesystem::path& path) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw IoError(path.string() + ": non-finite sample at index " + std::to_string(i));
}

inline std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline Waveform read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Waveform w;
    bool have_rate = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            std::string body = trim(t.substr(1));
            auto eq = body.find('=');
            if (eq == std::string::npos) continue;
            std::string key = trim(body.substr(0, eq)), val = trim(body.substr(eq + 1));
            if (key == "sample_rate") {
                char* end = nullptr;
                double r = std::strtod(val.c_str(), &end);
                if (end == val.c_str() || *end != '\0' || !(r > 0.0) || !std::isfinite(r))
                    throw IoError(path.string() + ":" + std::to_string(lineno) + ": invalid sample_rate '" + val + "'");
                w.sample_rate = r;
                have_rate = true;
            } else if (key == "label") {
                w.label = val;
            }
            continue;
        }
        char* end = nullptr;
        double v = std::strtod(t.c_str(), &end);
        if (end == t.c_str() || *end != '\0')
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed sample '" + t + "'");
        w.samples.push_back(v);
    }
    require_finite(w.samples, path);
    if (!have_rate) logging::warn(path.string() + ": no sample_rate header, assuming 1.0");
    if (w.label.empty()) w.label = path.stem().string();
    return w;
}

inline Waveform read_raw(const std::filesystem::path& path) {
    const auto side = sidecar_path(path);
    std::ifstream js(side);
    if (!js) throw IoError("missing sidecar metadata " + side.string());
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const std::exception& e) {
        throw IoError(side.string() + ": " + e.what());
    }
    const std::string dtype = meta.value("dtype", std::string("float32le"));
    if (dtype != "float32le") throw IoError(side.string() + ": unsupported dtype '" + dtype + "'");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 4 != 0) throw IoError(path.string() + ": size is not a multiple of 4 bytes");
    const std::size_t n = bytes.size() / 4;
    if (meta.contains("length") && meta["length"].get<std::size_t>() != n)
        throw IoError(path.string() + ": sidecar length " + std::to_string(meta["length"].get<std::size_t>()) +
                      " does not match " + std::to_string(n) + " samples on disk");

    Waveform w;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t u;
        std::memcpy(&u, bytes.data() + 4 * i, 4);
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
        w.samples[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    require_finite(w.samples, path);
    if (meta.contains("sample_rate")) {
        w.sample_rate = meta["sample_rate"].get<double>();
        if (!(w.sample_rate > 0.0)) throw IoError(side.string() + ": sample_rate must be positive");
    } else {
        logging::warn(side.string() + ": no sample_rate, assuming 1.0");
    }
    w.label = meta.value("label", path.stem().string());
    return w;
}

}  // namespace detail

inline Waveform read_waveform(const std::filesystem::path& path, WaveformFormat format) {
    return format == WaveformFormat::text ? detail::read_text(path) : detail::read_raw(path);
}
inline Waveform read_waveform(const std::filesystem::path& path) { return read_waveform(path, infer_format(path)); }

/// Raw output stores float32, so only float-representable samples round-trip.
inline void write_waveform(const Waveform& w, const std::filesystem::path& path, WaveformFormat format) {
    w.validate();
    if (format == WaveformFormat::text) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        out.precision(17);
        out << "# sample_rate=" << w.sample_rate << '\n';
        if (!w.label.empty()) out << "# label=" << w.label << '\n';
        for (double v : w.samples) out << v << '\n';
        if (!out) throw IoError("write failed for " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (double v : w.samples) {
        std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
        char b[4];
        std::memcpy(b, &u, 4);
        out.write(b, 4);
    }
    if (!out) throw IoError("write failed for " + path.string());
    nlohmann::json meta = {{"sample_rate", w.sample_rate}, {"length", w.size()}, {"dtype", "float32le"},
                           {"label", w.label}};
    std::ofstream side(sidecar_path(path));
    side << meta.dump(2) << '\n';
    if (!side) throw IoError("write failed for " + sidecar_path(path).string());
}
inline void write_waveform(const Waveform& w, const std::filesystem::path& path) {
    write_waveform(w, path, infer_format(path));
}

/// Copy of x[start, start + length) with its mean or least-squares line
/// removed. x is not modified.
inline Waveform window_and_detrend(const Waveform& x, std::size_t start, std::size_t length, Detrend detrend) {
    if (length == 0 || start > x.size() || length > x.size() - start)
        throw InvalidArgument("window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                              ") lies outside '" + x.label + "' of length " + std::to_string(x.size()));
    std::vector<double> w(x.samples.begin() + static_cast<std::ptrdiff_t>(start),
                          x.samples.begin() + static_cast<std::ptrdiff_t>(start + length));
    const double n = static_cast<double>(length);
    if (detrend != Detrend::none) {
        double mean = 0.0;
        for (double v : w) mean += v;
        mean /= n;
        double slope = 0.0;
        const double tc = 0.5 * (n - 1.0);
        if (detrend == Detrend::linear && length > 1) {
            double num = 0.0, den = 0.0;
            for (std::size_t t = 0; t < length; ++t) {
                double dt = static_cast<double>(t) - tc;
                num += dt * (w[t] - mean);
                den += dt * dt;
            }
            slope = num / den;
        }
        for (std::size_t t = 0; t < length; ++t) w[t] -= mean + slope * (static_cast<double>(t) - tc);
    }
    return Waveform(std::move(w), x.sample_rate, x.label + "@" + std::to_string(start));
}

struct CatalogEntry {
    std::filesystem::path path;  // resolved
    std::size_t start = 0;
    std::size_t length = 0;
    std::string label;
    WaveformFormat format = WaveformFormat::text;
    Detrend detrend = Detrend::linear;
};

struct SnippetCatalog {
    std::vector<CatalogEntry> entries;
    double sample_rate = 1.0;
    std::size_t d = 0;
};

/// Parses and validates a manifest without materializing windows beyond the
/// reads needed to check bounds and sample rates.
inline SnippetCatalog parse_catalog(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open snippet manifest " + manifest.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError(manifest.string() + ": " + e.what());
    }
    if (!j.is_array()) throw IoError(manifest.string() + ": manifest must be a JSON array");
    if (j.empty()) throw InvalidArgument(manifest.string() + ": manifest is empty (at least two snippets are required)");
    const auto base = manifest.parent_path();
    SnippetCatalog cat;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        const std::string where = manifest.string() + " entry " + std::to_string(i);
        if (!e.is_object() || !e.contains("path") || !e.contains("length"))
            throw IoError(where + ": needs at least 'path' and 'length'");
        CatalogEntry c;
        c.path = base / e["path"].get<std::string>();
        c.start = e.value("start", std::size_t{0});
        c.length = e["length"].get<std::size_t>();
        c.format = e.contains("format") ? parse_waveform_format(e["format"].get<std::string>()) : infer_format(c.path);
        c.detrend = parse_detrend(e.value("detrend", std::string("linear")));
        c.label = e.value("label", c.path.stem().string() + "@" + std::to_string(c.start));
        if (i == 0) cat.d = c.length;
        else if (c.length != cat.d)
            throw InvalidArgument(where + ": length " + std::to_string(c.length) + " differs from " + std::to_string(cat.d));
        cat.entries.push_back(std::move(c));
    }
    return cat;
}

inline std::vector<Waveform> materialize(const SnippetCatalog& cat) {
    std::map<std::filesystem::path, Waveform> cache;
    std::vector<Waveform> out;
    double rate = 0.0;
    for (const auto& e : cat.entries) {
        auto it = cache.find(e.path);
        if (it == cache.end()) it = cache.emplace(e.path, read_waveform(e.path, e.format)).first;
        const Waveform& src = it->second;
        if (rate == 0.0) rate = src.sample_rate;
        else if (src.sample_rate != rate)
            throw InvalidArgument("snippet source " + e.path.string() + " has sample rate " +
                                  std::to_string(src.sample_rate) + ", expected " + std::to_string(rate));
        Waveform w = window_and_detrend(src, e.start, e.length, e.detrend);
        w.label = e.label;
        out.push_back(std::move(w));
    }
    return out;
}

/// Reads the manifest and returns one detrended window per entry.
inline std::vector<Waveform> load_catalog(const std::filesystem::path& manifest) {
    return materialize(parse_catalog(manifest));
}

/// Writes a manifest with paths relative to the manifest's directory.
inline void write_catalog(const std::vector<CatalogEntry>& entries, const std::filesystem::path& manifest) {
    nlohmann::json j = nlohmann::json::array();
    const auto base = manifest.parent_path();
    for (const auto& e : entries) {
        std::string detrend = e.detrend == Detrend::none ? "none" : e.detrend == Detrend::mean ? "mean" : "linear";
        j.push_back({{"path", std::filesystem::relative(e.path, base.empty() ? "." : base).generic_string()},
                     {"start", e.start},
                     {"length", e.length},
                     {"label", e.label},
                     {"format", std::string(to_string(e.format))},
                     {"detrend", detrend}});
    }
    std::ofstream out(manifest);
    if (!out) throw IoError("cannot write " + manifest.string());
    out << j.dump(2) << '\n';
}

}  // namespace scatsep
