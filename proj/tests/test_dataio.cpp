#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "scatsep/dataio.hpp"

using namespace scatsep;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("scatsep_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(ReadWaveform, PlainText) {
    auto dir = scratch_dir("text");
    write_file(dir / "a.txt", "1.0\n2.0\n3.0\n");
    testing::internal::CaptureStderr();
    auto w = read_waveform(dir / "a.txt");
    testing::internal::GetCapturedStderr();
    EXPECT_EQ(w.size(), 3u);
    EXPECT_EQ(w.samples[2], 3.0);
    EXPECT_EQ(w.sample_rate, 1.0);
}

TEST(ReadWaveform, HeaderAndDuration) {
    auto dir = scratch_dir("rate");
    std::string s = "# sample_rate=20\n# label=VBB\n";
    for (int i = 0; i < 2048; ++i) s += "0.5\n";
    write_file(dir / "b.txt", s);
    auto w = read_waveform(dir / "b.txt");
    EXPECT_EQ(w.sample_rate, 20.0);
    EXPECT_EQ(w.label, "VBB");
    EXPECT_NEAR(w.duration(), 102.4, 1e-12);
}

TEST(ReadWaveform, RejectsMalformedAndNonFinite) {
    auto dir = scratch_dir("bad");
    write_file(dir / "m.txt", "1.0\nabc\n");
    EXPECT_THROW(read_waveform(dir / "m.txt"), IoError);
    write_file(dir / "n.txt", "# sample_rate=1\n1.0\nnan\n");
    try {
        read_waveform(dir / "n.txt");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
    }
    EXPECT_THROW(read_waveform(dir / "missing.txt"), IoError);
    write_file(dir / "r.f32", "abc");
    EXPECT_THROW(read_waveform(dir / "r.f32"), IoError);  // no sidecar
}

TEST(WriteWaveform, TextRoundTripIsExact) {
    auto dir = scratch_dir("rt_text");
    Waveform w(oracle::gaussian(1000, 3), 20.0, "x");
    w.samples[0] = 1e-300;
    w.samples[1] = -123456789.123456789;
    write_waveform(w, dir / "x.txt");
    auto r = read_waveform(dir / "x.txt");
    EXPECT_EQ(r.samples, w.samples);
    EXPECT_EQ(r.sample_rate, 20.0);
    EXPECT_EQ(r.label, "x");
}

TEST(WriteWaveform, RawRoundTripIsExact) {
    auto dir = scratch_dir("rt_raw");
    auto g = oracle::gaussian(1000, 4);
    Waveform w({}, 20.0, "raw");
    for (double v : g) w.samples.push_back(static_cast<float>(v));
    write_waveform(w, dir / "x.f32");
    EXPECT_TRUE(fs::exists(dir / "x.f32.json"));
    EXPECT_EQ(fs::file_size(dir / "x.f32"), 4000u);
    auto r = read_waveform(dir / "x.f32");
    EXPECT_EQ(r.samples, w.samples);
    EXPECT_EQ(r.sample_rate, 20.0);
    write_waveform(r, dir / "y.f32");
    EXPECT_EQ(read_waveform(dir / "y.f32").samples, w.samples);
}

TEST(Detrend, MeanOnConstant) {
    Waveform x(std::vector<double>(100, 4.25));
    auto w = window_and_detrend(x, 10, 50, Detrend::mean);
    for (double v : w.samples) EXPECT_EQ(v, 0.0);
}

TEST(Detrend, LinearOnRamp) {
    std::vector<double> r(300);
    for (std::size_t t = 0; t < r.size(); ++t) r[t] = 3.0 - 0.25 * t;
    Waveform x(r);
    auto w = window_and_detrend(x, 17, 256, Detrend::linear);
    for (double v : w.samples) EXPECT_LT(std::abs(v), 1e-10);
    EXPECT_EQ(x.samples, r);  // source untouched
}

TEST(Detrend, LinearKeepsSinusoidPower) {
    const std::size_t d = 2048;
    for (double period : {16.0, 50.0, 128.0}) {
        std::vector<double> s(d);
        for (std::size_t t = 0; t < d; ++t) s[t] = std::sin(2 * std::numbers::pi * t / period + 0.3);
        // oracle: residual of projecting onto span{1, t}
        double p0 = 0, p1 = 0;
        for (double v : s) p0 += v * v;
        auto w = window_and_detrend(Waveform(s), 0, d, Detrend::linear);
        for (double v : w.samples) p1 += v * v;
        EXPECT_NEAR(p1 / p0, 1.0, 0.01) << "period " << period;
    }
}

TEST(Detrend, OutOfRangeWindow) {
    Waveform x(std::vector<double>(100, 1.0));
    EXPECT_THROW(window_and_detrend(x, 60, 50, Detrend::none), InvalidArgument);
    EXPECT_THROW(window_and_detrend(x, 0, 0, Detrend::none), InvalidArgument);
}

TEST(Catalog, EmptyManifestIsAnError) {
    auto dir = scratch_dir("cat_empty");
    write_file(dir / "m.json", "[]");
    EXPECT_THROW(load_catalog(dir / "m.json"), InvalidArgument);
}

TEST(Catalog, FiftyWindowsOverOneFile) {
    auto dir = scratch_dir("cat50");
    Waveform src(oracle::gaussian(60000, 5), 20.0, "long");
    write_waveform(src, dir / "long.f32", WaveformFormat::raw);
    std::vector<CatalogEntry> entries;
    for (std::size_t k = 0; k < 50; ++k)
        entries.push_back({dir / "long.f32", k * 1000, 2048, "w" + std::to_string(k), WaveformFormat::raw, Detrend::linear});
    write_catalog(entries, dir / "m.json");
    auto snippets = load_catalog(dir / "m.json");
    ASSERT_EQ(snippets.size(), 50u);
    for (const auto& s : snippets) {
        EXPECT_EQ(s.size(), 2048u);
        EXPECT_EQ(s.sample_rate, 20.0);
    }
    // Windows overlap by 1048 samples: correlated but valid.
    double c = 0, a = 0, b = 0;
    for (std::size_t t = 0; t < 1048; ++t) {
        double u = snippets[0].samples[1000 + t], v = snippets[1].samples[t];
        c += u * v, a += u * u, b += v * v;
    }
    EXPECT_GT(c / std::sqrt(a * b), 0.99);
}

TEST(Catalog, InconsistentEntries) {
    auto dir = scratch_dir("cat_bad");
    Waveform a(oracle::gaussian(5000, 1), 20.0), b(oracle::gaussian(5000, 2), 10.0);
    write_waveform(a, dir / "a.txt");
    write_waveform(b, dir / "b.txt");
    write_file(dir / "len.json", R"([{"path":"a.txt","start":0,"length":2048},{"path":"a.txt","start":10,"length":1024}])");
    EXPECT_THROW(load_catalog(dir / "len.json"), InvalidArgument);
    write_file(dir / "rate.json", R"([{"path":"a.txt","start":0,"length":2048},{"path":"b.txt","start":0,"length":2048}])");
    EXPECT_THROW(load_catalog(dir / "rate.json"), InvalidArgument);
    write_file(dir / "range.json", R"([{"path":"a.txt","start":4000,"length":2048}])");
    EXPECT_THROW(load_catalog(dir / "range.json"), InvalidArgument);
    EXPECT_THROW(load_catalog(dir / "nope.json"), IoError);
}
