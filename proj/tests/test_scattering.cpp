#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "scatsep/scattering.hpp"
#include "scatsep/synth.hpp"

using namespace scatsep;

namespace {

std::size_t closed_form_count(std::size_t J) { return 2 * (J + 1) + J * (J + 1) / 2 + J * (J + 1) * (J + 2) / 6; }

Waveform white(std::size_t d, std::uint64_t seed) { return Waveform(oracle::gaussian(d, seed), 1.0, "w"); }

Waveform mrw(std::size_t d, std::uint64_t seed) {
    MrwParams p;
    p.d = d;
    p.corr_scale = static_cast<double>(d) / 4;
    p.seed = seed;
    return mrw_increments(p);
}

}  // namespace

TEST(CoeffLayout, DimensionAtPaperConfiguration) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto cov = scat_cov(white(2048, 1), fb);
    EXPECT_EQ(cov.size(), 174u);
    CoeffLayout layout(8, false);
    EXPECT_EQ(layout.count(CoeffFamily::phi1), 9u);
    EXPECT_EQ(layout.count(CoeffFamily::phi2), 9u);
    EXPECT_EQ(layout.count(CoeffFamily::phi3), 36u);
    EXPECT_EQ(layout.count(CoeffFamily::phi4), 120u);
    EXPECT_LT(static_cast<double>(cov.size()), std::pow(std::log2(2048.0), 3));
}

TEST(CoeffLayout, ClosedFormCountsForAllJ) {
    for (std::size_t J = 1; J <= 10; ++J) {
        CoeffLayout a(J, false), c(J, true);
        EXPECT_EQ(a.size(), closed_form_count(J));
        EXPECT_EQ(c.size(), closed_form_count(J) - (J + 1));
        EXPECT_EQ(a.count(CoeffFamily::phi3), J * (J + 1) / 2);
        EXPECT_EQ(a.count(CoeffFamily::phi4), J * (J + 1) * (J + 2) / 6);
    }
}

TEST(CoeffLayout, IndexRanges) {
    CoeffLayout layout(8, false);
    for (const auto& c : layout.entries()) {
        if (c.family == CoeffFamily::phi3) {
            EXPECT_GT(c.a, 0);
            EXPECT_GE(c.j - c.a, 1);
        }
        if (c.family == CoeffFamily::phi4) {
            EXPECT_GE(c.a, 0);
            EXPECT_LT(c.b, 0);
            EXPECT_GE(c.j - c.a, 1);
            EXPECT_LE(c.j - c.b, 9);
        }
    }
}

TEST(ScatCov, ZeroInputGivesZeroCoefficients) {
    auto fb = build_filter_bank(6, 1, 512, WaveletFamily::battle_lemarie);
    auto cov = scat_cov(std::vector<double>(512, 0.0), fb);
    for (auto v : cov.values) EXPECT_EQ(std::abs(v), 0.0);
    auto table = dashboard(cov);
    for (const auto& r : table.rows) EXPECT_FALSE(r.present);
}

TEST(ScatCov, RealFlaggedCoefficientsHaveNoImaginaryPart) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto cov = scat_cov(mrw(2048, 4), fb);
    for (std::size_t i = 0; i < cov.size(); ++i)
        if (!cov.index[i].complex_flag) EXPECT_LT(std::abs(cov.values[i].imag()), 1e-12) << i;
}

TEST(ScatCov, Phi2IsMeanPowerOfLayerOne) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto x = mrw(2048, 9);
    auto cov = scat_cov(x, fb);
    auto W = wavelet_transform(x, fb);
    for (int j = 1; j <= 9; ++j) {
        double p = 0.0;
        for (auto z : W.channel(static_cast<std::size_t>(j - 1))) p += std::norm(z);
        p /= 2048;
        EXPECT_NEAR(cov.values[cov.find(CoeffFamily::phi2, j)].real(), p, 1e-12 * p);
    }
}

TEST(ScatCov, MatchesDefinitionsFromDirectConvolution) {
    // Phi3 and Phi4 over band-pass channels do not depend on whether the
    // envelope is centred, so the plain definitions serve as the oracle.
    auto fb = build_filter_bank(4, 1, 128, WaveletFamily::battle_lemarie);
    auto x = mrw(128, 2).samples;
    auto cov = scat_cov(x, fb);
    const std::size_t d = 128, n = 5;
    std::vector<std::vector<oracle::C>> h(n), U(n);
    std::vector<std::vector<double>> M(n);
    for (std::size_t c = 0; c < n; ++c) {
        h[c] = oracle::impulse_response(fb.response(c));
        U[c] = oracle::circular_convolution(x, h[c]);
        for (auto z : U[c]) M[c].push_back(std::abs(z));
    }
    auto ave = [&](auto f) {
        oracle::C s{};
        for (std::size_t t = 0; t < d; ++t) s += f(t);
        return s / static_cast<double>(d);
    };
    for (int j = 1; j <= 5; ++j) {
        auto u = U[j - 1];
        EXPECT_NEAR(cov.values[cov.find(CoeffFamily::phi1, j)].real(),
                    ave([&](std::size_t t) { return oracle::C(std::abs(u[t])); }).real(), 1e-12);
    }
    for (int j = 2; j <= 4; ++j)
        for (int a = 1; a < j; ++a) {
            auto ref = ave([&](std::size_t t) { return U[j - 1][t] * M[j - a - 1][t]; });
            EXPECT_LT(std::abs(cov.values[cov.find(CoeffFamily::phi3, j, a)] - ref), 1e-12 * (1 + std::abs(ref)));
        }
    for (int j = 1; j <= 3; ++j)
        for (int a = 0; a < j; ++a)
            for (int k = j + 1; k <= 4; ++k) {
                auto V1 = oracle::circular_convolution(M[j - 1], h[k - 1]);
                auto V2 = oracle::circular_convolution(M[j - a - 1], h[k - 1]);
                auto ref = ave([&](std::size_t t) { return V1[t] * std::conj(V2[t]); });
                auto got = cov.values[cov.find(CoeffFamily::phi4, j, a, j - k)];
                EXPECT_LT(std::abs(got - ref), 1e-10 * (1 + std::abs(ref))) << j << ' ' << a << ' ' << k;
            }
}

TEST(ScatCov, ShiftInvariance) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto x = mrw(2048, 3).samples;
    std::vector<double> y(2048);
    for (std::size_t t = 0; t < 2048; ++t) y[(t + 517) % 2048] = x[t];
    auto a = scat_cov(x, fb), b = scat_cov(y, fb);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_LT(std::abs(a.values[i] - b.values[i]), 1e-10 * (std::abs(a.values[i]) + 1e-3));
}

TEST(ScatCov, ScalingBehaviour) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto x = mrw(2048, 5).samples;
    auto a = scat_cov(x, fb);
    auto da = dashboard(a);
    for (double alpha : {3.0, -3.0, 0.25}) {
        std::vector<double> y(x);
        for (auto& v : y) v *= alpha;
        auto b = scat_cov(y, fb);
        for (std::size_t i = 0; i < a.size(); ++i) {
            // phi3 carries one signed factor and one modulus: odd in x.
            const auto fam = a.index[i].family;
            const double f = fam == CoeffFamily::phi1   ? std::abs(alpha)
                             : fam == CoeffFamily::phi3 ? alpha * std::abs(alpha)
                                                        : alpha * alpha;
            EXPECT_LT(std::abs(b.values[i] - f * a.values[i]), 1e-10 * std::abs(f * a.values[i]) + 1e-14);
        }
        auto db = dashboard(b);
        ASSERT_EQ(da.rows.size(), db.rows.size());
        for (std::size_t r = 0; r < da.rows.size(); ++r) {
            const double sign = alpha < 0 && da.rows[r].family == CoeffFamily::phi3 ? -1.0 : 1.0;
            EXPECT_LT(std::abs(sign * da.rows[r].value - db.rows[r].value), 1e-10) << "alpha " << alpha;
        }
    }
}

TEST(ScatteringTransform, LayerTwoPairs) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto s = scattering_transform(white(2048, 1), fb);
    EXPECT_EQ(s.pairs.size(), 36u);
    int bandpass = 0, lowpass = 0;
    for (auto [j1, j2] : s.pairs) {
        EXPECT_LT(j1, j2);
        (j2 == 9 ? lowpass : bandpass)++;
    }
    EXPECT_EQ(bandpass, 28);
    EXPECT_EQ(lowpass, 8);
    EXPECT_THROW(s.layer2(3, 3), InvalidArgument);
    EXPECT_THROW(s.layer2(4, 2), InvalidArgument);
}

TEST(ScatteringTransform, ZeroInput) {
    auto fb = build_filter_bank(4, 1, 128, WaveletFamily::battle_lemarie);
    auto s = scattering_transform(std::vector<double>(128, 0.0), fb);
    for (auto z : s.layer1.data) EXPECT_EQ(std::abs(z), 0.0);
    for (auto z : s.layer2_data) EXPECT_EQ(std::abs(z), 0.0);
}

TEST(ScatteringTransform, MatchesTwoStageOracle) {
    auto fb = build_filter_bank(4, 1, 128, WaveletFamily::battle_lemarie);
    auto x = oracle::gaussian(128, 8);
    auto s = scattering_transform(x, fb);
    for (auto [j1, j2] : s.pairs) {
        auto u = oracle::circular_convolution(x, oracle::impulse_response(fb.response(j1 - 1)));
        std::vector<double> m;
        for (auto z : u) m.push_back(std::abs(z));
        auto ref = oracle::circular_convolution(m, oracle::impulse_response(fb.response(j2 - 1)));
        auto l2 = s.layer2(j1, j2);
        EXPECT_LT(oracle::rel_error({l2.begin(), l2.end()}, ref), 1e-8);
    }
}

TEST(CrossCov, SelfCorrelationEqualsAutoCovariance) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto x = mrw(2048, 12);
    auto a = scat_cov(x, fb), c = scat_cross_cov(x, x, fb);
    EXPECT_EQ(c.size(), 165u);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& k = c.index[i];
        auto v = a.values[a.find(k.family, k.j, k.a, k.b)];
        EXPECT_LT(std::abs(c.values[i] - v), 1e-12 * (1 + std::abs(v)));
    }
}

TEST(CrossCov, RejectsLengthMismatch) {
    auto fb = build_filter_bank(4, 1, 256, WaveletFamily::battle_lemarie);
    EXPECT_THROW(scat_cross_cov(std::vector<double>(256), std::vector<double>(128), fb), InvalidArgument);
    EXPECT_THROW(scat_cov(std::vector<double>(128), fb), InvalidArgument);
}

namespace {

/// Per-coefficient Monte Carlo z-scores of the mean of real and imaginary
/// parts; returns the largest |z|.
template <typename Gen>
double max_z(std::size_t realizations, Gen gen, bool only_complex) {
    std::vector<oracle::Moments> re, im;
    std::vector<bool> flag;
    for (std::size_t r = 0; r < realizations; ++r) {
        ScatCov cov = gen(r);
        if (re.empty()) {
            re.resize(cov.size()), im.resize(cov.size());
            for (const auto& c : cov.index) flag.push_back(c.complex_flag);
        }
        for (std::size_t i = 0; i < cov.size(); ++i) re[i].add(cov.values[i].real()), im[i].add(cov.values[i].imag());
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < re.size(); ++i) {
        if (only_complex && !flag[i]) continue;
        worst = std::max(worst, std::abs(re[i].mean()) / re[i].stderr_of_mean());
        worst = std::max(worst, std::abs(im[i].mean()) / im[i].stderr_of_mean());
    }
    return worst;
}

}  // namespace

TEST(Gaussianity, ComplexCoefficientsVanishForWhiteNoise) {
    auto fb = build_filter_bank(5, 1, 256, WaveletFamily::battle_lemarie);
    double z = max_z(64, [&](std::size_t r) { return scat_cov(white(256, 100 + r), fb); }, true);
    EXPECT_LT(z, 4.0);
}

TEST(Independence, CrossCovarianceOfIndependentNoisesVanishes) {
    auto fb = build_filter_bank(5, 1, 256, WaveletFamily::battle_lemarie);
    double z = max_z(64, [&](std::size_t r) { return scat_cross_cov(white(256, 300 + r), white(256, 500 + r), fb); },
                     false);
    EXPECT_LT(z, 4.0);
}

TEST(Independence, HalfPeriodShiftOfWhiteNoiseBehavesAsIndependent) {
    // Two-sample z-scores between the shifted-copy ensemble and an ensemble
    // of independent pairs.
    auto fb = build_filter_bank(5, 1, 256, WaveletFamily::battle_lemarie);
    std::vector<oracle::Moments> sre, sim, ire, iim;
    for (std::uint64_t r = 0; r < 64; ++r) {
        auto x = white(256, 700 + r);
        Waveform y = x;
        for (std::size_t t = 0; t < 256; ++t) y.samples[(t + 128) % 256] = x.samples[t];
        auto s = scat_cross_cov(x, y, fb), ind = scat_cross_cov(white(256, 1700 + r), white(256, 2700 + r), fb);
        if (sre.empty()) sre.resize(s.size()), sim.resize(s.size()), ire.resize(s.size()), iim.resize(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            sre[i].add(s.values[i].real()), sim[i].add(s.values[i].imag());
            ire[i].add(ind.values[i].real()), iim[i].add(ind.values[i].imag());
        }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < sre.size(); ++i)
        for (auto [a, b] : {std::pair{&sre[i], &ire[i]}, std::pair{&sim[i], &iim[i]}}) {
            const double se = std::hypot(a->stderr_of_mean(), b->stderr_of_mean());
            if (se > 0.0) worst = std::max(worst, std::abs(a->mean() - b->mean()) / se);
        }
    EXPECT_LT(worst, 4.0);
}

TEST(Dashboard, WhiteNoiseSparsityRatio) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    std::vector<oracle::Moments> m(8);
    for (std::uint64_t r = 0; r < 32; ++r) {
        auto table = dashboard(scat_cov(white(2048, 900 + r), fb));
        for (int j = 1; j <= 8; ++j) m[j - 1].add(table.find(CoeffFamily::phi1, j)->value.real());
    }
    // E|z| / sqrt(E|z|^2) = sqrt(pi/4) for circular complex Gaussian z. The
    // coarsest scales hold few independent samples, which biases the ratio
    // upwards, so they get a wider tolerance.
    const double target = std::sqrt(std::numbers::pi / 4);
    for (int j = 1; j <= 8; ++j) EXPECT_NEAR(m[j - 1].mean(), target, j <= 5 ? 0.01 : 0.04) << "j=" << j;
}

TEST(Dashboard, MultifractalEnvelopeDependenceExceedsWhiteNoise) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    oracle::Moments m_mrw, m_white;
    for (std::uint64_t r = 0; r < 32; ++r) {
        auto a = dashboard(scat_cov(mrw(2048, 1200 + r), fb));
        auto b = dashboard(scat_cov(white(2048, 1300 + r), fb));
        double sa = 0, sb = 0;
        for (int bb = -1; bb >= -3; --bb) sa += std::abs(a.find(CoeffFamily::phi4, 0, 0, bb)->value),
                                          sb += std::abs(b.find(CoeffFamily::phi4, 0, 0, bb)->value);
        m_mrw.add(sa / 3), m_white.add(sb / 3);
    }
    EXPECT_GT(m_mrw.mean(), m_white.mean() + 3 * std::hypot(m_mrw.stderr_of_mean(), m_white.stderr_of_mean()));
}

TEST(Dashboard, TimeAsymmetryShowsInImaginaryPhi3) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    std::vector<oracle::Moments> im(7);
    for (std::uint64_t r = 0; r < 32; ++r) {
        GlitchParams g;
        g.seed = 40 + r;
        auto t = dashboard(scat_cov(glitch_train(g), fb));
        for (int a = 1; a <= 7; ++a) im[a - 1].add(t.find(CoeffFamily::phi3, 0, a)->value.imag());
    }
    double best = 0.0;
    for (const auto& m : im) best = std::max(best, std::abs(m.mean()) / m.stderr_of_mean());
    EXPECT_GT(best, 3.0);
}

TEST(Dashboard, CsvLayout) {
    auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    auto t = dashboard(scat_cov(white(2048, 1), fb));
    std::ostringstream os;
    t.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "family,j,a,b,real,imag");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, t.rows.size());
    // 9 + 9 per-scale rows, 7 reduced phi3 rows, 28 reduced phi4 rows.
    EXPECT_EQ(t.rows.size(), 9u + 9u + 7u + 28u);
}
