// Prints the reduced dashboard of a multifractal random walk next to white
// noise: sparsity (phi1), spectrum (phi2), the imaginary part of phi3 and the
// envelope correlations phi4 at a = 0.

#include <cstdio>

#include "scatsep/scattering.hpp"
#include "scatsep/synth.hpp"

int main() {
    using namespace scatsep;
    const auto fb = build_filter_bank(8, 1, 2048, WaveletFamily::battle_lemarie);
    MrwParams p;
    p.seed = 3;
    const auto mrw = dashboard(scat_cov(mrw_increments(p), fb));
    const auto white = dashboard(scat_cov(Waveform(white_noise(2048, 4)), fb));

    std::printf("%-6s %3s %3s %3s %12s %12s\n", "family", "j", "a", "b", "mrw", "white");
    for (std::size_t r = 0; r < mrw.rows.size(); ++r) {
        const auto& m = mrw.rows[r];
        const auto& w = white.rows[r];
        const bool imag = m.family == CoeffFamily::phi3;
        if (m.family == CoeffFamily::phi4 && m.a != 0) continue;
        std::printf("%-6s %3d %3d %3d %12.4f %12.4f\n", std::string(to_string(m.family)).c_str(), m.j, m.a, m.b,
                    imag ? m.value.imag() : std::abs(m.value), imag ? w.value.imag() : std::abs(w.value));
    }
}
