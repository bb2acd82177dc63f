#pragma once

// Reverse-mode differentiation of scattering statistics.
//
// Gradients of a real loss L with respect to a complex quantity z are carried
// as g = dL/dRe z + i dL/dIm z, so that dL = Re(conj(g) dz). For a real
// quantity the gradient is simply dL/dz.

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "scatsep/common.hpp"
#include "scatsep/fft.hpp"
#include "scatsep/scattering.hpp"
#include "scatsep/wavelet.hpp"

namespace scatsep {

namespace detail {

/// y += a x, written out to avoid the Annex G complex multiply.
inline void axpy(Complex a, const Complex* x, Complex* y, std::size_t d) noexcept {
    const double ar = a.real(), ai = a.imag();
    auto* xp = reinterpret_cast<const double*>(x);
    auto* yp = reinterpret_cast<double*>(y);
    for (std::size_t t = 0; t < d; ++t) {
        const double xr = xp[2 * t], xi = xp[2 * t + 1];
        yp[2 * t] += ar * xr - ai * xi;
        yp[2 * t + 1] += ar * xi + ai * xr;
    }
}

}  // namespace detail

/// Adjoint accumulators matching the activations of ScatLayers.
struct LayerGrads {
    std::size_t n = 0;
    std::size_t d = 0;
    ComplexBuffer gU;   // (n+1) x d
    RealBuffer gMc;     // n x d
    ComplexBuffer gV;   // pair_count(n) x d

    LayerGrads() = default;
    LayerGrads(std::size_t bandpass, std::size_t len)
        : n(bandpass), d(len), gU((bandpass + 1) * len), gMc(bandpass * len), gV(pair_count(bandpass) * len) {}

    void clear() {
        std::fill(gU.begin(), gU.end(), Complex{});
        std::fill(gMc.begin(), gMc.end(), 0.0);
        std::fill(gV.begin(), gV.end(), Complex{});
    }

    void add(const LayerGrads& o) {
        for (std::size_t i = 0; i < gU.size(); ++i) gU[i] += o.gU[i];
        for (std::size_t i = 0; i < gMc.size(); ++i) gMc[i] += o.gMc[i];
        for (std::size_t i = 0; i < gV.size(); ++i) gV[i] += o.gV[i];
    }

    Complex* u(std::size_t c) noexcept { return gU.data() + c * d; }
    double* mc(std::size_t c) noexcept { return gMc.data() + c * d; }
    Complex* v(std::size_t j, std::size_t k) noexcept { return gV.data() + pair_index(n, j, k) * d; }
};

/// Pushes coefficient gradients G (one per layout entry) onto the activations.
/// Auto layouts differentiate through x only (x and y must be the same
/// object); cross layouts treat y as a constant and accumulate into gx.
inline void backprop_statistics(const CoeffLayout& layout, const Complex* G, const ScatLayers& x,
                                const ScatLayers& y, LayerGrads& gx) {
    const std::size_t d = x.d;
    const double inv = 1.0 / static_cast<double>(d);
    const bool cross = layout.cross();
    for (std::size_t i : layout.order()) {
        const Complex g = G[i];
        if (g == Complex{}) continue;
        const CoeffIndex& c = layout[i];
        const std::size_t j = static_cast<std::size_t>(c.j - 1);
        switch (c.family) {
            case CoeffFamily::phi1: {
                const Complex* u = x.u(j);
                Complex* gu = gx.u(j);
                const double s = g.real() * inv;
                for (std::size_t t = 0; t < d; ++t) {
                    double m = detail::modulus(u[t]);
                    if (m > 0.0) gu[t] += (s / m) * u[t];
                }
                break;
            }
            case CoeffFamily::phi2: {
                Complex* gu = gx.u(j);
                if (cross) {
                    const Complex* uy = y.u(j);
                    detail::axpy(g * inv, uy, gu, d);
                } else {
                    const Complex* u = x.u(j);
                    const double s = 2.0 * g.real() * inv;
                    for (std::size_t t = 0; t < d; ++t) gu[t] += s * u[t];
                }
                break;
            }
            case CoeffFamily::phi3: {
                // Ave(U_j(x) M~_{j-a}(y))
                const std::size_t j2 = j - static_cast<std::size_t>(c.a);
                const Complex s = g * inv;
                const double* my = y.mc(j2);
                Complex* gu = gx.u(j);
                for (std::size_t t = 0; t < d; ++t) gu[t] += Complex(s.real() * my[t], s.imag() * my[t]);
                if (!cross) {
                    const Complex* u = x.u(j);
                    double* gm = gx.mc(j2);
                    for (std::size_t t = 0; t < d; ++t)
                        gm[t] += s.real() * u[t].real() + s.imag() * u[t].imag();
                }
                break;
            }
            case CoeffFamily::phi4: {
                // Ave(V_{j,k}(x) conj V_{j-a,k}(y))
                const std::size_t k = static_cast<std::size_t>(c.j - c.b - 1);
                const std::size_t j2 = j - static_cast<std::size_t>(c.a);
                const Complex s = g * inv;
                detail::axpy(s, y.v(j2, k), gx.v(j, k), d);
                if (!cross) detail::axpy(std::conj(s), x.v(j, k), gx.v(j2, k), d);
                break;
            }
        }
    }
}

/// Reverse sweep from activation gradients to the input signal. `g` is
/// consumed (its envelope block is overwritten). Writes d values to `out`.
inline void backprop_network(const ScatLayers& x, LayerGrads& g, const FilterBank& fb, ScatWorkspace& ws,
                             double* out) {
    const std::size_t n = x.n, d = x.d;
    const Fft& fft = Fft::get(d);
    const double inv = 1.0 / static_cast<double>(d);

    for (std::size_t j = 0; j < n; ++j) {
        double* gm = g.mc(j);
        std::fill(ws.half.begin(), ws.half.end(), Complex{});
        bool any = false;
        for (std::size_t k = j + 1; k <= n; ++k) {
            Complex* gv = g.v(j, k);
            bool nz = false;
            for (std::size_t t = 0; t < d && !nz; ++t) nz = gv[t] != Complex{};
            if (!nz) continue;
            any = true;
            detail::accumulate_adjoint(fb, k, gv, ws.half.data(), ws.scratch.data());
        }
        if (any) {
            fft.inverse_real(ws.half.data(), ws.real.data());
            for (std::size_t t = 0; t < d; ++t) gm[t] += ws.real[t] * inv;
        }
        // centring, then modulus
        double mean = 0.0;
        for (std::size_t t = 0; t < d; ++t) mean += gm[t];
        mean *= inv;
        const Complex* u = x.u(j);
        Complex* gu = g.u(j);
        for (std::size_t t = 0; t < d; ++t) {
            double m = detail::modulus(u[t]);
            if (m > 0.0) gu[t] += ((gm[t] - mean) / m) * u[t];
        }
    }

    std::fill(ws.half.begin(), ws.half.end(), Complex{});
    for (std::size_t c = 0; c <= n; ++c) detail::accumulate_adjoint(fb, c, g.u(c), ws.half.data(), ws.scratch.data());
    fft.inverse_real(ws.half.data(), ws.real.data());
    for (std::size_t t = 0; t < d; ++t) out[t] = ws.real[t] * inv;
}

/// Value and gradient of a scalar objective of a real vector.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

/// Max over random unit directions u of the relative discrepancy between the
/// central difference (L(s + h u) - L(s - h u)) / 2h and <grad L(s), u>.
inline double finite_difference_check(const Objective& f, std::span<const double> s, int n_directions, double step,
                                      std::uint64_t seed = 7, double eps = 1e-12) {
    if (n_directions < 1) throw InvalidArgument("finite_difference_check: n_directions must be >= 1");
    if (!(step > 0.0)) throw InvalidArgument("finite_difference_check: step must be positive");
    const std::size_t d = s.size();
    std::vector<double> grad(d), scratch(d), u(d), p(d);
    f(s, grad);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int r = 0; r < n_directions; ++r) {
        double nrm = 0.0;
        for (auto& v : u) {
            v = normal(rng);
            nrm += v * v;
        }
        nrm = std::sqrt(nrm);
        double dir = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            u[i] /= nrm;
            dir += grad[i] * u[i];
        }
        for (std::size_t i = 0; i < d; ++i) p[i] = s[i] + step * u[i];
        double lp = f(p, scratch);
        for (std::size_t i = 0; i < d; ++i) p[i] = s[i] - step * u[i];
        double lm = f(p, scratch);
        double fd = (lp - lm) / (2.0 * step);
        worst = std::max(worst, std::abs(fd - dir) / (std::abs(dir) + eps));
    }
    return worst;
}

}  // namespace scatsep
