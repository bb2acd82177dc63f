#pragma once

// Source separation by matching scattering statistics.
//
// Observation x = a1 s1 + n with unknown n, and K reference snippets n_k drawn
// from the same process as n. With Phi the auto statistics and Phi(., .) the
// cross statistics, the objective is
//
//   L_prior = 1/K sum_k || Phi(x - a1 s1) - Phi(n_k) ||^2_prior
//   L_data  = 1/K sum_k || Phi(a1 s1 + n_k) - Phi(x) ||^2_data
//   L_cross = 1/K sum_k || Phi(a1 s1, n_k) ||^2_cross
//
// where ||v||^2_w = 1/M sum_m |v_m|^2 / var_m. Dividing by M keeps each term
// near 1 when the residual is statistically indistinguishable from a snippet.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scatsep/common.hpp"
#include "scatsep/grad.hpp"
#include "scatsep/lbfgs.hpp"
#include "scatsep/parallel.hpp"
#include "scatsep/scattering.hpp"
#include "scatsep/wavelet.hpp"

namespace scatsep {

struct NormalizationStats {
    std::vector<double> var_prior;  // auto layout, from {Phi(n_k)}
    std::vector<double> var_data;   // auto layout, from {Phi(x + n_k)}
    std::vector<double> var_cross;  // cross layout, from {Phi(x, n_k)}
    std::size_t floored = 0;        // entries raised to their floor
};

struct LossWeights {
    double prior = 1.0;
    double data = 1.0;
    double cross = 1.0;
};

struct SolverConfig {
    LbfgsConfig lbfgs;
    LossWeights weights;
    std::uint64_t seed = 0;
};

struct LossTerms {
    double prior = 0.0;
    double data = 0.0;
    double cross = 0.0;
    double total = 0.0;
};

namespace detail {

/// Sample variance E|z - mean z|^2 with 1/(K-1), floored at
/// max(eps_rel (mean_k |z|)^2, 1e-30).
inline std::vector<double> coefficient_variance(const std::vector<std::vector<Complex>>& samples,
                                                std::size_t& floored, double eps_rel = 1e-6) {
    const std::size_t K = samples.size(), M = samples.front().size();
    std::vector<double> var(M);
    for (std::size_t m = 0; m < M; ++m) {
        Complex mean{};
        double mag = 0.0;
        for (const auto& s : samples) {
            mean += s[m];
            mag += std::abs(s[m]);
        }
        mean /= static_cast<double>(K);
        mag /= static_cast<double>(K);
        double v = 0.0;
        for (const auto& s : samples) v += std::norm(s[m] - mean);
        v /= static_cast<double>(K - 1);
        const double floor = std::max(eps_rel * mag * mag, 1e-30);
        if (!(v > floor)) {
            v = floor;
            ++floored;
        }
        var[m] = v;
    }
    return var;
}

inline void check_lengths(const Waveform& x, const std::vector<Waveform>& snippets, const FilterBank& fb) {
    if (snippets.size() < 2)
        throw InvalidArgument("at least two snippets are required, got " + std::to_string(snippets.size()));
    if (x.size() != fb.d())
        throw InvalidArgument("observation length " + std::to_string(x.size()) + " does not match d = " +
                              std::to_string(fb.d()));
    for (const auto& s : snippets) {
        if (s.size() != fb.d())
            throw InvalidArgument("snippet '" + s.label + "' has length " + std::to_string(s.size()) +
                                  ", expected " + std::to_string(fb.d()));
        if (s.sample_rate != x.sample_rate)
            throw InvalidArgument("snippet '" + s.label + "' has a different sample rate than the observation");
    }
}

}  // namespace detail

/// Per-coefficient variances of the three loss terms, estimated from the
/// snippets and the observation.
inline NormalizationStats estimate_normalization(const Waveform& x, const std::vector<Waveform>& snippets,
                                                 const FilterBank& fb) {
    detail::check_lengths(x, snippets, fb);
    const std::size_t K = snippets.size(), d = fb.d(), n = fb.bandpass_count();
    const CoeffLayout auto_layout(n, false), cross_layout(n, true);
    std::vector<std::vector<Complex>> prior(K, std::vector<Complex>(auto_layout.size())),
        data(K, std::vector<Complex>(auto_layout.size())), cross(K, std::vector<Complex>(cross_layout.size()));

    ScatWorkspace ws0(d);
    ScatLayers Lx(n, d);
    Lx.compute(x.view(), fb, ws0);

    const unsigned workers = worker_count(K);
    std::vector<ScatWorkspace> ws(workers, ScatWorkspace(d));
    std::vector<ScatLayers> Ln(workers, ScatLayers(n, d)), Ly(workers, ScatLayers(n, d));
    std::vector<std::vector<double>> buf(workers, std::vector<double>(d));
    parallel_for(K, workers, [&](std::size_t k, unsigned w) {
        Ln[w].compute(snippets[k].view(), fb, ws[w]);
        compute_statistics(auto_layout, Ln[w], Ln[w], prior[k].data());
        compute_statistics(cross_layout, Lx, Ln[w], cross[k].data());
        for (std::size_t t = 0; t < d; ++t) buf[w][t] = x.samples[t] + snippets[k].samples[t];
        Ly[w].compute(buf[w], fb, ws[w]);
        compute_statistics(auto_layout, Ly[w], Ly[w], data[k].data());
    });

    NormalizationStats st;
    st.var_prior = detail::coefficient_variance(prior, st.floored);
    st.var_data = detail::coefficient_variance(data, st.floored);
    st.var_cross = detail::coefficient_variance(cross, st.floored);
    if (st.floored > 0)
        logging::warn(std::to_string(st.floored) +
                      " coefficient variances collapsed to their floor; snippets may be (near) identical");
    return st;
}

/// Observation, mixing coefficient, snippets, normalization and solver
/// settings. Immutable once built; snippets are reordered by label so that
/// every reduction runs in a fixed order.
class SeparationProblem {
public:
    SeparationProblem(Waveform x, std::vector<Waveform> snippets, double a1, FilterBank fb,
                      SolverConfig solver = {}, std::optional<NormalizationStats> norms = std::nullopt)
        : x_(std::move(x)), snippets_(std::move(snippets)), a1_(a1), fb_(std::move(fb)), solver_(solver),
          auto_(fb_.bandpass_count(), false), cross_(fb_.bandpass_count(), true) {
        x_.validate();
        for (const auto& s : snippets_) s.validate();
        detail::check_lengths(x_, snippets_, fb_);
        if (!std::isfinite(a1_)) throw InvalidArgument("a1 must be finite");
        solver_.lbfgs.validate();
        std::stable_sort(snippets_.begin(), snippets_.end(),
                         [](const Waveform& a, const Waveform& b) { return a.label < b.label; });
        norms_ = norms ? std::move(*norms) : estimate_normalization(x_, snippets_, fb_);
        if (norms_.var_prior.size() != auto_.size() || norms_.var_data.size() != auto_.size() ||
            norms_.var_cross.size() != cross_.size())
            throw InvalidArgument("normalization statistics do not match the coefficient layout");
        precompute();
    }

    const Waveform& observation() const noexcept { return x_; }
    const std::vector<Waveform>& snippets() const noexcept { return snippets_; }
    double a1() const noexcept { return a1_; }
    const FilterBank& filter_bank() const noexcept { return fb_; }
    const NormalizationStats& normalization() const noexcept { return norms_; }
    const SolverConfig& solver() const noexcept { return solver_; }
    std::size_t d() const noexcept { return fb_.d(); }
    std::size_t K() const noexcept { return snippets_.size(); }

    /// Loss terms at s1; writes the gradient of the weighted total when `grad`
    /// is non-empty.
    LossTerms evaluate(std::span<const double> s1, std::span<double> grad = {}) const {
        const std::size_t d = fb_.d(), n = fb_.bandpass_count(), K = snippets_.size();
        if (s1.size() != d) throw InvalidArgument("s1 has length " + std::to_string(s1.size()) + ", expected " + std::to_string(d));
        const bool want_grad = !grad.empty();
        if (want_grad && grad.size() != d) throw InvalidArgument("gradient buffer has the wrong length");
        const LossWeights& w = solver_.weights;
        const double Ma = static_cast<double>(auto_.size()), Mc = static_cast<double>(cross_.size());
        const double invK = 1.0 / static_cast<double>(K);

        ScatWorkspace ws(d);
        LossTerms out;

        // prior: residual z = x - a1 s1 against every snippet
        std::vector<double> z(d);
        for (std::size_t t = 0; t < d; ++t) z[t] = x_.samples[t] - a1_ * s1[t];
        ScatLayers Lz(n, d);
        Lz.compute(z, fb_, ws);
        std::vector<Complex> phi(auto_.size()), G(auto_.size());
        compute_statistics(auto_, Lz, Lz, phi.data());
        {
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                double s = 0.0;
                for (std::size_t m = 0; m < auto_.size(); ++m)
                    s += std::norm(phi[m] - phi_snip_[k][m]) / norms_.var_prior[m];
                acc += s / Ma;
            }
            out.prior = acc * invK;
        }
        if (!std::isfinite(out.prior)) throw NumericalError("prior loss", "non-finite value");
        if (want_grad) {
            std::fill(grad.begin(), grad.end(), 0.0);
            if (w.prior != 0.0) {
                for (std::size_t m = 0; m < auto_.size(); ++m)
                    G[m] = (w.prior * 2.0 / (Ma * norms_.var_prior[m])) * (phi[m] - phi_snip_mean_[m]);
                LayerGrads g(n, d);
                backprop_statistics(auto_, G.data(), Lz, Lz, g);
                std::vector<double> gz(d);
                backprop_network(Lz, g, fb_, ws, gz.data());
                for (std::size_t t = 0; t < d; ++t) grad[t] -= a1_ * gz[t];
            }
        }

        // data and cross terms, one task per snippet
        std::vector<double> s(d);
        for (std::size_t t = 0; t < d; ++t) s[t] = a1_ * s1[t];
        ScatLayers Ls(n, d);
        Ls.compute(s, fb_, ws);

        const unsigned workers = worker_count(K);
        std::vector<ScatWorkspace> wws(workers, ScatWorkspace(d));
        std::vector<ScatLayers> Ly(workers, ScatLayers(n, d));
        std::vector<LayerGrads> gy, gs;
        if (want_grad) {
            gy.assign(workers, LayerGrads(n, d));
            gs.assign(workers, LayerGrads(n, d));
        }
        std::vector<double> data_k(K), cross_k(K);
        std::vector<std::vector<double>> grad_k(want_grad ? K : 0);
        std::vector<std::vector<Complex>> phi_w(workers, std::vector<Complex>(auto_.size())),
            G_w(workers, std::vector<Complex>(auto_.size()));
        std::vector<std::vector<double>> y_w(workers, std::vector<double>(d));

        parallel_for(K, workers, [&](std::size_t k, unsigned wi) {
            auto& y = y_w[wi];
            const auto& nk = snippets_[k].samples;
            for (std::size_t t = 0; t < d; ++t) y[t] = s[t] + nk[t];
            Ly[wi].compute(y, fb_, wws[wi]);
            auto& ph = phi_w[wi];
            auto& Gk = G_w[wi];
            compute_statistics(auto_, Ly[wi], Ly[wi], ph.data());
            double sum = 0.0;
            for (std::size_t m = 0; m < auto_.size(); ++m) sum += std::norm(ph[m] - phi_x_[m]) / norms_.var_data[m];
            data_k[k] = sum / Ma;
            if (want_grad) {
                grad_k[k].assign(d, 0.0);
                if (w.data != 0.0) {
                    for (std::size_t m = 0; m < auto_.size(); ++m)
                        Gk[m] = (w.data * 2.0 * invK / (Ma * norms_.var_data[m])) * (ph[m] - phi_x_[m]);
                    gy[wi].clear();
                    backprop_statistics(auto_, Gk.data(), Ly[wi], Ly[wi], gy[wi]);
                    backprop_network(Ly[wi], gy[wi], fb_, wws[wi], grad_k[k].data());
                }
            }
            compute_statistics(cross_, Ls, snip_layers_[k], ph.data());
            sum = 0.0;
            for (std::size_t m = 0; m < cross_.size(); ++m) sum += std::norm(ph[m]) / norms_.var_cross[m];
            cross_k[k] = sum / Mc;
            if (want_grad && w.cross != 0.0) {
                for (std::size_t m = 0; m < cross_.size(); ++m)
                    Gk[m] = (w.cross * 2.0 * invK / (Mc * norms_.var_cross[m])) * ph[m];
                backprop_statistics(cross_, Gk.data(), Ls, snip_layers_[k], gs[wi]);
            }
        });

        for (std::size_t k = 0; k < K; ++k) {
            out.data += data_k[k];
            out.cross += cross_k[k];
        }
        out.data *= invK;
        out.cross *= invK;
        if (!std::isfinite(out.data)) throw NumericalError("data loss", "non-finite value");
        if (!std::isfinite(out.cross)) throw NumericalError("cross loss", "non-finite value");
        out.total = w.prior * out.prior + w.data * out.data + w.cross * out.cross;

        if (want_grad) {
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t t = 0; t < d; ++t) grad[t] += a1_ * grad_k[k][t];
            if (w.cross != 0.0) {
                for (unsigned wi = 1; wi < workers; ++wi) gs[0].add(gs[wi]);
                std::vector<double> gc(d);
                backprop_network(Ls, gs[0], fb_, ws, gc.data());
                for (std::size_t t = 0; t < d; ++t) grad[t] += a1_ * gc[t];
            }
            for (std::size_t t = 0; t < d; ++t)
                if (!std::isfinite(grad[t]))
                    throw NumericalError("gradient", "non-finite entry at index " + std::to_string(t));
        }
        return out;
    }

private:
    void precompute() {
        const std::size_t d = fb_.d(), n = fb_.bandpass_count(), K = snippets_.size();
        ScatWorkspace ws(d);
        ScatLayers Lx(n, d);
        Lx.compute(x_.view(), fb_, ws);
        phi_x_.resize(auto_.size());
        compute_statistics(auto_, Lx, Lx, phi_x_.data());

        snip_layers_.assign(K, ScatLayers(n, d));
        phi_snip_.assign(K, std::vector<Complex>(auto_.size()));
        const unsigned workers = worker_count(K);
        std::vector<ScatWorkspace> wws(workers, ScatWorkspace(d));
        parallel_for(K, workers, [&](std::size_t k, unsigned w) {
            snip_layers_[k].compute(snippets_[k].view(), fb_, wws[w]);
            compute_statistics(auto_, snip_layers_[k], snip_layers_[k], phi_snip_[k].data());
        });
        phi_snip_mean_.assign(auto_.size(), Complex{});
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t m = 0; m < auto_.size(); ++m) phi_snip_mean_[m] += phi_snip_[k][m];
        for (auto& v : phi_snip_mean_) v /= static_cast<double>(K);
    }

    Waveform x_;
    std::vector<Waveform> snippets_;
    double a1_;
    FilterBank fb_;
    SolverConfig solver_;
    CoeffLayout auto_, cross_;
    NormalizationStats norms_;
    std::vector<Complex> phi_x_;
    std::vector<ScatLayers> snip_layers_;
    std::vector<std::vector<Complex>> phi_snip_;
    std::vector<Complex> phi_snip_mean_;
};

inline LossTerms evaluate_losses(std::span<const double> s1, const SeparationProblem& problem) {
    return problem.evaluate(s1);
}

/// Total loss and its gradient with respect to s1.
inline std::pair<double, std::vector<double>> loss_value_and_gradient(std::span<const double> s1,
                                                                      const SeparationProblem& problem) {
    std::vector<double> g(s1.size());
    double f = problem.evaluate(s1, g).total;
    return {f, std::move(g)};
}

inline double finite_difference_check(std::span<const double> s1, const SeparationProblem& problem,
                                      int n_directions, double step, std::uint64_t seed = 7) {
    Objective f = [&](std::span<const double> s, std::span<double> g) { return problem.evaluate(s, g).total; };
    return finite_difference_check(f, s1, n_directions, step, seed);
}

struct LossRecord {
    int iteration = 0;
    LossTerms terms;
    double grad_norm = 0.0;
};

struct SeparationResult {
    Waveform s1_hat;
    Waveform background_hat;
    std::vector<LossRecord> loss_trace;
    int iterations_used = 0;
    int evaluations = 0;
    Termination termination_reason = Termination::max_iterations;
    double seconds = 0.0;

    void write_trace_csv(std::ostream& os) const {
        os << "iteration,total,prior,data,cross,grad_norm\n";
        os.precision(17);
        for (const auto& r : loss_trace)
            os << r.iteration << ',' << r.terms.total << ',' << r.terms.prior << ',' << r.terms.data << ','
               << r.terms.cross << ',' << r.grad_norm << '\n';
    }
};

/// Minimizes the total loss with L-BFGS starting from s1 = 0 and returns the
/// best iterate. background_hat = x - a1 s1_hat, rounded once per sample.
inline SeparationResult separate(const SeparationProblem& problem, const IterationCallback& progress = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t d = problem.d();
    LossTerms last;
    ValueAndGradient f = [&](std::span<const double> s, std::span<double> g) {
        last = problem.evaluate(s, g);
        return last.total;
    };
    SeparationResult res;
    std::vector<double> s0(d, 0.0), g0(d);
    {
        LossTerms init = problem.evaluate(s0, g0);
        res.loss_trace.push_back({0, init, std::sqrt(detail::dot(g0, g0))});
    }
    Lbfgs solver(f, problem.solver().lbfgs);
    LbfgsResult lr = solver.minimize(s0, [&](int it, std::span<const double> x, double fx, double gn) {
        res.loss_trace.push_back({it, last, gn});
        if (progress) progress(it, x, fx, gn);
    });

    const Waveform& x = problem.observation();
    res.s1_hat = Waveform(lr.x, x.sample_rate, "s1_hat");
    std::vector<double> bg(d);
    for (std::size_t t = 0; t < d; ++t) bg[t] = x.samples[t] - problem.a1() * lr.x[t];
    res.background_hat = Waveform(std::move(bg), x.sample_rate, "background_hat");
    res.iterations_used = lr.iterations;
    res.evaluations = lr.evaluations + 1;
    res.termination_reason = lr.reason;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

/// 10 log10(||truth||^2 / ||truth - estimate||^2), capped at 300 dB.
inline double snr(std::span<const double> estimate, std::span<const double> truth) {
    if (estimate.size() != truth.size()) throw InvalidArgument("snr: lengths differ");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        num += truth[i] * truth[i];
        double e = truth[i] - estimate[i];
        den += e * e;
    }
    if (!(num > 0.0)) throw InvalidArgument("snr: truth has zero energy");
    if (den == 0.0) return 300.0;
    return std::min(300.0, 10.0 * std::log10(num / den));
}
inline double snr(const Waveform& estimate, const Waveform& truth) { return snr(estimate.view(), truth.view()); }

}  // namespace scatsep
