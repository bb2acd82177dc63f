#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom with
// safeguarded cubic interpolation).

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "scatsep/common.hpp"

namespace scatsep {

struct LbfgsConfig {
    int max_iterations = 500;
    int history_size = 10;
    double c1 = 1e-4;
    double c2 = 0.9;
    /// Stop when ||g|| <= gradient_tolerance * ||g0||.
    double gradient_tolerance = 1e-9;
    /// Stop when the relative loss decrease of an accepted step falls below
    /// this value. 0 disables the test.
    double loss_tolerance = 0.0;
    int max_line_search_evals = 30;

    void validate() const {
        if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
        if (history_size < 1) throw InvalidArgument("history_size must be >= 1");
        if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw InvalidArgument("line search requires 0 < c1 < c2 < 1");
        if (!(gradient_tolerance >= 0.0) || !(loss_tolerance >= 0.0))
            throw InvalidArgument("tolerances must be non-negative");
    }
};

enum class Termination { max_iterations, gradient_tolerance, loss_tolerance, line_search_failure };

inline std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::max_iterations: return "max_iterations";
        case Termination::gradient_tolerance: return "gradient_tolerance";
        case Termination::loss_tolerance: return "loss_tolerance";
        case Termination::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

struct LbfgsResult {
    std::vector<double> x;  // best iterate
    double f = 0.0;
    int iterations = 0;     // accepted steps
    int evaluations = 0;
    Termination reason = Termination::max_iterations;
};

/// f(x, grad) returns the value and writes the gradient.
using ValueAndGradient = std::function<double(std::span<const double>, std::span<double>)>;
/// Called after every accepted step with (iteration, x, f, ||g||).
using IterationCallback = std::function<void(int, std::span<const double>, double, double)>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Minimizer of the cubic through (a, fa, ga), (b, fb, gb), clamped to the
/// interior of [min(a,b), max(a,b)].
inline double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb) {
    double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    double disc = d1 * d1 - ga * gb;
    double lo = std::min(a, b), hi = std::max(a, b);
    double t;
    if (disc >= 0.0) {
        double d2 = std::copysign(std::sqrt(disc), b - a);
        t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    } else {
        t = 0.5 * (lo + hi);
    }
    double margin = 0.1 * (hi - lo);
    if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (lo + hi);
    return t;
}

struct LinePoint {
    double alpha = 0.0;
    double f = 0.0;
    double g = 0.0;  // directional derivative
};

}  // namespace detail

class Lbfgs {
public:
    Lbfgs(ValueAndGradient f, LbfgsConfig cfg) : f_(std::move(f)), cfg_(cfg) { cfg_.validate(); }

    LbfgsResult minimize(std::vector<double> x, const IterationCallback& on_iter = {}) {
        const std::size_t n = x.size();
        std::vector<double> g(n), p(n), xt(n), gt(n);
        LbfgsResult res;
        double f = eval(x, g, res);
        res.x = x;
        res.f = f;
        const double g0 = std::sqrt(detail::dot(g, g));
        if (!(g0 > 0.0)) {
            res.reason = Termination::gradient_tolerance;
            return res;
        }

        std::deque<std::vector<double>> S, Y;
        std::deque<double> rho;
        bool fallback_used = false;

        for (int it = 1; it <= cfg_.max_iterations; ++it) {
            direction(g, S, Y, rho, p);
            double gp = detail::dot(g, p);
            if (!(gp < 0.0)) {
                for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
                gp = -detail::dot(g, g);
                S.clear(), Y.clear(), rho.clear();
            }
            double alpha0 = S.empty() ? 1.0 / std::sqrt(detail::dot(g, g)) : 1.0;

            double f_new = 0.0;
            bool ok = line_search(x, f, gp, p, alpha0, xt, gt, f_new, res);
            if (!ok) {
                if (fallback_used) {
                    res.reason = Termination::line_search_failure;
                    break;
                }
                fallback_used = true;
                logging::warn("L-BFGS line search failed; taking one steepest-descent step");
                ok = steepest_descent(x, f, g, xt, gt, f_new, res);
                if (!ok) {
                    res.reason = Termination::line_search_failure;
                    break;
                }
                accept(x, g, xt, gt, S, Y, rho);
                f = f_new;
                track_best(x, f, res);
                res.iterations = it;
                if (on_iter) on_iter(it, x, f, std::sqrt(detail::dot(g, g)));
                res.reason = Termination::line_search_failure;
                break;
            }

            double f_prev = f;
            accept(x, g, xt, gt, S, Y, rho);
            f = f_new;
            track_best(x, f, res);
            res.iterations = it;
            const double gn = std::sqrt(detail::dot(g, g));
            if (on_iter) on_iter(it, x, f, gn);
            if (gn <= cfg_.gradient_tolerance * g0) {
                res.reason = Termination::gradient_tolerance;
                break;
            }
            if (cfg_.loss_tolerance > 0.0 &&
                (f_prev - f) <= cfg_.loss_tolerance * std::max(std::abs(f_prev), 1e-300)) {
                res.reason = Termination::loss_tolerance;
                break;
            }
        }
        return res;
    }

private:
    double eval(std::span<const double> x, std::span<double> g, LbfgsResult& res) {
        ++res.evaluations;
        return f_(x, g);
    }

    static void track_best(const std::vector<double>& x, double f, LbfgsResult& res) {
        if (f < res.f) {
            res.f = f;
            res.x = x;
        }
    }

    void accept(std::vector<double>& x, std::vector<double>& g, const std::vector<double>& xt,
                const std::vector<double>& gt, std::deque<std::vector<double>>& S,
                std::deque<std::vector<double>>& Y, std::deque<double>& rho) const {
        const std::size_t n = x.size();
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xt[i] - x[i];
            y[i] = gt[i] - g[i];
        }
        double sy = detail::dot(s, y);
        if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
            if (static_cast<int>(S.size()) == cfg_.history_size) {
                S.pop_front(), Y.pop_front(), rho.pop_front();
            }
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
        }
        x = xt;
        g = gt;
    }

    static void direction(const std::vector<double>& g, const std::deque<std::vector<double>>& S,
                          const std::deque<std::vector<double>>& Y, const std::deque<double>& rho,
                          std::vector<double>& p) {
        const std::size_t n = g.size(), m = S.size();
        for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
        std::vector<double> al(m);
        for (std::size_t k = m; k-- > 0;) {
            al[k] = rho[k] * detail::dot(S[k], p);
            for (std::size_t i = 0; i < n; ++i) p[i] -= al[k] * Y[k][i];
        }
        if (m > 0) {
            double gamma = detail::dot(S[m - 1], Y[m - 1]) / detail::dot(Y[m - 1], Y[m - 1]);
            for (auto& v : p) v *= gamma;
        }
        for (std::size_t k = 0; k < m; ++k) {
            double be = rho[k] * detail::dot(Y[k], p);
            for (std::size_t i = 0; i < n; ++i) p[i] += (al[k] - be) * S[k][i];
        }
    }

    detail::LinePoint probe(const std::vector<double>& x, const std::vector<double>& p, double alpha,
                            std::vector<double>& xt, std::vector<double>& gt, LbfgsResult& res) {
        for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + alpha * p[i];
        double f = eval(xt, gt, res);
        return {alpha, f, detail::dot(gt, p)};
    }

    bool line_search(const std::vector<double>& x, double f0, double g0, const std::vector<double>& p,
                     double alpha, std::vector<double>& xt, std::vector<double>& gt, double& f_out,
                     LbfgsResult& res) {
        const double c1 = cfg_.c1, c2 = cfg_.c2;
        detail::LinePoint prev{0.0, f0, g0};
        int evals = 0;
        auto sufficient = [&](const detail::LinePoint& q) { return q.f <= f0 + c1 * q.alpha * g0; };
        auto curvature = [&](const detail::LinePoint& q) { return std::abs(q.g) <= -c2 * g0; };

        auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) -> bool {
            while (evals < cfg_.max_line_search_evals) {
                if (std::abs(hi.alpha - lo.alpha) <= 1e-14 * std::max(1.0, std::abs(lo.alpha))) break;
                double a = detail::cubic_minimizer(lo.alpha, lo.f, lo.g, hi.alpha, hi.f, hi.g);
                detail::LinePoint q = probe(x, p, a, xt, gt, res);
                ++evals;
                if (!std::isfinite(q.f) || !sufficient(q) || q.f >= lo.f) {
                    hi = q;
                } else {
                    if (curvature(q)) {
                        f_out = q.f;
                        return true;
                    }
                    if (q.g * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                    lo = q;
                }
            }
            // Settle for the best sufficient-decrease point if one exists.
            if (lo.alpha > 0.0) {
                probe(x, p, lo.alpha, xt, gt, res);
                f_out = lo.f;
                return true;
            }
            return false;
        };

        while (evals < cfg_.max_line_search_evals) {
            detail::LinePoint q = probe(x, p, alpha, xt, gt, res);
            ++evals;
            if (!std::isfinite(q.f)) {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if (!sufficient(q) || (evals > 1 && q.f >= prev.f)) return zoom(prev, q);
            if (curvature(q)) {
                f_out = q.f;
                return true;
            }
            if (q.g >= 0.0) return zoom(q, prev);
            prev = q;
            alpha *= 2.0;
        }
        return false;
    }

    bool steepest_descent(const std::vector<double>& x, double f0, const std::vector<double>& g,
                          std::vector<double>& xt, std::vector<double>& gt, double& f_out, LbfgsResult& res) {
        std::vector<double> p(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) p[i] = -g[i];
        const double gg = detail::dot(g, g);
        double alpha = 1.0 / std::sqrt(gg);
        for (int k = 0; k < 40; ++k, alpha *= 0.5) {
            detail::LinePoint q = probe(x, p, alpha, xt, gt, res);
            if (std::isfinite(q.f) && q.f <= f0 - cfg_.c1 * alpha * gg) {
                f_out = q.f;
                return true;
            }
        }
        return false;
    }

    ValueAndGradient f_;
    LbfgsConfig cfg_;
};

}  // namespace scatsep
