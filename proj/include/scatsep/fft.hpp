#pragma once

// Thin FFTW wrapper. Plans are created once per length (FFTW_ESTIMATE, so the
// chosen algorithm and therefore every result is reproducible run to run) and
// executed through the new-array interface, which is safe to call
// concurrently. All buffers passed in must come from AlignedAllocator.

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

#include "scatsep/common.hpp"

namespace scatsep {

class Fft {
public:
    /// Shared plan set for length n. Thread-safe.
    static const Fft& get(std::size_t n) {
        static std::mutex mutex;
        static std::map<std::size_t, std::unique_ptr<Fft>> cache;
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, std::unique_ptr<Fft>(new Fft(n))).first;
        return *it->second;
    }

    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    ~Fft() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
        fftw_destroy_plan(r2c_);
        fftw_destroy_plan(c2r_);
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t half_size() const noexcept { return n_ / 2 + 1; }

    /// out[k] = sum_t in[t] e^{-2 pi i k t / n}
    void forward(const Complex* in, Complex* out) const {
        fftw_execute_dft(forward_, as_fftw(in), as_fftw(out));
    }
    /// Unnormalized inverse: out[t] = sum_k in[k] e^{+2 pi i k t / n}
    void inverse(const Complex* in, Complex* out) const {
        fftw_execute_dft(inverse_, as_fftw(in), as_fftw(out));
    }
    /// Bins 0..n/2 of the forward transform of a real signal.
    void forward_real(const double* in, Complex* out) const {
        fftw_execute_dft_r2c(r2c_, const_cast<double*>(in), as_fftw(out));
    }
    /// Unnormalized inverse of a Hermitian spectrum given by bins 0..n/2.
    void inverse_real(const Complex* in, double* out) const {
        fftw_execute_dft_c2r(c2r_, as_fftw(in), out);
    }

private:
    explicit Fft(std::size_t n) : n_(n) {
        ComplexBuffer a(n), b(n);
        RealBuffer r(n);
        const int len = static_cast<int>(n);
        const unsigned flags = FFTW_ESTIMATE;
        forward_ = fftw_plan_dft_1d(len, as_fftw(a.data()), as_fftw(b.data()), FFTW_FORWARD, flags);
        inverse_ = fftw_plan_dft_1d(len, as_fftw(a.data()), as_fftw(b.data()), FFTW_BACKWARD, flags);
        r2c_ = fftw_plan_dft_r2c_1d(len, r.data(), as_fftw(a.data()), flags);
        c2r_ = fftw_plan_dft_c2r_1d(len, as_fftw(a.data()), r.data(), flags | FFTW_PRESERVE_INPUT);
        if (!forward_ || !inverse_ || !r2c_ || !c2r_)
            throw Error("FFTW failed to create plans for length " + std::to_string(n));
    }

    static fftw_complex* as_fftw(const Complex* p) {
        return reinterpret_cast<fftw_complex*>(const_cast<Complex*>(p));
    }

    std::size_t n_;
    fftw_plan forward_{};
    fftw_plan inverse_{};
    fftw_plan r2c_{};
    fftw_plan c2r_{};
};

}  // namespace scatsep
