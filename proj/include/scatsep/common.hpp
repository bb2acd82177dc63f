#pragma once

// Shared value types, error classes and logging for the scatsep library.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <new>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scatsep {

using Complex = std::complex<double>;

/// Allocator handing out 64-byte aligned storage so that every buffer matches
/// the alignment the FFT plans were created with.
template <typename T, std::size_t Alignment = 64>
struct AlignedAllocator {
    using value_type = T;

    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Alignment>;
    };

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Alignment>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n == 0) return nullptr;
        std::size_t bytes = ((n * sizeof(T) + Alignment - 1) / Alignment) * Alignment;
        void* p = std::aligned_alloc(Alignment, bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <typename U>
    bool operator==(const AlignedAllocator<U, Alignment>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;
using RealBuffer = AlignedVector<double>;
using ComplexBuffer = AlignedVector<Complex>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition or malformed configuration.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Non-finite intermediate detected during a numerical evaluation. `stage`
/// names the pipeline step that produced it.
class NumericalError : public Error {
public:
    NumericalError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// I/O and file-format failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// A uniformly sampled real signal.
struct Waveform {
    std::vector<double> samples;
    double sample_rate = 1.0;
    std::string label;

    Waveform() = default;
    explicit Waveform(std::vector<double> s, double rate = 1.0, std::string name = {})
        : samples(std::move(s)), sample_rate(rate), label(std::move(name)) {}

    std::size_t size() const noexcept { return samples.size(); }
    double duration() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }
    std::span<const double> view() const noexcept { return samples; }

    /// Throws InvalidArgument naming the first non-finite sample.
    void validate() const {
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
            throw InvalidArgument("waveform '" + label + "': sample rate must be positive");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!std::isfinite(samples[i]))
                throw InvalidArgument("waveform '" + label + "': non-finite sample at index " +
                                      std::to_string(i));
        }
    }
};

inline bool is_power_of_two(std::size_t n) noexcept { return n >= 1 && (n & (n - 1)) == 0; }

inline int ilog2(std::size_t n) noexcept {
    int k = 0;
    while ((std::size_t{1} << (k + 1)) <= n) ++k;
    return k;
}

inline double squared_norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

namespace logging {

/// 0 = silent, 1 = warnings (default), 2 = info, 3 = debug. Read once from
/// the SCATSEP_LOG environment variable.
inline int verbosity() {
    static const int level = [] {
        const char* env = std::getenv("SCATSEP_LOG");
        if (!env) return 1;
        try {
            return std::stoi(env);
        } catch (...) {
            return 1;
        }
    }();
    return level;
}

inline void warn(std::string_view msg) {
    if (verbosity() >= 1) std::cerr << "[scatsep] warning: " << msg << '\n';
}
inline void info(std::string_view msg) {
    if (verbosity() >= 2) std::cerr << "[scatsep] " << msg << '\n';
}
inline void debug(std::string_view msg) {
    if (verbosity() >= 3) std::cerr << "[scatsep] debug: " << msg << '\n';
}

}  // namespace logging

}  // namespace scatsep
