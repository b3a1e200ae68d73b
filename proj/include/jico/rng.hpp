#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace jico {

// Stream purposes used by the simulation harness. Keeping them in one enum
// makes every random draw addressable as (seed, rep, group, purpose).
enum class StreamPurpose : std::uint64_t {
    TrainX = 1,
    TrainNoise = 2,
    TestX = 3,
    TestNoise = 4,
    FoldShuffle = 5,
    Generic = 6,
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

// Collapses a (seed, rep, group, purpose) tuple into one 64-bit stream key so
// replications can be generated independently and in any order.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t rep, std::uint64_t group,
                                StreamPurpose purpose) {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ detail::splitmix64(rep + 0x100));
    h = detail::splitmix64(h ^ detail::splitmix64(group + 0x200));
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    return h;
}

// Deterministic normal generator: mt19937_64 (fully specified by the
// standard) feeding a Box-Muller transform. std::normal_distribution is
// implementation-defined, so we do not use it.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t key) : engine_(key) {}

    NormalStream(std::uint64_t seed, std::uint64_t rep, std::uint64_t group, StreamPurpose purpose)
        : engine_(stream_key(seed, rep, group, purpose)) {}

    // Uniform in (0, 1].
    double uniform_open0() {
        const std::uint64_t bits = engine_() >> 11;  // 53 random bits
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    // Uniform in [0, 1).
    double uniform() {
        const std::uint64_t bits = engine_() >> 11;
        return static_cast<double>(bits) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open0();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace jico
