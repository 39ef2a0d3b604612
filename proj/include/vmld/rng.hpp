#pragma once

#include <cstdint>
#include <random>

namespace vmld
{
    /// SplitMix64 finalizer, used to derive independent stream seeds.
    constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) noexcept
    {
        return splitmix64(splitmix64(master) ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
    }

    /// Deterministic pseudo-random stream.
    ///
    /// The engine output of mt19937_64 is fixed by the standard, but the
    /// standard distributions are not, so every derived variate is computed
    /// here. Identical seeds give identical sequences on every platform.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

        std::uint64_t next_u64() { return engine_(); }

        /// Uniform in [0, 1) with 53 bits of resolution.
        double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

        bool bernoulli(double p) { return uniform01() < p; }

        /// Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
        std::uint64_t below(std::uint64_t n)
        {
            const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
            std::uint64_t x;
            do
            {
                x = engine_();
            } while (x >= limit);
            return x % n;
        }

    private:
        std::mt19937_64 engine_;
    };
} // namespace vmld
