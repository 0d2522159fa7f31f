#pragma once

#include <cstdint>
#include <random>

namespace loctime {

// Splittable random stream. A stream is identified by (seed, path); split()
// derives a child from the identity alone, so children do not depend on how
// many numbers the parent has already produced.
class Rng {
public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                          0x6c6f6374u};
        engine_.seed(seq);
    }

    Rng split(std::uint64_t index) const {
        // splitmix64 finalizer mixes the parent path with the child index
        std::uint64_t z = stream_ * 0x9E3779B97F4A7C15ull + index + 0x632BE59BD9B4E019ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        return Rng(seed_, z);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    engine_type& engine() noexcept { return engine_; }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }

    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        return std::poisson_distribution<std::uint64_t>(mean)(engine_);
    }

    // Gamma(shape, 1); shape must be positive.
    double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    engine_type engine_;
};

} // namespace loctime
