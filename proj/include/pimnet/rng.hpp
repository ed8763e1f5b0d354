#pragma once

#include <cstdint>
#include <random>

namespace pimnet {

/// splitmix64 finaliser; derives independent stream seeds from (base, stream).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded generator whose floating-point draws are identical across standard
/// library implementations (std distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Box-Muller, one value per call).
    double normal();
    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

} // namespace pimnet
