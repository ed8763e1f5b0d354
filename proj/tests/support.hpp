#pragma once

#include <cstdint>

#include "pimnet/rng.hpp"
#include "pimnet/tensor.hpp"

namespace testing {

inline pimnet::Tensor random_tensor(pimnet::Shape shape, pimnet::Rng& rng, double scale = 1.0)
{
    pimnet::Tensor t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(-scale, scale);
    return t;
}

inline pimnet::Tensor random_tensor(pimnet::Shape shape, std::uint64_t seed, double scale = 1.0)
{
    pimnet::Rng rng(seed);
    return random_tensor(std::move(shape), rng, scale);
}

} // namespace testing
