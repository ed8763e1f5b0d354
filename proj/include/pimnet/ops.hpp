#pragma once

#include <cstddef>

#include "pimnet/autodiff.hpp"

/// Differentiable tensor operations. Shapes must match exactly except where an
/// operation documents scalar or per-channel broadcasting.
namespace pimnet::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a + s where s is a one-element tensor.
Var add_scalar(Var a, Var s);
/// x[C, T] + bias[C] broadcast over time.
Var add_channel_bias(Var x, Var bias);

Var matmul(Var a, Var b);

Var sum(Var a);
Var mean(Var a);
Var square(Var a);

Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
/// 2*sigmoid(x) - 1; zero at the origin and odd-symmetric.
Var centered_sigmoid(Var a);

/// Columns [begin, end) of a rank-2 tensor [C, T].
Var slice_time(Var x, std::size_t begin, std::size_t end);

/// Sum of a * b over all elements (dot product of flattened tensors).
Var dot(Var a, Var b);

} // namespace pimnet::ad
