#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pimnet/autodiff.hpp"

namespace pimnet::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t coordinates = 0;
    std::size_t nonsmooth = 0;  ///< probes skipped because they straddle a kink
};

/// Gradient magnitude below which errors are measured absolutely.
inline constexpr double kGradFloor = 1e-6;

/// Builds a scalar loss on the given tape. Tensors under test must be
/// registered with tape.leaf() inside the callback.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with central differences
/// (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate of every tensor in
/// `wrt`; the error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, kGradFloor).
/// Coordinates where the step-h and step-h/2 estimates disagree are counted
/// in `nonsmooth` and not compared.
///
/// `max_coords_per_tensor` > 0 checks an evenly strided subset.
GradCheckResult finite_diff_check(const LossBuilder& build, const std::vector<Tensor*>& wrt, double h = 1e-5,
                                  std::size_t max_coords_per_tensor = 0);

/// Single-point form: `fn` maps the point to a scalar.
double finite_diff_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& point, double h = 1e-5);

} // namespace pimnet::ad
