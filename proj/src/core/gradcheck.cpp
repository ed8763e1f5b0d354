#include "pimnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pimnet/errors.hpp"

namespace pimnet::ad {

namespace {

constexpr double kSmoothTol = 1e-4;

double denominator(double a, double b) { return std::max({std::abs(a), std::abs(b), kGradFloor}); }

double eval_loss(const LossBuilder& build)
{
    Tape tape(false);
    return build(tape).value().item();
}

} // namespace

GradCheckResult finite_diff_check(const LossBuilder& build, const std::vector<Tensor*>& wrt, double h,
                                  std::size_t max_coords_per_tensor)
{
    std::vector<bool> had_grad;
    for (Tensor* t : wrt) {
        had_grad.push_back(t->requires_grad());
        t->set_requires_grad(true);
        t->zero_grad();
    }

    {
        Tape tape;
        Var loss = build(tape);
        tape.backward(loss);
    }

    GradCheckResult result;
    for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
        Tensor& t = *wrt[ti];
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        const std::size_t n = t.size();
        const std::size_t stride =
            (max_coords_per_tensor == 0 || n <= max_coords_per_tensor) ? 1 : (n + max_coords_per_tensor - 1) / max_coords_per_tensor;
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = t[i];
            auto central = [&](double step) {
                t[i] = saved + step;
                const double fp = eval_loss(build);
                t[i] = saved - step;
                const double fm = eval_loss(build);
                t[i] = saved;
                return (fp - fm) / (2.0 * step);
            };
            const double numeric = central(h);
            const double refined = central(h / 2);
            if (!std::isfinite(numeric) || !std::isfinite(refined))
                throw NumericError("finite_diff_check: non-finite loss during probing");
            ++result.coordinates;
            // Halving the step changes a smooth function's estimate by O(h^2); a
            // larger change means the probe straddles a kink.
            if (std::abs(numeric - refined) > kSmoothTol * denominator(numeric, refined)) {
                ++result.nonsmooth;
                continue;
            }
            const double err = std::abs(analytic[i] - numeric) / denominator(analytic[i], numeric);
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_tensor = ti;
                result.worst_index = i;
                result.worst_analytic = analytic[i];
                result.worst_numeric = numeric;
            }
        }
    }

    for (std::size_t ti = 0; ti < wrt.size(); ++ti) wrt[ti]->set_requires_grad(had_grad[ti]);
    return result;
}

double finite_diff_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& point, double h)
{
    Tensor x = point.detached();
    return finite_diff_check([&](Tape& tape) { return fn(tape, tape.leaf(x)); }, {&x}, h).max_rel_error;
}

} // namespace pimnet::ad
