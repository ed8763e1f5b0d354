#include "pimnet/errors.hpp"
#include "pimnet/ops.hpp"
#include "pimnet/train.hpp"

namespace pimnet::train {

ad::Var truncated_mse(ad::Var prediction, const Tensor& target, std::size_t margin)
{
    const Tensor& p = prediction.value();
    if (p.shape() != target.shape())
        throw ShapeError("truncated_mse: prediction " + shape_str(p.shape()) + " vs target " +
                         shape_str(target.shape()));
    if (p.rank() != 2) throw ShapeError("truncated_mse: expected [channels, L]");
    const std::size_t L = p.dim(1);
    if (L <= 2 * margin)
        throw ShapeError("truncated_mse: length " + std::to_string(L) + " must exceed twice the margin " +
                         std::to_string(margin));
    const std::size_t C = p.dim(0), K = L - 2 * margin;
    Tensor kept_target({C, K});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < K; ++i) kept_target.at(c, i) = target.at(c, margin + i);
    ad::Var kept = margin ? ad::slice_time(prediction, margin, L - margin) : prediction;
    ad::Var ref = prediction.tape->constant(std::move(kept_target));
    return ad::mean(ad::square(ad::sub(kept, ref)));
}

} // namespace pimnet::train
