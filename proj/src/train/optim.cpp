#include <cmath>

#include "pimnet/errors.hpp"
#include "pimnet/train.hpp"

namespace pimnet::train {

ClipResult clip_gradients(const std::vector<std::span<double>>& grads, double tau)
{
    if (!(tau > 0.0)) throw ConfigError("clip_gradients: tau must be positive");
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g) sq += v * v;
    ClipResult r;
    r.norm = std::sqrt(sq);
    if (r.norm > tau) {
        r.scale = tau / r.norm;
        for (const auto& g : grads)
            for (double& v : g) v *= r.scale;
    }
    return r;
}

ClipResult clip_gradients(models::ModelParams& params, double tau)
{
    std::vector<std::span<double>> grads;
    for (auto& e : params.entries()) grads.push_back(e.tensor.grad());
    return clip_gradients(grads, tau);
}

OptimizerState OptimizerState::for_params(const models::ModelParams& params)
{
    OptimizerState s;
    for (const auto& e : params.entries()) {
        s.m.emplace_back(e.tensor.size(), 0.0);
        s.v.emplace_back(e.tensor.size(), 0.0);
    }
    return s;
}

void adam_step(models::ModelParams& params, OptimizerState& state, double lr, const AdamConfig& cfg,
               const std::string& context)
{
    auto& entries = params.entries();
    if (state.m.size() != entries.size() || state.v.size() != entries.size())
        throw ShapeError("adam_step: optimizer state does not match parameter set");
    if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
    for (std::size_t p = 0; p < entries.size(); ++p) {
        const auto g = entries[p].tensor.grad();
        if (g.size() != entries[p].tensor.size() || state.m[p].size() != g.size())
            throw ShapeError("adam_step: gradient/state size mismatch for '" + entries[p].name + "'");
        for (double v : g)
            if (!std::isfinite(v))
                throw NumericError("adam_step: non-finite gradient in tensor '" + entries[p].name + "'" +
                                   (context.empty() ? "" : " (" + context + ")") + "; step skipped");
    }

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < entries.size(); ++p) {
        auto theta = entries[p].tensor.data();
        const auto g = entries[p].tensor.grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) + cfg.weight_decay * theta[i]);
        }
    }
}

} // namespace pimnet::train
