#include "fond/optimizer.hpp"

#include "fond/errors.hpp"

#include <cmath>

namespace fond {

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::sgd_momentum: return "sgd_momentum";
        case OptimizerKind::adam: return "adam";
    }
    return "?";
}

OptimizerKind parse_optimizer(const std::string& text) {
    if (text == "sgd") return OptimizerKind::sgd;
    if (text == "sgd_momentum" || text == "momentum") return OptimizerKind::sgd_momentum;
    if (text == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + text + "'");
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
}

void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const OptimizerConfig& cfg) {
    auto p = params.buffers();
    const auto g = grads.buffers();
    if (p.size() != g.size()) throw DimensionError("optimizer_step: parameter/gradient buffer count mismatch");
    for (std::size_t b = 0; b < p.size(); ++b) {
        if (p[b].size() != g[b].size()) {
            throw DimensionError("optimizer_step: buffer " + std::to_string(b) + " has " +
                                 std::to_string(p[b].size()) + " params but " +
                                 std::to_string(g[b].size()) + " grads");
        }
    }
    if (state.step == 0) {
        state.first.clear();
        state.second.clear();
        for (const auto& buf : p) {
            state.first.emplace_back(buf.size(), 0.0);
            if (cfg.kind == OptimizerKind::adam) state.second.emplace_back(buf.size(), 0.0);
        }
    }
    ++state.step;
    const double lr = cfg.learning_rate;

    switch (cfg.kind) {
        case OptimizerKind::sgd:
            for (std::size_t b = 0; b < p.size(); ++b) {
                for (std::size_t i = 0; i < p[b].size(); ++i) p[b][i] -= lr * g[b][i];
            }
            break;
        case OptimizerKind::sgd_momentum:
            for (std::size_t b = 0; b < p.size(); ++b) {
                auto& v = state.first[b];
                for (std::size_t i = 0; i < p[b].size(); ++i) {
                    v[i] = cfg.momentum * v[i] + g[b][i];
                    p[b][i] -= lr * v[i];
                }
            }
            break;
        case OptimizerKind::adam: {
            const double t = static_cast<double>(state.step);
            const double c1 = 1.0 - std::pow(cfg.beta1, t);
            const double c2 = 1.0 - std::pow(cfg.beta2, t);
            for (std::size_t b = 0; b < p.size(); ++b) {
                auto& m = state.first[b];
                auto& v = state.second[b];
                for (std::size_t i = 0; i < p[b].size(); ++i) {
                    const double gi = g[b][i];
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                    p[b][i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
                }
            }
            break;
        }
    }
}

}  // namespace fond
