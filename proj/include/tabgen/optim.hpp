#pragma once

#include <cstdint>
#include <vector>

#include "tabgen/params.hpp"

namespace tabgen {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    long warmup_steps = 0;  // linear warmup, constant afterwards
};

// AdamW over a flat parameter vector. Decoupled weight decay is applied only
// where decay_mask is nonzero (matrices, not biases or norm parameters), and
// frozen coordinates are skipped entirely via trainable_mask.
struct AdamState {
    Vec m, v;
    long t = 0;

    void init(std::size_t n) {
        m = Vec::Zero(static_cast<Eigen::Index>(n));
        v = Vec::Zero(static_cast<Eigen::Index>(n));
        t = 0;
    }

    double lr_at(const AdamConfig& cfg, long step) const {
        if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
            return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
        }
        return cfg.lr;
    }

    void step(Vec& params, const Vec& grads, const AdamConfig& cfg,
              const Vec* decay_mask = nullptr, const std::vector<std::uint8_t>* trainable = nullptr) {
        require(params.size() == grads.size() && params.size() == m.size(),
                "Adam: buffer size mismatch");
        const double lr = lr_at(cfg, t);
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (Eigen::Index i = 0; i < params.size(); ++i) {
            if (trainable && !(*trainable)[static_cast<std::size_t>(i)]) {
                continue;
            }
            const double g = grads[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            double update = mh / (std::sqrt(vh) + cfg.eps);
            if (decay_mask && (*decay_mask)[i] != 0.0) {
                update += cfg.weight_decay * params[i];
            }
            params[i] -= lr * update;
        }
    }
};

}  // namespace tabgen
