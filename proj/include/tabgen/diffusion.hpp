#pragma once

#include "tabgen/layout.hpp"
#include "tabgen/model.hpp"
#include "tabgen/schedule.hpp"

namespace tabgen {

struct DiffusionConfig {
    MaskSchedule mask_schedule;
    double lambda_max = 1.0;
    long s_warm = 2000;
    // plain masked cross-entropy by default; the 1/t ELBO weighting is the
    // logged alternative
    enum class TextLoss { PlainCE, ElboWeighted };
    TextLoss text_loss = TextLoss::PlainCE;
    bool learnable_rho = false;
};

double lambda_weight(long step, double lambda_max, long s_warm);

// x_hat = x0 + sigma_f(t) * eps, one eps draw per feature
Vec forward_noise_numeric(const Vec& x0, double t, const PowerMeanSchedule& schedule, Rng& rng);

// each non-prompt, non-placeholder token independently becomes [MASK] with
// probability 1 - alpha_bar(t); the prompt is untouched
std::vector<int> forward_mask_text(const std::vector<int>& tokens, double t,
                                   const MaskSchedule& schedule, const TokenLayout& layout,
                                   Rng& rng, std::vector<std::uint8_t>* mask_flags = nullptr);

struct CorruptedRecord {
    std::vector<int> tokens;  // with masks applied
    std::vector<std::uint8_t> masked;
    std::vector<int> clean_tokens;
    Vec x0;   // clean normalized numerics
    Vec eps;  // noise draw per feature; x_hat derives from the current schedule
    double t = 0.0;
    Mat drop_e, drop_d;  // projector dropout masks, empty in eval mode
};

struct NoisyBatch {
    std::vector<CorruptedRecord> records;
};

// shared t per record drives both the masking and the numeric noise
NoisyBatch make_noisy_batch(const std::vector<SerializedRecord>& records,
                            const TokenLayout& layout, const MaskSchedule& mask_schedule,
                            double dropout, int proj_hidden, Rng& rng);

struct LossReport {
    double l_text = 0.0;
    double l_num = 0.0;
    double lambda = 0.0;
    double total = 0.0;
    long step = 0;
};

struct LossWorkspace {
    std::vector<ParamStore> chunk_grads;
};

// Forward (and backward when grads is given) over a batch. Work is split into
// a fixed number of chunks reduced in order, so results do not depend on the
// physical thread count.
LossReport compute_loss(const Model& model, const FloatCodec& codec,
                        const PowerMeanSchedule& schedule, const TokenLayout& layout,
                        const NoisyBatch& batch, long step, const DiffusionConfig& cfg,
                        ParamStore* grads, LossWorkspace* workspace = nullptr, int chunks = 8);

// reads rho from the model arena in loss-coupled mode, otherwise returns base
PowerMeanSchedule effective_schedule(const Model& model, const PowerMeanSchedule& base,
                                     bool learnable_rho);

}  // namespace tabgen
