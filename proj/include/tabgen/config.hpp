#pragma once

#include <string>

#include "tabgen/diffusion.hpp"
#include "tabgen/sampler.hpp"

namespace tabgen {

// One configuration object drives every command; the canonical JSON form is
// hashed and embedded in all output artifacts.
struct RunConfig {
    std::string dataset = "mathexpr";

    BackboneConfig backbone;  // includes codec_r, lora rank, dropout

    // codec pretraining
    long codec_epochs = 20000;
    int codec_grid_points = 2001;
    double codec_grid_lo = -4.0;
    double codec_grid_hi = 4.0;

    // noise schedules
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;
    std::string rho_mode = "fixed";  // fixed | learnable
    std::string mask_schedule = "linear";

    // training
    long epochs = 40;
    int batch_size = 64;
    double lr = 2e-4;
    double warmup_ratio = 0.1;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-8;
    double lambda_max = 1.0;
    long s_warm = 2000;
    std::string text_loss = "ce";  // ce | elbo
    std::uint64_t train_seed = 1;
    int threads = 8;  // logical work chunks; results are thread-count independent
    long checkpoint_every = 0;
    std::string codec_ckpt;  // pretrained codec path; empty = pretrain inline

    // sampling defaults
    int sample_steps = 50;
    std::string unmask_policy = "high-confidence";
    double tau = 1.0;
    double churn_amount = 0.0;
    double churn_sigma_lo = 0.0;
    double churn_sigma_hi = 1e9;
    std::uint64_t sample_seed = 1;

    void validate() const;
    std::string to_json_text() const;  // canonical: sorted keys, stable floats
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::string& path);
    std::uint64_t hash() const;

    DiffusionConfig diffusion_config() const;
    MaskSchedule make_mask_schedule() const;
    ChurnConfig make_churn_config() const;
};

}  // namespace tabgen
