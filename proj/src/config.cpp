#include "tabgen/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace tabgen {

using nlohmann::json;

void RunConfig::validate() const {
    backbone.validate();
    require(sigma_min > 0.0 && sigma_min < sigma_max, "config: need 0 < sigma_min < sigma_max");
    require(rho > 0.0, "config: rho must be positive");
    require(rho_mode == "fixed" || rho_mode == "learnable", "config: bad rho_mode");
    require(mask_schedule == "linear" || mask_schedule == "cosine",
            "config: bad mask_schedule");
    require(text_loss == "ce" || text_loss == "elbo", "config: bad text_loss");
    require(epochs >= 1 && batch_size >= 1, "config: bad training sizes");
    require(lr > 0.0 && warmup_ratio >= 0.0 && warmup_ratio <= 1.0, "config: bad lr settings");
    require(lambda_max >= 0.0 && s_warm >= 0, "config: bad lambda settings");
    require(sample_steps >= 1 && tau > 0.0, "config: bad sampler settings");
    require(threads >= 1, "config: threads must be >= 1");
    require(codec_grid_points >= 2 && codec_grid_lo < codec_grid_hi, "config: bad codec grid");
    unmask_policy_from_name(unmask_policy);
}

std::string RunConfig::to_json_text() const {
    json j;
    j["dataset"] = dataset;
    j["backbone"] = {{"layers", backbone.layers},     {"hidden", backbone.hidden},
                     {"heads", backbone.heads},       {"ff", backbone.ff},
                     {"max_len", backbone.max_len},   {"lora_rank", backbone.lora_rank},
                     {"lora_alpha", backbone.lora_alpha},
                     {"noise_emb_dim", backbone.noise_emb_dim},
                     {"dropout", backbone.dropout},   {"codec_r", backbone.codec_r}};
    j["codec"] = {{"epochs", codec_epochs},
                  {"grid_points", codec_grid_points},
                  {"grid_lo", codec_grid_lo},
                  {"grid_hi", codec_grid_hi},
                  {"ckpt", codec_ckpt}};
    j["schedule"] = {{"sigma_min", sigma_min}, {"sigma_max", sigma_max},
                     {"rho", rho},             {"rho_mode", rho_mode},
                     {"mask_schedule", mask_schedule}};
    j["train"] = {{"epochs", epochs},
                  {"batch_size", batch_size},
                  {"lr", lr},
                  {"warmup_ratio", warmup_ratio},
                  {"weight_decay", weight_decay},
                  {"beta1", beta1},
                  {"beta2", beta2},
                  {"adam_eps", adam_eps},
                  {"lambda_max", lambda_max},
                  {"s_warm", s_warm},
                  {"text_loss", text_loss},
                  {"seed", train_seed},
                  {"threads", threads},
                  {"checkpoint_every", checkpoint_every}};
    j["sample"] = {{"steps", sample_steps}, {"policy", unmask_policy},
                   {"tau", tau},            {"churn_amount", churn_amount},
                   {"churn_sigma_lo", churn_sigma_lo},
                   {"churn_sigma_hi", churn_sigma_hi},
                   {"seed", sample_seed}};
    return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    c.dataset = j.value("dataset", c.dataset);
    if (j.contains("backbone")) {
        const auto& b = j["backbone"];
        c.backbone.layers = b.value("layers", c.backbone.layers);
        c.backbone.hidden = b.value("hidden", c.backbone.hidden);
        c.backbone.heads = b.value("heads", c.backbone.heads);
        c.backbone.ff = b.value("ff", c.backbone.ff);
        c.backbone.max_len = b.value("max_len", c.backbone.max_len);
        c.backbone.lora_rank = b.value("lora_rank", c.backbone.lora_rank);
        c.backbone.lora_alpha = b.value("lora_alpha", c.backbone.lora_alpha);
        c.backbone.noise_emb_dim = b.value("noise_emb_dim", c.backbone.noise_emb_dim);
        c.backbone.dropout = b.value("dropout", c.backbone.dropout);
        c.backbone.codec_r = b.value("codec_r", c.backbone.codec_r);
    }
    if (j.contains("codec")) {
        const auto& d = j["codec"];
        c.codec_epochs = d.value("epochs", c.codec_epochs);
        c.codec_grid_points = d.value("grid_points", c.codec_grid_points);
        c.codec_grid_lo = d.value("grid_lo", c.codec_grid_lo);
        c.codec_grid_hi = d.value("grid_hi", c.codec_grid_hi);
        c.codec_ckpt = d.value("ckpt", c.codec_ckpt);
    }
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        c.sigma_min = s.value("sigma_min", c.sigma_min);
        c.sigma_max = s.value("sigma_max", c.sigma_max);
        c.rho = s.value("rho", c.rho);
        c.rho_mode = s.value("rho_mode", c.rho_mode);
        c.mask_schedule = s.value("mask_schedule", c.mask_schedule);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        c.epochs = t.value("epochs", c.epochs);
        c.batch_size = t.value("batch_size", c.batch_size);
        c.lr = t.value("lr", c.lr);
        c.warmup_ratio = t.value("warmup_ratio", c.warmup_ratio);
        c.weight_decay = t.value("weight_decay", c.weight_decay);
        c.beta1 = t.value("beta1", c.beta1);
        c.beta2 = t.value("beta2", c.beta2);
        c.adam_eps = t.value("adam_eps", c.adam_eps);
        c.lambda_max = t.value("lambda_max", c.lambda_max);
        c.s_warm = t.value("s_warm", c.s_warm);
        c.text_loss = t.value("text_loss", c.text_loss);
        c.train_seed = t.value("seed", c.train_seed);
        c.threads = t.value("threads", c.threads);
        c.checkpoint_every = t.value("checkpoint_every", c.checkpoint_every);
    }
    if (j.contains("sample")) {
        const auto& s = j["sample"];
        c.sample_steps = s.value("steps", c.sample_steps);
        c.unmask_policy = s.value("policy", c.unmask_policy);
        c.tau = s.value("tau", c.tau);
        c.churn_amount = s.value("churn_amount", c.churn_amount);
        c.churn_sigma_lo = s.value("churn_sigma_lo", c.churn_sigma_lo);
        c.churn_sigma_hi = s.value("churn_sigma_hi", c.churn_sigma_hi);
        c.sample_seed = s.value("seed", c.sample_seed);
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::uint64_t RunConfig::hash() const {
    return fnv1a64(to_json_text());
}

DiffusionConfig RunConfig::diffusion_config() const {
    DiffusionConfig d;
    d.mask_schedule = make_mask_schedule();
    d.lambda_max = lambda_max;
    d.s_warm = s_warm;
    d.text_loss = text_loss == "elbo" ? DiffusionConfig::TextLoss::ElboWeighted
                                      : DiffusionConfig::TextLoss::PlainCE;
    d.learnable_rho = rho_mode == "learnable";
    return d;
}

MaskSchedule RunConfig::make_mask_schedule() const {
    MaskSchedule m;
    m.kind = mask_schedule == "cosine" ? MaskSchedule::Kind::Cosine : MaskSchedule::Kind::Linear;
    return m;
}

ChurnConfig RunConfig::make_churn_config() const {
    return {churn_amount, churn_sigma_lo, churn_sigma_hi};
}

}  // namespace tabgen
