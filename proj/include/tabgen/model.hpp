#pragma once

#include <string>
#include <vector>

#include "tabgen/numcodec.hpp"
#include "tabgen/params.hpp"

namespace tabgen {

struct BackboneConfig {
    int layers = 4;
    int hidden = 128;  // D
    int heads = 4;
    int ff = 512;
    int max_len = 256;
    int lora_rank = 0;  // 0 = full-parameter training
    double lora_alpha = 32.0;
    int noise_emb_dim = 64;  // sinusoidal feature count, must be even
    double dropout = 0.1;    // projector dropout during training
    int codec_r = 16;

    int proj_hidden() const { return projector_hidden(codec_r, hidden); }
    void validate() const;
};

struct LnCache {
    Mat zn;
    Eigen::RowVectorXd scale;
};

struct LayerCache {
    Mat x_in;
    LnCache ln1;
    Mat ln1_out;
    Mat q, k, v;
    std::vector<Mat> attn;  // per-head softmax probabilities, S x S
    Mat attn_concat;
    Mat ax_q, ax_k, ax_v, ax_o;  // low-rank adapter activations
    Mat x_mid;
    LnCache ln2;
    Mat ln2_out;
    Mat ff_a, ff_h;
    Mat ax_f1, ax_f2;
};

struct ForwardTrace {
    std::vector<int> tokens;
    int seq_len = 0;
    Vec num_values;   // noisy normalized inputs, one per placeholder
    Vec sigmas;       // true noise level per placeholder
    Mat enc_latents;  // r x n, frozen ENC outputs

    LnCache pe_ln;
    Mat pe_ln_out, pe_a, pe_h, pe_hd, pe_out;
    Mat pe_mask, pd_mask;  // dropout masks; empty in inference mode
    Mat noise_feats, noise_a, noise_h, noise_out;

    Mat x0;  // D x S embedding sequence
    std::vector<LayerCache> layers;
    LnCache lnf;
    Mat hidden;  // D x S, post final norm
    Mat logits;  // V x S

    LnCache pd_ln;
    Mat pd_ln_out, pd_a, pd_h, pd_hd, pd_z;  // pd_z: r x n
    Vec x_pred;                              // denoised normalized prediction
};

// Bidirectional transformer backbone with an LM head tied to the token
// embedding table, DiT-style noise-level embeddings at numeric placeholder
// positions, and the trainable numeric projectors on both sides.
class Model {
  public:
    // learnable_rho registers the per-feature schedule shape parameters in the
    // same arena so one optimizer covers them
    Model(BackboneConfig config, int vocab_size, int num_features, bool learnable_rho = false);

    void init(std::uint64_t seed);

    const BackboneConfig& config() const { return config_; }
    int vocab_size() const { return vocab_size_; }
    int num_features() const { return num_features_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // dropout masks are H x n matrices of {0, 1/(1-p)} entries; null = inference
    void forward(const std::vector<int>& tokens, const Vec& num_values, const Vec& sigmas,
                 const FloatCodec& codec, ForwardTrace& trace, const Mat* drop_e = nullptr,
                 const Mat* drop_d = nullptr) const;

    // dlogits is V x S (zero outside the loss positions), dx_pred one per
    // placeholder. Optional outputs feed the loss-coupled rho mode.
    void backward(const ForwardTrace& trace, const Mat& dlogits, const Vec& dx_pred,
                  const FloatCodec& codec, ParamStore& grads, Mat* d_enc_latents = nullptr,
                  Vec* d_log_sigma = nullptr) const;

    // spec-level building blocks, inference mode
    Mat embed(const std::vector<int>& tokens, const Mat& numeric_latents, const Vec& sigmas) const;
    Mat lm_head(const Mat& hidden) const;
    Vec project_numeric(const Vec& enc_latent) const;
    double decode_hidden(const Vec& hidden_column, const FloatCodec& codec) const;
    Vec noise_embedding(double sigma) const;

    // 1.0 where AdamW weight decay applies (matrices, not biases or norms)
    Vec decay_mask() const;
    // lora mode trains adapters, projectors and the noise MLP only
    std::vector<std::uint8_t> trainable_mask() const;

    std::uint64_t checksum() const;

  private:
    BackboneConfig config_;
    int vocab_size_ = 0;
    int num_features_ = 0;
    ParamStore params_;

    Mat lin_fwd(const std::string& w, const std::string& b, const Mat& x, Mat* ax) const;
    Mat lin_bwd(const std::string& w, const std::string& b, const Mat& x, const Mat& dy,
                const Mat* ax, ParamStore& grads) const;
    Mat sinusoidal_features(const Vec& sigmas) const;
};

}  // namespace tabgen
