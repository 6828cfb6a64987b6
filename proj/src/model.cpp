#include "tabgen/model.hpp"

#include <cmath>

namespace tabgen {

namespace {

constexpr double kLnEps = 1e-5;

Mat ln_fwd(const Mat& x, ConstVecMap g, ConstVecMap b, LnCache& cache) {
    Eigen::RowVectorXd mu = x.colwise().mean();
    Mat centered = x.rowwise() - mu;
    Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    cache.scale = (var.array() + kLnEps).sqrt();
    cache.zn = centered.array().rowwise() / cache.scale.array();
    return ((cache.zn.array().colwise() * g.array()).colwise() + b.array()).matrix();
}

Mat ln_bwd(const Mat& dy, const LnCache& cache, ConstVecMap g, VecMap dg, VecMap db) {
    dg += (dy.array() * cache.zn.array()).rowwise().sum().matrix();
    db += dy.rowwise().sum();
    Mat dzn = (dy.array().colwise() * g.array()).matrix();
    Eigen::RowVectorXd m1 = dzn.colwise().mean();
    Eigen::RowVectorXd m2 = (dzn.array() * cache.zn.array()).colwise().mean();
    return (((dzn.array().rowwise() - m1.array()) -
             cache.zn.array().rowwise() * m2.array())
                .rowwise() /
            cache.scale.array())
        .matrix();
}

Mat silu_mat(const Mat& x) {
    return x.unaryExpr([](double v) { return silu(v); });
}

Mat silu_grad_mat(const Mat& x) {
    return x.unaryExpr([](double v) { return silu_grad(v); });
}

}  // namespace

void BackboneConfig::validate() const {
    require(layers >= 1 && hidden >= 1 && heads >= 1 && ff >= 1, "backbone: bad dimensions");
    require(hidden % heads == 0, "backbone: hidden size must be divisible by heads");
    require(noise_emb_dim >= 2 && noise_emb_dim % 2 == 0,
            "backbone: noise_emb_dim must be even and >= 2");
    require(dropout >= 0.0 && dropout < 1.0, "backbone: dropout must be in [0,1)");
    require(lora_rank >= 0, "backbone: lora rank must be >= 0");
    require(codec_r >= 1, "backbone: codec latent dimension must be >= 1");
}

Model::Model(BackboneConfig config, int vocab_size, int num_features, bool learnable_rho)
    : config_(config), vocab_size_(vocab_size), num_features_(num_features) {
    config_.validate();
    require(vocab_size_ >= 1, "model: empty vocabulary");
    require(num_features_ >= 0, "model: negative feature count");
    const int d = config_.hidden;
    const int f = config_.ff;
    const int r = config_.codec_r;
    const int h = config_.proj_hidden();
    const int e = config_.noise_emb_dim;

    auto& p = params_;
    p.add("emb.tok", d, vocab_size_);
    p.add("emb.pos", d, config_.max_len);
    p.add("head.bias", vocab_size_);
    for (int i = 0; i < config_.layers; ++i) {
        const std::string l = "l" + std::to_string(i) + ".";
        p.add(l + "ln1.g", d);
        p.add(l + "ln1.b", d);
        for (const char* name : {"wq", "wk", "wv", "wo"}) {
            p.add(l + "attn." + name, d, d);
            p.add(l + "attn.b" + std::string(name + 1), d);
        }
        p.add(l + "ln2.g", d);
        p.add(l + "ln2.b", d);
        p.add(l + "ff.w1", f, d);
        p.add(l + "ff.b1", f);
        p.add(l + "ff.w2", d, f);
        p.add(l + "ff.b2", d);
        if (config_.lora_rank > 0) {
            for (const char* name : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
                p.add(l + name + ".la", config_.lora_rank, d);
                p.add(l + name + ".lb", d, config_.lora_rank);
            }
            p.add(l + "ff.w1.la", config_.lora_rank, d);
            p.add(l + "ff.w1.lb", f, config_.lora_rank);
            p.add(l + "ff.w2.la", config_.lora_rank, f);
            p.add(l + "ff.w2.lb", d, config_.lora_rank);
        }
    }
    p.add("lnf.g", d);
    p.add("lnf.b", d);
    p.add("noise.w1", d, e);
    p.add("noise.b1", d);
    p.add("noise.w2", d, d);
    p.add("noise.b2", d);
    p.add("proj_e.ln.g", r);
    p.add("proj_e.ln.b", r);
    p.add("proj_e.w1", h, r);
    p.add("proj_e.b1", h);
    p.add("proj_e.w2", d, h);
    p.add("proj_e.b2", d);
    p.add("proj_d.ln.g", d);
    p.add("proj_d.ln.b", d);
    p.add("proj_d.w1", h, d);
    p.add("proj_d.b1", h);
    p.add("proj_d.w2", r, h);
    p.add("proj_d.b2", r);
    if (learnable_rho && num_features_ > 0) {
        p.add("sched.log_rho", num_features_);
    }
    p.finalize();
}

void Model::init(std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x4d4f44454cull);
    const double resid_scale = 1.0 / std::sqrt(2.0 * config_.layers);
    for (const auto& e : params_.entries()) {
        MatMap m = params_.mat(e.name);
        const bool is_vec = e.cols == 1;
        const bool is_norm_gain = e.name.ends_with(".g") || e.name == "lnf.g";
        if (is_vec) {
            m.setZero();
            if (is_norm_gain) m.setOnes();
            continue;
        }
        double scale;
        if (e.name.starts_with("emb.")) {
            scale = 0.02;
        } else if (e.name.ends_with(".lb")) {
            scale = 0.0;  // adapters start as the identity
        } else {
            scale = std::sqrt(2.0 / (e.rows + e.cols));
        }
        if (e.name.find("attn.wo") != std::string::npos && !e.name.ends_with(".la") &&
            !e.name.ends_with(".lb")) {
            scale *= resid_scale;
        }
        if (e.name.find("ff.w2") != std::string::npos && !e.name.ends_with(".la") &&
            !e.name.ends_with(".lb")) {
            scale *= resid_scale;
        }
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                m(i, j) = scale * normal01(rng);
            }
        }
    }
}

Mat Model::lin_fwd(const std::string& w, const std::string& b, const Mat& x, Mat* ax) const {
    Mat y = params_.mat(w) * x;
    if (!b.empty()) {
        y.colwise() += Vec(params_.vec(b));
    }
    const std::string la = w + ".la";
    if (params_.has(la)) {
        Mat a = params_.mat(la) * x;
        const double s = config_.lora_alpha / config_.lora_rank;
        y.noalias() += s * (params_.mat(w + ".lb") * a);
        if (ax) *ax = std::move(a);
    }
    return y;
}

Mat Model::lin_bwd(const std::string& w, const std::string& b, const Mat& x, const Mat& dy,
                   const Mat* ax, ParamStore& grads) const {
    grads.mat(w) += dy * x.transpose();
    if (!b.empty()) {
        grads.vec(b) += dy.rowwise().sum();
    }
    Mat dx = params_.mat(w).transpose() * dy;
    const std::string la = w + ".la";
    if (params_.has(la)) {
        const double s = config_.lora_alpha / config_.lora_rank;
        grads.mat(w + ".lb") += s * dy * ax->transpose();
        Mat da = s * params_.mat(w + ".lb").transpose() * dy;
        grads.mat(la) += da * x.transpose();
        dx.noalias() += params_.mat(la).transpose() * da;
    }
    return dx;
}

Mat Model::sinusoidal_features(const Vec& sigmas) const {
    const int e = config_.noise_emb_dim;
    const int half = e / 2;
    const int n = static_cast<int>(sigmas.size());
    Mat feats(e, n);
    for (int k = 0; k < n; ++k) {
        require(sigmas[k] > 0.0, "noise embedding: sigma must be positive");
        const double w = std::log(sigmas[k]);
        for (int i = 0; i < half; ++i) {
            const double freq =
                std::exp(-std::log(10000.0) * static_cast<double>(i) / std::max(1, half - 1));
            feats(i, k) = std::cos(w * freq);
            feats(half + i, k) = std::sin(w * freq);
        }
    }
    return feats;
}

Vec Model::noise_embedding(double sigma) const {
    Vec s(1);
    s[0] = sigma;
    Mat feats = sinusoidal_features(s);
    Mat a = lin_fwd("noise.w1", "noise.b1", feats, nullptr);
    return lin_fwd("noise.w2", "noise.b2", silu_mat(a), nullptr).col(0);
}

Vec Model::project_numeric(const Vec& enc_latent) const {
    require(enc_latent.size() == config_.codec_r, "project_numeric: latent dimension mismatch");
    LnCache ln;
    Mat z = enc_latent;
    Mat nz = ln_fwd(z, params_.vec("proj_e.ln.g"), params_.vec("proj_e.ln.b"), ln);
    Mat a = lin_fwd("proj_e.w1", "proj_e.b1", nz, nullptr);
    return lin_fwd("proj_e.w2", "proj_e.b2", silu_mat(a), nullptr).col(0);
}

double Model::decode_hidden(const Vec& hidden_column, const FloatCodec& codec) const {
    require(hidden_column.size() == config_.hidden, "decode_hidden: dimension mismatch");
    LnCache ln;
    Mat h = hidden_column;
    Mat nh = ln_fwd(h, params_.vec("proj_d.ln.g"), params_.vec("proj_d.ln.b"), ln);
    Mat a = lin_fwd("proj_d.w1", "proj_d.b1", nh, nullptr);
    Mat z = lin_fwd("proj_d.w2", "proj_d.b2", silu_mat(a), nullptr);
    return codec.decode(z.col(0));
}

Mat Model::embed(const std::vector<int>& tokens, const Mat& numeric_latents,
                 const Vec& sigmas) const {
    const int s_len = static_cast<int>(tokens.size());
    require(s_len <= config_.max_len, "embed: sequence exceeds max length");
    ConstMatMap tok = params_.mat("emb.tok");
    ConstMatMap pos = params_.mat("emb.pos");
    Mat x(config_.hidden, s_len);
    int placeholder = 0;
    Mat noise_out;
    if (sigmas.size() > 0) {
        require(numeric_latents.cols() == sigmas.size(),
                "embed: latent count must match sigma count");
        Mat feats = sinusoidal_features(sigmas);
        Mat a = lin_fwd("noise.w1", "noise.b1", feats, nullptr);
        noise_out = lin_fwd("noise.w2", "noise.b2", silu_mat(a), nullptr);
    }
    for (int i = 0; i < s_len; ++i) {
        if (tokens[i] == 5 /* [NUM] */ && placeholder < numeric_latents.cols()) {
            x.col(i) = numeric_latents.col(placeholder) + noise_out.col(placeholder);
            ++placeholder;
        } else {
            require(tokens[i] >= 0 && tokens[i] < vocab_size_, "embed: token id out of range");
            x.col(i) = tok.col(tokens[i]);
        }
        x.col(i) += pos.col(i);
    }
    return x;
}

Mat Model::lm_head(const Mat& hidden) const {
    Mat logits = params_.mat("emb.tok").transpose() * hidden;
    logits.colwise() += Vec(params_.vec("head.bias"));
    return logits;
}

void Model::forward(const std::vector<int>& tokens, const Vec& num_values, const Vec& sigmas,
                    const FloatCodec& codec, ForwardTrace& trace, const Mat* drop_e,
                    const Mat* drop_d) const {
    const int s_len = static_cast<int>(tokens.size());
    require(s_len >= 1 && s_len <= config_.max_len, "forward: bad sequence length");
    const int n = static_cast<int>(num_values.size());
    require(sigmas.size() == n, "forward: values/sigmas mismatch");
    require(n == num_features_, "forward: placeholder count mismatch");
    const int d = config_.hidden;
    const int r = config_.codec_r;

    trace.tokens = tokens;
    trace.seq_len = s_len;
    trace.num_values = num_values;
    trace.sigmas = sigmas;

    // numeric path: frozen ENC, trainable input projector, noise embedding
    trace.enc_latents.resize(r, n);
    for (int k = 0; k < n; ++k) {
        trace.enc_latents.col(k) = codec.encode(num_values[k]);
    }
    if (n > 0) {
        trace.pe_ln_out = ln_fwd(trace.enc_latents, params_.vec("proj_e.ln.g"),
                                 params_.vec("proj_e.ln.b"), trace.pe_ln);
        trace.pe_a = lin_fwd("proj_e.w1", "proj_e.b1", trace.pe_ln_out, nullptr);
        trace.pe_h = silu_mat(trace.pe_a);
        trace.pe_mask = drop_e ? *drop_e : Mat();
        trace.pe_hd = drop_e ? trace.pe_h.cwiseProduct(*drop_e) : trace.pe_h;
        trace.pe_out = lin_fwd("proj_e.w2", "proj_e.b2", trace.pe_hd, nullptr);

        trace.noise_feats = sinusoidal_features(sigmas);
        trace.noise_a = lin_fwd("noise.w1", "noise.b1", trace.noise_feats, nullptr);
        trace.noise_h = silu_mat(trace.noise_a);
        trace.noise_out = lin_fwd("noise.w2", "noise.b2", trace.noise_h, nullptr);
    }

    // token embeddings + positions; numeric placeholders use the projector path
    ConstMatMap tok_table = params_.mat("emb.tok");
    ConstMatMap pos_table = params_.mat("emb.pos");
    trace.x0.resize(d, s_len);
    int placeholder = 0;
    for (int i = 0; i < s_len; ++i) {
        if (tokens[i] == 5 /* [NUM] */ && placeholder < n) {
            trace.x0.col(i) = trace.pe_out.col(placeholder) + trace.noise_out.col(placeholder);
            ++placeholder;
        } else {
            require(tokens[i] >= 0 && tokens[i] < vocab_size_, "forward: token id out of range");
            trace.x0.col(i) = tok_table.col(tokens[i]);
        }
    }
    check(placeholder == n, "forward: token stream has fewer [NUM] slots than values");
    trace.x0 += pos_table.leftCols(s_len);

    // transformer blocks, pre-norm residual, bidirectional attention
    const int heads = config_.heads;
    const int dh = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    trace.layers.assign(config_.layers, {});
    Mat x = trace.x0;
    for (int li = 0; li < config_.layers; ++li) {
        const std::string l = "l" + std::to_string(li) + ".";
        LayerCache& c = trace.layers[li];
        c.x_in = x;
        c.ln1_out = ln_fwd(x, params_.vec(l + "ln1.g"), params_.vec(l + "ln1.b"), c.ln1);
        c.q = lin_fwd(l + "attn.wq", l + "attn.bq", c.ln1_out, &c.ax_q);
        c.k = lin_fwd(l + "attn.wk", l + "attn.bk", c.ln1_out, &c.ax_k);
        c.v = lin_fwd(l + "attn.wv", l + "attn.bv", c.ln1_out, &c.ax_v);
        c.attn.resize(heads);
        c.attn_concat.resize(d, s_len);
        for (int h = 0; h < heads; ++h) {
            auto qh = c.q.middleRows(h * dh, dh);
            auto kh = c.k.middleRows(h * dh, dh);
            auto vh = c.v.middleRows(h * dh, dh);
            Mat scores = (qh.transpose() * kh) * inv_sqrt;  // rows: query, cols: key
            Vec rowmax = scores.rowwise().maxCoeff();
            Mat p = (scores.colwise() - rowmax).array().exp();
            Vec rowsum = p.rowwise().sum();
            p.array().colwise() /= rowsum.array();
            c.attn[h] = std::move(p);
            c.attn_concat.middleRows(h * dh, dh) = vh * c.attn[h].transpose();
        }
        Mat o = lin_fwd(l + "attn.wo", l + "attn.bo", c.attn_concat, &c.ax_o);
        c.x_mid = x + o;

        c.ln2_out = ln_fwd(c.x_mid, params_.vec(l + "ln2.g"), params_.vec(l + "ln2.b"), c.ln2);
        c.ff_a = lin_fwd(l + "ff.w1", l + "ff.b1", c.ln2_out, &c.ax_f1);
        c.ff_h = silu_mat(c.ff_a);
        Mat f = lin_fwd(l + "ff.w2", l + "ff.b2", c.ff_h, &c.ax_f2);
        x = c.x_mid + f;
    }
    trace.hidden = ln_fwd(x, params_.vec("lnf.g"), params_.vec("lnf.b"), trace.lnf);
    trace.logits = lm_head(trace.hidden);

    // decode path: output projector + frozen DEC at placeholder positions
    if (n > 0) {
        Mat h_num(d, n);
        for (int k = 0; k < n; ++k) {
            // placeholder k sits at the k-th [NUM] position in the stream
            int seen = 0;
            for (int i = 0; i < s_len; ++i) {
                if (tokens[i] == 5 && seen++ == k) {
                    h_num.col(k) = trace.hidden.col(i);
                    break;
                }
            }
        }
        trace.pd_ln_out =
            ln_fwd(h_num, params_.vec("proj_d.ln.g"), params_.vec("proj_d.ln.b"), trace.pd_ln);
        trace.pd_a = lin_fwd("proj_d.w1", "proj_d.b1", trace.pd_ln_out, nullptr);
        trace.pd_h = silu_mat(trace.pd_a);
        trace.pd_mask = drop_d ? *drop_d : Mat();
        trace.pd_hd = drop_d ? trace.pd_h.cwiseProduct(*drop_d) : trace.pd_h;
        trace.pd_z = lin_fwd("proj_d.w2", "proj_d.b2", trace.pd_hd, nullptr);
        trace.x_pred.resize(n);
        for (int k = 0; k < n; ++k) {
            trace.x_pred[k] = codec.decode(trace.pd_z.col(k));
        }
    } else {
        trace.x_pred.resize(0);
    }
}

void Model::backward(const ForwardTrace& trace, const Mat& dlogits, const Vec& dx_pred,
                     const FloatCodec& codec, ParamStore& grads, Mat* d_enc_latents,
                     Vec* d_log_sigma) const {
    const int s_len = trace.seq_len;
    const int n = static_cast<int>(trace.num_values.size());
    const int d = config_.hidden;
    require(dlogits.rows() == vocab_size_ && dlogits.cols() == s_len, "backward: dlogits shape");
    require(dx_pred.size() == n, "backward: dx_pred size");

    // head: logits = emb.tok^T * hidden + bias
    grads.mat("emb.tok") += trace.hidden * dlogits.transpose();
    grads.vec("head.bias") += dlogits.rowwise().sum();
    Mat dhidden = params_.mat("emb.tok") * dlogits;

    // decode path into the hidden states at placeholder positions
    if (n > 0) {
        Mat dz(config_.codec_r, n);
        for (int k = 0; k < n; ++k) {
            dz.col(k) = codec.decode_input_grad(trace.pd_z.col(k), dx_pred[k]);
        }
        Mat dhd = lin_bwd("proj_d.w2", "proj_d.b2", trace.pd_hd, dz, nullptr, grads);
        if (trace.pd_mask.size() > 0) {
            dhd = dhd.cwiseProduct(trace.pd_mask);
        }
        Mat dpd_a = dhd.cwiseProduct(silu_grad_mat(trace.pd_a));
        Mat dpd_ln_out = lin_bwd("proj_d.w1", "proj_d.b1", trace.pd_ln_out, dpd_a, nullptr, grads);
        Mat dh_num = ln_bwd(dpd_ln_out, trace.pd_ln, params_.vec("proj_d.ln.g"),
                            grads.vec("proj_d.ln.g"), grads.vec("proj_d.ln.b"));
        int seen = 0;
        for (int i = 0; i < s_len && seen < n; ++i) {
            if (trace.tokens[i] == 5) {
                dhidden.col(i) += dh_num.col(seen++);
            }
        }
    }

    // final norm
    Mat dx = ln_bwd(dhidden, trace.lnf, params_.vec("lnf.g"), grads.vec("lnf.g"),
                    grads.vec("lnf.b"));

    const int heads = config_.heads;
    const int dh_dim = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh_dim));
    for (int li = config_.layers - 1; li >= 0; --li) {
        const std::string l = "l" + std::to_string(li) + ".";
        const LayerCache& c = trace.layers[li];

        // feed-forward block
        Mat dffh = lin_bwd(l + "ff.w2", l + "ff.b2", c.ff_h, dx, &c.ax_f2, grads);
        Mat dffa = dffh.cwiseProduct(silu_grad_mat(c.ff_a));
        Mat dln2_out = lin_bwd(l + "ff.w1", l + "ff.b1", c.ln2_out, dffa, &c.ax_f1, grads);
        Mat dx_mid = dx + ln_bwd(dln2_out, c.ln2, params_.vec(l + "ln2.g"),
                                 grads.vec(l + "ln2.g"), grads.vec(l + "ln2.b"));

        // attention block
        Mat dconcat = lin_bwd(l + "attn.wo", l + "attn.bo", c.attn_concat, dx_mid, &c.ax_o, grads);
        Mat dq(d, s_len), dk(d, s_len), dv(d, s_len);
        for (int h = 0; h < heads; ++h) {
            auto doh = dconcat.middleRows(h * dh_dim, dh_dim);
            auto vh = c.v.middleRows(h * dh_dim, dh_dim);
            auto qh = c.q.middleRows(h * dh_dim, dh_dim);
            auto kh = c.k.middleRows(h * dh_dim, dh_dim);
            const Mat& p = c.attn[h];
            Mat dvh = doh * p;              // dh x S
            Mat dp = doh.transpose() * vh;  // S x S
            // softmax backward, rows are distributions
            Vec inner = (dp.array() * p.array()).rowwise().sum();
            Mat ds = p.array() * (dp.array().colwise() - inner.array());
            Mat dqh = inv_sqrt * kh * ds.transpose();
            Mat dkh = inv_sqrt * qh * ds;
            dq.middleRows(h * dh_dim, dh_dim) = dqh;
            dk.middleRows(h * dh_dim, dh_dim) = dkh;
            dv.middleRows(h * dh_dim, dh_dim) = dvh;
        }
        Mat da = lin_bwd(l + "attn.wq", l + "attn.bq", c.ln1_out, dq, &c.ax_q, grads);
        da += lin_bwd(l + "attn.wk", l + "attn.bk", c.ln1_out, dk, &c.ax_k, grads);
        da += lin_bwd(l + "attn.wv", l + "attn.bv", c.ln1_out, dv, &c.ax_v, grads);
        dx = dx_mid + ln_bwd(da, c.ln1, params_.vec(l + "ln1.g"), grads.vec(l + "ln1.g"),
                             grads.vec(l + "ln1.b"));
    }

    // embedding backward
    grads.mat("emb.pos").leftCols(s_len) += dx;
    int placeholder = 0;
    Mat d_pe_out(d, std::max(n, 0));
    Mat d_noise_out(d, std::max(n, 0));
    for (int i = 0; i < s_len; ++i) {
        if (trace.tokens[i] == 5 && placeholder < n) {
            d_pe_out.col(placeholder) = dx.col(i);
            d_noise_out.col(placeholder) = dx.col(i);
            ++placeholder;
        } else {
            grads.mat("emb.tok").col(trace.tokens[i]) += dx.col(i);
        }
    }

    if (n > 0) {
        // input projector backward
        Mat dpe_hd = lin_bwd("proj_e.w2", "proj_e.b2", trace.pe_hd, d_pe_out, nullptr, grads);
        if (trace.pe_mask.size() > 0) {
            dpe_hd = dpe_hd.cwiseProduct(trace.pe_mask);
        }
        Mat dpe_a = dpe_hd.cwiseProduct(silu_grad_mat(trace.pe_a));
        Mat dpe_ln_out = lin_bwd("proj_e.w1", "proj_e.b1", trace.pe_ln_out, dpe_a, nullptr, grads);
        Mat denc = ln_bwd(dpe_ln_out, trace.pe_ln, params_.vec("proj_e.ln.g"),
                          grads.vec("proj_e.ln.g"), grads.vec("proj_e.ln.b"));
        if (d_enc_latents) *d_enc_latents = denc;

        // noise embedding backward
        Mat dnh = lin_bwd("noise.w2", "noise.b2", trace.noise_h, d_noise_out, nullptr, grads);
        Mat dna = dnh.cwiseProduct(silu_grad_mat(trace.noise_a));
        Mat dfeats = lin_bwd("noise.w1", "noise.b1", trace.noise_feats, dna, nullptr, grads);
        if (d_log_sigma) {
            const int half = config_.noise_emb_dim / 2;
            d_log_sigma->resize(n);
            for (int k = 0; k < n; ++k) {
                const double w = std::log(trace.sigmas[k]);
                double acc = 0.0;
                for (int i = 0; i < half; ++i) {
                    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                                 std::max(1, half - 1));
                    acc += dfeats(i, k) * (-freq * std::sin(w * freq));
                    acc += dfeats(half + i, k) * (freq * std::cos(w * freq));
                }
                (*d_log_sigma)[k] = acc;
            }
        }
    } else if (d_log_sigma) {
        d_log_sigma->resize(0);
    }
}

Vec Model::decay_mask() const {
    Vec mask = Vec::Zero(static_cast<Eigen::Index>(params_.size()));
    for (const auto& e : params_.entries()) {
        if (e.cols > 1) {
            mask.segment(static_cast<Eigen::Index>(e.offset),
                         static_cast<Eigen::Index>(e.rows) * e.cols)
                .setOnes();
        }
    }
    return mask;
}

std::vector<std::uint8_t> Model::trainable_mask() const {
    std::vector<std::uint8_t> mask(params_.size(), 1);
    if (config_.lora_rank == 0) {
        return mask;
    }
    std::fill(mask.begin(), mask.end(), 0);
    for (const auto& e : params_.entries()) {
        const bool adapter = e.name.ends_with(".la") || e.name.ends_with(".lb");
        const bool numeric_side =
            e.name.starts_with("proj_e.") || e.name.starts_with("proj_d.") ||
            e.name.starts_with("noise.") || e.name.starts_with("sched.");
        if (adapter || numeric_side) {
            std::fill(mask.begin() + e.offset,
                      mask.begin() + e.offset + static_cast<std::size_t>(e.rows) * e.cols, 1);
        }
    }
    return mask;
}

std::uint64_t Model::checksum() const {
    const auto& d = params_.data();
    std::string bytes(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
    return fnv1a64(bytes);
}

}  // namespace tabgen
