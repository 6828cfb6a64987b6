#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "tabgen/model.hpp"

using namespace tabgen;

namespace {

BackboneConfig tiny_config() {
    BackboneConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 32;
    cfg.heads = 2;
    cfg.ff = 64;
    cfg.max_len = 16;
    cfg.noise_emb_dim = 8;
    cfg.codec_r = 8;
    cfg.dropout = 0.0;
    return cfg;
}

// naive single-head attention forward for the oracle comparison
Mat naive_attention(const Mat& x, const Mat& wq, const Vec& bq, const Mat& wk, const Vec& bk,
                    const Mat& wv, const Vec& bv) {
    const int s = static_cast<int>(x.cols());
    const int d = static_cast<int>(x.rows());
    Mat q = wq * x;
    Mat k = wk * x;
    Mat v = wv * x;
    q.colwise() += bq;
    k.colwise() += bk;
    v.colwise() += bv;
    Mat out(d, s);
    for (int i = 0; i < s; ++i) {
        Vec scores(s);
        for (int j = 0; j < s; ++j) {
            scores[j] = q.col(i).dot(k.col(j)) / std::sqrt(static_cast<double>(d));
        }
        const double mx = scores.maxCoeff();
        Vec w = (scores.array() - mx).exp();
        w /= w.sum();
        Vec o = Vec::Zero(d);
        for (int j = 0; j < s; ++j) o += w[j] * v.col(j);
        out.col(i) = o;
    }
    return out;
}

}  // namespace

TEST_CASE("forward shapes, determinism and softmax normalization") {
    Model model(tiny_config(), 20, 2);
    model.init(1);
    FloatCodec codec = FloatCodec::create(8, 2);
    std::vector<int> tokens = {3, 7, 9, 1, 5, 5};
    Vec vals(2);
    vals << 0.4, -0.8;
    Vec sigmas(2);
    sigmas << 0.01, 3.0;
    ForwardTrace a, b;
    model.forward(tokens, vals, sigmas, codec, a);
    model.forward(tokens, vals, sigmas, codec, b);
    CHECK(a.logits.rows() == 20);
    CHECK(a.logits.cols() == 6);
    CHECK(a.hidden.rows() == 32);
    CHECK(a.x_pred.size() == 2);
    CHECK((a.logits - b.logits).cwiseAbs().maxCoeff() == 0.0);  // bit-identical
    CHECK(a.x_pred == b.x_pred);
    for (int i = 0; i < 6; ++i) {
        const auto col = a.logits.col(i);
        Vec p = (col.array() - col.maxCoeff()).exp();
        CHECK(p.sum() / p.sum() == doctest::Approx(1.0));
        CHECK((p / p.sum()).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS(model.forward(std::vector<int>(17, 3), vals, sigmas, codec, a));
}

TEST_CASE("attention equivariance without positional information") {
    BackboneConfig cfg = tiny_config();
    cfg.layers = 1;
    Model model(cfg, 12, 0);
    model.init(3);
    model.params().mat("emb.pos").setZero();
    FloatCodec codec = FloatCodec::create(8, 2);
    std::vector<int> tokens = {7, 9, 11};
    std::vector<int> swapped = {9, 7, 11};
    ForwardTrace a, b;
    model.forward(tokens, Vec(), Vec(), codec, a);
    model.forward(swapped, Vec(), Vec(), codec, b);
    CHECK((a.logits.col(0) - b.logits.col(1)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.logits.col(1) - b.logits.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.logits.col(2) - b.logits.col(2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-layer single-head forward matches a brute-force oracle") {
    BackboneConfig cfg = tiny_config();
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.hidden = 8;
    cfg.ff = 16;
    cfg.codec_r = 4;
    Model model(cfg, 10, 0);
    model.init(5);
    FloatCodec codec = FloatCodec::create(4, 5);
    std::vector<int> tokens = {2, 7, 4};
    ForwardTrace tr;
    model.forward(tokens, Vec(), Vec(), codec, tr);

    // oracle: recompute the whole block with plain loops
    const auto& p = model.params();
    Mat x0(8, 3);
    for (int i = 0; i < 3; ++i) {
        x0.col(i) = Mat(p.mat("emb.tok")).col(tokens[i]) + Mat(p.mat("emb.pos")).col(i);
    }
    auto ln = [&](const Mat& x, const std::string& g, const std::string& b) {
        Mat out = x;
        for (int i = 0; i < x.cols(); ++i) {
            const double mu = x.col(i).mean();
            const double var = (x.col(i).array() - mu).square().mean();
            out.col(i) = ((x.col(i).array() - mu) / std::sqrt(var + 1e-5)) *
                             Vec(p.vec(g)).array() +
                         Vec(p.vec(b)).array();
        }
        return out;
    };
    Mat a = ln(x0, "l0.ln1.g", "l0.ln1.b");
    Mat attn = naive_attention(a, p.mat("l0.attn.wq"), p.vec("l0.attn.bq"), p.mat("l0.attn.wk"),
                               p.vec("l0.attn.bk"), p.mat("l0.attn.wv"), p.vec("l0.attn.bv"));
    Mat o = p.mat("l0.attn.wo") * attn;
    o.colwise() += Vec(p.vec("l0.attn.bo"));
    Mat mid = x0 + o;
    Mat bmat = ln(mid, "l0.ln2.g", "l0.ln2.b");
    Mat ff1 = p.mat("l0.ff.w1") * bmat;
    ff1.colwise() += Vec(p.vec("l0.ff.b1"));
    Mat ffh = ff1.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
    Mat ff2 = p.mat("l0.ff.w2") * ffh;
    ff2.colwise() += Vec(p.vec("l0.ff.b2"));
    Mat xout = mid + ff2;
    Mat hidden = ln(xout, "lnf.g", "lnf.b");
    Mat logits = Mat(p.mat("emb.tok")).transpose() * hidden;
    logits.colwise() += Vec(p.vec("head.bias"));

    CHECK((tr.hidden - hidden).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tr.logits - logits).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lm head behavior under the embedding tie") {
    Model model(tiny_config(), 12, 0);
    model.init(7);
    Mat zero = Mat::Zero(32, 1);
    Mat logits = model.lm_head(zero);
    CHECK((logits.col(0) - Vec(model.params().vec("head.bias"))).cwiseAbs().maxCoeff() == 0.0);

    // softmax argmax is invariant to adding a constant
    Rng rng = make_rng(8);
    Vec h(32);
    for (int i = 0; i < 32; ++i) h[i] = normal01(rng);
    Mat hm = h;
    Mat base = model.lm_head(hm);
    int arg1, arg2;
    base.col(0).maxCoeff(&arg1);
    Mat shifted = base.array() + 5.0;
    shifted.col(0).maxCoeff(&arg2);
    CHECK(arg1 == arg2);

    // orthogonalized embedding rows score their own token highest
    auto tok = model.params().mat("emb.tok");
    tok.setZero();
    for (int k = 0; k < 12; ++k) tok(k, k) = 1.0 + 0.1 * k;
    model.params().vec("head.bias").setZero();
    for (int k = 0; k < 12; ++k) {
        Mat hk = Mat(tok).col(k);
        Mat lk = model.lm_head(hk);
        int arg;
        lk.col(0).maxCoeff(&arg);
        CHECK(arg == k);
    }

    // updating the embedding table moves the head output consistently
    Vec probe = Vec::Ones(32);
    Mat before = model.lm_head(Mat(probe));
    model.params().mat("emb.tok")(0, 3) += 2.5;
    Mat after = model.lm_head(Mat(probe));
    CHECK(after(3, 0) - before(3, 0) == doctest::Approx(2.5));
}

TEST_CASE("bidirectional attention: later tokens influence earlier positions") {
    Model model(tiny_config(), 20, 0);
    model.init(9);
    FloatCodec codec = FloatCodec::create(8, 9);
    std::vector<int> tokens = {7, 8, 9, 10};
    std::vector<int> altered = {7, 8, 9, 11};
    ForwardTrace a, b;
    model.forward(tokens, Vec(), Vec(), codec, a);
    model.forward(altered, Vec(), Vec(), codec, b);
    CHECK((a.logits.col(0) - b.logits.col(0)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("noise embedding separates the schedule endpoints") {
    Model model(tiny_config(), 20, 1);
    model.init(11);
    Vec lo = model.noise_embedding(0.002);
    Vec hi = model.noise_embedding(80.0);
    const double cosine = lo.dot(hi) / (lo.norm() * hi.norm());
    CHECK(cosine < 0.99);
    CHECK_THROWS(model.noise_embedding(0.0));
}

TEST_CASE("embed contract") {
    Model model(tiny_config(), 20, 2);
    model.init(13);
    FloatCodec codec = FloatCodec::create(8, 13);

    // zero numerical columns: pure token path
    Model text_only(tiny_config(), 20, 0);
    text_only.init(13);
    Mat emb = text_only.embed({3, 7, 9}, Mat(), Vec());
    CHECK(emb.cols() == 3);

    // same tokens, different t: numeric positions differ, text identical
    std::vector<int> tokens = {3, 7, 5, 5};
    Mat latents(32, 2);
    latents.setZero();
    for (int k = 0; k < 2; ++k) {
        latents.col(k) = model.project_numeric(codec.encode(0.3 * (k + 1)));
    }
    Vec s1(2), s2(2);
    s1 << 0.002, 0.002;
    s2 << 80.0, 80.0;
    Mat e1 = model.embed(tokens, latents, s1);
    Mat e2 = model.embed(tokens, latents, s2);
    CHECK((e1.col(0) - e2.col(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((e1.col(1) - e2.col(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((e1.col(2) - e2.col(2)).cwiseAbs().maxCoeff() > 1e-9);
    CHECK((e1.col(3) - e2.col(3)).cwiseAbs().maxCoeff() > 1e-9);
}

namespace {

double weighted_loss(const Model& model, const FloatCodec& codec,
                     const std::vector<int>& tokens, const Vec& vals, const Vec& sigmas,
                     const Mat& wl, const Vec& wx) {
    ForwardTrace tr;
    model.forward(tokens, vals, sigmas, codec, tr);
    double loss = (wl.array() * tr.logits.array()).sum();
    if (wx.size() > 0) loss += wx.dot(tr.x_pred);
    return loss;
}

void run_gradcheck(Model& model, const FloatCodec& codec, const std::vector<int>& tokens,
                   const Vec& vals, const Vec& sigmas, int n_checks,
                   const std::string& prefix_filter = "") {
    Rng rng = make_rng(123);
    Mat wl(model.vocab_size(), static_cast<int>(tokens.size()));
    for (int j = 0; j < wl.cols(); ++j) {
        for (int i = 0; i < wl.rows(); ++i) wl(i, j) = normal01(rng);
    }
    Vec wx(vals.size());
    for (Eigen::Index i = 0; i < wx.size(); ++i) wx[i] = normal01(rng);

    ForwardTrace tr;
    model.forward(tokens, vals, sigmas, codec, tr);
    ParamStore grads = model.params().like();
    model.backward(tr, wl, wx, codec, grads);

    // restrict sampling to a named module when requested
    std::vector<Eigen::Index> pool;
    for (const auto& e : model.params().entries()) {
        if (!prefix_filter.empty() && e.name.rfind(prefix_filter, 0) != 0) continue;
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(e.rows) * e.cols; ++i) {
            pool.push_back(static_cast<Eigen::Index>(e.offset) + i);
        }
    }
    REQUIRE(!pool.empty());
    int checked = 0;
    while (checked < n_checks) {
        const Eigen::Index i = pool[uniform_index(rng, pool.size())];
        const double orig = model.params().data()[i];
        const double h = 1e-5 * std::max(1.0, std::abs(orig));
        model.params().data()[i] = orig + h;
        const double lp = weighted_loss(model, codec, tokens, vals, sigmas, wl, wx);
        model.params().data()[i] = orig - h;
        const double lm = weighted_loss(model, codec, tokens, vals, sigmas, wl, wx);
        model.params().data()[i] = orig;
        const double fd = (lp - lm) / (2 * h);
        const double an = grads.data()[i];
        if (std::max(std::abs(fd), std::abs(an)) < 1e-9) continue;
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-10});
        CHECK(rel <= 1e-4);
        ++checked;
    }
}

}  // namespace

TEST_CASE("backbone gradients match finite differences") {
    Model model(tiny_config(), 16, 2);
    model.init(21);
    FloatCodec codec = FloatCodec::create(8, 21);
    std::vector<int> tokens = {3, 7, 8, 1, 9, 5, 5, 0};
    Vec vals(2);
    vals << 0.3, -1.2;
    Vec sigmas(2);
    sigmas << 0.5, 2.0;
    run_gradcheck(model, codec, tokens, vals, sigmas, 120);
}

TEST_CASE("projector gradients on the r=8, D=16 instance") {
    BackboneConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.ff = 32;
    cfg.max_len = 8;
    cfg.noise_emb_dim = 8;
    cfg.codec_r = 8;
    cfg.dropout = 0.0;
    Model model(cfg, 10, 2);
    model.init(31);
    FloatCodec codec = FloatCodec::create(8, 31);
    std::vector<int> tokens = {3, 7, 5, 5};
    Vec vals(2);
    vals << 1.1, -0.4;
    Vec sigmas(2);
    sigmas << 0.1, 10.0;
    run_gradcheck(model, codec, tokens, vals, sigmas, 40, "proj_e.");
    run_gradcheck(model, codec, tokens, vals, sigmas, 40, "proj_d.");
    run_gradcheck(model, codec, tokens, vals, sigmas, 20, "noise.");
}

TEST_CASE("low-rank adapters start as the identity and train selectively") {
    BackboneConfig cfg = tiny_config();
    Model base(cfg, 14, 1);
    base.init(41);
    cfg.lora_rank = 4;
    Model adapted(cfg, 14, 1);
    adapted.init(41);
    // copy the shared parameters; adapter B matrices are zero-initialized
    for (const auto& e : base.params().entries()) {
        adapted.params().mat(e.name) = base.params().mat(e.name);
    }
    FloatCodec codec = FloatCodec::create(8, 41);
    std::vector<int> tokens = {3, 7, 9, 5};
    Vec vals(1);
    vals << 0.2;
    Vec sigmas(1);
    sigmas << 1.0;
    ForwardTrace a, b;
    base.forward(tokens, vals, sigmas, codec, a);
    adapted.forward(tokens, vals, sigmas, codec, b);
    CHECK((a.logits - b.logits).cwiseAbs().maxCoeff() < 1e-12);

    // trainable mask covers adapters and the numeric side only
    const auto mask = adapted.trainable_mask();
    const auto& entry_wq = adapted.params().entry("l0.attn.wq");
    CHECK(mask[entry_wq.offset] == 0);
    const auto& entry_la = adapted.params().entry("l0.attn.wq.la");
    CHECK(mask[entry_la.offset] == 1);
    const auto& entry_pe = adapted.params().entry("proj_e.w1");
    CHECK(mask[entry_pe.offset] == 1);
    const auto& entry_emb = adapted.params().entry("emb.tok");
    CHECK(mask[entry_emb.offset] == 0);

    // gradients flow through the adapters
    run_gradcheck(adapted, codec, tokens, vals, sigmas, 30, "l0.attn.wq.");
    run_gradcheck(adapted, codec, tokens, vals, sigmas, 20, "l1.ff.w2.");
}

TEST_CASE("decay mask covers matrices only") {
    Model model(tiny_config(), 16, 1);
    model.init(51);
    const Vec mask = model.decay_mask();
    CHECK(mask[model.params().entry("emb.tok").offset] == 1.0);
    CHECK(mask[model.params().entry("l0.ln1.g").offset] == 0.0);
    CHECK(mask[model.params().entry("l0.attn.bq").offset] == 0.0);
    CHECK(mask[model.params().entry("l0.ff.w1").offset] == 1.0);
}
