#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "tabgen/datasets.hpp"
#include "tabgen/diffusion.hpp"

using namespace tabgen;

namespace {

struct Fixture {
    Table table;
    Vocabulary vocab;
    TokenLayout layout;
    std::vector<QuantileNormalizer> normalizers;
    std::vector<SerializedRecord> records;

    explicit Fixture(int n = 64, std::uint64_t seed = 5) : table(gen_mathexpr(n, seed)) {
        vocab = Vocabulary::build(table);
        layout = TokenLayout::build(table, vocab);
        for (int c : table.schema.numerical_indices()) {
            normalizers.push_back(QuantileNormalizer::fit(table.num_cols[table.num_slot(c)]));
        }
        for (std::size_t r = 0; r < table.rows(); ++r) {
            records.push_back(serialize_record(table, r, layout, vocab, normalizers));
        }
    }
};

BackboneConfig small_backbone(int r = 8) {
    BackboneConfig cfg;
    cfg.layers = 2;
    cfg.hidden = 32;
    cfg.heads = 2;
    cfg.ff = 64;
    cfg.max_len = 96;
    cfg.noise_emb_dim = 8;
    cfg.codec_r = r;
    cfg.dropout = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("lambda warm-up schedule") {
    CHECK(lambda_weight(0, 1.0, 2000) == 0.0);
    CHECK(lambda_weight(1000, 1.0, 2000) == doctest::Approx(0.5));
    CHECK(lambda_weight(2000, 1.0, 2000) == doctest::Approx(1.0));
    CHECK(lambda_weight(1000000, 1.0, 2000) == 1.0);
    CHECK(lambda_weight(500, 0.25, 1000) == doctest::Approx(0.125));
    CHECK(lambda_weight(5, 1.0, 0) == 1.0);
    CHECK_THROWS_AS(lambda_weight(-1, 1.0, 2000), std::invalid_argument);
}

TEST_CASE("numeric forward marginals") {
    PowerMeanSchedule sched = PowerMeanSchedule::uniform(1, 7.0);
    Rng rng = make_rng(71);
    for (double t : {0.1, 0.5, 0.9, 1.0}) {
        const double sigma = sched.sigma(t, 0);
        double sum = 0.0, sq = 0.0;
        const int n = 100000;
        Vec x0 = Vec::Zero(1);
        for (int i = 0; i < n; ++i) {
            const double d = forward_noise_numeric(x0, t, sched, rng)[0];
            sum += d;
            sq += d * d;
        }
        const double mean = sum / n;
        const double std = std::sqrt(sq / n - mean * mean);
        CHECK(std::abs(mean) < 0.02 * sigma);
        CHECK(std == doctest::Approx(sigma).epsilon(0.02));
    }
    // t = 0 corrupts at the sigma_min floor only
    Vec x0(1);
    x0 << 1.5;
    const double d0 = forward_noise_numeric(x0, 0.0, sched, rng)[0];
    CHECK(std::abs(d0 - 1.5) < 0.02);
}

TEST_CASE("text masking marginals and prompt immunity") {
    Fixture f(4, 7);
    Rng rng = make_rng(72);
    const MaskSchedule mask;
    const auto& tokens = f.records[0].tokens;

    auto masked0 = forward_mask_text(tokens, 0.0, mask, f.layout, rng);
    CHECK(masked0 == tokens);
    std::vector<std::uint8_t> flags;
    auto masked1 = forward_mask_text(tokens, 1.0, mask, f.layout, rng, &flags);
    for (int i = 0; i < f.layout.seq_len; ++i) {
        if (f.layout.is_maskable(i)) {
            CHECK(masked1[i] == Vocabulary::kMask);
            CHECK(flags[i] == 1);
        } else {
            CHECK(masked1[i] == tokens[i]);
        }
    }

    long masked_count = 0, total = 0;
    const int reps = 100000 / f.layout.maskable_count() + 1;
    for (int rep = 0; rep < reps; ++rep) {
        auto m = forward_mask_text(tokens, 0.3, mask, f.layout, rng);
        for (int i = 0; i < f.layout.seq_len; ++i) {
            if (!f.layout.is_maskable(i)) continue;
            ++total;
            masked_count += m[i] == Vocabulary::kMask ? 1 : 0;
        }
    }
    CHECK(std::abs(static_cast<double>(masked_count) / total - 0.30) < 0.005);
}

TEST_CASE("noisy batch couples both modalities through one t") {
    Fixture f(16, 9);
    Rng rng = make_rng(73);
    NoisyBatch batch = make_noisy_batch(f.records, f.layout, MaskSchedule{}, 0.0, 64, rng);
    REQUIRE(batch.records.size() == 16);
    for (const auto& rec : batch.records) {
        CHECK(rec.t >= 0.0);
        CHECK(rec.t <= 1.0);
        CHECK(rec.eps.size() == 2);
        // mask flags agree with the masked stream and never touch the prompt
        for (int i = 0; i < f.layout.seq_len; ++i) {
            if (rec.masked[i]) {
                CHECK(f.layout.is_maskable(i));
                CHECK(rec.tokens[i] == Vocabulary::kMask);
            } else {
                CHECK(rec.tokens[i] == rec.clean_tokens[i]);
            }
        }
    }
    // dropout masks are drawn only when requested
    Rng rng2 = make_rng(74);
    NoisyBatch with_drop = make_noisy_batch(f.records, f.layout, MaskSchedule{}, 0.1, 64, rng2);
    CHECK(with_drop.records[0].drop_e.rows() == 64);
    CHECK(batch.records[0].drop_e.size() == 0);
}

TEST_CASE("loss identity and lambda scaling") {
    Fixture f(8, 11);
    Model model(small_backbone(), f.vocab.size(), 2);
    model.init(75);
    FloatCodec codec = FloatCodec::create(8, 75);
    Rng rng = make_rng(76);
    NoisyBatch batch = make_noisy_batch(f.records, f.layout, MaskSchedule{}, 0.0, 64, rng);
    PowerMeanSchedule sched = PowerMeanSchedule::uniform(2, 7.0);
    DiffusionConfig cfg;

    LossReport at0 = compute_loss(model, codec, sched, f.layout, batch, 0, cfg, nullptr);
    CHECK(at0.lambda == 0.0);
    CHECK(at0.total == doctest::Approx(at0.l_text));

    LossReport at1k = compute_loss(model, codec, sched, f.layout, batch, 1000, cfg, nullptr);
    CHECK(at1k.lambda == doctest::Approx(0.5));
    CHECK(at1k.total == doctest::Approx(at1k.l_text + 0.5 * at1k.l_num));
    CHECK(at1k.l_text == doctest::Approx(at0.l_text));
    CHECK(at1k.l_num > 0.0);

    // chunked parallel evaluation is identical to single-threaded
    ParamStore g1 = model.params().like();
    ParamStore g8 = model.params().like();
    LossWorkspace ws;
    LossReport r1 = compute_loss(model, codec, sched, f.layout, batch, 1000, cfg, &g1, &ws, 1);
    LossReport r8 = compute_loss(model, codec, sched, f.layout, batch, 1000, cfg, &g8, &ws, 8);
    CHECK(r1.total == doctest::Approx(r8.total).epsilon(1e-12));
    CHECK((g1.data() - g8.data()).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("elbo weighting scales the text loss by 1/t") {
    Fixture f(4, 13);
    Model model(small_backbone(), f.vocab.size(), 2);
    model.init(77);
    FloatCodec codec = FloatCodec::create(8, 77);
    Rng rng = make_rng(78);
    NoisyBatch batch = make_noisy_batch(f.records, f.layout, MaskSchedule{}, 0.0, 64, rng);
    PowerMeanSchedule sched = PowerMeanSchedule::uniform(2, 7.0);
    DiffusionConfig plain;
    DiffusionConfig elbo;
    elbo.text_loss = DiffusionConfig::TextLoss::ElboWeighted;
    LossReport a = compute_loss(model, codec, sched, f.layout, batch, 0, plain, nullptr);
    LossReport b = compute_loss(model, codec, sched, f.layout, batch, 0, elbo, nullptr);
    CHECK(b.l_text >= a.l_text);  // 1/t >= 1 on [0,1]
}

TEST_CASE("full loss gradients match finite differences on the 2-layer D=32 model") {
    Fixture f(6, 17);
    Model model(small_backbone(), f.vocab.size(), 2);
    model.init(79);
    FloatCodec codec = FloatCodec::create(8, 79);
    Rng rng = make_rng(80);
    NoisyBatch batch = make_noisy_batch(f.records, f.layout, MaskSchedule{}, 0.0, 64, rng);
    PowerMeanSchedule sched = PowerMeanSchedule::uniform(2, 7.0);
    DiffusionConfig cfg;
    const long step = 4000;  // past warm-up so lambda = 1 and both paths are live

    ParamStore grads = model.params().like();
    compute_loss(model, codec, sched, f.layout, batch, step, cfg, &grads, nullptr, 1);

    Rng pick = make_rng(81);
    int checked = 0;
    while (checked < 220) {
        const Eigen::Index i =
            static_cast<Eigen::Index>(uniform_index(pick, model.params().size()));
        const double orig = model.params().data()[i];
        const double h = 1e-5 * std::max(1.0, std::abs(orig));
        model.params().data()[i] = orig + h;
        const double lp =
            compute_loss(model, codec, sched, f.layout, batch, step, cfg, nullptr).total;
        model.params().data()[i] = orig - h;
        const double lm =
            compute_loss(model, codec, sched, f.layout, batch, step, cfg, nullptr).total;
        model.params().data()[i] = orig;
        const double fd = (lp - lm) / (2 * h);
        const double an = grads.data()[i];
        if (std::max(std::abs(fd), std::abs(an)) < 1e-9) continue;
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-10});
        CHECK(rel <= 1e-4);
        ++checked;
    }
}

TEST_CASE("loss-coupled rho receives correct gradients") {
    Fixture f(6, 19);
    Model model(small_backbone(), f.vocab.size(), 2, true);
    model.init(83);
    model.params().vec("sched.log_rho").setConstant(std::log(7.0));
    FloatCodec codec = FloatCodec::create(8, 83);
    Rng rng = make_rng(84);
    NoisyBatch batch = make_noisy_batch(f.records, f.layout, MaskSchedule{}, 0.0, 64, rng);
    PowerMeanSchedule base = PowerMeanSchedule::uniform(2, 7.0);
    DiffusionConfig cfg;
    cfg.learnable_rho = true;
    const long step = 4000;

    ParamStore grads = model.params().like();
    PowerMeanSchedule eff = effective_schedule(model, base, true);
    compute_loss(model, codec, eff, f.layout, batch, step, cfg, &grads, nullptr, 1);

    auto loss_at = [&]() {
        PowerMeanSchedule s = effective_schedule(model, base, true);
        return compute_loss(model, codec, s, f.layout, batch, step, cfg, nullptr).total;
    };
    auto log_rho = model.params().vec("sched.log_rho");
    const auto& entry = model.params().entry("sched.log_rho");
    for (int k = 0; k < 2; ++k) {
        const double orig = log_rho[k];
        const double h = 1e-5;
        log_rho[k] = orig + h;
        const double lp = loss_at();
        log_rho[k] = orig - h;
        const double lm = loss_at();
        log_rho[k] = orig;
        const double fd = (lp - lm) / (2 * h);
        const double an = grads.data()[static_cast<Eigen::Index>(entry.offset) + k];
        CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-10}) <= 1e-3);
    }
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    Fixture f(2, 23);
    Model model(small_backbone(), f.vocab.size(), 2);
    model.init(85);
    model.params().mat("emb.tok")(0, 3) = std::nan("");  // poisoned parameter
    FloatCodec codec = FloatCodec::create(8, 85);
    Rng rng = make_rng(86);
    NoisyBatch batch = make_noisy_batch(f.records, f.layout, MaskSchedule{}, 0.0, 64, rng);
    PowerMeanSchedule sched = PowerMeanSchedule::uniform(2, 7.0);
    DiffusionConfig cfg;
    CHECK_THROWS(compute_loss(model, codec, sched, f.layout, batch, 0, cfg, nullptr));
}
