#include "tabgen/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tabgen/datasets.hpp"
#include "tabgen/optim.hpp"

namespace tabgen {

using nlohmann::json;

std::string sidecar_path(const std::string& csv_path, const std::string& suffix) {
    std::string stem = csv_path;
    if (stem.size() > 4 && stem.ends_with(".csv")) {
        stem.resize(stem.size() - 4);
    }
    return stem + suffix;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot open for writing: " + path);
    out << content;
    check(out.good(), "write failed: " + path);
}

void cmd_gen_data(const std::string& dataset, int n, std::uint64_t seed,
                  const std::string& out_stem) {
    require(n >= 1, "gen-data: n must be >= 1");
    std::string stem = out_stem;
    if (stem.size() > 4 && stem.ends_with(".csv")) {
        stem.resize(stem.size() - 4);
    }
    Table table = gen_dataset(dataset, n, seed);
    write_csv(table, stem + ".csv");
    write_text_file(stem + ".schema.json", table.schema.to_json());

    auto [train, val] = split(table, 0.9, seed);
    write_csv(train, stem + ".train.csv");
    write_text_file(stem + ".train.schema.json", train.schema.to_json());
    if (val.rows() > 0) {
        write_csv(val, stem + ".val.csv");
        write_text_file(stem + ".val.schema.json", val.schema.to_json());
    }

    json manifest;
    manifest["dataset"] = dataset;
    manifest["n"] = n;
    manifest["seed"] = seed;
    manifest["generator_version"] = 1;
    manifest["schema_hash"] = hex64(table.schema.hash());
    manifest["rows_train"] = train.rows();
    manifest["rows_val"] = val.rows();
    write_text_file(stem + ".manifest.json", manifest.dump(2));
}

CodecPretrainResult cmd_pretrain_codec(const RunConfig& cfg, const std::string& out_path) {
    cfg.validate();
    const auto grid = codec_grid(cfg.codec_grid_points, cfg.codec_grid_lo, cfg.codec_grid_hi);
    CodecPretrainResult res =
        pretrain_codec(cfg.backbone.codec_r, grid, cfg.codec_epochs, cfg.train_seed);
    json meta;
    meta["kind"] = "codec";
    meta["r"] = cfg.backbone.codec_r;
    meta["frozen"] = res.converged;
    meta["mean_error"] = res.mean_error;
    meta["max_error"] = res.max_error;
    meta["epochs_run"] = res.epochs_run;
    meta["config_hash"] = hex64(cfg.hash());
    Checkpoint ckpt;
    ckpt.meta_json = meta.dump(2);
    ckpt.add_store("codec.", res.codec.params());
    ckpt.save(out_path);
    return res;
}

FloatCodec load_codec_checkpoint(const std::string& path, int expected_r) {
    Checkpoint ckpt = Checkpoint::load(path);
    json meta = json::parse(ckpt.meta_json);
    check(meta.value("kind", "") == "codec", "not a codec checkpoint: " + path);
    const int r = meta.at("r").get<int>();
    check(r == expected_r, "codec checkpoint r mismatch");
    check(meta.value("frozen", false), "codec checkpoint is not frozen (pretraining failed)");
    FloatCodec codec = FloatCodec::create(r, 0);
    ckpt.read_store("codec.", codec.params());
    codec.freeze();
    return codec;
}

namespace {

struct TrainContext {
    TableSchema schema;
    Vocabulary vocab;
    TokenLayout layout;
    std::vector<QuantileNormalizer> normalizers;
    FloatCodec codec;
    std::unique_ptr<Model> model;
    PowerMeanSchedule base_schedule;
};

void save_train_checkpoint(const std::string& path, const RunConfig& cfg,
                           const TrainContext& ctx, const AdamState& adam, long step) {
    json meta;
    meta["kind"] = "train";
    meta["config"] = cfg.to_json_text();
    meta["config_hash"] = hex64(cfg.hash());
    meta["schema"] = ctx.schema.to_json();
    meta["schema_hash"] = hex64(ctx.schema.hash());
    meta["vocab"] = ctx.vocab.tokens();
    meta["vocab_hash"] = hex64(ctx.vocab.hash());
    meta["layout"] = ctx.layout.to_json();
    meta["step"] = step;
    meta["adam_t"] = adam.t;
    Checkpoint ckpt;
    ckpt.meta_json = meta.dump(2);
    ckpt.add_store("model.", ctx.model->params());
    ckpt.add_store("codec.", ctx.codec.params());
    ckpt.add("adam.m", static_cast<int>(adam.m.size()), 1, adam.m.data());
    ckpt.add("adam.v", static_cast<int>(adam.v.size()), 1, adam.v.data());
    for (std::size_t k = 0; k < ctx.normalizers.size(); ++k) {
        const auto& refs = ctx.normalizers[k].references();
        ckpt.add("normalizer." + std::to_string(k), static_cast<int>(refs.size()), 1,
                 refs.data());
    }
    ckpt.save(path);
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg_in, const std::string& data_csv,
                      const std::string& out_ckpt, const std::string& resume_from,
                      long stop_after_steps) {
    RunConfig cfg = cfg_in;
    cfg.validate();

    TrainContext ctx;
    ctx.schema = TableSchema::from_json(read_text_file(sidecar_path(data_csv, ".schema.json")));
    Table table = read_csv(data_csv, ctx.schema);
    check(table.rows() > 0, "train: empty table");
    impute_missing(table);
    ctx.schema = table.schema;  // imputation may add a missing-category

    ctx.vocab = Vocabulary::build(table);
    ctx.layout = TokenLayout::build(table, ctx.vocab);
    check(ctx.layout.seq_len <= cfg.backbone.max_len,
          "train: serialized rows exceed the backbone max length");

    const auto num_cols = ctx.schema.numerical_indices();
    for (int c : num_cols) {
        ctx.normalizers.push_back(QuantileNormalizer::fit(table.num_cols[table.num_slot(c)]));
    }

    if (!cfg.codec_ckpt.empty()) {
        ctx.codec = load_codec_checkpoint(cfg.codec_ckpt, cfg.backbone.codec_r);
    } else {
        const auto grid =
            codec_grid(cfg.codec_grid_points, cfg.codec_grid_lo, cfg.codec_grid_hi);
        CodecPretrainResult res =
            pretrain_codec(cfg.backbone.codec_r, grid, cfg.codec_epochs, cfg.train_seed);
        check(res.converged, "train: codec pretraining did not reach tolerance (mean " +
                                 std::to_string(res.mean_error) + ")");
        ctx.codec = std::move(res.codec);
    }
    const std::uint64_t codec_checksum_before = ctx.codec.checksum();

    const bool learnable_rho = cfg.rho_mode == "learnable";
    const int n_num = static_cast<int>(num_cols.size());
    ctx.model = std::make_unique<Model>(cfg.backbone, ctx.vocab.size(), n_num, learnable_rho);
    ctx.model->init(cfg.train_seed);
    if (learnable_rho && n_num > 0) {
        ctx.model->params().vec("sched.log_rho").setConstant(std::log(cfg.rho));
    }
    ctx.base_schedule =
        PowerMeanSchedule::uniform(n_num, cfg.rho, cfg.sigma_min, cfg.sigma_max);

    AdamState adam;
    adam.init(ctx.model->params().size());
    long start_step = 0;

    if (!resume_from.empty()) {
        Checkpoint ckpt = Checkpoint::load(resume_from);
        json meta = json::parse(ckpt.meta_json);
        check(meta.value("kind", "") == "train", "resume: not a training checkpoint");
        check(meta.value("schema_hash", "") == hex64(ctx.schema.hash()),
              "resume: schema hash mismatch between checkpoint and data");
        check(meta.value("vocab_hash", "") == hex64(ctx.vocab.hash()),
              "resume: vocabulary hash mismatch between checkpoint and data");
        check(meta.value("layout", "") == ctx.layout.to_json(),
              "resume: token layout mismatch between checkpoint and data");
        check(meta.value("config_hash", "") == hex64(cfg.hash()),
              "resume: config hash mismatch");
        ckpt.read_store("model.", ctx.model->params());
        ckpt.read_store("codec.", ctx.codec.params());
        const NamedArray* m = ckpt.find("adam.m");
        const NamedArray* v = ckpt.find("adam.v");
        check(m && v && m->data.size() == static_cast<std::size_t>(adam.m.size()),
              "resume: optimizer state mismatch");
        std::copy(m->data.begin(), m->data.end(), adam.m.data());
        std::copy(v->data.begin(), v->data.end(), adam.v.data());
        adam.t = meta.at("adam_t").get<long>();
        start_step = meta.at("step").get<long>();
    }

    // serialize the corpus once; rows are reused across epochs
    std::vector<SerializedRecord> records;
    records.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        records.push_back(serialize_record(table, r, ctx.layout, ctx.vocab, ctx.normalizers));
    }

    const long rows = static_cast<long>(records.size());
    check(rows >= cfg.batch_size, "train: fewer rows than the batch size");
    const long steps_per_epoch = rows / cfg.batch_size;
    const long total_steps = cfg.epochs * steps_per_epoch;
    check(start_step <= total_steps, "resume: checkpoint is past the configured step budget");
    const long end_step =
        stop_after_steps > 0 ? std::min(stop_after_steps, total_steps) : total_steps;

    AdamConfig acfg;
    acfg.lr = cfg.lr;
    acfg.beta1 = cfg.beta1;
    acfg.beta2 = cfg.beta2;
    acfg.eps = cfg.adam_eps;
    acfg.weight_decay = cfg.weight_decay;
    acfg.warmup_steps = static_cast<long>(cfg.warmup_ratio * static_cast<double>(total_steps));

    const Vec decay = ctx.model->decay_mask();
    const auto trainable = ctx.model->trainable_mask();
    const DiffusionConfig dcfg = cfg.diffusion_config();
    ParamStore grads = ctx.model->params().like();
    LossWorkspace workspace;

    std::ofstream log(out_ckpt + ".log.jsonl", std::ios::app);
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    long shuffled_epoch = -1;

    TrainResult result;
    for (long s = start_step; s < end_step; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        const long epoch = s / steps_per_epoch;
        const long pos = s % steps_per_epoch;
        if (epoch != shuffled_epoch) {
            std::iota(order.begin(), order.end(), 0);
            Rng erng = make_rng(cfg.train_seed, 0x45504f43ull, static_cast<std::uint64_t>(epoch));
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                std::swap(order[i], order[uniform_index(erng, i + 1)]);
            }
            shuffled_epoch = epoch;
        }
        std::vector<SerializedRecord> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b) {
            batch.push_back(records[order[pos * cfg.batch_size + b]]);
        }
        Rng step_rng = make_rng(cfg.train_seed, 0x53544550ull, static_cast<std::uint64_t>(s));
        NoisyBatch noisy = make_noisy_batch(batch, ctx.layout, dcfg.mask_schedule,
                                            cfg.backbone.dropout, cfg.backbone.proj_hidden(),
                                            step_rng);
        const PowerMeanSchedule sched =
            effective_schedule(*ctx.model, ctx.base_schedule, dcfg.learnable_rho);
        result.last = compute_loss(*ctx.model, ctx.codec, sched, ctx.layout, noisy, s, dcfg,
                                   &grads, &workspace, cfg.threads);
        adam.step(ctx.model->params().data(), grads.data(), acfg, &decay, &trainable);

        const double wall_ms = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        log << "{\"step\":" << s << ",\"l_text\":" << result.last.l_text
            << ",\"l_num\":" << result.last.l_num << ",\"lambda\":" << result.last.lambda
            << ",\"wall_ms\":" << wall_ms << "}\n";
        if ((s + 1) % 50 == 0 || s + 1 == total_steps) {
            std::printf("step %ld/%ld  l_text %.4f  l_num %.4f  lambda %.3f\n", s + 1,
                        total_steps, result.last.l_text, result.last.l_num,
                        result.last.lambda);
            std::fflush(stdout);
        }
        if (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0 &&
            s + 1 < total_steps) {
            save_train_checkpoint(out_ckpt, cfg, ctx, adam, s + 1);
        }
    }

    check(ctx.codec.checksum() == codec_checksum_before,
          "train: frozen codec parameters changed during training");
    save_train_checkpoint(out_ckpt, cfg, ctx, adam, end_step);
    result.steps = end_step;
    result.ckpt_path = out_ckpt;
    return result;
}

TrainedBundle load_bundle(const std::string& ckpt_path) {
    Checkpoint ckpt = Checkpoint::load(ckpt_path);
    json meta = json::parse(ckpt.meta_json);
    check(meta.value("kind", "") == "train", "not a training checkpoint: " + ckpt_path);

    TrainedBundle bundle;
    bundle.cfg = RunConfig::from_json_text(meta.at("config").get<std::string>());
    bundle.schema = TableSchema::from_json(meta.at("schema").get<std::string>());
    bundle.vocab = Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    bundle.layout = TokenLayout::from_json(meta.at("layout").get<std::string>());
    bundle.step = meta.value("step", 0l);

    check(meta.value("schema_hash", "") == hex64(bundle.schema.hash()),
          "checkpoint schema hash mismatch");
    check(meta.value("vocab_hash", "") == hex64(bundle.vocab.hash()),
          "checkpoint vocabulary hash mismatch");

    bundle.codec = FloatCodec::create(bundle.cfg.backbone.codec_r, 0);
    ckpt.read_store("codec.", bundle.codec.params());
    bundle.codec.freeze();

    const int n_num = static_cast<int>(bundle.layout.num_columns.size());
    for (int k = 0; k < n_num; ++k) {
        const NamedArray* arr = ckpt.find("normalizer." + std::to_string(k));
        check(arr != nullptr, "checkpoint missing normalizer " + std::to_string(k));
        bundle.normalizers.push_back(QuantileNormalizer::from_references(arr->data));
    }

    const bool learnable_rho = bundle.cfg.rho_mode == "learnable";
    bundle.model = std::make_unique<Model>(bundle.cfg.backbone, bundle.vocab.size(), n_num,
                                           learnable_rho);
    ckpt.read_store("model.", bundle.model->params());
    bundle.base_schedule = PowerMeanSchedule::uniform(n_num, bundle.cfg.rho,
                                                      bundle.cfg.sigma_min,
                                                      bundle.cfg.sigma_max);
    return bundle;
}

DenoiserFn model_denoiser(const Model& model, const FloatCodec& codec) {
    return [&model, &codec](const std::vector<int>& tokens, const Vec& x_hat,
                            const Vec& sigma_hat, DenoiseOut& out) {
        ForwardTrace trace;
        model.forward(tokens, x_hat, sigma_hat, codec, trace);
        out.logits = std::move(trace.logits);
        out.x_pred = std::move(trace.x_pred);
    };
}

SampleResult cmd_sample(const std::string& ckpt_path, int n, int steps, const std::string& policy,
                        std::uint64_t seed, const std::string& out_csv) {
    TrainedBundle bundle = load_bundle(ckpt_path);
    SamplerConfig scfg;
    scfg.steps = steps > 0 ? steps : bundle.cfg.sample_steps;
    scfg.policy = unmask_policy_from_name(policy.empty() ? bundle.cfg.unmask_policy : policy);
    scfg.tau = bundle.cfg.tau;
    scfg.churn = bundle.cfg.make_churn_config();
    scfg.seed = seed;

    const PowerMeanSchedule sched = effective_schedule(
        *bundle.model, bundle.base_schedule, bundle.cfg.rho_mode == "learnable");
    DenoiserFn denoiser = model_denoiser(*bundle.model, bundle.codec);
    SampleResult res = sample(denoiser, bundle.schema, bundle.layout, bundle.vocab,
                              bundle.normalizers, sched, scfg, n, bundle.cfg.threads);

    write_csv(res.table, out_csv);
    write_text_file(sidecar_path(out_csv, ".schema.json"), bundle.schema.to_json());
    json manifest;
    manifest["requested"] = res.requested;
    manifest["invalid"] = res.invalid;
    manifest["seed"] = seed;
    manifest["steps"] = scfg.steps;
    manifest["policy"] = unmask_policy_name(scfg.policy);
    manifest["tau"] = scfg.tau;
    manifest["churn_amount"] = scfg.churn.amount;
    manifest["config_hash"] = hex64(bundle.cfg.hash());
    manifest["schema_hash"] = hex64(bundle.schema.hash());
    manifest["vocab_hash"] = hex64(bundle.vocab.hash());
    write_text_file(sidecar_path(out_csv, ".manifest.json"), manifest.dump(2));
    return res;
}

FidelityReport cmd_eval(const std::string& real_csv, const std::string& synth_csv,
                        const std::string& schema_path, const std::string& report_path) {
    const TableSchema schema = TableSchema::from_json(read_text_file(schema_path));
    const Table real = read_csv(real_csv, schema);
    const Table synth = read_csv(synth_csv, schema);
    int invalid = 0;
    const std::string manifest_path = sidecar_path(synth_csv, ".manifest.json");
    if (std::filesystem::exists(manifest_path)) {
        json manifest = json::parse(read_text_file(manifest_path));
        invalid = manifest.value("invalid", 0);
    }
    FidelityReport report = evaluate(real, synth, invalid);
    write_text_file(report_path, report.to_text());
    write_text_file(report_path + ".json", report.to_json());
    return report;
}

}  // namespace tabgen
