#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "tabgen/train.hpp"

int main(int argc, char** argv) {
    CLI::App app{"joint numerical-language diffusion for mixed-type tabular data"};
    app.require_subcommand(1);

    // gen-data
    std::string gd_dataset = "mathexpr";
    int gd_n = 5000;
    std::uint64_t gd_seed = 1;
    std::string gd_out;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark table");
    gen->add_option("--dataset", gd_dataset, "mathexpr or profilebio")->required();
    gen->add_option("--n", gd_n, "number of rows (default 5000)");
    gen->add_option("--seed", gd_seed, "generator seed");
    gen->add_option("--out", gd_out, "output stem or .csv path")->required();

    // pretrain-codec
    std::string pc_config, pc_out;
    auto* pretrain = app.add_subcommand("pretrain-codec", "pretrain the frozen float codec");
    pretrain->add_option("--config", pc_config, "run configuration JSON")->required();
    pretrain->add_option("--out", pc_out, "codec checkpoint path")->required();

    // train
    std::string tr_config, tr_data, tr_out, tr_resume;
    auto* train = app.add_subcommand("train", "train the joint diffusion model");
    train->add_option("--config", tr_config, "run configuration JSON")->required();
    train->add_option("--data", tr_data, "training CSV (schema sidecar next to it)")->required();
    train->add_option("--out", tr_out, "checkpoint path")->required();
    train->add_option("--resume", tr_resume, "resume from an earlier checkpoint");

    // sample
    std::string sa_ckpt, sa_policy, sa_out;
    int sa_n = 1000;
    int sa_steps = 0;
    std::uint64_t sa_seed = 1;
    auto* sample = app.add_subcommand("sample", "generate records from a trained model");
    sample->add_option("--ckpt", sa_ckpt, "training checkpoint")->required();
    sample->add_option("--n", sa_n, "number of records");
    sample->add_option("--steps", sa_steps, "reverse steps (default from config)");
    sample->add_option("--policy", sa_policy, "high-confidence or random");
    sample->add_option("--seed", sa_seed, "sampling seed");
    sample->add_option("--out", sa_out, "output CSV path")->required();

    // eval
    std::string ev_real, ev_synth, ev_schema, ev_report;
    auto* eval = app.add_subcommand("eval", "fidelity and consistency report");
    eval->add_option("--real", ev_real, "real CSV")->required();
    eval->add_option("--synth", ev_synth, "synthetic CSV")->required();
    eval->add_option("--schema", ev_schema, "schema JSON")->required();
    eval->add_option("--report", ev_report, "report output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            tabgen::cmd_gen_data(gd_dataset, gd_n, gd_seed, gd_out);
            std::printf("wrote %s\n", gd_out.c_str());
        } else if (pretrain->parsed()) {
            auto cfg = tabgen::RunConfig::load(pc_config);
            auto res = tabgen::cmd_pretrain_codec(cfg, pc_out);
            std::printf("codec: converged=%d mean=%.3e max=%.3e epochs=%ld\n", res.converged,
                        res.mean_error, res.max_error, res.epochs_run);
            if (!res.converged) return 2;
        } else if (train->parsed()) {
            auto cfg = tabgen::RunConfig::load(tr_config);
            auto res = tabgen::cmd_train(cfg, tr_data, tr_out, tr_resume);
            std::printf("trained %ld steps -> %s\n", res.steps, res.ckpt_path.c_str());
        } else if (sample->parsed()) {
            auto res = tabgen::cmd_sample(sa_ckpt, sa_n, sa_steps, sa_policy, sa_seed, sa_out);
            std::printf("sampled %zu valid records (%d invalid) -> %s\n", res.table.rows(),
                        res.invalid, sa_out.c_str());
        } else if (eval->parsed()) {
            auto report = tabgen::cmd_eval(ev_real, ev_synth, ev_schema, ev_report);
            std::printf("%s", report.to_text().c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
