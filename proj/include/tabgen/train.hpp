#pragma once

#include <memory>
#include <string>

#include "tabgen/checkpoint.hpp"
#include "tabgen/config.hpp"
#include "tabgen/metrics.hpp"

namespace tabgen {

// "<stem>.csv" + ".schema.json" -> "<stem>.schema.json"
std::string sidecar_path(const std::string& csv_path, const std::string& suffix);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// writes <stem>.csv, <stem>.schema.json, <stem>.manifest.json plus the 9:1
// <stem>.train.csv / <stem>.val.csv split
void cmd_gen_data(const std::string& dataset, int n, std::uint64_t seed,
                  const std::string& out_stem);

CodecPretrainResult cmd_pretrain_codec(const RunConfig& cfg, const std::string& out_path);
FloatCodec load_codec_checkpoint(const std::string& path, int expected_r);

struct TrainResult {
    long steps = 0;
    LossReport last;
    std::string ckpt_path;
};

// stop_after_steps > 0 halts at that global step and checkpoints, simulating
// an interruption; resuming under the same config continues exactly
TrainResult cmd_train(const RunConfig& cfg, const std::string& data_csv,
                      const std::string& out_ckpt, const std::string& resume_from = "",
                      long stop_after_steps = 0);

// everything a trained checkpoint carries, ready for sampling
struct TrainedBundle {
    RunConfig cfg;
    TableSchema schema;
    Vocabulary vocab;
    TokenLayout layout;
    std::vector<QuantileNormalizer> normalizers;
    FloatCodec codec;
    std::unique_ptr<Model> model;
    PowerMeanSchedule base_schedule;
    long step = 0;
};

TrainedBundle load_bundle(const std::string& ckpt_path);

// the returned callable references the bundle's model and codec
DenoiserFn model_denoiser(const Model& model, const FloatCodec& codec);

SampleResult cmd_sample(const std::string& ckpt_path, int n, int steps, const std::string& policy,
                        std::uint64_t seed, const std::string& out_csv);

FidelityReport cmd_eval(const std::string& real_csv, const std::string& synth_csv,
                        const std::string& schema_path, const std::string& report_path);

}  // namespace tabgen
