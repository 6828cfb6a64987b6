#pragma once

#include <functional>

#include "tabgen/layout.hpp"
#include "tabgen/params.hpp"
#include "tabgen/schedule.hpp"

namespace tabgen {

enum class UnmaskPolicy { HighConfidence, Random };

UnmaskPolicy unmask_policy_from_name(const std::string& name);
std::string unmask_policy_name(UnmaskPolicy policy);

struct SamplerConfig {
    int steps = 50;
    UnmaskPolicy policy = UnmaskPolicy::HighConfidence;
    double tau = 1.0;  // Gumbel temperature
    ChurnConfig churn;
    std::uint64_t seed = 0;
};

// argmax of logits/tau + Gumbel noise, i.e. a draw from softmax(logits/tau)
int gumbel_sample(const Vec& logits, double tau, Rng& rng);

// per-step reveal counts, as uniform as divisibility allows with the
// remainder spread over the earliest steps; e.g. (10, 4) -> 3,3,2,2
std::vector<int> uniform_reveal_counts(int total, int steps);

// reveals reveal_count of the currently masked positions; everything else
// stays [MASK]
void unmask_step(std::vector<int>& tokens, const std::vector<int>& proposals,
                 const std::vector<double>& confidences,
                 const std::vector<int>& masked_positions, int reveal_count,
                 UnmaskPolicy policy, Rng& rng);

// x_{t-1} = x_hat + (sigma_prev - sigma_hat) * (x_hat - x_tilde) / sigma_hat,
// elementwise per feature; sigma_hat = 0 returns the prediction directly
Vec euler_update(const Vec& x_hat, const Vec& x_tilde, const Vec& sigma_hat,
                 const Vec& sigma_prev);

struct DenoiseOut {
    Mat logits;  // V x S
    Vec x_pred;  // one per placeholder, normalized space
};

// abstraction over the trained model so tests can plug in oracle denoisers
using DenoiserFn = std::function<void(const std::vector<int>& tokens, const Vec& x_hat,
                                      const Vec& sigma_hat, DenoiseOut& out)>;

struct RecordSample {
    std::vector<int> tokens;
    Vec numerics;  // normalized
    bool valid = false;
    std::vector<std::string> fields;  // decoded string columns, span order
};

RecordSample sample_record(const DenoiserFn& denoiser, const TokenLayout& layout,
                           const Vocabulary& vocab, const std::vector<int>& prompt_tokens,
                           const DiscretizedSchedule& levels, const SamplerConfig& config,
                           std::uint64_t record_index);

struct SampleResult {
    Table table;  // valid records only
    int requested = 0;
    int invalid = 0;
};

// Independent records draw from per-record streams derived from (seed, index),
// so output is identical for any worker count.
SampleResult sample(const DenoiserFn& denoiser, const TableSchema& schema,
                    const TokenLayout& layout, const Vocabulary& vocab,
                    const std::vector<QuantileNormalizer>& normalizers,
                    const PowerMeanSchedule& schedule, const SamplerConfig& config, int n,
                    int threads = 2);

}  // namespace tabgen
