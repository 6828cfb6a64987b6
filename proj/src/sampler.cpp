#include "tabgen/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace tabgen {

UnmaskPolicy unmask_policy_from_name(const std::string& name) {
    if (name == "high-confidence" || name == "high_confidence") {
        return UnmaskPolicy::HighConfidence;
    }
    if (name == "random") {
        return UnmaskPolicy::Random;
    }
    throw std::runtime_error("unknown unmask policy: " + name);
}

std::string unmask_policy_name(UnmaskPolicy policy) {
    return policy == UnmaskPolicy::HighConfidence ? "high-confidence" : "random";
}

int gumbel_sample(const Vec& logits, double tau, Rng& rng) {
    require(tau > 0.0, "gumbel_sample: temperature must be positive");
    require(logits.size() > 0, "gumbel_sample: empty logits");
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (std::isinf(logits[i]) && logits[i] < 0) {
            continue;
        }
        double u = uniform01(rng);
        if (u <= 0.0) u = 0x1.0p-53;
        const double g = -std::log(-std::log(u));
        const double score = logits[i] / tau + g;
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(i);
        }
    }
    check(best >= 0, "gumbel_sample: all logits are -inf");
    return best;
}

std::vector<int> uniform_reveal_counts(int total, int steps) {
    require(steps >= 1, "uniform_reveal_counts: steps must be >= 1");
    require(total >= 0, "uniform_reveal_counts: negative total");
    std::vector<int> counts(steps, total / steps);
    const int remainder = total - (total / steps) * steps;
    for (int i = 0; i < remainder; ++i) counts[i] += 1;
    return counts;
}

void unmask_step(std::vector<int>& tokens, const std::vector<int>& proposals,
                 const std::vector<double>& confidences,
                 const std::vector<int>& masked_positions, int reveal_count,
                 UnmaskPolicy policy, Rng& rng) {
    const int m = static_cast<int>(masked_positions.size());
    require(reveal_count >= 0 && reveal_count <= m,
            "unmask_step: reveal count exceeds masked count");
    require(static_cast<int>(proposals.size()) == m &&
                static_cast<int>(confidences.size()) == m,
            "unmask_step: proposals/confidences must match masked positions");
    if (reveal_count == 0) {
        return;
    }
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    if (policy == UnmaskPolicy::HighConfidence) {
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (confidences[a] != confidences[b]) return confidences[a] > confidences[b];
            return masked_positions[a] < masked_positions[b];
        });
    } else {
        for (int i = 0; i < reveal_count; ++i) {
            const int j = i + static_cast<int>(uniform_index(rng, m - i));
            std::swap(order[i], order[j]);
        }
    }
    for (int i = 0; i < reveal_count; ++i) {
        const int idx = order[i];
        tokens[masked_positions[idx]] = proposals[idx];
    }
}

Vec euler_update(const Vec& x_hat, const Vec& x_tilde, const Vec& sigma_hat,
                 const Vec& sigma_prev) {
    require(x_hat.size() == x_tilde.size() && x_hat.size() == sigma_hat.size() &&
                x_hat.size() == sigma_prev.size(),
            "euler_update: size mismatch");
    Vec out(x_hat.size());
    for (Eigen::Index k = 0; k < x_hat.size(); ++k) {
        if (sigma_hat[k] == 0.0) {
            out[k] = x_tilde[k];
            continue;
        }
        const double d = (x_hat[k] - x_tilde[k]) / sigma_hat[k];
        out[k] = x_hat[k] + (sigma_prev[k] - sigma_hat[k]) * d;
    }
    return out;
}

RecordSample sample_record(const DenoiserFn& denoiser, const TokenLayout& layout,
                           const Vocabulary& vocab, const std::vector<int>& prompt_tokens,
                           const DiscretizedSchedule& levels, const SamplerConfig& config,
                           std::uint64_t record_index) {
    const int n = static_cast<int>(layout.num_positions.size());
    const int steps = levels.steps;
    require(steps >= 1, "sample_record: need at least one step");
    require(static_cast<int>(prompt_tokens.size()) == layout.prompt_len,
            "sample_record: prompt does not match layout");
    Rng rng = make_rng(config.seed, 0x53414d50ull, record_index);

    RecordSample out;
    // [p; MASK^G] with [NUM] placeholders at their fixed positions
    out.tokens.assign(layout.seq_len, Vocabulary::kMask);
    std::copy(prompt_tokens.begin(), prompt_tokens.end(), out.tokens.begin());
    for (int p : layout.num_positions) out.tokens[p] = Vocabulary::kNum;

    // numeric prior x_T ~ N(0, sigma_max^2)
    Vec x(n);
    for (int k = 0; k < n; ++k) {
        x[k] = levels.sigma[k][steps] * normal01(rng);
    }

    const auto reveals = uniform_reveal_counts(layout.maskable_count(), steps);
    DenoiseOut den;
    Vec sigma_t(n), sigma_hat(n), sigma_prev(n), x_hat(n);
    for (int t = steps; t >= 1; --t) {
        for (int k = 0; k < n; ++k) {
            sigma_t[k] = levels.sigma[k][t];
            sigma_hat[k] = levels.sigma_hat[k][t];
            sigma_prev[k] = levels.sigma[k][t - 1];
        }
        // churn re-injects noise up to the churned level
        for (int k = 0; k < n; ++k) {
            if (sigma_hat[k] > sigma_t[k]) {
                const double extra =
                    std::sqrt(sigma_hat[k] * sigma_hat[k] - sigma_t[k] * sigma_t[k]);
                x_hat[k] = x[k] + extra * normal01(rng);
            } else {
                x_hat[k] = x[k];
            }
        }

        denoiser(out.tokens, x_hat, sigma_hat, den);

        std::vector<int> masked_positions;
        for (int i = 0; i < layout.seq_len; ++i) {
            if (out.tokens[i] == Vocabulary::kMask) masked_positions.push_back(i);
        }
        if (!masked_positions.empty()) {
            std::vector<int> proposals(masked_positions.size());
            std::vector<double> confidences(masked_positions.size());
            for (std::size_t m = 0; m < masked_positions.size(); ++m) {
                const auto col = den.logits.col(masked_positions[m]);
                proposals[m] = gumbel_sample(col, config.tau, rng);
                // confidence = probability of the proposal under softmax(logits/tau)
                const double mx = col.maxCoeff();
                Vec p = ((col.array() - mx) / config.tau).exp();
                confidences[m] = p[proposals[m]] / p.sum();
            }
            const int reveal =
                std::min(reveals[steps - t], static_cast<int>(masked_positions.size()));
            unmask_step(out.tokens, proposals, confidences, masked_positions, reveal,
                        config.policy, rng);
        }

        x = euler_update(x_hat, den.x_pred, sigma_hat, sigma_prev);
    }

    out.numerics = x;
    RecordDecode decode = detokenize_record(out.tokens, layout, vocab);
    out.valid = decode.valid;
    // no token may remain masked
    for (int tok : out.tokens) {
        if (tok == Vocabulary::kMask) out.valid = false;
    }
    out.fields = std::move(decode.fields);
    return out;
}

SampleResult sample(const DenoiserFn& denoiser, const TableSchema& schema,
                    const TokenLayout& layout, const Vocabulary& vocab,
                    const std::vector<QuantileNormalizer>& normalizers,
                    const PowerMeanSchedule& schedule, const SamplerConfig& config, int n,
                    int threads) {
    require(n >= 1, "sample: n must be >= 1");
    require(normalizers.size() == layout.num_positions.size(),
            "sample: one normalizer per numerical column required");
    const DiscretizedSchedule levels = discretize(schedule, config.steps, config.churn);
    const auto prompt = encode_prompt(schema, vocab);
    check(static_cast<int>(prompt.size()) == layout.prompt_len,
          "sample: prompt does not match layout");

    std::vector<RecordSample> records(static_cast<std::size_t>(n));
    auto worker = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            records[static_cast<std::size_t>(i)] = sample_record(
                denoiser, layout, vocab, prompt, levels, config, static_cast<std::uint64_t>(i));
        }
    };
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        for (int c = 0; c < threads; ++c) {
            pool.emplace_back(worker, n * c / threads, n * (c + 1) / threads);
        }
        for (auto& th : pool) th.join();
    }

    SampleResult result;
    result.requested = n;
    result.table = Table(schema);
    for (const auto& rec : records) {
        if (!rec.valid) {
            ++result.invalid;
            continue;
        }
        const std::size_t row = result.table.rows();
        result.table.resize(row + 1);
        for (std::size_t s = 0; s < layout.spans.size(); ++s) {
            result.table.set_str(row, layout.spans[s].column, rec.fields[s]);
        }
        for (std::size_t k = 0; k < layout.num_columns.size(); ++k) {
            const int col = layout.num_columns[k];
            double value = normalizers[k].denormalize(rec.numerics[static_cast<Eigen::Index>(k)]);
            const int decimals = schema.columns[col].decimals;
            if (decimals >= 0) {
                const double scale = std::pow(10.0, decimals);
                value = std::round(value * scale) / scale;
            }
            result.table.set_num(row, col, value);
        }
    }
    return result;
}

}  // namespace tabgen
