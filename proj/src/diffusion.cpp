#include "tabgen/diffusion.hpp"

#include <cmath>
#include <thread>

namespace tabgen {

double lambda_weight(long step, double lambda_max, long s_warm) {
    require(step >= 0, "lambda_weight: step must be >= 0");
    if (s_warm <= 0) {
        return lambda_max;
    }
    return lambda_max * std::min(1.0, static_cast<double>(step) / static_cast<double>(s_warm));
}

Vec forward_noise_numeric(const Vec& x0, double t, const PowerMeanSchedule& schedule, Rng& rng) {
    require(t >= 0.0 && t <= 1.0, "forward_noise_numeric: t must be in [0,1]");
    require(x0.size() == schedule.features(), "forward_noise_numeric: feature count mismatch");
    Vec out(x0.size());
    for (Eigen::Index k = 0; k < x0.size(); ++k) {
        out[k] = x0[k] + schedule.sigma(t, static_cast<int>(k)) * normal01(rng);
    }
    return out;
}

std::vector<int> forward_mask_text(const std::vector<int>& tokens, double t,
                                   const MaskSchedule& schedule, const TokenLayout& layout,
                                   Rng& rng, std::vector<std::uint8_t>* mask_flags) {
    require(t >= 0.0 && t <= 1.0, "forward_mask_text: t must be in [0,1]");
    const double p_mask = 1.0 - schedule.alpha_bar(t);
    std::vector<int> out = tokens;
    if (mask_flags) mask_flags->assign(tokens.size(), 0);
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
        if (!layout.is_maskable(i)) continue;
        if (uniform01(rng) < p_mask) {
            out[i] = Vocabulary::kMask;
            if (mask_flags) (*mask_flags)[i] = 1;
        }
    }
    return out;
}

NoisyBatch make_noisy_batch(const std::vector<SerializedRecord>& records,
                            const TokenLayout& layout, const MaskSchedule& mask_schedule,
                            double dropout, int proj_hidden, Rng& rng) {
    NoisyBatch batch;
    batch.records.reserve(records.size());
    for (const auto& rec : records) {
        CorruptedRecord c;
        c.t = uniform01(rng);
        c.clean_tokens = rec.tokens;
        c.tokens = forward_mask_text(rec.tokens, c.t, mask_schedule, layout, rng, &c.masked);
        const int n = static_cast<int>(rec.num_values.size());
        c.x0 = Eigen::Map<const Vec>(rec.num_values.data(), n);
        c.eps.resize(n);
        for (int k = 0; k < n; ++k) c.eps[k] = normal01(rng);
        if (dropout > 0.0) {
            const double keep = 1.0 - dropout;
            c.drop_e.resize(proj_hidden, n);
            c.drop_d.resize(proj_hidden, n);
            for (int k = 0; k < n; ++k) {
                for (int i = 0; i < proj_hidden; ++i) {
                    c.drop_e(i, k) = uniform01(rng) < dropout ? 0.0 : 1.0 / keep;
                }
                for (int i = 0; i < proj_hidden; ++i) {
                    c.drop_d(i, k) = uniform01(rng) < dropout ? 0.0 : 1.0 / keep;
                }
            }
        }
        batch.records.push_back(std::move(c));
    }
    return batch;
}

PowerMeanSchedule effective_schedule(const Model& model, const PowerMeanSchedule& base,
                                     bool learnable_rho) {
    if (!learnable_rho) {
        return base;
    }
    PowerMeanSchedule sched = base;
    ConstVecMap log_rho = model.params().vec("sched.log_rho");
    require(log_rho.size() == static_cast<Eigen::Index>(sched.rho.size()),
            "effective_schedule: rho size mismatch");
    for (Eigen::Index k = 0; k < log_rho.size(); ++k) {
        sched.rho[static_cast<std::size_t>(k)] = std::exp(log_rho[k]);
    }
    return sched;
}

namespace {

struct ChunkResult {
    double l_text = 0.0;
    double l_num = 0.0;
};

// loss and gradients for records [begin, end); dlogits carries 1/B and the
// per-record text weight, dx_pred carries lambda * 2/B
ChunkResult run_chunk(const Model& model, const FloatCodec& codec,
                      const PowerMeanSchedule& schedule, const NoisyBatch& batch,
                      std::size_t begin, std::size_t end, double lambda, double inv_batch,
                      const DiffusionConfig& cfg, ParamStore* grads) {
    ChunkResult res;
    const int vocab = model.vocab_size();
    ForwardTrace trace;
    for (std::size_t rix = begin; rix < end; ++rix) {
        const auto& rec = batch.records[rix];
        const int n = static_cast<int>(rec.x0.size());
        Vec sigmas(n), x_hat(n);
        for (int k = 0; k < n; ++k) {
            sigmas[k] = schedule.sigma(rec.t, k);
            x_hat[k] = rec.x0[k] + sigmas[k] * rec.eps[k];
        }
        const Mat* de = rec.drop_e.size() > 0 ? &rec.drop_e : nullptr;
        const Mat* dd = rec.drop_d.size() > 0 ? &rec.drop_d : nullptr;
        model.forward(rec.tokens, x_hat, sigmas, codec, trace, de, dd);

        double text_weight = 1.0;
        if (cfg.text_loss == DiffusionConfig::TextLoss::ElboWeighted) {
            text_weight = 1.0 / std::max(rec.t, 1e-3);
        }

        Mat dlogits;
        if (grads) dlogits = Mat::Zero(vocab, trace.seq_len);
        for (int i = 0; i < trace.seq_len; ++i) {
            if (!rec.masked[i]) continue;
            const auto col = trace.logits.col(i);
            const double m = col.maxCoeff();
            Vec p = (col.array() - m).exp();
            const double z = p.sum();
            p /= z;
            const int target = rec.clean_tokens[i];
            res.l_text -= text_weight * std::log(std::max(p[target], 1e-300));
            if (grads) {
                dlogits.col(i) = (text_weight * inv_batch) * p;
                dlogits(target, i) -= text_weight * inv_batch;
            }
        }

        Vec dx_pred = Vec::Zero(n);
        for (int k = 0; k < n; ++k) {
            const double diff = rec.x0[k] - trace.x_pred[k];
            res.l_num += diff * diff;
            if (grads) {
                dx_pred[k] = lambda * inv_batch * 2.0 * (trace.x_pred[k] - rec.x0[k]);
            }
        }

        if (grads) {
            Mat d_enc;
            Vec d_log_sigma;
            const bool want_rho = cfg.learnable_rho && grads->has("sched.log_rho");
            model.backward(trace, dlogits, dx_pred, codec, *grads,
                           want_rho ? &d_enc : nullptr, want_rho ? &d_log_sigma : nullptr);
            if (want_rho) {
                auto rho_grad = grads->vec("sched.log_rho");
                for (int k = 0; k < n; ++k) {
                    const double dldx_hat = d_enc.col(k).dot(codec.encode_dx(x_hat[k]));
                    const double dldsigma =
                        dldx_hat * rec.eps[k] + d_log_sigma[k] / sigmas[k];
                    const double rho = schedule.rho[static_cast<std::size_t>(k)];
                    rho_grad[k] += dldsigma * schedule.dsigma_drho(rec.t, k) * rho;
                }
            }
        }
    }
    return res;
}

}  // namespace

LossReport compute_loss(const Model& model, const FloatCodec& codec,
                        const PowerMeanSchedule& schedule, const TokenLayout& layout,
                        const NoisyBatch& batch, long step, const DiffusionConfig& cfg,
                        ParamStore* grads, LossWorkspace* workspace, int chunks) {
    (void)layout;
    require(!batch.records.empty(), "compute_loss: empty batch");
    const std::size_t b = batch.records.size();
    const double inv_batch = 1.0 / static_cast<double>(b);
    const double lambda = lambda_weight(step, cfg.lambda_max, cfg.s_warm);
    chunks = std::max(1, std::min<int>(chunks, static_cast<int>(b)));

    std::vector<ChunkResult> results(chunks);
    LossWorkspace local;
    LossWorkspace* ws = workspace ? workspace : &local;
    if (grads) {
        grads->data().setZero();
        if (static_cast<int>(ws->chunk_grads.size()) < chunks ||
            ws->chunk_grads.front().size() != grads->size()) {
            ws->chunk_grads.assign(chunks, grads->like());
        }
    }

    auto run = [&](int c) {
        const std::size_t begin = b * c / chunks;
        const std::size_t end = b * (c + 1) / chunks;
        ParamStore* chunk_grads = nullptr;
        if (grads) {
            chunk_grads = &ws->chunk_grads[c];
            chunk_grads->data().setZero();
        }
        results[c] = run_chunk(model, codec, schedule, batch, begin, end, lambda, inv_batch,
                               cfg, chunk_grads);
    };

    if (chunks == 1) {
        run(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(chunks);
        for (int c = 0; c < chunks; ++c) threads.emplace_back(run, c);
        for (auto& th : threads) th.join();
    }

    LossReport report;
    report.step = step;
    report.lambda = lambda;
    for (int c = 0; c < chunks; ++c) {
        report.l_text += results[c].l_text;
        report.l_num += results[c].l_num;
        if (grads) grads->data() += ws->chunk_grads[c].data();
    }
    report.l_text *= inv_batch;
    report.l_num *= inv_batch;
    report.total = report.l_text + lambda * report.l_num;
    check(std::isfinite(report.total), "compute_loss: non-finite loss");
    return report;
}

}  // namespace tabgen
