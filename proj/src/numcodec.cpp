#include "tabgen/numcodec.hpp"

#include <algorithm>
#include <cmath>

#include "tabgen/optim.hpp"

namespace tabgen {

namespace {

constexpr double kLnEps = 1e-5;

void layer_norm(const Vec& z, const Vec& gamma, const Vec& beta, Vec& zn, Vec& y, double& scale) {
    const double mu = z.mean();
    const double var = (z.array() - mu).square().mean();
    scale = std::sqrt(var + kLnEps);
    zn = (z.array() - mu) / scale;
    y = gamma.array() * zn.array() + beta.array();
}

Vec layer_norm_input_grad(const Vec& zn, double scale, const Vec& dzn) {
    const double m1 = dzn.mean();
    const double m2 = (dzn.array() * zn.array()).mean();
    return ((dzn.array() - m1 - zn.array() * m2) / scale).matrix();
}

}  // namespace

int FloatCodec::hidden_width(int r) {
    return std::max(4, static_cast<int>(std::floor(std::sqrt(static_cast<double>(r)))));
}

FloatCodec FloatCodec::create(int r, std::uint64_t seed) {
    require(r >= 1, "codec: latent dimension must be >= 1");
    FloatCodec c;
    c.r_ = r;
    c.h_ = hidden_width(r);
    auto& p = c.params_;
    p.add("enc.w1", c.h_, 1);
    p.add("enc.b1", c.h_);
    p.add("enc.w2", c.h_, c.h_);
    p.add("enc.b2", c.h_);
    p.add("enc.w3", r, c.h_);
    p.add("enc.b3", r);
    p.add("dec.g", r);
    p.add("dec.b", r);
    p.add("dec.w", 1, r);
    p.add("dec.bias", 1);
    p.finalize();

    Rng rng = make_rng(seed, 0x434f4443ull);
    auto fill = [&](MatMap m, double scale) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                m(i, j) = scale * normal01(rng);
            }
        }
    };
    fill(p.mat("enc.w1"), 1.0);
    fill(p.mat("enc.w2"), std::sqrt(2.0 / c.h_));
    fill(p.mat("enc.w3"), std::sqrt(2.0 / c.h_));
    fill(p.mat("dec.w"), std::sqrt(1.0 / r));
    p.vec("dec.g").setOnes();
    // spread first-layer breakpoints across the normalized range
    auto b1 = p.vec("enc.b1");
    for (int i = 0; i < c.h_; ++i) {
        b1[i] = -2.0 + 4.0 * static_cast<double>(i) / std::max(1, c.h_ - 1);
    }
    return c;
}

FloatCodec FloatCodec::from_params(int r, ParamStore params, bool frozen) {
    FloatCodec c;
    c.r_ = r;
    c.h_ = hidden_width(r);
    c.params_ = std::move(params);
    c.frozen_ = frozen;
    return c;
}

Vec FloatCodec::encode(double x) const {
    require(std::isfinite(x), "encode: input must be finite");
    const auto& p = params_;
    Vec a1 = p.mat("enc.w1") * Vec::Constant(1, x) + p.vec("enc.b1");
    Vec s1 = a1.unaryExpr([](double v) { return silu(v); });
    Vec a2 = p.mat("enc.w2") * s1 + p.vec("enc.b2");
    Vec s2 = a2.unaryExpr([](double v) { return silu(v); });
    return p.mat("enc.w3") * s2 + p.vec("enc.b3");
}

Vec FloatCodec::encode_dx(double x) const {
    const auto& p = params_;
    Vec a1 = p.mat("enc.w1") * Vec::Constant(1, x) + p.vec("enc.b1");
    Vec d1 = p.mat("enc.w1").col(0);
    Vec ds1 = a1.unaryExpr([](double v) { return silu_grad(v); }).cwiseProduct(d1);
    Vec s1 = a1.unaryExpr([](double v) { return silu(v); });
    Vec a2 = p.mat("enc.w2") * s1 + p.vec("enc.b2");
    Vec da2 = p.mat("enc.w2") * ds1;
    Vec ds2 = a2.unaryExpr([](double v) { return silu_grad(v); }).cwiseProduct(da2);
    return p.mat("enc.w3") * ds2;
}

double FloatCodec::decode(const Vec& z) const {
    require(z.size() == r_, "decode: latent dimension mismatch");
    const auto& p = params_;
    Vec zn, y;
    double scale;
    layer_norm(z, p.vec("dec.g"), p.vec("dec.b"), zn, y, scale);
    return (p.mat("dec.w") * y)(0, 0) + p.vec("dec.bias")[0];
}

Vec FloatCodec::decode_input_grad(const Vec& z, double upstream) const {
    require(z.size() == r_, "decode_input_grad: latent dimension mismatch");
    const auto& p = params_;
    Vec zn, y;
    double scale;
    layer_norm(z, p.vec("dec.g"), p.vec("dec.b"), zn, y, scale);
    Vec dy = p.mat("dec.w").transpose() * upstream;
    Vec dzn = dy.cwiseProduct(p.vec("dec.g"));
    return layer_norm_input_grad(zn, scale, dzn);
}

double FloatCodec::roundtrip_mean_error(std::span<const double> grid) const {
    double total = 0.0;
    for (double x : grid) total += std::abs(decode(encode(x)) - x);
    return total / static_cast<double>(grid.size());
}

double FloatCodec::roundtrip_max_error(std::span<const double> grid) const {
    double worst = 0.0;
    for (double x : grid) worst = std::max(worst, std::abs(decode(encode(x)) - x));
    return worst;
}

std::uint64_t FloatCodec::checksum() const {
    const auto& d = params_.data();
    std::string bytes(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
    return fnv1a64(bytes);
}

std::vector<double> codec_grid(int points, double lo, double hi) {
    require(points >= 2, "codec_grid: need at least 2 points");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    }
    return grid;
}

int projector_hidden(int r, int d) {
    return std::max(2 * std::max(r, d), 64);
}

namespace {

struct GridEval {
    double mse = 0.0;
    double mean_abs = 0.0;
    double max_abs = 0.0;
};

// full-batch forward/backward of the round-trip loss over the grid
GridEval codec_epoch(FloatCodec& c, const Eigen::RowVectorXd& xs, ParamStore* grads) {
    auto& p = c.params();
    const int n = static_cast<int>(xs.size());
    const int h = c.h();
    const int r = c.r();

    Mat a1 = (p.mat("enc.w1") * xs).colwise() + p.vec("enc.b1");
    Mat s1 = a1.unaryExpr([](double v) { return silu(v); });
    Mat a2 = (p.mat("enc.w2") * s1).colwise() + p.vec("enc.b2");
    Mat s2 = a2.unaryExpr([](double v) { return silu(v); });
    Mat z = (p.mat("enc.w3") * s2).colwise() + p.vec("enc.b3");

    // per-column LayerNorm
    Eigen::RowVectorXd mu = z.colwise().mean();
    Mat centered = z.rowwise() - mu;
    Eigen::RowVectorXd var = centered.array().square().colwise().mean();
    Eigen::RowVectorXd scale = (var.array() + kLnEps).sqrt();
    Mat zn = centered.array().rowwise() / scale.array();
    Mat y = (zn.array().colwise() * p.vec("dec.g").array()).colwise() + p.vec("dec.b").array();
    Eigen::RowVectorXd out = (p.mat("dec.w") * y).row(0).array() + p.vec("dec.bias")[0];

    Eigen::RowVectorXd err = out - xs;
    GridEval eval;
    eval.mse = err.array().square().mean();
    eval.mean_abs = err.array().abs().mean();
    eval.max_abs = err.array().abs().maxCoeff();
    if (!grads) {
        return eval;
    }

    Eigen::RowVectorXd dout = (2.0 / n) * err;
    grads->mat("dec.w") += dout * y.transpose();
    grads->vec("dec.bias")[0] += dout.sum();
    Mat dy = p.mat("dec.w").transpose() * dout;
    grads->vec("dec.g") += (dy.array() * zn.array()).rowwise().sum().matrix();
    grads->vec("dec.b") += dy.rowwise().sum();
    Mat dzn = dy.array().colwise() * p.vec("dec.g").array();
    Eigen::RowVectorXd m1 = dzn.colwise().mean();
    Eigen::RowVectorXd m2 = (dzn.array() * zn.array()).colwise().mean();
    Mat dz = ((dzn.array().rowwise() - m1.array()) - zn.array().rowwise() * m2.array())
                 .rowwise() /
             scale.array();

    grads->mat("enc.w3") += dz * s2.transpose();
    grads->vec("enc.b3") += dz.rowwise().sum();
    Mat ds2 = p.mat("enc.w3").transpose() * dz;
    Mat da2 = ds2.cwiseProduct(a2.unaryExpr([](double v) { return silu_grad(v); }));
    grads->mat("enc.w2") += da2 * s1.transpose();
    grads->vec("enc.b2") += da2.rowwise().sum();
    Mat ds1 = p.mat("enc.w2").transpose() * da2;
    Mat da1 = ds1.cwiseProduct(a1.unaryExpr([](double v) { return silu_grad(v); }));
    grads->mat("enc.w1") += da1 * xs.transpose();
    grads->vec("enc.b1") += da1.rowwise().sum();
    (void)h;
    (void)r;
    return eval;
}

}  // namespace

CodecPretrainResult pretrain_codec(int r, std::span<const double> grid, long max_epochs,
                                   std::uint64_t seed, double mean_tol, double max_tol) {
    require(grid.size() >= 2, "pretrain_codec: grid must cover the normalized range");
    Eigen::RowVectorXd xs(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) xs[static_cast<Eigen::Index>(i)] = grid[i];

    CodecPretrainResult best;
    best.mean_error = std::numeric_limits<double>::infinity();
    best.max_error = std::numeric_limits<double>::infinity();

    AdamConfig adam;
    adam.beta1 = 0.9;
    adam.beta2 = 0.999;
    adam.weight_decay = 0.0;

    const int attempts = 4;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        FloatCodec codec = FloatCodec::create(r, derive_seed(seed, 0x505245ull, attempt));
        ParamStore grads = codec.params().like();
        AdamState opt;
        opt.init(codec.params().size());
        Vec best_params = codec.params().data();
        GridEval eval0 = codec_epoch(codec, xs, nullptr);
        double best_mean = eval0.mean_abs;
        double best_max = eval0.max_abs;
        long epoch = 0;
        for (; epoch < max_epochs; ++epoch) {
            grads.data().setZero();
            GridEval eval = codec_epoch(codec, xs, &grads);
            if (eval.mean_abs < best_mean) {
                best_mean = eval.mean_abs;
                best_max = eval.max_abs;
                best_params = codec.params().data();
            }
            if (best_mean <= 0.5 * mean_tol && best_max <= 0.5 * max_tol) {
                ++epoch;
                break;
            }
            // cosine decay from 1e-2 to 1e-4
            const double progress = static_cast<double>(epoch) / std::max(1l, max_epochs);
            adam.lr = 1e-4 + 0.5 * (1e-2 - 1e-4) * (1.0 + std::cos(M_PI * progress));
            opt.step(codec.params().data(), grads.data(), adam);
        }
        codec.params().data() = best_params;
        if (best_mean < best.mean_error) {
            best.codec = std::move(codec);
            best.mean_error = best_mean;
            best.max_error = best_max;
            best.epochs_run = epoch;
        }
        if (best.mean_error <= 0.5 * mean_tol && best.max_error <= 0.5 * max_tol) {
            break;
        }
    }
    best.converged = best.mean_error <= mean_tol && best.max_error <= max_tol;
    if (best.converged) {
        best.codec.freeze();
    }
    return best;
}

}  // namespace tabgen
