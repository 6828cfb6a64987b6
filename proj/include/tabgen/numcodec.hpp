#pragma once

#include <span>

#include "tabgen/params.hpp"

namespace tabgen {

// Frozen float codec. ENC is a 3-layer perceptron 1 -> h -> h -> r with SiLU
// activations and hidden width h = max(4, floor(sqrt(r))); DEC is a LayerNorm
// over the latent followed by a linear map r -> 1.
class FloatCodec {
  public:
    static int hidden_width(int r);
    static FloatCodec create(int r, std::uint64_t seed);

    int r() const { return r_; }
    int h() const { return h_; }
    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }

    Vec encode(double x) const;
    // d encode / d x, for the loss-coupled rho mode
    Vec encode_dx(double x) const;
    double decode(const Vec& z) const;
    // dL/dz given dL/d(decode output); DEC stays frozen but its input gradient
    // feeds the trainable output projector
    Vec decode_input_grad(const Vec& z, double upstream) const;

    double roundtrip_mean_error(std::span<const double> grid) const;
    double roundtrip_max_error(std::span<const double> grid) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::uint64_t checksum() const;

    static FloatCodec from_params(int r, ParamStore params, bool frozen);

    FloatCodec() = default;

  private:
    int r_ = 0;
    int h_ = 0;
    bool frozen_ = false;
    ParamStore params_;
};

struct CodecPretrainResult {
    FloatCodec codec;
    double mean_error = 0.0;
    double max_error = 0.0;
    long epochs_run = 0;
    bool converged = false;
};

std::vector<double> codec_grid(int points = 2001, double lo = -4.0, double hi = 4.0);

// Round-trip reconstruction on a fixed grid; the codec is frozen on success.
// Non-convergence is reported through the result, not thrown.
CodecPretrainResult pretrain_codec(int r, std::span<const double> grid, long max_epochs,
                                   std::uint64_t seed, double mean_tol = 1e-3,
                                   double max_tol = 1e-2);

// Trainable projector dimensions: r -> hidden -> D (input side) and the
// symmetric D -> hidden -> r (output side), hidden = max(2*max(r, D), 64).
int projector_hidden(int r, int d);

}  // namespace tabgen
