#pragma once

#include <span>
#include <vector>

#include "tabgen/common.hpp"

namespace tabgen {

double normal_cdf(double z);
// Acklam's rational approximation refined with one Halley step
double normal_quantile(double u);

// Monotone map from a column's empirical distribution onto a standard normal,
// inverted after sampling. Normalized outputs are clipped to [-kMaxZ, kMaxZ]
// so the float codec's pretraining grid covers the whole normalized range.
class QuantileNormalizer {
  public:
    static constexpr double kMaxZ = 4.0;

    static QuantileNormalizer fit(std::span<const double> values);

    double normalize(double x) const;
    double denormalize(double z) const;

    bool degenerate() const { return degenerate_; }
    double min_value() const { return refs_.front(); }
    double max_value() const { return refs_.back(); }
    const std::vector<double>& references() const { return refs_; }

    static QuantileNormalizer from_references(std::vector<double> refs);

  private:
    QuantileNormalizer() = default;

    std::vector<double> refs_;  // sorted training values
    bool degenerate_ = false;

    double position(std::size_t k) const;  // quantile position of refs_[k]
};

}  // namespace tabgen
