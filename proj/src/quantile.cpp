#include "tabgen/quantile.hpp"

#include <algorithm>
#include <cmath>

namespace tabgen {

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

namespace {

double acklam(double u) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double lo = 0.02425;
    if (u < lo) {
        const double q = std::sqrt(-2.0 * std::log(u));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (u <= 1.0 - lo) {
        const double q = u - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double normal_quantile(double u) {
    require(u >= 0.0 && u <= 1.0, "normal_quantile: u must be in [0,1]");
    if (u == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (u == 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    double z = acklam(u);
    // one Halley step against the exact CDF
    const double e = normal_cdf(z) - u;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    const double w = e / pdf;
    z -= w / (1.0 + 0.5 * z * w);
    return z;
}

QuantileNormalizer QuantileNormalizer::fit(std::span<const double> values) {
    std::vector<double> finite;
    finite.reserve(values.size());
    for (double v : values) {
        if (std::isfinite(v)) {
            finite.push_back(v);
        }
    }
    require(finite.size() >= 2, "fit_normalizer: need at least 2 finite values");
    std::sort(finite.begin(), finite.end());
    return from_references(std::move(finite));
}

QuantileNormalizer QuantileNormalizer::from_references(std::vector<double> refs) {
    require(refs.size() >= 2, "normalizer: need at least 2 reference values");
    require(std::is_sorted(refs.begin(), refs.end()), "normalizer: references must be sorted");
    QuantileNormalizer qn;
    qn.refs_ = std::move(refs);
    qn.degenerate_ = qn.refs_.front() == qn.refs_.back();
    return qn;
}

double QuantileNormalizer::position(std::size_t k) const {
    return static_cast<double>(k) / static_cast<double>(refs_.size() - 1);
}

double QuantileNormalizer::normalize(double x) const {
    require(std::isfinite(x), "normalize: input must be finite");
    if (degenerate_) {
        return 0.0;
    }
    double u;
    if (x <= refs_.front()) {
        u = 0.0;
    } else if (x >= refs_.back()) {
        u = 1.0;
    } else {
        const auto lb = std::lower_bound(refs_.begin(), refs_.end(), x);
        const std::size_t i = static_cast<std::size_t>(lb - refs_.begin());
        if (*lb == x) {
            // ties map to the midpoint of their probability mass
            const auto ub = std::upper_bound(refs_.begin(), refs_.end(), x);
            const std::size_t j = static_cast<std::size_t>(ub - refs_.begin()) - 1;
            u = 0.5 * (position(i) + position(j));
        } else {
            const double x0 = refs_[i - 1];
            const double x1 = refs_[i];
            const double w = (x - x0) / (x1 - x0);
            u = position(i - 1) + w * (position(i) - position(i - 1));
        }
    }
    const double u_min = normal_cdf(-kMaxZ);
    u = std::clamp(u, u_min, 1.0 - u_min);
    return normal_quantile(u);
}

double QuantileNormalizer::denormalize(double z) const {
    require(std::isfinite(z), "denormalize: input must be finite");
    if (degenerate_) {
        return refs_.front();
    }
    const double u = normal_cdf(z);
    if (u <= 0.0) {
        return refs_.front();
    }
    if (u >= 1.0) {
        return refs_.back();
    }
    const double n1 = static_cast<double>(refs_.size() - 1);
    const double pos = u * n1;
    const std::size_t i = std::min(static_cast<std::size_t>(pos), refs_.size() - 2);
    const double w = pos - static_cast<double>(i);
    return refs_[i] + w * (refs_[i + 1] - refs_[i]);
}

}  // namespace tabgen
