#include "tabgen/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace tabgen {

PowerMeanSchedule::PowerMeanSchedule(double smin, double smax, std::vector<double> rho_values)
    : sigma_min(smin), sigma_max(smax), rho(std::move(rho_values)) {
    require(sigma_min > 0.0 && sigma_min < sigma_max, "schedule: need 0 < sigma_min < sigma_max");
    for (double r : rho) {
        require(r > 0.0, "schedule: every rho must be positive");
    }
}

PowerMeanSchedule PowerMeanSchedule::uniform(int features, double rho_value, double smin,
                                             double smax) {
    return PowerMeanSchedule(smin, smax, std::vector<double>(std::max(features, 0), rho_value));
}

double PowerMeanSchedule::sigma(double t, int feature) const {
    require(t >= 0.0 && t <= 1.0, "sigma_at: t must be in [0,1]");
    require(feature >= 0 && feature < features(), "sigma_at: feature index out of range");
    const double r = rho[feature];
    const double lo = std::pow(sigma_min, 1.0 / r);
    const double hi = std::pow(sigma_max, 1.0 / r);
    return std::pow(lo + t * (hi - lo), r);
}

double PowerMeanSchedule::dsigma_drho(double t, int feature) const {
    require(t >= 0.0 && t <= 1.0, "dsigma_drho: t must be in [0,1]");
    require(feature >= 0 && feature < features(), "dsigma_drho: feature index out of range");
    const double r = rho[feature];
    const double llo = std::log(sigma_min);
    const double lhi = std::log(sigma_max);
    const double lo = std::exp(llo / r);
    const double hi = std::exp(lhi / r);
    const double a = lo + t * (hi - lo);
    // da/drho: each term s^(1/rho) differentiates to -s^(1/rho) * log(s) / rho^2
    const double da = -(lo * llo + t * (hi * lhi - lo * llo)) / (r * r);
    // sigma = exp(rho * log a)
    return sigma(t, feature) * (std::log(a) + r * da / a);
}

double MaskSchedule::alpha_bar(double t) const {
    require(t >= 0.0 && t <= 1.0, "alpha_bar: t must be in [0,1]");
    switch (kind) {
        case Kind::Linear:
            return 1.0 - t;
        case Kind::Cosine: {
            const double c = std::cos(0.5 * M_PI * t);
            return c * c;
        }
    }
    return 1.0 - t;
}

DiscretizedSchedule discretize(const PowerMeanSchedule& schedule, int steps,
                               const ChurnConfig& churn) {
    require(steps >= 1, "discretize: steps must be >= 1");
    DiscretizedSchedule out;
    out.steps = steps;
    const int nf = schedule.features();
    out.sigma.assign(nf, std::vector<double>(steps + 1, 0.0));
    out.sigma_hat.assign(nf, std::vector<double>(steps + 1, 0.0));
    const double sqrt2m1 = std::sqrt(2.0) - 1.0;
    for (int f = 0; f < nf; ++f) {
        for (int t = 1; t <= steps; ++t) {
            const double s = schedule.sigma(static_cast<double>(t) / steps, f);
            double gamma = 0.0;
            if (churn.amount > 0.0 && s >= churn.sigma_lo && s <= churn.sigma_hi) {
                gamma = std::min(churn.amount / steps, sqrt2m1);
            }
            out.sigma[f][t] = s;
            out.sigma_hat[f][t] = s * (1.0 + gamma);
        }
    }
    return out;
}

}  // namespace tabgen
