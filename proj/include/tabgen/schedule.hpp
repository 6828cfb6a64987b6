#pragma once

#include <limits>
#include <vector>

#include "tabgen/common.hpp"

namespace tabgen {

// Per-feature variance-exploding noise schedule
//   sigma_rho(t) = (smin^(1/rho) + t * (smax^(1/rho) - smin^(1/rho)))^rho
// with sigma(0) = sigma_min and sigma(1) = sigma_max exactly.
struct PowerMeanSchedule {
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    std::vector<double> rho;  // one shape parameter per numerical column

    PowerMeanSchedule() = default;
    PowerMeanSchedule(double smin, double smax, std::vector<double> rho_values);

    static PowerMeanSchedule uniform(int features, double rho_value = 7.0,
                                     double smin = 0.002, double smax = 80.0);

    int features() const { return static_cast<int>(rho.size()); }
    double sigma(double t, int feature) const;
    // d sigma / d rho at fixed t, for the loss-coupled rho mode
    double dsigma_drho(double t, int feature) const;
};

// Survival probability of an unmasked token, alpha_bar(0)=1, alpha_bar(1)=0.
struct MaskSchedule {
    enum class Kind { Linear, Cosine };
    Kind kind = Kind::Linear;

    double alpha_bar(double t) const;
};

struct ChurnConfig {
    double amount = 0.0;  // S_churn; 0 disables churn
    double sigma_lo = 0.0;
    double sigma_hi = std::numeric_limits<double>::infinity();
};

// Reverse-time discretization: sigma[f][t] for t = 0..T with sigma[f][0] = 0,
// so the final step returns the denoiser prediction exactly.
struct DiscretizedSchedule {
    int steps = 0;
    std::vector<std::vector<double>> sigma;      // [feature][t]
    std::vector<std::vector<double>> sigma_hat;  // churned levels, >= sigma
};

DiscretizedSchedule discretize(const PowerMeanSchedule& schedule, int steps,
                               const ChurnConfig& churn = {});

}  // namespace tabgen
