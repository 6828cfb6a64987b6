#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabgen/table.hpp"

namespace tabgen {

// two-sample Kolmogorov-Smirnov statistic, sup |F_r - F_s|
double kst(std::span<const double> real, std::span<const double> synth);

// total variation distance over the union of observed categories
double tvd(const std::vector<std::string>& real, const std::vector<std::string>& synth);

double pearson(std::span<const double> x, std::span<const double> y);

// half the absolute contingency-table difference over the observed joint grid
double contingency_score(const std::vector<std::string>& real_a,
                         const std::vector<std::string>& real_b,
                         const std::vector<std::string>& synth_a,
                         const std::vector<std::string>& synth_b);

struct ColumnError {
    std::string column;
    std::string metric;  // "kst" or "tvd"
    double error = 0.0;
};

struct PairError {
    std::string column_a;
    std::string column_b;
    std::string metric;  // "pearson", "contingency", "binned"
    double error = 0.0;
    bool skipped = false;  // constant numeric column
};

double shape(const Table& real, const Table& synth, std::vector<ColumnError>* breakdown = nullptr);

// mean over numerical pairs of 0.5 * |corr_real - corr_synth|
double pearson_score(const Table& real, const Table& synth,
                     std::vector<PairError>* breakdown = nullptr);

double trend(const Table& real, const Table& synth, std::vector<PairError>* breakdown = nullptr);

// -------- dataset-specific match rates --------

struct ParsedExpr {
    std::string o1, o2, o3;
    double x1 = 0.0, x2 = 0.0;
};

// strict parse by the generation grammar; nullopt when the string deviates
std::optional<ParsedExpr> parse_latex(const std::string& latex);
// left-to-right decimal literal extraction, the fallback for non-grammar strings
std::vector<double> extract_literals(const std::string& text);

double op_match_rate(const Table& table);
double expr_match_rate(const Table& table, double delta = 0.07);
double bio_match_rate(const Table& table, double delta = 0.05);

struct FidelityReport {
    double shape = 0.0;  // fractions in [0,1]; report printers scale to percent
    double trend = 0.0;
    std::vector<ColumnError> shape_breakdown;
    std::vector<PairError> trend_breakdown;
    std::optional<double> op_mr;
    std::optional<double> expr_mr;
    std::optional<double> bio_mr;
    int invalid_records = 0;

    std::string to_text() const;
    std::string to_json() const;
};

FidelityReport evaluate(const Table& real, const Table& synth, int invalid_records = 0);

}  // namespace tabgen
