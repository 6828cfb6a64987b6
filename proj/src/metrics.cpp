#include "tabgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tabgen/datasets.hpp"

namespace tabgen {

using nlohmann::json;

double kst(std::span<const double> real, std::span<const double> synth) {
    require(!real.empty() && !synth.empty(), "kst: columns must be nonempty");
    std::vector<double> r(real.begin(), real.end());
    std::vector<double> s(synth.begin(), synth.end());
    std::sort(r.begin(), r.end());
    std::sort(s.begin(), s.end());
    const double nr = static_cast<double>(r.size());
    const double ns = static_cast<double>(s.size());
    double sup = 0.0;
    std::size_t i = 0, j = 0;
    while (i < r.size() && j < s.size()) {
        const double x = std::min(r[i], s[j]);
        while (i < r.size() && r[i] <= x) ++i;
        while (j < s.size() && s[j] <= x) ++j;
        sup = std::max(sup, std::abs(static_cast<double>(i) / nr - static_cast<double>(j) / ns));
    }
    return sup;
}

namespace {

std::map<std::string, double> frequencies(const std::vector<std::string>& values) {
    std::map<std::string, double> freq;
    for (const auto& v : values) freq[v] += 1.0;
    for (auto& [k, f] : freq) f /= static_cast<double>(values.size());
    return freq;
}

}  // namespace

double tvd(const std::vector<std::string>& real, const std::vector<std::string>& synth) {
    require(!real.empty() && !synth.empty(), "tvd: columns must be nonempty");
    const auto fr = frequencies(real);
    const auto fs = frequencies(synth);
    std::set<std::string> support;
    for (const auto& [k, _] : fr) support.insert(k);
    for (const auto& [k, _] : fs) support.insert(k);
    double total = 0.0;
    for (const auto& k : support) {
        const double a = fr.count(k) ? fr.at(k) : 0.0;
        const double b = fs.count(k) ? fs.at(k) : 0.0;
        total += std::abs(a - b);
    }
    return 0.5 * total;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "pearson: need matched columns, n >= 2");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    require(vx > 0.0 && vy > 0.0, "pearson: constant column");
    return cov / std::sqrt(vx * vy);
}

double contingency_score(const std::vector<std::string>& real_a,
                         const std::vector<std::string>& real_b,
                         const std::vector<std::string>& synth_a,
                         const std::vector<std::string>& synth_b) {
    require(!real_a.empty() && !synth_a.empty(), "contingency: columns must be nonempty");
    require(real_a.size() == real_b.size() && synth_a.size() == synth_b.size(),
            "contingency: mismatched pair lengths");
    std::map<std::pair<std::string, std::string>, double> fr, fs;
    for (std::size_t i = 0; i < real_a.size(); ++i) fr[{real_a[i], real_b[i]}] += 1.0;
    for (std::size_t i = 0; i < synth_a.size(); ++i) fs[{synth_a[i], synth_b[i]}] += 1.0;
    for (auto& [k, f] : fr) f /= static_cast<double>(real_a.size());
    for (auto& [k, f] : fs) f /= static_cast<double>(synth_a.size());
    std::set<std::pair<std::string, std::string>> support;
    for (const auto& [k, _] : fr) support.insert(k);
    for (const auto& [k, _] : fs) support.insert(k);
    double total = 0.0;
    for (const auto& k : support) {
        const double a = fr.count(k) ? fr.at(k) : 0.0;
        const double b = fs.count(k) ? fs.at(k) : 0.0;
        total += std::abs(a - b);
    }
    return 0.5 * total;
}

namespace {

const std::vector<double>& num_col(const Table& t, int c) {
    return t.num_cols[t.num_slot(c)];
}

const std::vector<std::string>& str_col(const Table& t, int c) {
    return t.str_cols[t.str_slot(c)];
}

bool is_constant(const std::vector<double>& v) {
    for (double x : v) {
        if (x != v.front()) return false;
    }
    return true;
}

// quartile edges of the real column; both tables are binned with them
std::vector<std::string> quartile_bin(const std::vector<double>& values,
                                      const std::vector<double>& real_reference) {
    std::vector<double> sorted(real_reference);
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t i = std::min(static_cast<std::size_t>(pos), sorted.size() - 2);
        const double w = pos - static_cast<double>(i);
        return sorted[i] + w * (sorted[i + 1] - sorted[i]);
    };
    const double e1 = quantile(0.25), e2 = quantile(0.50), e3 = quantile(0.75);
    std::vector<std::string> bins;
    bins.reserve(values.size());
    for (double v : values) {
        if (v <= e1) bins.push_back("q1");
        else if (v <= e2) bins.push_back("q2");
        else if (v <= e3) bins.push_back("q3");
        else bins.push_back("q4");
    }
    return bins;
}

void check_schemas_match(const Table& real, const Table& synth) {
    check(real.schema.columns.size() == synth.schema.columns.size(), "schema mismatch");
    for (std::size_t i = 0; i < real.schema.columns.size(); ++i) {
        check(real.schema.columns[i].name == synth.schema.columns[i].name &&
                  real.schema.columns[i].kind == synth.schema.columns[i].kind,
              "schema mismatch at column " + real.schema.columns[i].name);
    }
}

}  // namespace

double shape(const Table& real, const Table& synth, std::vector<ColumnError>* breakdown) {
    check_schemas_match(real, synth);
    double total = 0.0;
    int count = 0;
    for (int c = 0; c < static_cast<int>(real.schema.columns.size()); ++c) {
        const auto& spec = real.schema.columns[c];
        if (spec.kind == ColumnKind::Text) {
            continue;  // free text enters only through the match rates
        }
        double err;
        std::string metric;
        if (spec.kind == ColumnKind::Numerical) {
            err = kst(num_col(real, c), num_col(synth, c));
            metric = "kst";
        } else {
            err = tvd(str_col(real, c), str_col(synth, c));
            metric = "tvd";
        }
        if (breakdown) breakdown->push_back({spec.name, metric, err});
        total += err;
        ++count;
    }
    check(count > 0, "shape: no structured columns");
    return total / count;
}

double pearson_score(const Table& real, const Table& synth, std::vector<PairError>* breakdown) {
    check_schemas_match(real, synth);
    const auto nums = real.schema.numerical_indices();
    require(nums.size() >= 2, "pearson_score: need at least 2 numerical columns");
    double total = 0.0;
    int count = 0;
    for (std::size_t a = 0; a < nums.size(); ++a) {
        for (std::size_t b = a + 1; b < nums.size(); ++b) {
            const auto& ra = num_col(real, nums[a]);
            const auto& rb = num_col(real, nums[b]);
            const auto& sa = num_col(synth, nums[a]);
            const auto& sb = num_col(synth, nums[b]);
            PairError pe{real.schema.columns[nums[a]].name, real.schema.columns[nums[b]].name,
                         "pearson", 0.0, false};
            if (is_constant(ra) || is_constant(rb) || is_constant(sa) || is_constant(sb)) {
                pe.skipped = true;
            } else {
                pe.error = 0.5 * std::abs(pearson(ra, rb) - pearson(sa, sb));
                total += pe.error;
                ++count;
            }
            if (breakdown) breakdown->push_back(pe);
        }
    }
    return count > 0 ? total / count : 0.0;
}

double trend(const Table& real, const Table& synth, std::vector<PairError>* breakdown) {
    check_schemas_match(real, synth);
    std::vector<int> structured;
    for (int c = 0; c < static_cast<int>(real.schema.columns.size()); ++c) {
        if (real.schema.columns[c].kind != ColumnKind::Text) structured.push_back(c);
    }
    require(structured.size() >= 2, "trend: need at least 2 structured columns");
    double total = 0.0;
    int count = 0;
    for (std::size_t a = 0; a < structured.size(); ++a) {
        for (std::size_t b = a + 1; b < structured.size(); ++b) {
            const int ca = structured[a];
            const int cb = structured[b];
            const bool num_a = real.schema.columns[ca].kind == ColumnKind::Numerical;
            const bool num_b = real.schema.columns[cb].kind == ColumnKind::Numerical;
            PairError pe{real.schema.columns[ca].name, real.schema.columns[cb].name, "", 0.0,
                         false};
            if (num_a && num_b) {
                pe.metric = "pearson";
                const auto& ra = num_col(real, ca);
                const auto& rb = num_col(real, cb);
                const auto& sa = num_col(synth, ca);
                const auto& sb = num_col(synth, cb);
                if (is_constant(ra) || is_constant(rb) || is_constant(sa) || is_constant(sb)) {
                    pe.skipped = true;
                } else {
                    pe.error = 0.5 * std::abs(pearson(ra, rb) - pearson(sa, sb));
                }
            } else if (!num_a && !num_b) {
                pe.metric = "contingency";
                pe.error = contingency_score(str_col(real, ca), str_col(real, cb),
                                             str_col(synth, ca), str_col(synth, cb));
            } else {
                // mixed pair: numeric side binned into the real column's quartiles
                pe.metric = "binned";
                const int nc = num_a ? ca : cb;
                const int sc = num_a ? cb : ca;
                const auto real_bins = quartile_bin(num_col(real, nc), num_col(real, nc));
                const auto synth_bins = quartile_bin(num_col(synth, nc), num_col(real, nc));
                pe.error = contingency_score(real_bins, str_col(real, sc), synth_bins,
                                             str_col(synth, sc));
            }
            if (!pe.skipped) {
                total += pe.error;
                ++count;
            }
            if (breakdown) breakdown->push_back(pe);
        }
    }
    check(count > 0, "trend: all pairs skipped");
    return total / count;
}

// -------- MathExpr match rates --------

namespace {

bool parse_number(const std::string& s, std::size_t& pos, double& out) {
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    if (pos == start) return false;
    out = std::stod(s.substr(start, pos - start));
    return true;
}

// one unary term of the grammar; consumes the whole substring [pos, end)
bool parse_unary(const std::string& s, std::string& op, double& value) {
    std::size_t pos = 0;
    auto expect = [&](const std::string& lit) {
        if (s.compare(pos, lit.size(), lit) != 0) return false;
        pos += lit.size();
        return true;
    };
    auto wrapped = [&](const std::string& prefix, char open, char close,
                       const std::string& name) {
        pos = 0;
        if (!expect(prefix)) return false;
        if (pos >= s.size() || s[pos] != open) return false;
        ++pos;
        if (!parse_number(s, pos, value)) return false;
        if (pos >= s.size() || s[pos] != close) return false;
        ++pos;
        if (pos != s.size()) return false;
        op = name;
        return true;
    };
    if (wrapped("\\log", '(', ')', "log")) return true;
    if (wrapped("\\exp", '(', ')', "exp")) return true;
    if (wrapped("\\sin", '(', ')', "sin")) return true;
    if (wrapped("\\cos", '(', ')', "cos")) return true;
    if (wrapped("\\tan", '(', ')', "tan")) return true;
    if (wrapped("\\sqrt", '{', '}', "sqrt")) return true;
    // (NUM)^2 and (NUM)^3
    pos = 0;
    if (!s.empty() && s[0] == '(') {
        pos = 1;
        if (parse_number(s, pos, value) && pos + 1 < s.size() && s[pos] == ')' &&
            s[pos + 1] == '^') {
            if (pos + 2 == s.size() - 1 && (s[pos + 2] == '2' || s[pos + 2] == '3')) {
                op = (s[pos + 2] == '2') ? "square" : "cube";
                return true;
            }
        }
    }
    // bare literal
    pos = 0;
    if (parse_number(s, pos, value) && pos == s.size()) {
        op = "none";
        return true;
    }
    return false;
}

// split "{A}{B}" into the two brace groups
bool split_braces(const std::string& s, std::string& a, std::string& b) {
    if (s.empty() || s[0] != '{') return false;
    int depth = 0;
    std::size_t i = 0;
    for (; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        else if (s[i] == '}') {
            --depth;
            if (depth == 0) break;
        }
    }
    if (i >= s.size()) return false;
    a = s.substr(1, i - 1);
    if (i + 1 >= s.size() || s[i + 1] != '{' || s.back() != '}') return false;
    b = s.substr(i + 2, s.size() - i - 3);
    return true;
}

}  // namespace

std::optional<ParsedExpr> parse_latex(const std::string& latex) {
    ParsedExpr out;
    std::string a, b;
    if (latex.rfind("\\frac", 0) == 0) {
        if (!split_braces(latex.substr(5), a, b)) return std::nullopt;
        out.o3 = "div";
    } else {
        // exactly one top-level binary separator
        int depth = 0;
        std::size_t found = std::string::npos;
        std::string sep;
        for (std::size_t i = 0; i < latex.size(); ++i) {
            if (latex[i] == '{' || latex[i] == '(') ++depth;
            else if (latex[i] == '}' || latex[i] == ')') --depth;
            if (depth != 0) continue;
            std::string cand;
            if (latex.compare(i, 3, " + ") == 0) cand = "add";
            else if (latex.compare(i, 3, " - ") == 0) cand = "sub";
            else if (latex.compare(i, 8, " \\times ") == 0) cand = "mul";
            if (!cand.empty()) {
                if (found != std::string::npos) return std::nullopt;
                found = i;
                sep = cand;
            }
        }
        if (found == std::string::npos) return std::nullopt;
        out.o3 = sep;
        a = latex.substr(0, found);
        b = latex.substr(found + (sep == "mul" ? 8 : 3));
    }
    if (!parse_unary(a, out.o1, out.x1)) return std::nullopt;
    if (!parse_unary(b, out.o2, out.x2)) return std::nullopt;
    return out;
}

std::vector<double> extract_literals(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (std::isdigit(static_cast<unsigned char>(text[pos]))) {
            double v;
            if (parse_number(text, pos, v)) {
                out.push_back(v);
                continue;
            }
        }
        ++pos;
    }
    return out;
}

namespace {

struct MathExprCols {
    int x1, x2, o1, o2, o3, latex;
};

MathExprCols mathexpr_cols(const Table& t) {
    MathExprCols c{t.schema.find("x1"),
                   t.schema.find("x2"),
                   t.schema.find("operation_x1"),
                   t.schema.find("operation_x2"),
                   t.schema.find("operation_between"),
                   t.schema.find("latex_expression")};
    require(c.x1 >= 0 && c.x2 >= 0 && c.o1 >= 0 && c.o2 >= 0 && c.o3 >= 0 && c.latex >= 0,
            "table is not MathExpr-shaped");
    return c;
}

bool row_op_match(const Table& t, const MathExprCols& c, std::size_t r,
                  std::optional<ParsedExpr>& parsed) {
    parsed = parse_latex(t.str_at(r, c.latex));
    if (!parsed) return false;
    return parsed->o1 == t.str_at(r, c.o1) && parsed->o2 == t.str_at(r, c.o2) &&
           parsed->o3 == t.str_at(r, c.o3);
}

bool within_rel_tol(double literal, double reference, double delta) {
    if (reference == 0.0) {
        return std::abs(literal) <= delta;  // absolute fallback at zero
    }
    return std::abs(literal - reference) / std::abs(reference) <= delta;
}

}  // namespace

double op_match_rate(const Table& table) {
    const auto c = mathexpr_cols(table);
    require(table.rows() > 0, "op_match_rate: empty table");
    std::size_t matches = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        std::optional<ParsedExpr> parsed;
        if (row_op_match(table, c, r, parsed)) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(table.rows());
}

double expr_match_rate(const Table& table, double delta) {
    const auto c = mathexpr_cols(table);
    require(table.rows() > 0, "expr_match_rate: empty table");
    std::size_t matches = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        std::optional<ParsedExpr> parsed;
        if (!row_op_match(table, c, r, parsed)) continue;
        double lit1 = parsed->x1;
        double lit2 = parsed->x2;
        if (within_rel_tol(lit1, table.num_at(r, c.x1), delta) &&
            within_rel_tol(lit2, table.num_at(r, c.x2), delta)) {
            ++matches;
        }
    }
    return static_cast<double>(matches) / static_cast<double>(table.rows());
}

// -------- ProfileBio match rate --------

namespace {

struct Bin {
    int lo;
    int hi;  // inclusive; INT_MAX-ish for open bins
    const char* desc;
};

constexpr int kOpen = 1 << 20;

constexpr Bin kAgeBins[] = {
    {21, 25, "in the early stage of adulthood"},
    {26, 30, "in an early phase of career development"},
    {31, 40, "in a career-building stage"},
    {41, 50, "at an established professional stage"},
    {51, 60, "in an advanced career stage"},
    {61, kOpen, "at the late career stage"},
};

constexpr Bin kSalaryBins[] = {
    {-kOpen, 110, "a comfortable, stable income"},
    {111, 150, "a strong professional income"},
    {151, kOpen, "a high-level executive income"},
};

// boundary relaxation: delta=0.05 over the finite bin widths gives 1 integer
// step for the 5-10 year age bins and 2 for the width-40 salary bins
constexpr int kAgeSlack = 1;
constexpr int kSalarySlack = 2;

bool descriptor_ok(double value, const std::string& bio, const Bin* bins, int nbins, int slack) {
    int present = -1;
    for (int i = 0; i < nbins; ++i) {
        if (bio.find(bins[i].desc) != std::string::npos) {
            if (present >= 0) return false;  // two descriptors in one biography
            present = i;
        }
    }
    if (present < 0) return false;
    const double lo = bins[present].lo - slack;
    const double hi = bins[present].hi + slack;
    return value >= lo && value <= hi;
}

}  // namespace

double bio_match_rate(const Table& table, double delta) {
    const int age_c = table.schema.find("age");
    const int salary_c = table.schema.find("salary");
    const int sex_c = table.schema.find("sex");
    const int state_c = table.schema.find("birth_state");
    const int college_c = table.schema.find("college");
    const int degree_c = table.schema.find("degree");
    const int occ_c = table.schema.find("occupation");
    const int bio_c = table.schema.find("biography");
    require(age_c >= 0 && salary_c >= 0 && sex_c >= 0 && state_c >= 0 && college_c >= 0 &&
                degree_c >= 0 && occ_c >= 0 && bio_c >= 0,
            "table is not ProfileBio-shaped");
    require(table.rows() > 0, "bio_match_rate: empty table");
    (void)delta;  // operationalized as the integer slacks below

    std::size_t matches = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const std::string& bio = table.str_at(r, bio_c);
        const std::string& sex = table.str_at(r, sex_c);
        const std::string pronoun = (sex == "male") ? "He" : "She";
        bool ok = bio.find("This " + sex + " individual") != std::string::npos;
        ok = ok && bio.find("born in " + table.str_at(r, state_c)) != std::string::npos;
        ok = ok && bio.find("at " + table.str_at(r, college_c)) != std::string::npos;
        ok = ok && bio.find("a " + table.str_at(r, degree_c) + " degree") != std::string::npos;
        ok = ok && bio.find("works as a " + table.str_at(r, occ_c)) != std::string::npos;
        ok = ok && bio.find(pronoun + " was born") != std::string::npos;
        ok = ok && bio.find(pronoun + " works as") != std::string::npos;
        ok = ok && bio.find(pronoun + " earns") != std::string::npos;
        ok = ok && descriptor_ok(table.num_at(r, age_c), bio, kAgeBins, 6, kAgeSlack);
        ok = ok && descriptor_ok(table.num_at(r, salary_c), bio, kSalaryBins, 3, kSalarySlack);
        if (ok) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(table.rows());
}

FidelityReport evaluate(const Table& real, const Table& synth, int invalid_records) {
    FidelityReport report;
    report.shape = shape(real, synth, &report.shape_breakdown);
    report.trend = trend(real, synth, &report.trend_breakdown);
    report.invalid_records = invalid_records;
    if (real.schema.dataset == "mathexpr") {
        report.op_mr = op_match_rate(synth);
        report.expr_mr = expr_match_rate(synth);
    } else if (real.schema.dataset == "profilebio") {
        report.bio_mr = bio_match_rate(synth);
    }
    return report;
}

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
    return buf;
}

}  // namespace

std::string FidelityReport::to_text() const {
    std::ostringstream out;
    out << "shape error: " << pct(shape) << "\n";
    for (const auto& ce : shape_breakdown) {
        out << "  " << ce.column << " (" << ce.metric << "): " << pct(ce.error) << "\n";
    }
    out << "trend error: " << pct(trend) << "\n";
    for (const auto& pe : trend_breakdown) {
        out << "  " << pe.column_a << " x " << pe.column_b << " (" << pe.metric << "): ";
        if (pe.skipped) out << "skipped (constant column)";
        else out << pct(pe.error);
        out << "\n";
    }
    if (op_mr) out << "op match rate: " << pct(*op_mr) << "\n";
    if (expr_mr) out << "expr match rate: " << pct(*expr_mr) << "\n";
    if (bio_mr) out << "bio match rate: " << pct(*bio_mr) << "\n";
    out << "invalid records: " << invalid_records << "\n";
    return out.str();
}

std::string FidelityReport::to_json() const {
    json j;
    j["shape"] = shape;
    j["trend"] = trend;
    j["shape_breakdown"] = json::array();
    for (const auto& ce : shape_breakdown) {
        j["shape_breakdown"].push_back({{"column", ce.column}, {"metric", ce.metric},
                                        {"error", ce.error}});
    }
    j["trend_breakdown"] = json::array();
    for (const auto& pe : trend_breakdown) {
        j["trend_breakdown"].push_back({{"column_a", pe.column_a},
                                        {"column_b", pe.column_b},
                                        {"metric", pe.metric},
                                        {"error", pe.error},
                                        {"skipped", pe.skipped}});
    }
    if (op_mr) j["op_mr"] = *op_mr;
    if (expr_mr) j["expr_mr"] = *expr_mr;
    if (bio_mr) j["bio_mr"] = *bio_mr;
    j["invalid_records"] = invalid_records;
    return j.dump(2);
}

}  // namespace tabgen
