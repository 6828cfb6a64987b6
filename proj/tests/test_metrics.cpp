#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "tabgen/datasets.hpp"
#include "tabgen/metrics.hpp"

using namespace tabgen;

// ---- independent brute-force implementations used as oracles ----

namespace {

double kst_oracle(const std::vector<double>& r, const std::vector<double>& s) {
    std::set<double> points(r.begin(), r.end());
    points.insert(s.begin(), s.end());
    double sup = 0.0;
    for (double x : points) {
        double fr = 0, fs = 0;
        for (double v : r) fr += v <= x ? 1.0 : 0.0;
        for (double v : s) fs += v <= x ? 1.0 : 0.0;
        sup = std::max(sup, std::abs(fr / r.size() - fs / s.size()));
    }
    return sup;
}

double tvd_oracle(const std::vector<std::string>& r, const std::vector<std::string>& s) {
    std::set<std::string> support(r.begin(), r.end());
    support.insert(s.begin(), s.end());
    double total = 0.0;
    for (const auto& w : support) {
        double fr = 0, fs = 0;
        for (const auto& v : r) fr += v == w ? 1.0 : 0.0;
        for (const auto& v : s) fs += v == w ? 1.0 : 0.0;
        total += std::abs(fr / r.size() - fs / s.size());
    }
    return 0.5 * total;
}

double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    return cov / std::sqrt(vx * vy);
}

double contingency_oracle(const std::vector<std::string>& ra, const std::vector<std::string>& rb,
                          const std::vector<std::string>& sa,
                          const std::vector<std::string>& sb) {
    std::set<std::pair<std::string, std::string>> support;
    for (std::size_t i = 0; i < ra.size(); ++i) support.insert({ra[i], rb[i]});
    for (std::size_t i = 0; i < sa.size(); ++i) support.insert({sa[i], sb[i]});
    double total = 0.0;
    for (const auto& cell : support) {
        double fr = 0, fs = 0;
        for (std::size_t i = 0; i < ra.size(); ++i) {
            fr += (ra[i] == cell.first && rb[i] == cell.second) ? 1.0 : 0.0;
        }
        for (std::size_t i = 0; i < sa.size(); ++i) {
            fs += (sa[i] == cell.first && sb[i] == cell.second) ? 1.0 : 0.0;
        }
        total += std::abs(fr / ra.size() - fs / sa.size());
    }
    return 0.5 * total;
}

std::vector<std::string> quartile_bin_oracle(const std::vector<double>& values,
                                             const std::vector<double>& reference) {
    std::vector<double> sorted(reference);
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * (sorted.size() - 1);
        const std::size_t i = std::min(static_cast<std::size_t>(pos), sorted.size() - 2);
        return sorted[i] + (pos - i) * (sorted[i + 1] - sorted[i]);
    };
    const double e1 = quantile(0.25), e2 = quantile(0.5), e3 = quantile(0.75);
    std::vector<std::string> out;
    for (double v : values) {
        out.push_back(v <= e1 ? "q1" : v <= e2 ? "q2" : v <= e3 ? "q3" : "q4");
    }
    return out;
}

// random mixed table generator for oracle-equivalence sweeps
Table random_table(Rng& rng, const TableSchema& schema, int rows) {
    Table t(schema);
    t.resize(rows);
    for (int c = 0; c < static_cast<int>(schema.columns.size()); ++c) {
        for (int r = 0; r < rows; ++r) {
            if (schema.columns[c].kind == ColumnKind::Numerical) {
                t.set_num(r, c, std::round(uniform01(rng) * 20) / 4.0);
            } else {
                const int k = static_cast<int>(uniform_index(rng, 3));
                t.set_str(r, c, std::string(1, static_cast<char>('a' + k)));
            }
        }
    }
    return t;
}

}  // namespace

TEST_CASE("kst examples") {
    std::vector<double> a = {1, 2, 3, 4};
    std::vector<double> b = {1, 2};
    CHECK(kst(a, b) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(kst(a, a) == 0.0);
    std::vector<double> lo = {0, 1, 2};
    std::vector<double> hi = {100, 101};
    CHECK(kst(lo, hi) == 1.0);
    CHECK_THROWS_AS(kst(a, {}), std::invalid_argument);
}

TEST_CASE("tvd examples") {
    std::vector<std::string> r = {"a", "a", "b", "b"};
    std::vector<std::string> s = {"a", "a", "a", "a"};
    CHECK(tvd(r, s) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(tvd(r, r) == 0.0);
    std::vector<std::string> t = {"c", "d"};
    CHECK(tvd(r, t) == 1.0);
}

TEST_CASE("pearson bound example") {
    TableSchema schema;
    schema.columns = {{"x", ColumnKind::Numerical, {}, -1}, {"y", ColumnKind::Numerical, {}, -1}};
    Table real(schema), synth(schema);
    real.resize(3);
    synth.resize(3);
    for (int r = 0; r < 3; ++r) {
        real.set_num(r, 0, r);
        real.set_num(r, 1, r);  // rho = +1
        synth.set_num(r, 0, r);
        synth.set_num(r, 1, -r);  // rho = -1
    }
    CHECK(pearson_score(real, synth) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pearson_score(real, real) == 0.0);
}

TEST_CASE("contingency degenerate example") {
    // real: independent uniform 2x2, synth: all mass on one cell -> 3/4
    std::vector<std::string> ra = {"a", "a", "b", "b"};
    std::vector<std::string> rb = {"x", "y", "x", "y"};
    std::vector<std::string> sa = {"a", "a", "a", "a"};
    std::vector<std::string> sb = {"x", "x", "x", "x"};
    CHECK(contingency_score(ra, rb, sa, sb) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(contingency_score(ra, rb, ra, rb) == 0.0);
    std::vector<std::string> da = {"c", "c"};
    std::vector<std::string> db = {"z", "z"};
    CHECK(contingency_score(ra, rb, da, db) == 1.0);
}

TEST_CASE("oracle equivalence on 100 random tables") {
    Rng rng = make_rng(99);
    TableSchema schema;
    schema.columns = {{"n1", ColumnKind::Numerical, {}, -1},
                      {"n2", ColumnKind::Numerical, {}, -1},
                      {"c1", ColumnKind::Categorical, {"a", "b", "c"}, -1},
                      {"c2", ColumnKind::Categorical, {"a", "b", "c"}, -1}};
    for (int trial = 0; trial < 100; ++trial) {
        const int rows_r = 2 + static_cast<int>(uniform_index(rng, 49));
        const int rows_s = 2 + static_cast<int>(uniform_index(rng, 49));
        Table real = random_table(rng, schema, rows_r);
        Table synth = random_table(rng, schema, rows_s);

        // shape oracle: mean of per-column kst/tvd
        const double shape_oracle =
            (kst_oracle(real.num_cols[0], synth.num_cols[0]) +
             kst_oracle(real.num_cols[1], synth.num_cols[1]) +
             tvd_oracle(real.str_cols[0], synth.str_cols[0]) +
             tvd_oracle(real.str_cols[1], synth.str_cols[1])) /
            4.0;
        CHECK(shape(real, synth) == doctest::Approx(shape_oracle).epsilon(1e-13));

        CHECK(kst(real.num_cols[0], synth.num_cols[0]) ==
              doctest::Approx(kst_oracle(real.num_cols[0], synth.num_cols[0])).epsilon(1e-13));
        CHECK(tvd(real.str_cols[0], synth.str_cols[0]) ==
              doctest::Approx(tvd_oracle(real.str_cols[0], synth.str_cols[0])).epsilon(1e-13));

        // trend oracle over all six structured pairs
        const bool n1r_const = std::all_of(real.num_cols[0].begin(), real.num_cols[0].end(),
                                           [&](double v) { return v == real.num_cols[0][0]; });
        const bool n2r_const = std::all_of(real.num_cols[1].begin(), real.num_cols[1].end(),
                                           [&](double v) { return v == real.num_cols[1][0]; });
        const bool n1s_const = std::all_of(synth.num_cols[0].begin(), synth.num_cols[0].end(),
                                           [&](double v) { return v == synth.num_cols[0][0]; });
        const bool n2s_const = std::all_of(synth.num_cols[1].begin(), synth.num_cols[1].end(),
                                           [&](double v) { return v == synth.num_cols[1][0]; });
        double total = 0.0;
        int terms = 0;
        if (!n1r_const && !n2r_const && !n1s_const && !n2s_const) {
            total += 0.5 * std::abs(pearson_oracle(real.num_cols[0], real.num_cols[1]) -
                                    pearson_oracle(synth.num_cols[0], synth.num_cols[1]));
            ++terms;
        }
        for (int nc = 0; nc < 2; ++nc) {
            for (int cc = 0; cc < 2; ++cc) {
                total += contingency_oracle(
                    quartile_bin_oracle(real.num_cols[nc], real.num_cols[nc]),
                    real.str_cols[cc],
                    quartile_bin_oracle(synth.num_cols[nc], real.num_cols[nc]),
                    synth.str_cols[cc]);
                ++terms;
            }
        }
        total += contingency_oracle(real.str_cols[0], real.str_cols[1], synth.str_cols[0],
                                    synth.str_cols[1]);
        ++terms;
        CHECK(trend(real, synth) == doctest::Approx(total / terms).epsilon(1e-13));
    }
}

TEST_CASE("identical tables give exactly zero") {
    Table t = gen_mathexpr(200, 5);
    CHECK(shape(t, t) == 0.0);
    CHECK(trend(t, t) == 0.0);
    FidelityReport rep = evaluate(t, t);
    CHECK(rep.shape == 0.0);
    CHECK(rep.trend == 0.0);
    CHECK(*rep.op_mr == 1.0);
}

TEST_CASE("latex parser") {
    auto p = parse_latex("\\sin(2.75) \\times \\log(6.40)");
    REQUIRE(p.has_value());
    CHECK(p->o1 == "sin");
    CHECK(p->o2 == "log");
    CHECK(p->o3 == "mul");
    CHECK(p->x1 == doctest::Approx(2.75));
    CHECK(p->x2 == doctest::Approx(6.40));

    auto q = parse_latex("\\frac{(2.00)^2}{\\sqrt{4.00}}");
    REQUIRE(q.has_value());
    CHECK(q->o1 == "square");
    CHECK(q->o2 == "sqrt");
    CHECK(q->o3 == "div");

    auto r = parse_latex("1.00 + 3.00");
    REQUIRE(r.has_value());
    CHECK(r->o1 == "none");
    CHECK(r->o2 == "none");
    CHECK(r->o3 == "add");

    CHECK_FALSE(parse_latex("garbage").has_value());
    CHECK_FALSE(parse_latex("1.0 + 2.0 + 3.0").has_value());
    CHECK_FALSE(parse_latex("\\sin(2.75)").has_value());

    auto lits = extract_literals("x 12.5 then .5 and 7");
    REQUIRE(lits.size() == 3);
    CHECK(lits[0] == doctest::Approx(12.5));
    CHECK(lits[1] == doctest::Approx(5));
    CHECK(lits[2] == doctest::Approx(7));
}

TEST_CASE("op match rate on corrupted rows") {
    Table t = gen_mathexpr(100, 21);
    CHECK(op_match_rate(t) == 1.0);
    // operator says mul but the text renders add
    t.set_str(42, 5, render_latex(t.num_at(42, 0), t.num_at(42, 1), t.str_at(42, 2),
                                  t.str_at(42, 3), "add"));
    t.set_str(42, 4, "mul");
    CHECK(op_match_rate(t) == doctest::Approx(0.99));
    // unparseable rows count as mismatches
    t.set_str(17, 5, "not latex at all");
    CHECK(op_match_rate(t) == doctest::Approx(0.98));
}

TEST_CASE("expr match tolerance semantics") {
    Table t(mathexpr_schema());
    t.resize(2);
    for (int r = 0; r < 2; ++r) {
        t.set_num(r, 0, 2.75);
        t.set_num(r, 1, 6.40);
        t.set_str(r, 2, "sin");
        t.set_str(r, 3, "log");
        t.set_str(r, 4, "mul");
    }
    // relative error 0.0545 <= 0.07 passes
    t.set_str(0, 5, "\\sin(2.90) \\times \\log(6.40)");
    // relative error 0.0727 > 0.07 fails
    t.set_str(1, 5, "\\sin(2.95) \\times \\log(6.40)");
    CHECK(expr_match_rate(t, 0.07) == doctest::Approx(0.5));

    t.set_str(1, 5, "\\sin(2.75) \\times \\log(6.40)");
    CHECK(expr_match_rate(t, 0.07) == 1.0);

    // zero-valued structured numeric falls back to absolute tolerance
    Table z(mathexpr_schema());
    z.resize(1);
    z.set_num(0, 0, 0.0);
    z.set_num(0, 1, 5.0);
    z.set_str(0, 2, "none");
    z.set_str(0, 3, "none");
    z.set_str(0, 4, "add");
    z.set_str(0, 5, "0.05 + 5.00");
    CHECK(expr_match_rate(z, 0.07) == 1.0);
    z.set_str(0, 5, "0.20 + 5.00");
    CHECK(expr_match_rate(z, 0.07) == 0.0);
}

TEST_CASE("bio match rate rules") {
    Table t = gen_profilebio(200, 8);
    CHECK(bio_match_rate(t) == 1.0);

    // boundary relaxation: age 25 may carry the adjacent descriptor
    Table b(profilebio_schema());
    b.resize(1);
    b.set_num(0, 0, 25);
    b.set_num(0, 1, 100);
    b.set_str(0, 2, "female");
    b.set_str(0, 3, "Texas");
    b.set_str(0, 4, "Ohio State University");
    b.set_str(0, 5, "bachelor");
    b.set_str(0, 6, "education professional");
    b.set_str(0, 7,
              render_biography(26, 100, "female", "Texas", "Ohio State University", "bachelor",
                               "education professional"));
    CHECK(bio_match_rate(b) == 1.0);
    // two steps away is rejected
    b.set_num(0, 0, 24);
    CHECK(bio_match_rate(b) == 0.0);

    // occupation contradiction
    Table c = gen_profilebio(10, 9);
    c.set_str(3, 6, "software developer");
    const std::string bio = c.str_at(3, 7);
    if (bio.find("software developer") == std::string::npos) {
        CHECK(bio_match_rate(c) < 1.0);
    }
    Table d = gen_profilebio(10, 10);
    std::string swapped = render_biography(
        static_cast<int>(d.num_at(0, 0)), static_cast<int>(d.num_at(0, 1)), d.str_at(0, 2),
        d.str_at(0, 3), d.str_at(0, 4), d.str_at(0, 5), "education professional");
    d.set_str(0, 6, "software developer");
    d.set_str(0, 7, swapped);
    CHECK(bio_match_rate(d) == doctest::Approx(0.9));
}

TEST_CASE("report formatting") {
    Table real = gen_mathexpr(300, 1);
    Table synth = gen_mathexpr(300, 2);
    FidelityReport rep = evaluate(real, synth, 3);
    CHECK(rep.invalid_records == 3);
    const std::string text = rep.to_text();
    CHECK(text.find("shape error:") != std::string::npos);
    CHECK(text.find("op match rate:") != std::string::npos);
    CHECK(text.find('%') != std::string::npos);
    const std::string js = rep.to_json();
    CHECK(js.find("\"shape\"") != std::string::npos);
}
