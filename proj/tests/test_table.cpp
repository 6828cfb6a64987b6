#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "tabgen/datasets.hpp"
#include "tabgen/table.hpp"
#include "tabgen/train.hpp"

using namespace tabgen;

namespace {

TableSchema small_schema() {
    TableSchema s;
    s.dataset = "demo";
    s.columns = {
        {"value", ColumnKind::Numerical, {}, 2},
        {"kind", ColumnKind::Categorical, {"a", "b"}, -1},
        {"note", ColumnKind::Text, {}, -1},
    };
    return s;
}

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("csv round trip with quoting") {
    Table t(small_schema());
    t.resize(3);
    t.set_num(0, 0, 1.25);
    t.set_str(0, 1, "a");
    t.set_str(0, 2, "plain");
    t.set_num(1, 0, -3.5);
    t.set_str(1, 1, "b");
    t.set_str(1, 2, "commas, \"quotes\" and\nnewlines");
    t.set_num(2, 0, std::nan(""));
    t.set_str(2, 1, "");
    t.set_str(2, 2, "");

    const std::string path = tmp_path("tabgen_roundtrip.csv");
    write_csv(t, path);
    Table back = read_csv(path, t.schema);
    REQUIRE(back.rows() == 3);
    CHECK(back.num_at(0, 0) == 1.25);
    CHECK(back.str_at(1, 2) == "commas, \"quotes\" and\nnewlines");
    CHECK(std::isnan(back.num_at(2, 0)));
    CHECK(back.str_at(2, 1).empty());
    std::filesystem::remove(path);
}

TEST_CASE("schema json round trip and hash") {
    TableSchema s = mathexpr_schema();
    TableSchema back = TableSchema::from_json(s.to_json());
    CHECK(back.dataset == "mathexpr");
    CHECK(back.columns.size() == 6);
    CHECK(back.columns[0].decimals == 2);
    CHECK(back.columns[2].categories.size() == 9);
    CHECK(back.hash() == s.hash());
    TableSchema other = profilebio_schema();
    CHECK(other.hash() != s.hash());
}

TEST_CASE("split sizes, determinism, partition") {
    Table t = gen_mathexpr(5000, 7);
    auto [train, val] = split(t, 0.9, 123);
    CHECK(train.rows() == 4500);
    CHECK(val.rows() == 500);
    auto [train2, val2] = split(t, 0.9, 123);
    CHECK(train2.rows() == train.rows());
    bool same = true;
    for (std::size_t r = 0; r < train.rows() && same; ++r) {
        same = train.str_at(r, 5) == train2.str_at(r, 5) && train.num_at(r, 0) == train2.num_at(r, 0);
    }
    CHECK(same);

    auto [all, none] = split(t, 1.0, 9);
    CHECK(all.rows() == 5000);
    CHECK(none.rows() == 0);

    // disjoint and exhaustive: multiset of latex strings matches
    std::multiset<std::string> orig, parts;
    for (std::size_t r = 0; r < t.rows(); ++r) orig.insert(t.str_at(r, 5));
    for (std::size_t r = 0; r < train.rows(); ++r) parts.insert(train.str_at(r, 5));
    for (std::size_t r = 0; r < val.rows(); ++r) parts.insert(val.str_at(r, 5));
    CHECK(orig == parts);
}

TEST_CASE("imputation") {
    Table t(small_schema());
    t.resize(4);
    t.set_num(0, 0, 2.0);
    t.set_num(1, 0, std::nan(""));
    t.set_num(2, 0, 4.0);
    t.set_num(3, 0, std::nan(""));
    for (int r = 0; r < 4; ++r) t.set_str(r, 2, "x");
    t.set_str(0, 1, "a");
    t.set_str(1, 1, "");
    t.set_str(2, 1, "b");
    t.set_str(3, 1, "a");
    impute_missing(t);
    CHECK(t.num_at(1, 0) == doctest::Approx(3.0));
    CHECK(t.num_at(3, 0) == doctest::Approx(3.0));
    CHECK(t.str_at(1, 1) == "(missing)");
    const auto& cats = t.schema.columns[1].categories;
    CHECK(std::find(cats.begin(), cats.end(), "(missing)") != cats.end());

    Table bad(small_schema());
    bad.resize(2);
    bad.set_str(0, 1, "a");
    bad.set_str(1, 1, "a");
    CHECK_THROWS(impute_missing(bad));  // all-missing numeric column
}

TEST_CASE("numeric formatting") {
    CHECK(format_numeric(1.0, 2) == "1.00");
    CHECK(format_numeric(160.0, 0) == "160");
    CHECK(format_numeric(0.1, -1) == "0.1");
    CHECK(format_numeric(std::nan(""), 2) == "");
}

TEST_CASE("sidecar path helper") {
    CHECK(sidecar_path("data/m.csv", ".schema.json") == "data/m.schema.json");
    CHECK(sidecar_path("m", ".manifest.json") == "m.manifest.json");
}
