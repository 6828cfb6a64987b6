#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tabgen/common.hpp"

namespace tabgen {

enum class ColumnKind { Numerical, Categorical, Text };

std::string column_kind_name(ColumnKind kind);
ColumnKind column_kind_from_name(const std::string& name);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Numerical;
    std::vector<std::string> categories;  // categorical columns only
    int decimals = -1;                    // numeric print hint; -1 = shortest round-trip
};

struct TableSchema {
    std::string dataset;  // optional tag, e.g. "mathexpr" or "profilebio"
    std::vector<ColumnSpec> columns;

    int find(const std::string& name) const;
    std::vector<int> numerical_indices() const;
    std::vector<int> categorical_indices() const;
    std::vector<int> text_indices() const;

    std::string to_json() const;
    static TableSchema from_json(const std::string& text);
    std::uint64_t hash() const;

    // fixed textual description of the columns, prepended to every serialized row
    std::string prompt_text() const;
};

// Column-major row storage. Numerical columns hold doubles (NaN = missing),
// categorical and text columns hold strings ("" = missing before imputation).
struct Table {
    TableSchema schema;
    std::vector<std::vector<double>> num_cols;       // one per numerical column
    std::vector<std::vector<std::string>> str_cols;  // one per categorical/text column

    explicit Table(TableSchema s = {});

    std::size_t rows() const;
    void resize(std::size_t n);

    // slot of a schema column inside num_cols / str_cols
    int num_slot(int column) const;
    int str_slot(int column) const;

    double num_at(std::size_t row, int column) const;
    const std::string& str_at(std::size_t row, int column) const;
    void set_num(std::size_t row, int column, double v);
    void set_str(std::size_t row, int column, std::string v);
};

void write_csv(const Table& table, const std::string& path);
Table read_csv(const std::string& path, const TableSchema& schema);

std::string format_numeric(double v, int decimals);

// Mean-imputes missing numerical values and turns missing categories into an
// explicit extra category. Errors on all-missing numerical columns.
void impute_missing(Table& table);

std::pair<Table, Table> split(const Table& table, double train_fraction, std::uint64_t seed);

}  // namespace tabgen
