#include "tabgen/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace tabgen {

using nlohmann::json;

std::string column_kind_name(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::Numerical: return "numerical";
        case ColumnKind::Categorical: return "categorical";
        case ColumnKind::Text: return "text";
    }
    return "numerical";
}

ColumnKind column_kind_from_name(const std::string& name) {
    if (name == "numerical") return ColumnKind::Numerical;
    if (name == "categorical") return ColumnKind::Categorical;
    if (name == "text") return ColumnKind::Text;
    throw std::runtime_error("unknown column kind: " + name);
}

int TableSchema::find(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

std::vector<int> TableSchema::numerical_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].kind == ColumnKind::Numerical) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> TableSchema::categorical_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].kind == ColumnKind::Categorical) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> TableSchema::text_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].kind == ColumnKind::Text) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::string TableSchema::to_json() const {
    json j;
    j["dataset"] = dataset;
    j["columns"] = json::array();
    for (const auto& c : columns) {
        json jc;
        jc["name"] = c.name;
        jc["kind"] = column_kind_name(c.kind);
        if (c.kind == ColumnKind::Categorical) {
            jc["categories"] = c.categories;
        }
        if (c.kind == ColumnKind::Numerical && c.decimals >= 0) {
            jc["decimals"] = c.decimals;
        }
        j["columns"].push_back(jc);
    }
    return j.dump(2);
}

TableSchema TableSchema::from_json(const std::string& text) {
    json j = json::parse(text);
    TableSchema schema;
    schema.dataset = j.value("dataset", "");
    for (const auto& jc : j.at("columns")) {
        ColumnSpec c;
        c.name = jc.at("name").get<std::string>();
        c.kind = column_kind_from_name(jc.at("kind").get<std::string>());
        if (jc.contains("categories")) {
            c.categories = jc["categories"].get<std::vector<std::string>>();
        }
        c.decimals = jc.value("decimals", -1);
        schema.columns.push_back(std::move(c));
    }
    return schema;
}

std::uint64_t TableSchema::hash() const {
    return fnv1a64(to_json());
}

std::string TableSchema::prompt_text() const {
    std::string out = "table " + (dataset.empty() ? std::string("data") : dataset);
    for (const auto& c : columns) {
        out += " | " + c.name + " ";
        switch (c.kind) {
            case ColumnKind::Numerical: out += "num"; break;
            case ColumnKind::Categorical: out += "cat"; break;
            case ColumnKind::Text: out += "text"; break;
        }
    }
    return out;
}

Table::Table(TableSchema s) : schema(std::move(s)) {
    for (const auto& c : schema.columns) {
        if (c.kind == ColumnKind::Numerical) {
            num_cols.emplace_back();
        } else {
            str_cols.emplace_back();
        }
    }
}

std::size_t Table::rows() const {
    if (!num_cols.empty()) return num_cols.front().size();
    if (!str_cols.empty()) return str_cols.front().size();
    return 0;
}

void Table::resize(std::size_t n) {
    for (auto& c : num_cols) c.resize(n, std::numeric_limits<double>::quiet_NaN());
    for (auto& c : str_cols) c.resize(n);
}

int Table::num_slot(int column) const {
    require(column >= 0 && column < static_cast<int>(schema.columns.size()), "bad column index");
    require(schema.columns[column].kind == ColumnKind::Numerical, "column is not numerical");
    int slot = 0;
    for (int i = 0; i < column; ++i) {
        if (schema.columns[i].kind == ColumnKind::Numerical) ++slot;
    }
    return slot;
}

int Table::str_slot(int column) const {
    require(column >= 0 && column < static_cast<int>(schema.columns.size()), "bad column index");
    require(schema.columns[column].kind != ColumnKind::Numerical, "column is not string-typed");
    int slot = 0;
    for (int i = 0; i < column; ++i) {
        if (schema.columns[i].kind != ColumnKind::Numerical) ++slot;
    }
    return slot;
}

double Table::num_at(std::size_t row, int column) const {
    return num_cols[num_slot(column)][row];
}

const std::string& Table::str_at(std::size_t row, int column) const {
    return str_cols[str_slot(column)][row];
}

void Table::set_num(std::size_t row, int column, double v) {
    num_cols[num_slot(column)][row] = v;
}

void Table::set_str(std::size_t row, int column, std::string v) {
    str_cols[str_slot(column)][row] = std::move(v);
}

std::string format_numeric(double v, int decimals) {
    if (std::isnan(v)) {
        return "";
    }
    if (decimals >= 0) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
        return buf;
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string quote_field(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

void write_csv(const Table& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot open for writing: " + path);
    const auto& cols = table.schema.columns;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (c) out << ',';
        out << cols[c].name;
    }
    out << '\n';
    const std::size_t n = table.rows();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) out << ',';
            if (cols[c].kind == ColumnKind::Numerical) {
                out << format_numeric(table.num_at(r, static_cast<int>(c)), cols[c].decimals);
            } else {
                out << quote_field(table.str_at(r, static_cast<int>(c)));
            }
        }
        out << '\n';
    }
    check(out.good(), "write failed: " + path);
}

namespace {

// one CSV record, handling quoted fields with embedded commas/quotes/newlines
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else if (ch == '\r') {
            // tolerate CRLF
        } else {
            field += ch;
        }
    }
    if (any) {
        fields.push_back(std::move(field));
    }
    return any;
}

}  // namespace

Table read_csv(const std::string& path, const TableSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open: " + path);
    std::vector<std::string> fields;
    check(read_record(in, fields), "empty csv: " + path);
    check(fields.size() == schema.columns.size(), "csv header does not match schema: " + path);
    for (std::size_t c = 0; c < fields.size(); ++c) {
        check(fields[c] == schema.columns[c].name,
              "csv column '" + fields[c] + "' does not match schema column '" +
                  schema.columns[c].name + "'");
    }
    Table table(schema);
    while (read_record(in, fields)) {
        if (fields.size() == 1 && fields[0].empty()) {
            continue;  // trailing newline
        }
        check(fields.size() == schema.columns.size(), "csv row width mismatch in " + path);
        const std::size_t r = table.rows();
        table.resize(r + 1);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (schema.columns[c].kind == ColumnKind::Numerical) {
                if (fields[c].empty()) {
                    table.set_num(r, static_cast<int>(c),
                                  std::numeric_limits<double>::quiet_NaN());
                } else {
                    table.set_num(r, static_cast<int>(c), std::stod(fields[c]));
                }
            } else {
                table.set_str(r, static_cast<int>(c), fields[c]);
            }
        }
    }
    return table;
}

void impute_missing(Table& table) {
    for (int c = 0; c < static_cast<int>(table.schema.columns.size()); ++c) {
        auto& spec = table.schema.columns[c];
        if (spec.kind == ColumnKind::Numerical) {
            auto& col = table.num_cols[table.num_slot(c)];
            double sum = 0.0;
            std::size_t count = 0;
            for (double v : col) {
                if (std::isfinite(v)) {
                    sum += v;
                    ++count;
                }
            }
            check(count > 0, "column '" + spec.name + "' has no finite values");
            const double mean = sum / static_cast<double>(count);
            for (double& v : col) {
                if (!std::isfinite(v)) v = mean;
            }
        } else if (spec.kind == ColumnKind::Categorical) {
            auto& col = table.str_cols[table.str_slot(c)];
            bool any_missing = false;
            for (auto& v : col) {
                if (v.empty()) {
                    v = "(missing)";
                    any_missing = true;
                }
            }
            if (any_missing &&
                std::find(spec.categories.begin(), spec.categories.end(), "(missing)") ==
                    spec.categories.end()) {
                spec.categories.push_back("(missing)");
            }
        }
    }
}

std::pair<Table, Table> split(const Table& table, double train_fraction, std::uint64_t seed) {
    require(table.rows() > 0, "split: table is empty");
    require(train_fraction >= 0.0 && train_fraction <= 1.0, "split: bad fraction");
    const std::size_t n = table.rows();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(seed, 0x53504c49ull);  // stream tag for splits
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = uniform_index(rng, i + 1);
        std::swap(idx[i], idx[j]);
    }
    const std::size_t n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(n));
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + n_train);
    std::vector<std::size_t> val_idx(idx.begin() + n_train, idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    auto take = [&](const std::vector<std::size_t>& rows) {
        Table out(table.schema);
        out.resize(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (int c = 0; c < static_cast<int>(table.schema.columns.size()); ++c) {
                if (table.schema.columns[c].kind == ColumnKind::Numerical) {
                    out.set_num(r, c, table.num_at(rows[r], c));
                } else {
                    out.set_str(r, c, table.str_at(rows[r], c));
                }
            }
        }
        return out;
    };
    return {take(train_idx), take(val_idx)};
}

}  // namespace tabgen
