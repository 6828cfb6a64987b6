#include "tabgen/layout.hpp"

#include <algorithm>

#include "json.hpp"

namespace tabgen {

using nlohmann::json;

int TokenLayout::maskable_count() const {
    int total = 0;
    for (const auto& s : spans) total += s.width;
    return total;
}

bool TokenLayout::is_numeric(int pos) const {
    return std::find(num_positions.begin(), num_positions.end(), pos) != num_positions.end();
}

const ColumnSpan* TokenLayout::span_of(int column) const {
    for (const auto& s : spans) {
        if (s.column == column) return &s;
    }
    return nullptr;
}

TokenLayout TokenLayout::build(const Table& corpus, const Vocabulary& vocab) {
    TokenLayout layout;
    layout.prompt_len = static_cast<int>(encode_prompt(corpus.schema, vocab).size());
    int cursor = layout.prompt_len;
    auto add_span = [&](int column) {
        const auto& col = corpus.str_cols[corpus.str_slot(column)];
        int width = 1;
        for (const auto& value : col) {
            width = std::max(width, static_cast<int>(vocab.encode_field(value).size()));
        }
        for (const auto& cat : corpus.schema.columns[column].categories) {
            width = std::max(width, static_cast<int>(vocab.encode_field(cat).size()));
        }
        layout.spans.push_back({column, cursor, width});
        cursor += width;
    };
    for (int c : corpus.schema.categorical_indices()) add_span(c);
    for (int c : corpus.schema.text_indices()) add_span(c);
    for (int c : corpus.schema.numerical_indices()) {
        layout.num_positions.push_back(cursor++);
        layout.num_columns.push_back(c);
    }
    layout.seq_len = cursor;
    return layout;
}

std::string TokenLayout::to_json() const {
    json j;
    j["prompt_len"] = prompt_len;
    j["seq_len"] = seq_len;
    j["spans"] = json::array();
    for (const auto& s : spans) {
        j["spans"].push_back({{"column", s.column}, {"offset", s.offset}, {"width", s.width}});
    }
    j["num_positions"] = num_positions;
    j["num_columns"] = num_columns;
    return j.dump();
}

TokenLayout TokenLayout::from_json(const std::string& text) {
    json j = json::parse(text);
    TokenLayout layout;
    layout.prompt_len = j.at("prompt_len").get<int>();
    layout.seq_len = j.at("seq_len").get<int>();
    for (const auto& js : j.at("spans")) {
        layout.spans.push_back({js.at("column").get<int>(), js.at("offset").get<int>(),
                                js.at("width").get<int>()});
    }
    layout.num_positions = j.at("num_positions").get<std::vector<int>>();
    layout.num_columns = j.at("num_columns").get<std::vector<int>>();
    return layout;
}

SerializedRecord serialize_record(const Table& table, std::size_t row, const TokenLayout& layout,
                                  const Vocabulary& vocab,
                                  const std::vector<QuantileNormalizer>& normalizers,
                                  bool allow_truncate) {
    require(row < table.rows(), "serialize_record: row out of range");
    SerializedRecord rec;
    rec.tokens.assign(layout.seq_len, Vocabulary::kPad);

    const auto prompt = encode_prompt(table.schema, vocab);
    check(static_cast<int>(prompt.size()) == layout.prompt_len,
          "serialize_record: prompt length does not match layout");
    std::copy(prompt.begin(), prompt.end(), rec.tokens.begin());

    for (const auto& span : layout.spans) {
        const std::string& value = table.str_at(row, span.column);
        std::vector<int> ids = vocab.encode_field(value);
        if (static_cast<int>(ids.size()) > span.width) {
            check(allow_truncate, "serialize_record: field too long for column '" +
                                      table.schema.columns[span.column].name + "'");
            ids.resize(span.width);
        }
        std::copy(ids.begin(), ids.end(), rec.tokens.begin() + span.offset);
    }

    require(normalizers.size() == layout.num_positions.size(),
            "serialize_record: one normalizer per numerical column required");
    for (std::size_t k = 0; k < layout.num_positions.size(); ++k) {
        rec.tokens[layout.num_positions[k]] = Vocabulary::kNum;
        const double raw = table.num_at(row, layout.num_columns[k]);
        rec.num_values.push_back(normalizers[k].normalize(raw));
    }
    return rec;
}

RecordDecode detokenize_record(const std::vector<int>& tokens, const TokenLayout& layout,
                               const Vocabulary& vocab) {
    RecordDecode out;
    out.valid = true;
    for (const auto& span : layout.spans) {
        SpanDecode d = detokenize_span(tokens, span.offset, span.width, vocab);
        if (!d.valid) out.valid = false;
        out.fields.push_back(std::move(d.text));
    }
    return out;
}

}  // namespace tabgen
