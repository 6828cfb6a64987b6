#pragma once

#include <string>
#include <vector>

#include "tabgen/quantile.hpp"
#include "tabgen/vocab.hpp"

namespace tabgen {

struct ColumnSpan {
    int column = -1;  // schema column index
    int offset = 0;
    int width = 0;
};

// Fixed serialized-row layout: [BOS] prompt [SEP], categorical column spans,
// text column spans (both fixed width, [PAD]-filled), then one [NUM]
// placeholder per numerical column. Placeholder positions are identical for
// every row of a dataset.
struct TokenLayout {
    int prompt_len = 0;             // prompt span is [0, prompt_len)
    std::vector<ColumnSpan> spans;  // categorical then text columns
    std::vector<int> num_positions;
    std::vector<int> num_columns;  // schema column index per placeholder
    int seq_len = 0;

    int maskable_count() const;  // G: text-span positions
    bool is_prompt(int pos) const { return pos < prompt_len; }
    bool is_numeric(int pos) const;
    bool is_maskable(int pos) const { return pos >= prompt_len && !is_numeric(pos); }
    const ColumnSpan* span_of(int column) const;

    static TokenLayout build(const Table& corpus, const Vocabulary& vocab);

    std::string to_json() const;
    static TokenLayout from_json(const std::string& text);
};

struct SerializedRecord {
    std::vector<int> tokens;         // length = layout.seq_len
    std::vector<double> num_values;  // normalized, one per placeholder
};

// Tokens for the prompt and string columns plus the parallel vector of
// normalized numeric values. Overlong fields truncate only when allowed.
SerializedRecord serialize_record(const Table& table, std::size_t row, const TokenLayout& layout,
                                  const Vocabulary& vocab,
                                  const std::vector<QuantileNormalizer>& normalizers,
                                  bool allow_truncate = false);

struct RecordDecode {
    bool valid = false;
    std::vector<std::string> fields;  // one per string column, span order
};

RecordDecode detokenize_record(const std::vector<int>& tokens, const TokenLayout& layout,
                               const Vocabulary& vocab);

}  // namespace tabgen
