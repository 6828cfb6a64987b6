#include "tabgen/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace tabgen {

namespace {

bool word_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '\\';
}

std::size_t word_end(const std::string& s, std::size_t start) {
    std::size_t i = start;
    if (i < s.size() && s[i] == '\\') ++i;
    while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    return i;
}

const char* kSpecialNames[] = {"[PAD]", "[MASK]", "[SEP]", "[BOS]", "[EOS]", "[NUM]"};

}  // namespace

std::vector<std::string> Vocabulary::split_pieces(const std::string& text) {
    std::vector<std::string> pieces;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == ' ' && i + 1 < text.size() && word_start(text[i + 1])) {
            const std::size_t end = word_end(text, i + 1);
            pieces.push_back(text.substr(i, end - i));
            i = end;
        } else if (word_start(text[i])) {
            const std::size_t end = word_end(text, i);
            if (end > i + (text[i] == '\\' ? 1 : 0)) {
                pieces.push_back(text.substr(i, end - i));
                i = end;
            } else {
                pieces.push_back(text.substr(i, 1));
                ++i;
            }
        } else {
            pieces.push_back(text.substr(i, 1));
            ++i;
        }
    }
    return pieces;
}

Vocabulary Vocabulary::build(const Table& corpus) {
    std::set<std::string> pieces;
    auto absorb = [&](const std::string& text) {
        for (const auto& piece : split_pieces(text)) {
            pieces.insert(piece);
        }
        for (char c : text) {
            pieces.insert(std::string(1, c));  // character fallback alphabet
        }
    };
    absorb(corpus.schema.prompt_text());
    for (int c = 0; c < static_cast<int>(corpus.schema.columns.size()); ++c) {
        const auto& spec = corpus.schema.columns[c];
        if (spec.kind == ColumnKind::Numerical) continue;
        for (const auto& cat : spec.categories) absorb(cat);
        const auto& col = corpus.str_cols[corpus.str_slot(c)];
        for (const auto& value : col) absorb(value);
    }
    std::vector<std::string> tokens(std::begin(kSpecialNames), std::end(kSpecialNames));
    tokens.insert(tokens.end(), pieces.begin(), pieces.end());
    return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    require(tokens.size() >= kNumSpecials, "vocabulary: missing special tokens");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) {
        v.index_[v.tokens_[i]] = i;
    }
    return v;
}

const std::string& Vocabulary::piece(int id) const {
    require(id >= 0 && id < size(), "vocabulary: id out of range");
    return tokens_[id];
}

int Vocabulary::lookup(const std::string& piece) const {
    auto it = index_.find(piece);
    return it == index_.end() ? -1 : it->second;
}

std::vector<int> Vocabulary::encode_field(const std::string& text) const {
    std::vector<int> out;
    for (const auto& piece : split_pieces(text)) {
        const int id = lookup(piece);
        if (id >= 0) {
            out.push_back(id);
            continue;
        }
        for (char c : piece) {
            const int cid = lookup(std::string(1, c));
            check(cid >= 0, "encode_field: character '" + std::string(1, c) +
                                "' is outside the corpus alphabet");
            out.push_back(cid);
        }
    }
    return out;
}

std::uint64_t Vocabulary::hash() const {
    std::string joined;
    for (const auto& t : tokens_) {
        joined += t;
        joined += '\x1f';
    }
    return fnv1a64(joined);
}

std::vector<int> encode_prompt(const TableSchema& schema, const Vocabulary& vocab) {
    std::vector<int> out;
    out.push_back(Vocabulary::kBos);
    for (int id : vocab.encode_field(schema.prompt_text())) {
        out.push_back(id);
    }
    out.push_back(Vocabulary::kSep);
    return out;
}

SpanDecode detokenize_span(const std::vector<int>& tokens, std::size_t offset, std::size_t width,
                           const Vocabulary& vocab) {
    SpanDecode out;
    bool in_padding = false;
    for (std::size_t i = offset; i < offset + width; ++i) {
        const int id = tokens[i];
        if (id == Vocabulary::kPad) {
            in_padding = true;
            continue;
        }
        if (in_padding || vocab.is_special(id)) {
            return out;  // stray special or content after padding
        }
        out.text += vocab.piece(id);
    }
    out.valid = true;
    return out;
}

}  // namespace tabgen
