#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tabgen/table.hpp"

namespace tabgen {

// Word-level vocabulary over the training corpus with character fallback for
// unseen spans. A piece is either a word ([\\]?[A-Za-z]+, optionally absorbing
// one leading space) or a single character, so tokenization is lossless.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kMask = 1;
    static constexpr int kSep = 2;
    static constexpr int kBos = 3;
    static constexpr int kEos = 4;
    static constexpr int kNum = 5;
    static constexpr int kNumSpecials = 6;

    static std::vector<std::string> split_pieces(const std::string& text);
    static Vocabulary build(const Table& corpus);
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& piece(int id) const;
    const std::vector<std::string>& tokens() const { return tokens_; }
    bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

    // id of an exact piece, -1 if absent
    int lookup(const std::string& piece) const;
    // piece ids for a field string, falling back to characters for unseen
    // words; unknown characters are an error
    std::vector<int> encode_field(const std::string& text) const;

    std::uint64_t hash() const;

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// token sequence for the schema prompt: [BOS] pieces [SEP]
std::vector<int> encode_prompt(const TableSchema& schema, const Vocabulary& vocab);

struct SpanDecode {
    bool valid = false;
    std::string text;
};

// concatenates pieces up to the first [PAD]; trailing positions must all be
// [PAD] and no special may appear inside the content
SpanDecode detokenize_span(const std::vector<int>& tokens, std::size_t offset, std::size_t width,
                           const Vocabulary& vocab);

}  // namespace tabgen
