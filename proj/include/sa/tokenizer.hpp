#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace sa {

// Sub-word vocabulary with BPE-trained merges and WordPiece-style greedy
// longest-match encoding. Ids are dense; the five specials occupy 0..4.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kSpecialCount = 5;

    static const char* special_token(int id);

    Vocabulary();  // specials only

    int size() const { return static_cast<int>(id_to_token_.size()); }
    int id_of(const std::string& token) const;  // -1 when absent
    const std::string& token_of(int id) const;  // throws on out-of-range
    bool contains(const std::string& token) const { return id_of(token) >= 0; }
    int add(const std::string& token);          // throws on duplicate

    // One token per line, line number = id. Byte-exact round trip.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    std::uint64_t content_hash() const;  // FNV-1a over the serialized form

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

// Fixed-length encoded review: [CLS] pieces... [SEP] then [PAD]s.
struct EncodedSequence {
    std::vector<int> ids;                       // exactly seq_len
    std::vector<std::uint8_t> attention_mask;   // 1 = real, 0 = pad
    int real_length = 0;                        // count of non-pad positions
};

// Minimal normalization: strip control characters, collapse whitespace runs
// to single spaces, trim. Input is taken to be NFC already; no case folding.
std::string normalize_text(const std::string& text);

std::vector<std::string> whitespace_split(const std::string& text);
std::vector<std::string> utf8_chars(const std::string& text);

// BPE merge training over whitespace-split words. Deterministic: the most
// frequent adjacent pair wins, ties broken by lexicographic order of the
// merged surface form. Stops at target_size or when no pair reaches
// min_frequency.
Vocabulary train_vocab(const std::vector<std::string>& corpus_lines, int target_size,
                       int min_frequency = 2);

// Greedy longest-match segmentation of one word; continuations carry "##".
// A position with no matching piece yields [UNK] for one character.
std::vector<std::string> segment_word(const std::string& word, const Vocabulary& vocab);

EncodedSequence encode(const std::string& text, const Vocabulary& vocab, int seq_len);

// Drops specials and pads, joins "##" continuations without spaces.
std::string decode(const std::vector<int>& ids, const Vocabulary& vocab);

}  // namespace sa
