#include "sa/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sa {

const char* Vocabulary::special_token(int id) {
    switch (id) {
        case kPad: return "[PAD]";
        case kUnk: return "[UNK]";
        case kCls: return "[CLS]";
        case kSep: return "[SEP]";
        case kMask: return "[MASK]";
        default: throw std::invalid_argument("not a special id: " + std::to_string(id));
    }
}

Vocabulary::Vocabulary() {
    for (int i = 0; i < kSpecialCount; ++i) add(special_token(i));
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? -1 : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size())
        throw std::invalid_argument("token id " + std::to_string(id) + " out of range [0," +
                                    std::to_string(size()) + ")");
    return id_to_token_[static_cast<std::size_t>(id)];
}

int Vocabulary::add(const std::string& token) {
    if (token_to_id_.count(token))
        throw std::invalid_argument("duplicate token: " + token);
    const int id = size();
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open vocabulary file for writing: " + path);
    for (const auto& tok : id_to_token_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    Vocabulary vocab;
    vocab.id_to_token_.clear();
    vocab.token_to_id_.clear();
    std::string line;
    while (std::getline(in, line)) vocab.add(line);
    if (vocab.size() < kSpecialCount)
        throw std::runtime_error("vocabulary file too short: " + path);
    for (int i = 0; i < kSpecialCount; ++i)
        if (vocab.id_to_token_[static_cast<std::size_t>(i)] != special_token(i))
            throw std::runtime_error("vocabulary file missing special " +
                                     std::string(special_token(i)) + " at line " +
                                     std::to_string(i + 1));
    return vocab;
}

std::uint64_t Vocabulary::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ull;
    };
    for (const auto& tok : id_to_token_) {
        for (unsigned char c : tok) mix(c);
        mix('\n');
    }
    return h;
}

std::string normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        const bool is_ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
        const bool is_control = (c < 0x20 || c == 0x7f) && !is_ws;
        if (is_control) continue;
        if (is_ws) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(c);
    }
    return out;
}

std::vector<std::string> whitespace_split(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

std::vector<std::string> utf8_chars(const std::string& text) {
    std::vector<std::string> chars;
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        if ((c & 0x80) == 0x00) len = 1;
        else if ((c & 0xe0) == 0xc0) len = 2;
        else if ((c & 0xf0) == 0xe0) len = 3;
        else if ((c & 0xf8) == 0xf0) len = 4;
        len = std::min(len, text.size() - i);
        chars.push_back(text.substr(i, len));
        i += len;
    }
    return chars;
}

namespace {

// A word as a sequence of current symbols; non-initial symbols carry "##".
std::vector<std::string> word_symbols(const std::string& word) {
    std::vector<std::string> syms;
    for (const auto& ch : utf8_chars(word))
        syms.push_back(syms.empty() ? ch : "##" + ch);
    return syms;
}

std::string merge_surface(const std::string& a, const std::string& b) {
    // b is always a continuation symbol within a word
    return a + (b.rfind("##", 0) == 0 ? b.substr(2) : b);
}

}  // namespace

Vocabulary train_vocab(const std::vector<std::string>& corpus_lines, int target_size,
                       int min_frequency) {
    // word frequencies over the normalized corpus
    std::map<std::string, std::int64_t> word_freq;
    for (const auto& line : corpus_lines)
        for (const auto& w : whitespace_split(normalize_text(line))) ++word_freq[w];
    if (word_freq.empty()) throw std::invalid_argument("train_vocab: empty corpus");

    std::vector<std::vector<std::string>> words;
    std::vector<std::int64_t> freqs;
    std::set<std::string> alphabet;
    for (const auto& [w, f] : word_freq) {
        auto syms = word_symbols(w);
        for (const auto& s : syms) alphabet.insert(s);
        words.push_back(std::move(syms));
        freqs.push_back(f);
    }

    const int base = Vocabulary::kSpecialCount + static_cast<int>(alphabet.size());
    if (target_size <= base)
        throw std::invalid_argument("train_vocab: target_size " + std::to_string(target_size) +
                                    " must exceed specials + distinct characters (" +
                                    std::to_string(base) + ")");

    Vocabulary vocab;
    for (const auto& s : alphabet) vocab.add(s);  // std::set order: deterministic

    while (vocab.size() < target_size) {
        // count adjacent pairs, weighted by word frequency
        std::map<std::pair<std::string, std::string>, std::int64_t> pair_freq;
        for (std::size_t i = 0; i < words.size(); ++i)
            for (std::size_t j = 0; j + 1 < words[i].size(); ++j)
                pair_freq[{words[i][j], words[i][j + 1]}] += freqs[i];

        std::int64_t best_freq = 0;
        std::pair<std::string, std::string> best_pair;
        std::string best_surface;
        for (const auto& [pr, f] : pair_freq) {
            if (f < min_frequency) continue;
            const std::string surface = merge_surface(pr.first, pr.second);
            if (vocab.contains(surface)) continue;
            if (f > best_freq || (f == best_freq && surface < best_surface)) {
                best_freq = f;
                best_pair = pr;
                best_surface = surface;
            }
        }
        if (best_freq == 0) break;

        vocab.add(best_surface);
        for (auto& syms : words) {
            std::vector<std::string> merged;
            merged.reserve(syms.size());
            for (std::size_t j = 0; j < syms.size(); ++j) {
                if (j + 1 < syms.size() && syms[j] == best_pair.first &&
                    syms[j + 1] == best_pair.second) {
                    merged.push_back(best_surface);
                    ++j;
                } else {
                    merged.push_back(syms[j]);
                }
            }
            syms = std::move(merged);
        }
    }
    return vocab;
}

std::vector<std::string> segment_word(const std::string& word, const Vocabulary& vocab) {
    const auto chars = utf8_chars(word);
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start < chars.size()) {
        std::size_t end = chars.size();
        std::string found;
        while (end > start) {
            std::string candidate;
            for (std::size_t i = start; i < end; ++i) candidate += chars[i];
            if (start > 0) candidate = "##" + candidate;
            if (vocab.contains(candidate)) {
                found = candidate;
                break;
            }
            --end;
        }
        if (found.empty()) {
            pieces.push_back(Vocabulary::special_token(Vocabulary::kUnk));
            ++start;
        } else {
            pieces.push_back(found);
            start = end;
        }
    }
    return pieces;
}

EncodedSequence encode(const std::string& text, const Vocabulary& vocab, int seq_len) {
    if (seq_len < 2)
        throw std::invalid_argument("encode: seq_len must be at least 2, got " +
                                    std::to_string(seq_len));
    std::vector<int> piece_ids;
    for (const auto& word : whitespace_split(normalize_text(text)))
        for (const auto& piece : segment_word(word, vocab))
            piece_ids.push_back(vocab.id_of(piece));

    // [CLS] fixed at 0, tail pieces dropped, [SEP] always last real position
    const int budget = seq_len - 2;
    if (static_cast<int>(piece_ids.size()) > budget)
        piece_ids.resize(static_cast<std::size_t>(budget));

    EncodedSequence seq;
    seq.ids.push_back(Vocabulary::kCls);
    seq.ids.insert(seq.ids.end(), piece_ids.begin(), piece_ids.end());
    seq.ids.push_back(Vocabulary::kSep);
    seq.real_length = static_cast<int>(seq.ids.size());
    seq.ids.resize(static_cast<std::size_t>(seq_len), Vocabulary::kPad);
    seq.attention_mask.assign(static_cast<std::size_t>(seq_len), 0);
    for (int i = 0; i < seq.real_length; ++i) seq.attention_mask[static_cast<std::size_t>(i)] = 1;
    return seq;
}

std::string decode(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::string out;
    for (int id : ids) {
        const std::string& tok = vocab.token_of(id);  // validates range
        if (id < Vocabulary::kSpecialCount) continue;
        if (tok.rfind("##", 0) == 0) {
            out += tok.substr(2);
        } else {
            if (!out.empty()) out += ' ';
            out += tok;
        }
    }
    return out;
}

}  // namespace sa
