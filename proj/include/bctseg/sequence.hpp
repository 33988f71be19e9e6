#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bctseg {

using Symbol = std::uint8_t;

/// Malformed input data. `offset` locates the offending token when one can be
/// named: the sequence position for FASTA, the byte offset otherwise.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::optional<std::size_t> offset = std::nullopt)
        : std::runtime_error(what), offset_(offset) {}
    std::optional<std::size_t> offset() const { return offset_; }

private:
    std::optional<std::size_t> offset_;
};

/// Finite alphabet {0, ..., m-1} with a printable label per code.
class Alphabet {
public:
    explicit Alphabet(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.size() < 2) throw std::invalid_argument("alphabet needs at least two symbols");
        if (labels_.size() > 255) throw std::invalid_argument("alphabet larger than 255 symbols");
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].empty()) throw std::invalid_argument("empty alphabet label");
            if (!index_.emplace(labels_[i], static_cast<Symbol>(i)).second)
                throw std::invalid_argument("duplicate alphabet label '" + labels_[i] + "'");
        }
    }

    /// Labels "0", "1", ..., "m-1".
    static Alphabet numeric(std::size_t m) {
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < m; ++i) labels.push_back(std::to_string(i));
        return Alphabet(std::move(labels));
    }

    static Alphabet dna() { return Alphabet({"A", "C", "G", "T"}); }

    /// One label per character of `chars`, e.g. "ACGT".
    static Alphabet from_chars(std::string_view chars) {
        std::vector<std::string> labels;
        for (char c : chars) labels.emplace_back(1, c);
        return Alphabet(std::move(labels));
    }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& decode(Symbol s) const { return labels_.at(s); }

    std::optional<Symbol> encode(std::string_view label) const {
        auto it = index_.find(std::string(label));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// True when every label is one character long.
    bool single_char() const {
        for (const auto& l : labels_)
            if (l.size() != 1) return false;
        return true;
    }

    bool operator==(const Alphabet& other) const { return labels_ == other.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, Symbol> index_;
};

/// Observations x_1..x_n together with the D symbols preceding x_1.
///
/// Stored contiguously as context ++ observations so that any observation's
/// context can be read backwards without bounds juggling. Observation i
/// (1-based) lives at full index D + i - 1.
class Sequence {
public:
    Sequence(Alphabet alphabet, std::vector<Symbol> context, std::vector<Symbol> observations)
        : alphabet_(std::move(alphabet)), depth_(context.size()) {
        if (observations.empty()) throw std::invalid_argument("sequence has no observations");
        full_ = std::move(context);
        full_.insert(full_.end(), observations.begin(), observations.end());
        for (Symbol s : full_)
            if (s >= alphabet_.size()) throw std::invalid_argument("symbol code outside alphabet");
    }

    const Alphabet& alphabet() const { return alphabet_; }
    std::size_t alphabet_size() const { return alphabet_.size(); }
    std::size_t context_length() const { return depth_; }
    std::size_t n() const { return full_.size() - depth_; }

    std::span<const Symbol> context() const { return std::span(full_).first(depth_); }
    std::span<const Symbol> observations() const { return std::span(full_).subspan(depth_); }
    /// context ++ observations
    std::span<const Symbol> full() const { return full_; }

    /// Observation x_i, 1-based.
    Symbol at(std::size_t i) const { return full_[depth_ + i - 1]; }

private:
    Alphabet alphabet_;
    std::size_t depth_;
    std::vector<Symbol> full_;
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

struct Line {
    std::string_view text;
    std::size_t offset;
};

inline std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back({text.substr(pos, end - pos), pos});
        pos = end + 1;
    }
    return lines;
}

}  // namespace detail

/// Symbols of the first record of a FASTA file. Header lines and whitespace
/// are dropped; lowercase bases are upcased before lookup.
inline std::vector<Symbol> parse_fasta(std::string_view text, const Alphabet& alphabet = Alphabet::dna()) {
    if (!alphabet.single_char()) throw std::invalid_argument("FASTA needs a single-character alphabet");
    std::vector<Symbol> out;
    bool in_record = false;
    for (const auto& line : detail::split_lines(text)) {
        std::string_view body = line.text;
        if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
        if (!body.empty() && (body.front() == '>' || body.front() == ';')) {
            if (body.front() == '>' && in_record) break;
            in_record = in_record || body.front() == '>';
            continue;
        }
        if (detail::trim(body).empty()) continue;
        in_record = true;
        for (std::size_t k = 0; k < body.size(); ++k) {
            const char c = body[k];
            if (detail::is_space(c)) continue;
            const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            auto code = alphabet.encode(std::string_view(&up, 1));
            if (!code) {
                throw ParseError("unmapped character '" + std::string(1, c) + "' at sequence position " +
                                     std::to_string(out.size()) + " (byte " + std::to_string(line.offset + k) + ")",
                                 out.size());
            }
            out.push_back(*code);
        }
    }
    if (out.empty()) throw ParseError("FASTA record has no sequence data");
    return out;
}

/// Plain-text symbols: one token per line when the file has several
/// non-empty lines that are each a whole label, otherwise one token per
/// non-whitespace character.
inline std::vector<Symbol> parse_plain(std::string_view text, const Alphabet& alphabet) {
    std::vector<detail::Line> tokens;
    for (const auto& line : detail::split_lines(text)) {
        auto t = detail::trim(line.text);
        if (!t.empty()) tokens.push_back({t, line.offset + static_cast<std::size_t>(t.data() - line.text.data())});
    }
    bool per_line = tokens.size() >= 2;
    for (const auto& t : tokens) {
        if (!per_line) break;
        if (!alphabet.encode(t.text)) per_line = false;
    }
    // A multi-character line that is not a label falls back to per-character
    // reading only when the alphabet allows it.
    if (!per_line && tokens.size() >= 2 && !alphabet.single_char()) per_line = true;

    std::vector<Symbol> out;
    if (per_line) {
        for (const auto& t : tokens) {
            auto code = alphabet.encode(t.text);
            if (!code)
                throw ParseError("token '" + std::string(t.text) + "' outside alphabet at byte offset " +
                                     std::to_string(t.offset),
                                 t.offset);
            out.push_back(*code);
        }
    } else {
        for (std::size_t k = 0; k < text.size(); ++k) {
            if (detail::is_space(text[k])) continue;
            auto code = alphabet.encode(text.substr(k, 1));
            if (!code)
                throw ParseError("token '" + std::string(1, text[k]) + "' outside alphabet at byte offset " +
                                     std::to_string(k),
                                 k);
            out.push_back(*code);
        }
    }
    if (out.empty()) throw ParseError("no symbols in input");
    return out;
}

/// First column of a CSV file; a leading header row that is not a label is skipped.
inline std::vector<Symbol> parse_csv(std::string_view text, const Alphabet& alphabet) {
    std::vector<Symbol> out;
    bool first = true;
    for (const auto& line : detail::split_lines(text)) {
        auto row = detail::trim(line.text);
        if (row.empty()) continue;
        auto cell = detail::trim(row.substr(0, row.find(',')));
        if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
        auto code = alphabet.encode(cell);
        if (!code) {
            if (first) {
                first = false;
                continue;
            }
            throw ParseError("CSV value '" + std::string(cell) + "' outside alphabet at byte offset " +
                                 std::to_string(line.offset),
                             line.offset);
        }
        first = false;
        out.push_back(*code);
    }
    if (out.empty()) throw ParseError("no symbols in CSV input");
    return out;
}

/// Uses the first `depth` raw symbols as the initial context.
inline Sequence split_context(std::span<const Symbol> raw, std::size_t depth, Alphabet alphabet) {
    if (raw.size() <= depth)
        throw std::invalid_argument("input of length " + std::to_string(raw.size()) +
                                    " leaves no observations after a context of " + std::to_string(depth));
    return Sequence(std::move(alphabet), std::vector<Symbol>(raw.begin(), raw.begin() + depth),
                    std::vector<Symbol>(raw.begin() + depth, raw.end()));
}

}  // namespace bctseg
