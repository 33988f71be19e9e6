#pragma once

// File formats: tree models, simulator specs, traces, summaries and exact
// posteriors. Needs nlohmann/json.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bctseg/changepoint.hpp"
#include "bctseg/mcmc.hpp"
#include "bctseg/sequence.hpp"
#include "bctseg/simulator.hpp"
#include "bctseg/tree_model.hpp"

namespace bctseg {

using nlohmann::json;

/// Round-trippable decimal form of a double (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// {contexts, leaves, depth, params: {context: [theta...]}}. Contexts list
/// every node of the tree; the root is "".
inline json tree_to_json(const TreeModel& tree, const Alphabet& alphabet) {
    json j;
    j["depth"] = tree.depth();
    j["contexts"] = json::array();
    for (const auto& c : tree.all_nodes()) j["contexts"].push_back(context_to_string(c, alphabet));
    j["leaves"] = json::array();
    for (const auto& c : tree.leaves()) j["leaves"].push_back(context_to_string(c, alphabet));
    j["params"] = json::object();
    for (const auto& [c, theta] : tree.params()) j["params"][context_to_string(c, alphabet)] = theta;
    return j;
}

inline TreeModel tree_from_json(const json& j, const Alphabet& alphabet) {
    std::vector<Context> leaves;
    std::map<Context, std::vector<double>> params;
    if (j.contains("leaves")) {
        for (const auto& l : j.at("leaves")) leaves.push_back(context_from_string(l.get<std::string>(), alphabet));
    }
    if (j.contains("params")) {
        for (const auto& [k, v] : j.at("params").items()) {
            Context c = context_from_string(k, alphabet);
            params.emplace(c, v.get<std::vector<double>>());
            if (!j.contains("leaves")) leaves.push_back(c);
        }
    }
    return TreeModel(alphabet.size(), std::move(leaves), std::move(params));
}

/// Simulator spec:
///   {"alphabet": ["0","1","2"] | 3, "D": 10, "seed": 7, "initial_context": "000...",
///    "segments": [{"contexts": {"0": [0.3, 0.4, 0.3], ...}, "length": 2499}, ...]}
/// Context keys are read most recent symbol first; "" or "λ" is the root.
/// Segment k >= 2 starts at observation 1 + (sum of earlier lengths).
inline PiecewiseSpec spec_from_json(const json& j) {
    const auto& a = j.at("alphabet");
    Alphabet alphabet = a.is_number() ? Alphabet::numeric(a.get<std::size_t>())
                                      : Alphabet(a.get<std::vector<std::string>>());
    const std::size_t depth = j.at("D").get<std::size_t>();
    std::vector<SegmentSpec> segments;
    for (const auto& s : j.at("segments")) {
        std::vector<Context> leaves;
        std::map<Context, std::vector<double>> params;
        for (const auto& [k, v] : s.at("contexts").items()) {
            Context c = context_from_string(k, alphabet);
            leaves.push_back(c);
            params.emplace(c, v.get<std::vector<double>>());
        }
        segments.push_back({TreeModel(alphabet.size(), std::move(leaves), std::move(params)),
                            s.at("length").get<std::size_t>()});
    }
    std::vector<Symbol> initial;
    if (j.contains("initial_context")) initial = context_from_string(j.at("initial_context").get<std::string>(), alphabet);
    return PiecewiseSpec{alphabet, depth, std::move(segments), std::move(initial), j.value("seed", std::uint64_t{0})};
}

inline json spec_to_json(const PiecewiseSpec& spec) {
    json j;
    j["alphabet"] = spec.alphabet.labels();
    j["D"] = spec.depth;
    j["seed"] = spec.seed;
    j["segments"] = json::array();
    for (const auto& s : spec.segments) {
        json seg;
        seg["length"] = s.length;
        seg["contexts"] = json::object();
        for (const auto& [c, theta] : s.model.params()) seg["contexts"][context_to_string(c, spec.alphabet)] = theta;
        j["segments"].push_back(seg);
    }
    return j;
}

/// Symbols as text: one character per symbol for single-character
/// alphabets (wrapped at `width`), one label per line otherwise.
inline std::string symbols_to_text(std::span<const Symbol> symbols, const Alphabet& alphabet, std::size_t width = 70) {
    std::string out;
    if (alphabet.single_char()) {
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            out += alphabet.decode(symbols[i]);
            if ((i + 1) % width == 0 || i + 1 == symbols.size()) out += '\n';
        }
    } else {
        for (Symbol s : symbols) out += alphabet.decode(s) + "\n";
    }
    return out;
}

/// CSV rows "iteration,ell,p_1,...,p_ell".
inline void write_trace_csv(std::ostream& os, const Trace& trace) {
    os << "iteration,ell,positions\n";
    for (std::size_t k = 0; k < trace.states.size(); ++k) {
        const auto& p = trace.states[k];
        os << trace.iterations[k] << ',' << p.ell();
        for (Index q : p.positions()) os << ',' << q;
        os << '\n';
    }
}

inline json summary_to_json(const Summary& s) {
    json j;
    j["retained"] = s.retained;
    j["ell_hist"] = s.ell_hist;
    j["loc_hist"] = json::array();
    for (auto [pos, c] : s.loc_hist) j["loc_hist"].push_back({pos, c});
    j["map"] = {{"ell", s.map_ell}, {"positions", s.map_positions}};
    j["map_conditional"] = json::array();
    for (const auto& h : s.map_conditional) {
        json rows = json::array();
        for (auto [pos, c] : h) rows.push_back({pos, c});
        j["map_conditional"].push_back(rows);
    }
    j["acceptance_rates"] = s.acceptance_rates;
    if (s.best_state) {
        j["best_visited"] = {{"ell", s.best_state->ell()},
                             {"positions", s.best_state->positions()},
                             {"log_posterior", format_double(s.best_log_posterior)}};
    }
    return j;
}

/// "position,probability" rows, full precision.
inline void write_posterior_csv(std::ostream& os, std::span<const double> posterior) {
    os << "position,probability\n";
    for (std::size_t k = 0; k < posterior.size(); ++k) os << (k + 2) << ',' << format_double(posterior[k]) << '\n';
}

inline json posterior_to_json(std::span<const double> posterior) {
    json j;
    std::vector<Index> positions(posterior.size());
    for (std::size_t k = 0; k < posterior.size(); ++k) positions[k] = static_cast<Index>(k + 2);
    j["positions"] = positions;
    j["probs"] = std::vector<double>(posterior.begin(), posterior.end());
    return j;
}


/// 64-bit FNV-1a digest, printed as 16 hex digits.
inline std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

enum class InputFormat { Auto, Fasta, Plain, Csv };

inline InputFormat parse_input_format(std::string_view name) {
    if (name == "auto") return InputFormat::Auto;
    if (name == "fasta") return InputFormat::Fasta;
    if (name == "plain") return InputFormat::Plain;
    if (name == "csv") return InputFormat::Csv;
    throw std::invalid_argument("unknown input format '" + std::string(name) + "'");
}

/// Auto: '>' as first non-blank character means FASTA, a ".csv" path means
/// CSV, anything else is plain text.
inline InputFormat detect_format(std::string_view path, std::string_view text) {
    auto first = std::find_if(text.begin(), text.end(), [](char c) { return !detail::is_space(c); });
    if (first != text.end() && *first == '>') return InputFormat::Fasta;
    if (path.size() >= 4) {
        std::string ext(path.substr(path.size() - 4));
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".csv") return InputFormat::Csv;
    }
    return InputFormat::Plain;
}

/// "4" -> labels 0..3; "A,C,G,T" -> those labels; "ACGT" -> one label per character.
inline Alphabet parse_alphabet_spec(std::string_view spec) {
    if (spec.find(',') != std::string_view::npos) {
        std::vector<std::string> labels;
        std::size_t start = 0;
        for (;;) {
            const auto comma = spec.find(',', start);
            labels.emplace_back(detail::trim(spec.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return Alphabet(std::move(labels));
    }
    if (!spec.empty() && std::all_of(spec.begin(), spec.end(), [](unsigned char c) { return std::isdigit(c); }) &&
        spec.size() <= 3)
        return Alphabet::numeric(static_cast<std::size_t>(std::stoul(std::string(spec))));
    return Alphabet::from_chars(spec);
}

namespace detail {

inline bool is_uint(std::string_view s) {
    return !s.empty() && s.size() <= 3 &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

/// Numeric labels 0..max when every token is a small integer, ACGT when the
/// tokens are nucleotides, otherwise the sorted distinct tokens.
inline Alphabet alphabet_from_tokens(const std::set<std::string>& tokens) {
    if (tokens.empty()) throw ParseError("no symbols in input");
    if (std::all_of(tokens.begin(), tokens.end(), [](const std::string& t) { return is_uint(t); })) {
        std::size_t top = 0;
        for (const auto& t : tokens) top = std::max<std::size_t>(top, std::stoul(t));
        return Alphabet::numeric(std::max<std::size_t>(top + 1, 2));
    }
    static const std::set<std::string> nucleotides{"A", "C", "G", "T"};
    if (std::includes(nucleotides.begin(), nucleotides.end(), tokens.begin(), tokens.end())) return Alphabet::dna();
    if (tokens.size() < 2) throw ParseError("input uses a single symbol; pass the alphabet explicitly");
    return Alphabet(std::vector<std::string>(tokens.begin(), tokens.end()));
}

}  // namespace detail

/// Alphabet implied by the input. Plain text is read one character per
/// symbol unless every non-blank line holds exactly one character; labels
/// longer than one character need an explicit alphabet. CSV reads the first
/// column and ignores a non-numeric header.
inline Alphabet infer_alphabet(std::string_view text, InputFormat format) {
    std::set<std::string> tokens;
    switch (format) {
        case InputFormat::Fasta:
        case InputFormat::Auto:
            return Alphabet::dna();
        case InputFormat::Plain:
            for (char c : text)
                if (!detail::is_space(c)) tokens.emplace(1, c);
            return detail::alphabet_from_tokens(tokens);
        case InputFormat::Csv: {
            std::vector<std::string> cells;
            for (const auto& line : detail::split_lines(text)) {
                auto row = detail::trim(line.text);
                if (row.empty()) continue;
                auto cell = detail::trim(row.substr(0, row.find(',')));
                if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
                cells.emplace_back(cell);
            }
            if (cells.size() >= 2 && !detail::is_uint(cells[0]) &&
                std::all_of(cells.begin() + 1, cells.end(), [](const std::string& c) { return detail::is_uint(c); }))
                cells.erase(cells.begin());
            tokens.insert(cells.begin(), cells.end());
            return detail::alphabet_from_tokens(tokens);
        }
    }
    throw std::logic_error("unreachable");
}

struct LoadedInput {
    Alphabet alphabet;
    std::vector<Symbol> symbols;
    InputFormat format;
};

/// Reads symbols in the given (or detected) format with the given (or inferred) alphabet.
inline LoadedInput load_symbols(std::string_view path, std::string_view text, InputFormat format,
                                const std::optional<Alphabet>& alphabet) {
    if (format == InputFormat::Auto) format = detect_format(path, text);
    Alphabet a = alphabet ? *alphabet : infer_alphabet(text, format);
    std::vector<Symbol> symbols;
    switch (format) {
        case InputFormat::Fasta: symbols = parse_fasta(text, a); break;
        case InputFormat::Csv: symbols = parse_csv(text, a); break;
        default: symbols = parse_plain(text, a); break;
    }
    return {std::move(a), std::move(symbols), format};
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace bctseg
