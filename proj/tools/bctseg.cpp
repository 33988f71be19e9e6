// bctseg: command-line front end for change-point segmentation of discrete series.
//
// Exit codes: 0 success, 2 usage, 3 input parse, 4 numerical failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bctseg.hpp"
#include "bctseg/io.hpp"

namespace fs = std::filesystem;
using namespace bctseg;

#ifndef BCTSEG_VERSION
#define BCTSEG_VERSION "0.0.0"
#endif

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputOptions {
    std::string path;
    std::string format = "auto";
    std::string alphabet;
    std::string context = "leading";
    std::size_t depth = 10;
    std::optional<double> beta;
};

struct LoadedSeries {
    Sequence sequence;
    InputFormat format;
    std::string digest;
};

/// Canonical flag list of a run, written to the manifest and replayed by `rerun`.
using Argv = std::vector<std::string>;

std::string join_labels(const Alphabet& a) {
    std::string s;
    for (const auto& l : a.labels()) s += (s.empty() ? "" : ",") + l;
    return s;
}

std::string format_name(InputFormat f) {
    switch (f) {
        case InputFormat::Fasta: return "fasta";
        case InputFormat::Plain: return "plain";
        case InputFormat::Csv: return "csv";
        default: return "auto";
    }
}

/// The first D input symbols become the initial context ("leading"), or D
/// copies of the first alphabet symbol are prepended so that observation i
/// is input symbol i ("pad").
LoadedSeries load_series(const InputOptions& in) {
    const std::string text = read_file(in.path);
    std::optional<Alphabet> alphabet;
    if (!in.alphabet.empty()) alphabet = parse_alphabet_spec(in.alphabet);
    auto loaded = load_symbols(in.path, text, parse_input_format(in.format), alphabet);
    std::vector<Symbol> raw = std::move(loaded.symbols);
    if (in.context == "pad") raw.insert(raw.begin(), in.depth, Symbol{0});
    else if (in.context != "leading") throw UsageError("--context must be 'leading' or 'pad'");
    if (in.depth > kMaxDepth) throw UsageError("--depth above " + std::to_string(kMaxDepth));
    return {split_context(raw, in.depth, loaded.alphabet), loaded.format, fnv1a64_hex(text)};
}

BctParams resolve_params(const InputOptions& in, std::size_t m) {
    BctParams p{m, in.depth, in.beta.value_or(BctParams::default_beta(m))};
    p.validate();
    return p;
}

void add_input_options(CLI::App* cmd, InputOptions& in) {
    cmd->add_option("input", in.path, "Input series (FASTA, plain text or CSV)")->required();
    cmd->add_option("--input-format", in.format, "auto | fasta | plain | csv")
        ->check(CLI::IsMember({"auto", "fasta", "plain", "csv"}))
        ->envname("BCTSEG_INPUT_FORMAT");
    cmd->add_option("--alphabet", in.alphabet, "Alphabet: size (\"3\"), labels (\"A,C,G,T\") or characters (\"01\")")
        ->envname("BCTSEG_ALPHABET");
    cmd->add_option("--context", in.context, "Initial context: leading | pad")
        ->check(CLI::IsMember({"leading", "pad"}))
        ->envname("BCTSEG_CONTEXT");
    cmd->add_option("--depth,-D", in.depth, "Maximal context depth D")->envname("BCTSEG_DEPTH");
    cmd->add_option("--beta", in.beta, "Tree prior hyperparameter (default 1 - 2^(1-m))")->envname("BCTSEG_BETA");
}

Argv input_argv(const std::string& command, const InputOptions& in, const LoadedSeries& s, const BctParams& p) {
    return {command,
            fs::absolute(in.path).string(),
            "--input-format",
            format_name(s.format),
            "--alphabet",
            join_labels(s.sequence.alphabet()),
            "--context",
            in.context,
            "--depth",
            std::to_string(p.depth),
            "--beta",
            format_double(p.beta)};
}

json input_json(const InputOptions& in, const LoadedSeries& s) {
    return {{"path", fs::absolute(in.path).string()},
            {"digest_fnv1a64", s.digest},
            {"format", format_name(s.format)},
            {"alphabet", s.sequence.alphabet().labels()},
            {"context_mode", in.context},
            {"context_length", s.sequence.context_length()},
            {"n", s.sequence.n()}};
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_manifest(const fs::path& dir, const std::string& command, const Argv& argv, json parameters,
                    json input, std::chrono::steady_clock::time_point start, const std::string& started) {
    json m;
    m["tool"] = "bctseg";
    m["version"] = BCTSEG_VERSION;
    m["command"] = command;
    m["argv"] = argv;
    m["parameters"] = std::move(parameters);
    m["input"] = std::move(input);
    m["started_utc"] = started;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

fs::path prepare_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

/// Segments from a change-point list; an empty list means one segment.
std::vector<SegmentView> segments_for(const Sequence& x, const std::vector<Index>& cps) {
    std::vector<Index> sorted = cps;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw UsageError("--segments lists a change-point twice, leaving an empty segment");
    return partition(x, ChangePoints(static_cast<Index>(x.n()), sorted));
}

ContextTree segment_tree(const Sequence& x, const BctParams& params, const SegmentView& seg) {
    const std::size_t d = x.context_length();
    return ContextTree(params, x.full(), d + static_cast<std::size_t>(seg.first) - 1,
                       d + static_cast<std::size_t>(seg.last));
}

// ---- segment ---------------------------------------------------------------

struct SegmentOptions {
    InputOptions in;
    std::optional<std::size_t> lmax;
    std::optional<std::size_t> num_changes;
    std::uint64_t iters = 100'000;
    std::uint64_t burnin = 10'000;
    std::uint64_t seed = 1;
    std::uint64_t thin = 1;
    std::size_t chains = 1;
    std::size_t cache = EvidenceCache::kDefaultCapacity;
    std::string format = "csv";
    std::string out;
};

void write_histograms(const fs::path& dir, const Summary& s, const std::string& format) {
    const double total = static_cast<double>(s.retained);
    if (format == "json") {
        json ell = json::array(), loc = json::array();
        for (std::size_t l = 0; l < s.ell_hist.size(); ++l)
            ell.push_back({{"ell", l}, {"count", s.ell_hist[l]}, {"probability", double(s.ell_hist[l]) / total}});
        for (auto [p, c] : s.loc_hist)
            loc.push_back({{"position", p}, {"count", c}, {"probability", double(c) / total}});
        write_text(dir / "ell_hist.json", ell.dump(2) + "\n");
        write_text(dir / "loc_hist.json", loc.dump(2) + "\n");
        return;
    }
    std::ostringstream ell, loc;
    ell << "# ell,count,probability\n";
    for (std::size_t l = 0; l < s.ell_hist.size(); ++l)
        ell << l << ',' << s.ell_hist[l] << ',' << format_double(double(s.ell_hist[l]) / total) << '\n';
    loc << "# position,count,probability\n";
    for (auto [p, c] : s.loc_hist) loc << p << ',' << c << ',' << format_double(double(c) / total) << '\n';
    write_text(dir / "ell_hist.csv", ell.str());
    write_text(dir / "loc_hist.csv", loc.str());
}

void cmd_segment(const SegmentOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    if (o.lmax && o.num_changes) throw UsageError("--lmax and --num-changes are mutually exclusive");
    auto series = load_series(o.in);
    const auto& x = series.sequence;
    const BctParams params = resolve_params(o.in, x.alphabet_size());

    McmcConfig cfg;
    cfg.iterations = o.iters;
    cfg.burn_in = o.burnin;
    cfg.seed = o.seed;
    cfg.depth = params.depth;
    cfg.beta = params.beta;
    cfg.thinning = o.thin;
    cfg.cache_capacity = o.cache;
    if (o.num_changes) {
        cfg.mode = McmcConfig::Mode::Fixed;
        cfg.ell = *o.num_changes;
    } else {
        cfg.mode = McmcConfig::Mode::Variable;
        cfg.ell_max = o.lmax.value_or(10);
    }
    cfg.validate(static_cast<Index>(x.n()));
    if (o.chains == 0) throw UsageError("--chains must be positive");

    const auto traces = run_chains(x, cfg, o.chains);
    const Summary summary = summarize(traces);

    const fs::path dir = prepare_dir(o.out);
    {
        std::ostringstream os;
        if (o.chains == 1) {
            write_trace_csv(os, traces[0]);
        } else {
            os << "chain,iteration,ell,positions\n";
            for (std::size_t c = 0; c < traces.size(); ++c)
                for (std::size_t k = 0; k < traces[c].states.size(); ++k) {
                    const auto& p = traces[c].states[k];
                    os << c << ',' << traces[c].iterations[k] << ',' << p.ell();
                    for (Index q : p.positions()) os << ',' << q;
                    os << '\n';
                }
        }
        write_text(dir / "trace.csv", os.str());
    }
    json sj = summary_to_json(summary);
    sj["chains"] = o.chains;
    sj["trace_streamed"] = std::any_of(traces.begin(), traces.end(), [](const Trace& t) { return t.streaming; });
    write_text(dir / "summary.json", sj.dump(2) + "\n");
    write_histograms(dir, summary, o.format);

    Argv argv = input_argv("segment", o.in, series, params);
    if (o.num_changes) argv.insert(argv.end(), {"--num-changes", std::to_string(*o.num_changes)});
    else argv.insert(argv.end(), {"--lmax", std::to_string(cfg.ell_max)});
    argv.insert(argv.end(), {"--iters", std::to_string(o.iters), "--burnin", std::to_string(o.burnin), "--seed",
                             std::to_string(o.seed), "--thin", std::to_string(o.thin), "--chains",
                             std::to_string(o.chains), "--cache", std::to_string(o.cache), "--format", o.format});
    json parameters = {{"D", params.depth},
                       {"beta", params.beta},
                       {"mode", o.num_changes ? "fixed" : "variable"},
                       {"iterations", o.iters},
                       {"burn_in", o.burnin},
                       {"seed", o.seed},
                       {"thinning", o.thin},
                       {"chains", o.chains}};
    if (o.num_changes) parameters["ell"] = *o.num_changes;
    else parameters["ell_max"] = cfg.ell_max;
    write_manifest(dir, "segment", argv, parameters, input_json(o.in, series), start, started);

    std::cerr << "ell-hat " << summary.map_ell << ", positions";
    for (Index p : summary.map_positions) std::cerr << ' ' << p;
    std::cerr << " (" << summary.retained << " samples)\n";
}

// ---- exact -----------------------------------------------------------------

struct ExactOptions {
    InputOptions in;
    std::string format = "csv";
    std::string out;
};

void cmd_exact(const ExactOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    auto series = load_series(o.in);
    const BctParams params = resolve_params(o.in, series.sequence.alphabet_size());
    const auto post = exact_single_cp_posterior(series.sequence, params);
    for (double v : post)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite posterior value");

    std::ostringstream os;
    if (o.format == "json") os << posterior_to_json(post).dump(2) << '\n';
    else write_posterior_csv(os, post);
    if (o.out.empty()) {
        std::cout << os.str();
        return;
    }
    const fs::path dir = prepare_dir(o.out);
    write_text(dir / (o.format == "json" ? "posterior.json" : "posterior.csv"), os.str());
    Argv argv = input_argv("exact", o.in, series, params);
    argv.insert(argv.end(), {"--format", o.format});
    write_manifest(dir, "exact", argv, {{"D", params.depth}, {"beta", params.beta}}, input_json(o.in, series), start,
                   started);
    const auto best = std::max_element(post.begin(), post.end()) - post.begin();
    std::cerr << "posterior mode at " << best + 2 << '\n';
}

// ---- maptree / stationary ----------------------------------------------------

struct SegmentedOptions {
    InputOptions in;
    std::vector<Index> segments;
    std::string out;
};

Argv segmented_argv(const std::string& command, const SegmentedOptions& o, const LoadedSeries& s,
                    const BctParams& p) {
    Argv argv = input_argv(command, o.in, s, p);
    if (!o.segments.empty()) {
        std::string list;
        for (Index q : o.segments) list += (list.empty() ? "" : ",") + std::to_string(q);
        argv.insert(argv.end(), {"--segments", list});
    }
    return argv;
}

void emit_json(const std::string& command, const SegmentedOptions& o, const LoadedSeries& s, const BctParams& p,
               const json& result, std::chrono::steady_clock::time_point start, const std::string& started) {
    if (o.out.empty()) {
        std::cout << result.dump(2) << '\n';
        return;
    }
    const fs::path dir = prepare_dir(o.out);
    write_text(dir / (command + ".json"), result.dump(2) + "\n");
    write_manifest(dir, command, segmented_argv(command, o, s, p), {{"D", p.depth}, {"beta", p.beta}},
                   input_json(o.in, s), start, started);
}

void cmd_maptree(const SegmentedOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    auto series = load_series(o.in);
    const auto& x = series.sequence;
    const BctParams params = resolve_params(o.in, x.alphabet_size());
    json result = {{"D", params.depth}, {"beta", params.beta}, {"segments", json::array()}};
    for (const auto& seg : segments_for(x, o.segments)) {
        const ContextTree tree = segment_tree(x, params, seg);
        const TreeModel map = map_tree(tree);
        result["segments"].push_back({{"index", seg.index},
                                      {"first", seg.first},
                                      {"last", seg.last},
                                      {"depth", map.depth()},
                                      {"log_map_score", tree.log_map_score()},
                                      {"tree", tree_to_json(map, x.alphabet())}});
    }
    emit_json("maptree", o, series, params, result, start, started);
}

void cmd_stationary(const SegmentedOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    auto series = load_series(o.in);
    const auto& x = series.sequence;
    const BctParams params = resolve_params(o.in, x.alphabet_size());
    json result = {{"D", params.depth}, {"beta", params.beta}, {"segments", json::array()}};
    for (const auto& seg : segments_for(x, o.segments)) {
        const TreeModel map = map_tree(segment_tree(x, params, seg));
        result["segments"].push_back({{"index", seg.index},
                                      {"first", seg.first},
                                      {"last", seg.last},
                                      {"map_depth", map.depth()},
                                      {"marginal", stationary_marginal(map)}});
    }
    emit_json("stationary", o, series, params, result, start, started);
}

// ---- generate ----------------------------------------------------------------

struct GenerateOptions {
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void cmd_generate(const GenerateOptions& o) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    const std::string text = read_file(o.spec);
    PiecewiseSpec spec = spec_from_json(json::parse(text));
    if (o.seed) spec.seed = *o.seed;
    const auto g = generate_piecewise(spec);

    const fs::path dir = prepare_dir(o.out);
    write_text(dir / "sequence.txt", symbols_to_text(g.sequence.full(), spec.alphabet));
    json truth = {{"n", g.sequence.n()},
                  {"context_length", g.sequence.context_length()},
                  {"change_points", g.change_points},
                  {"seed", spec.seed},
                  {"alphabet", spec.alphabet.labels()}};
    write_text(dir / "truth.json", truth.dump(2) + "\n");
    Argv argv{"generate", fs::absolute(o.spec).string(), "--seed", std::to_string(spec.seed)};
    json input = {{"path", fs::absolute(o.spec).string()}, {"digest_fnv1a64", fnv1a64_hex(text)}};
    write_manifest(dir, "generate", argv, {{"D", spec.depth}, {"seed", spec.seed}}, input, start, started);
}

int run_cli(Argv args);

// ---- rerun -------------------------------------------------------------------

struct RerunOptions {
    std::string manifest;
    std::string out;
};

int cmd_rerun(const RerunOptions& o) {
    const json m = json::parse(read_file(o.manifest));
    Argv argv = m.at("argv").get<Argv>();
    if (argv.size() < 2) throw ParseError("manifest has no command line");
    const std::string expected = m.at("input").at("digest_fnv1a64").get<std::string>();
    if (fnv1a64_hex(read_file(argv[1])) != expected)
        throw ParseError("input " + argv[1] + " no longer matches the manifest digest");
    argv.insert(argv.end(), {"--out", o.out});
    return run_cli(argv);
}

int run_cli(Argv args) {
    CLI::App app{"Change-point segmentation of discrete series with Bayesian context trees", "bctseg"};
    app.set_version_flag("--version", BCTSEG_VERSION);
    app.require_subcommand(1);

    SegmentOptions seg;
    auto* segment = app.add_subcommand("segment", "Sample change-points by Metropolis-Hastings");
    add_input_options(segment, seg.in);
    auto* lmax = segment->add_option("--lmax", seg.lmax, "Unknown number of change-points, at most L (default 10)")
                     ->envname("BCTSEG_LMAX");
    auto* nch = segment->add_option("--num-changes", seg.num_changes, "Fixed number of change-points")
                    ->envname("BCTSEG_NUM_CHANGES");
    lmax->excludes(nch);
    segment->add_option("--iters,-N", seg.iters, "Total iterations")->envname("BCTSEG_ITERS");
    segment->add_option("--burnin", seg.burnin, "Discarded initial iterations")->envname("BCTSEG_BURNIN");
    segment->add_option("--seed", seg.seed, "Random seed")->envname("BCTSEG_SEED");
    segment->add_option("--thin", seg.thin, "Keep every k-th sample")->envname("BCTSEG_THIN");
    segment->add_option("--chains", seg.chains, "Independent chains with seeds seed, seed+1, ...")
        ->envname("BCTSEG_CHAINS");
    segment->add_option("--cache", seg.cache, "Segment evidence cache entries")->envname("BCTSEG_CACHE");
    segment->add_option("--format", seg.format, "Histogram format: csv | json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->envname("BCTSEG_FORMAT");
    segment->add_option("--out,-o", seg.out, "Output directory")->required()->envname("BCTSEG_OUT");

    ExactOptions ex;
    auto* exact = app.add_subcommand("exact", "Exact posterior of a single change-point");
    add_input_options(exact, ex.in);
    exact->add_option("--format", ex.format, "csv | json")->check(CLI::IsMember({"csv", "json"}))->envname("BCTSEG_FORMAT");
    exact->add_option("--out,-o", ex.out, "Output directory (stdout when absent)")->envname("BCTSEG_OUT");

    SegmentedOptions mt;
    auto* maptree = app.add_subcommand("maptree", "MAP context tree of each segment");
    add_input_options(maptree, mt.in);
    maptree->add_option("--segments", mt.segments, "Change-points, comma separated")->delimiter(',')
        ->envname("BCTSEG_SEGMENTS");
    maptree->add_option("--out,-o", mt.out, "Output directory (stdout when absent)")->envname("BCTSEG_OUT");

    SegmentedOptions st;
    auto* stationary = app.add_subcommand("stationary", "Stationary symbol marginals of each segment's MAP model");
    add_input_options(stationary, st.in);
    stationary->add_option("--segments", st.segments, "Change-points, comma separated")->delimiter(',')
        ->envname("BCTSEG_SEGMENTS");
    stationary->add_option("--out,-o", st.out, "Output directory (stdout when absent)")->envname("BCTSEG_OUT");

    GenerateOptions gen;
    auto* generate = app.add_subcommand("generate", "Simulate a piecewise context-tree source from a JSON spec");
    generate->add_option("spec", gen.spec, "Spec JSON")->required();
    generate->add_option("--seed", gen.seed, "Override the spec's seed")->envname("BCTSEG_SEED");
    generate->add_option("--out,-o", gen.out, "Output directory")->required()->envname("BCTSEG_OUT");

    RerunOptions re;
    auto* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest");
    rerun->add_option("manifest", re.manifest, "manifest.json of an earlier run")->required();
    rerun->add_option("--out,-o", re.out, "Output directory")->required();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*segment) cmd_segment(seg);
        else if (*exact) cmd_exact(ex);
        else if (*maptree) cmd_maptree(mt);
        else if (*stationary) cmd_stationary(st);
        else if (*generate) cmd_generate(gen);
        else if (*rerun) return cmd_rerun(re);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const json::exception& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run_cli(Argv(argv + 1, argv + argc)); }
