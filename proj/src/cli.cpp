#include "ncdsvm/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ncdsvm/eval.hpp"
#include "ncdsvm/ncd.hpp"
#include "ncdsvm/util.hpp"

namespace fs = std::filesystem;

namespace ncdsvm::cli {
namespace {

constexpr int kOk = 0;
constexpr int kCompareFailed = 1;
constexpr int kValidation = 2;
constexpr int kRuntime = 3;

// Seed for cache-level preparation (majority-class downsampling) and for
// scale subsampling. Pinned so every machine prepares identical corpora.
constexpr std::uint64_t kPrepSeed = 42;

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

svm::KernelKind parse_kernel(const std::string& id) {
    if (id == "rbf") return svm::KernelKind::rbf;
    if (id == "linear") return svm::KernelKind::linear;
    throw ValidationError("unknown kernel '" + id + "' (expected rbf or linear)");
}

fs::path default_data_dir() {
    if (const char* env = std::getenv("NCDSVM_DATA_DIR"); env && *env) return fs::path(env);
    return fs::path("data");
}

// Within-label duplicate collapsing is part of the preparation recipe for
// formats whose sources are known to repeat texts by artifact of
// collection; the others keep duplicates as genuine corpus mass.
bool recipe_full_dedup(corpus::DatasetFormat f) {
    switch (f) {
        case corpus::DatasetFormat::csic_http:
        case corpus::DatasetFormat::sentiment140_csv:
        case corpus::DatasetFormat::generic_labeled_lines:
            return true;
        case corpus::DatasetFormat::sms_tsv:
        case corpus::DatasetFormat::dga_list:
        case corpus::DatasetFormat::imdb_dirs:
            return false;
    }
    return true;
}

std::vector<double> parse_grid_values(const std::string& csv, const char* flag) {
    std::vector<double> out;
    std::stringstream ss{csv};
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto v = util::parse_double(tok);
        if (!v || *v <= 0)
            throw ValidationError(std::string(flag) + ": '" + tok + "' is not a positive number");
        out.push_back(*v);
    }
    if (out.empty()) throw ValidationError(std::string(flag) + ": no values given");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

// Expands `--config FILE` into explicit option tokens: each `key = value`
// line becomes `--key=value` unless that option already appears on the
// command line. Precedence is therefore flags > config file > defaults,
// and unknown keys surface as normal unknown-option errors.
void apply_config_args(std::vector<std::string>& args) {
    std::string file;
    for (std::size_t i = 0; i < args.size();) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    if (file.empty()) return;
    if (!fs::exists(file)) throw ValidationError("config file does not exist: " + file);
    std::istringstream in(util::read_file(file));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::string where = file + " line " + std::to_string(lineno);
        if (t[0] == '[') throw ValidationError("config " + where + ": sections are not supported");
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config " + where + ": expected 'key = value'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ValidationError("config " + where + ": empty key");
        std::string flag = "--" + key;
        bool present = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (!present) args.push_back(flag + "=" + value);
    }
}

using ConfigKv = std::vector<std::pair<std::string, std::string>>;

void echo_config(std::ostream& out, const std::string& command, const ConfigKv& kv) {
    out << "# effective config (" << command << "); keys mirror the long option names\n";
    for (const auto& [key, value] : kv) out << key << " = " << value << "\n";
    out << "# end config\n\n";
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

// ---------------------------------------------------------------- prepare

struct PrepareOptions {
    std::string input;
    std::string format;
    std::string output;
    std::string dedup = "auto";  // auto | full | conflicts
    bool balance = false;
    std::uint64_t subsample = 0;  // per class; 0 = keep all
    std::uint64_t prep_seed = kPrepSeed;
    bool strict = false;
};

void print_corpus_summary(std::ostream& out, const corpus::Corpus& c) {
    auto counts = c.class_counts();
    auto stats = corpus::length_stats(c);
    for (std::size_t cls = 0; cls < 2; ++cls) {
        const auto& s = stats.per_class[cls];
        out << "class " << (cls == 0 ? 'A' : 'B') << " (" << c.class_names[cls]
            << "): " << counts[cls] << " records, mean length " << util::format_double(s.mean)
            << " bytes, median " << util::format_double(s.median) << "\n";
    }
}

int cmd_prepare(const PrepareOptions& o, std::ostream& out, std::ostream& err) {
    auto fmt = corpus::parse_format(o.format);
    if (!fmt)
        throw ValidationError("unknown format '" + o.format +
                              "' (expected csic-http, sms-tsv, dga-list, sentiment140-csv, "
                              "imdb-dirs or generic-labeled-lines)");
    if (!fs::exists(o.input)) throw ValidationError("input path does not exist: " + o.input);
    if (o.dedup != "auto" && o.dedup != "full" && o.dedup != "conflicts")
        throw ValidationError("--dedup must be auto, full or conflicts (got '" + o.dedup + "')");

    echo_config(out, "prepare",
                {{"input", o.input},
                 {"format", o.format},
                 {"output", o.output},
                 {"dedup", o.dedup},
                 {"balance", bool_str(o.balance)},
                 {"subsample", std::to_string(o.subsample)},
                 {"prep-seed", std::to_string(o.prep_seed)},
                 {"strict", bool_str(o.strict)}});

    corpus::LoadOptions lo;
    lo.strict = o.strict;
    lo.warnings = &err;
    corpus::Corpus c = corpus::load_dataset(o.input, *fmt, lo);
    out << "loaded " << c.records.size() << " records\n";

    bool full = o.dedup == "full" || (o.dedup == "auto" && recipe_full_dedup(*fmt));
    std::size_t before = c.records.size();
    c = full ? corpus::deduplicate(c) : corpus::remove_cross_label_conflicts(c);
    out << (full ? "deduplicated" : "removed cross-label conflicts") << ": " << before << " -> "
        << c.records.size() << " records\n";

    if (o.balance) {
        c = corpus::balance(c, o.prep_seed);
        out << "balanced to " << c.records.size() << " records\n";
    }
    if (o.subsample > 0) {
        c = corpus::subsample_per_class(c, o.subsample, o.prep_seed);
        out << "subsampled to " << c.records.size() << " records\n";
    }
    if (c.records.empty()) throw std::runtime_error("empty corpus: no records left to write");

    print_corpus_summary(out, c);
    corpus::save_cache(c, o.output);
    out << "cache written: " << o.output << "\n";
    return kOk;
}

// -------------------------------------------------------------------- run

struct RunOptions {
    std::string input;
    std::string format = "cache";
    std::uint64_t k = 8;
    std::uint64_t i_per_class = 100;
    std::uint64_t size_cap = 0;
    std::string kernel = "rbf";
    bool tune = false;
    double c = 1.0;
    double gamma = 1.0;
    std::string c_grid;
    std::string gamma_grid;
    std::uint64_t grid_folds = 10;
    std::uint64_t repetitions = 5;
    std::uint64_t seed = 1;
    bool standardize = false;
    double tolerance = 1e-3;
    std::uint64_t max_passes = 10'000'000;
    std::int64_t level = 6;
    std::string separator = "\\n";  // escaped form, e.g. \n or \x00
    std::int64_t workers = 0;
    std::string out_dir;
};

ConfigKv run_config_kv(const RunOptions& o) {
    return {{"input", o.input},
            {"format", o.format},
            {"k", std::to_string(o.k)},
            {"i-per-class", std::to_string(o.i_per_class)},
            {"size-cap", std::to_string(o.size_cap)},
            {"kernel", o.kernel},
            {"tune", bool_str(o.tune)},
            {"c", util::format_double(o.c)},
            {"gamma", util::format_double(o.gamma)},
            {"c-grid", o.c_grid},
            {"gamma-grid", o.gamma_grid},
            {"grid-folds", std::to_string(o.grid_folds)},
            {"repetitions", std::to_string(o.repetitions)},
            {"seed", std::to_string(o.seed)},
            {"standardize", bool_str(o.standardize)},
            {"tolerance", util::format_double(o.tolerance)},
            {"max-passes", std::to_string(o.max_passes)},
            {"level", std::to_string(o.level)},
            {"separator", o.separator},
            {"workers", std::to_string(o.workers)},
            {"out", o.out_dir}};
}

// Builds the experiment configuration shared by run and reproduce;
// everything here is validation, no work happens yet.
eval::ExperimentConfig make_experiment_config(const RunOptions& o) {
    eval::ExperimentConfig cfg;
    if (o.k < 2 || o.k % 2 != 0)
        throw ValidationError("k must be even and >= 2 (got " + std::to_string(o.k) + ")");
    if (o.i_per_class == 0) throw ValidationError("i-per-class must be >= 1");
    if (o.repetitions == 0) throw ValidationError("repetitions must be >= 1");
    if (o.level < 1 || o.level > 9)
        throw ValidationError("level must be in 1..9 (got " + std::to_string(o.level) + ")");
    auto sep = util::unescape_bytes(o.separator);
    if (!sep) throw ValidationError("separator: malformed escape sequence '" + o.separator + "'");
    cfg.kernel = parse_kernel(o.kernel);
    cfg.k = o.k;
    cfg.i_per_class = o.i_per_class;
    if (o.size_cap > 0) cfg.size_cap = o.size_cap;
    cfg.tune = o.tune;
    if (o.tune) {
        if (!o.c_grid.empty()) cfg.grid.c_values = parse_grid_values(o.c_grid, "c-grid");
        if (!o.gamma_grid.empty())
            cfg.grid.gamma_values = parse_grid_values(o.gamma_grid, "gamma-grid");
        if (o.grid_folds < 2) throw ValidationError("grid-folds must be >= 2");
        cfg.grid.folds = o.grid_folds;
    } else {
        if (o.c <= 0) throw ValidationError("c must be > 0");
        if (cfg.kernel == svm::KernelKind::rbf && o.gamma <= 0)
            throw ValidationError("gamma must be > 0 for the rbf kernel");
        cfg.fixed_c = o.c;
        cfg.fixed_gamma = cfg.kernel == svm::KernelKind::linear ? 0.0 : o.gamma;
    }
    cfg.repetitions = o.repetitions;
    cfg.base_seed = o.seed;
    cfg.standardize = o.standardize;
    if (o.tolerance <= 0) throw ValidationError("tolerance must be > 0");
    cfg.svm_tolerance = o.tolerance;
    cfg.svm_max_passes = o.max_passes;
    cfg.compressor.level = static_cast<int>(o.level);
    cfg.compressor.record_separator = *sep;
    cfg.workers = static_cast<int>(o.workers);
    return cfg;
}

corpus::Corpus load_run_corpus(const std::string& input, const std::string& format) {
    if (input.empty()) throw ValidationError("--input is required");
    if (!fs::exists(input)) throw ValidationError("input path does not exist: " + input);
    if (format == "cache") return corpus::load_cache(input);
    auto fmt = corpus::parse_format(format);
    if (!fmt)
        throw ValidationError("unknown format '" + format +
                              "' (expected cache or a raw dataset format)");
    corpus::Corpus c = corpus::load_dataset(input, *fmt);
    // Raw input gets the same duplicate handling as prepare; balancing is
    // prepare's job and unbalanced corpora are rejected downstream.
    c = recipe_full_dedup(*fmt) ? corpus::deduplicate(c) : corpus::remove_cross_label_conflicts(c);
    return c;
}

// Runs one experiment per config, saving report files plus the final
// repetition's model, generator set and held-out records for `score`.
std::vector<eval::EvalReport> run_and_save(const corpus::Corpus& c,
                                           const std::vector<eval::ExperimentConfig>& configs,
                                           const fs::path& out_dir, std::ostream& out) {
    std::vector<eval::EvalReport> reports;
    eval::FinalArtifacts artifacts;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& cfg = configs[i];
        out << "running k=" << cfg.k << " (repetitions " << cfg.repetitions << ", i-per-class "
            << cfg.i_per_class << ")...\n"
            << std::flush;
        bool last = i + 1 == configs.size();
        eval::EvalReport r = eval::run_experiment(c, cfg, last ? &artifacts : nullptr);
        out << "  acc " << util::format_double(r.acc_mean) << " +/- "
            << util::format_double(r.acc_std) << ", auc " << util::format_double(r.auc_mean)
            << " +/- " << util::format_double(r.auc_std) << " ("
            << util::format_double(r.wall_clock_seconds) << " s)\n";
        reports.push_back(std::move(r));
    }
    eval::write_report_files(reports, out_dir);
    svm::save_model(artifacts.model, out_dir / "model.txt");
    ncd::save_generator_set(artifacts.generators, out_dir / "generators");
    corpus::Corpus test;
    test.records = std::move(artifacts.test_records);
    test.dataset_id = c.dataset_id;
    test.class_names = c.class_names;
    corpus::save_cache(test, out_dir / "test_records.tsv");
    out << "artifacts written to " << out_dir.string() << "\n\n";
    return reports;
}

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
    (void)err;
    if (o.out_dir.empty()) throw ValidationError("--out is required");
    eval::ExperimentConfig cfg = make_experiment_config(o);
    echo_config(out, "run", run_config_kv(o));
    corpus::Corpus c = load_run_corpus(o.input, o.format);
    cfg.dataset_id = c.dataset_id;
    auto reports = run_and_save(c, {cfg}, o.out_dir, out);
    out << eval::human_table(reports);
    return kOk;
}

// -------------------------------------------------------------- reproduce

struct ReproOptions {
    std::string profile;
    std::string scale = "desk";
    std::uint64_t k = 0;  // 0 = headline row (or trend set)
    bool trend = false;
    std::string data_dir;
    std::string out_dir;
    std::uint64_t repetitions = 0;  // 0 = profile default for the scale
    std::uint64_t seed = 1;
    std::int64_t workers = 0;
};

// Conventional raw-data location for each profile under the data dir.
fs::path locate_raw(const ReproProfile& p, const fs::path& data_dir, std::ostream& err) {
    switch (p.format) {
        case corpus::DatasetFormat::sms_tsv: {
            fs::path f = data_dir / "sms" / "SMSSpamCollection";
            if (fs::exists(f)) return f;
            return {};
        }
        case corpus::DatasetFormat::csic_http: {
            fs::path d = data_dir / "csic";
            if (fs::is_directory(d)) return d;
            return {};
        }
        case corpus::DatasetFormat::dga_list: {
            fs::path d = data_dir / "dga";
            if (fs::is_directory(d)) return d;
            return {};
        }
        case corpus::DatasetFormat::sentiment140_csv: {
            fs::path d = data_dir / "sentiment140";
            if (!fs::is_directory(d)) return {};
            std::vector<fs::path> csvs;
            for (const auto& e : fs::directory_iterator(d))
                if (e.is_regular_file() && e.path().extension() == ".csv")
                    csvs.push_back(e.path());
            std::sort(csvs.begin(), csvs.end());
            if (csvs.empty()) return {};
            if (csvs.size() > 1)
                err << "note: several csv files under " << d.string() << ", using "
                    << csvs.front().string() << "\n";
            return csvs.front();
        }
        case corpus::DatasetFormat::imdb_dirs: {
            fs::path d = data_dir / "imdb";
            if (fs::is_directory(d)) return d;
            return {};
        }
        default:
            return {};
    }
}

corpus::Corpus acquire_profile_corpus(const ReproProfile& p, const fs::path& data_dir,
                                      std::uint64_t seed, std::ostream& out, std::ostream& err) {
    if (p.name == "synth") {
        corpus::SynthSpec spec;
        spec.class_a.count = 200;
        spec.class_b.count = 200;
        corpus::Corpus c = corpus::synth_corpus(spec, seed);
        c.dataset_id = "synth";
        return c;
    }
    fs::path cache = data_dir / "cache" / (p.dataset_id + ".cache");
    if (!fs::exists(cache)) {
        fs::path raw = locate_raw(p, data_dir, err);
        if (raw.empty())
            throw ValidationError(
                "dataset for profile '" + p.name + "' not found: place the raw data at " +
                (data_dir / p.raw_hint).string() + " (format " +
                std::string(corpus::format_id(p.format)) + ") or a prepared cache at " +
                cache.string());
        out << "cache missing, preparing it from " << raw.string() << "\n";
        corpus::LoadOptions lo;
        lo.warnings = &err;
        corpus::Corpus c = corpus::load_dataset(raw, p.format, lo);
        c = p.full_dedup ? corpus::deduplicate(c) : corpus::remove_cross_label_conflicts(c);
        if (p.balance) c = corpus::balance(c, kPrepSeed);
        c.dataset_id = p.dataset_id;
        corpus::save_cache(c, cache);
        out << "cache written: " << cache.string() << " (" << c.records.size() << " records)\n";
        return c;
    }
    return corpus::load_cache(cache);
}

struct Comparison {
    std::string text;
    bool passed = true;
};

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

Comparison compare_absolute(const eval::EvalReport& r, const ReferenceRow& row) {
    Comparison cmp;
    std::ostringstream os;
    auto line = [&](const char* metric, double got, double want) {
        double diff = std::abs(got - want);
        bool ok = diff <= kReproTolerance;
        cmp.passed = cmp.passed && ok;
        os << "  k=" << row.k << " " << metric << ": achieved " << fixed4(got) << ", reference "
           << util::format_double(want) << ", |diff| " << fixed4(diff) << " -> "
           << (ok ? "PASS" : "FAIL") << "\n";
    };
    line("accuracy", r.acc_mean, row.accuracy);
    line("AUC", r.auc_mean, row.auc);
    cmp.text = "comparison against reference values (tolerance " +
               util::format_double(kReproTolerance) + "):\n" + os.str();
    return cmp;
}

Comparison compare_threshold(const eval::EvalReport& r, const ReferenceRow& row) {
    Comparison cmp;
    std::ostringstream os;
    auto line = [&](const char* metric, double got, double floor_v) {
        bool ok = got > floor_v;
        cmp.passed = cmp.passed && ok;
        os << "  " << metric << " " << fixed4(got) << " > " << util::format_double(floor_v)
           << " -> " << (ok ? "PASS" : "FAIL") << "\n";
    };
    line("accuracy", r.acc_mean, row.accuracy);
    line("AUC", r.auc_mean, row.auc);
    cmp.text = "threshold check:\n" + os.str();
    return cmp;
}

Comparison compare_trend(const std::vector<eval::EvalReport>& reports, bool strict) {
    Comparison cmp;
    std::ostringstream os;
    double pooled = 0;
    for (const auto& r : reports) pooled += r.acc_std * r.acc_std;
    pooled = std::sqrt(pooled / static_cast<double>(reports.size()));
    os << "trend check (mean accuracy across k, "
       << (strict ? "strictly increasing" : "non-decreasing within one pooled std " + fixed4(pooled))
       << "):\n  ";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (i) os << " -> ";
        os << "k=" << reports[i].config.k << " " << fixed4(reports[i].acc_mean);
        if (i) {
            double prev = reports[i - 1].acc_mean;
            double cur = reports[i].acc_mean;
            bool ok = strict ? cur > prev : cur >= prev - pooled;
            cmp.passed = cmp.passed && ok;
        }
    }
    os << " -> " << (cmp.passed ? "PASS" : "FAIL") << "\n";
    cmp.text = os.str();
    return cmp;
}

int cmd_reproduce(const ReproOptions& o, std::ostream& out, std::ostream& err) {
    const ReproProfile* prof = find_profile(o.profile);
    if (!prof) {
        std::string names;
        for (const auto& p : repro_profiles()) names += (names.empty() ? "" : ", ") + p.name;
        throw ValidationError("unknown profile '" + o.profile + "' (available: " + names + ")");
    }
    if (o.scale != "full" && o.scale != "desk")
        throw ValidationError("--scale must be full or desk (got '" + o.scale + "')");
    if (o.k && o.trend) throw ValidationError("--k and --trend are mutually exclusive");
    bool desk = o.scale == "desk";

    fs::path data_dir = o.data_dir.empty() ? default_data_dir() : fs::path(o.data_dir);
    fs::path out_dir =
        o.out_dir.empty() ? fs::path("runs") / (prof->name + "-" + o.scale) : fs::path(o.out_dir);

    echo_config(out, "reproduce",
                {{"profile", o.profile},
                 {"scale", o.scale},
                 {"k", std::to_string(o.k)},
                 {"trend", bool_str(o.trend)},
                 {"data-dir", data_dir.string()},
                 {"out", out_dir.string()},
                 {"repetitions", std::to_string(o.repetitions)},
                 {"seed", std::to_string(o.seed)},
                 {"workers", std::to_string(o.workers)}});

    corpus::Corpus c = acquire_profile_corpus(*prof, data_dir, o.seed, out, err);
    std::size_t subsample = desk ? prof->desk_subsample_per_class : prof->full_subsample_per_class;
    if (subsample > 0) {
        c = corpus::subsample_per_class(c, subsample, kPrepSeed);
        out << "subsampled to " << subsample << " records per class\n";
    }

    // Row selection: explicit --k, the profile's headline row, or the
    // trend set. Desk scale defaults to the trend check: absolute numbers
    // are only comparable at the reference corpus sizes.
    bool trend_mode = o.trend || (desk && !prof->threshold_mode && o.k == 0);
    std::vector<std::size_t> ks;
    if (trend_mode) {
        for (const auto& row : prof->rows)
            if (!desk || row.k <= 32) ks.push_back(row.k);
    } else {
        ks.push_back(o.k ? o.k : prof->headline_k);
    }

    std::vector<eval::ExperimentConfig> configs;
    for (std::size_t k : ks) {
        const ReferenceRow* row = prof->row_for_k(k);
        if (!row) {
            std::string have;
            for (const auto& r : prof->rows) have += (have.empty() ? "" : ", ") + std::to_string(r.k);
            throw ValidationError("profile '" + prof->name + "' has no reference row for k=" +
                                  std::to_string(k) + " (rows: " + have + ")");
        }
        eval::ExperimentConfig cfg;
        cfg.dataset_id = c.dataset_id;
        cfg.k = k;
        cfg.i_per_class = desk ? prof->desk_i_per_class : prof->full_i_per_class;
        if (prof->size_cap > 0) cfg.size_cap = prof->size_cap;
        cfg.kernel = prof->kernel;
        cfg.tune = false;
        cfg.fixed_c = row->c;
        cfg.fixed_gamma = row->gamma;
        cfg.repetitions =
            o.repetitions ? o.repetitions : (desk ? prof->desk_repetitions : prof->full_repetitions);
        cfg.base_seed = o.seed;
        cfg.workers = static_cast<int>(o.workers);
        configs.push_back(std::move(cfg));
    }

    auto reports = run_and_save(c, configs, out_dir, out);
    out << eval::human_table(reports) << "\n";

    Comparison cmp;
    if (prof->threshold_mode) {
        cmp = compare_threshold(reports.front(), *prof->row_for_k(ks.front()));
    } else if (trend_mode) {
        cmp = compare_trend(reports, /*strict=*/prof->name == "twitter");
    } else {
        cmp = compare_absolute(reports.front(), *prof->row_for_k(ks.front()));
    }
    out << cmp.text << "result: " << (cmp.passed ? "PASS" : "FAIL") << "\n";
    return cmp.passed ? kOk : kCompareFailed;
}

// ------------------------------------------------------------------ score

struct ScoreOptions {
    std::string model;
    std::string generators;
    std::int64_t workers = 0;
};

int cmd_score(const ScoreOptions& o, std::istream& in, std::ostream& out, std::ostream& err) {
    if (!fs::exists(o.model)) throw ValidationError("model file does not exist: " + o.model);
    if (!fs::is_directory(o.generators))
        throw ValidationError("generator directory does not exist: " + o.generators);
    svm::SvmModel model = svm::load_model(o.model);
    ncd::GeneratorSet gens = ncd::load_generator_set(o.generators);
    if (model.dim != gens.k())
        throw ValidationError("model expects k=" + std::to_string(model.dim) +
                              " attributes but the generator set has k=" +
                              std::to_string(gens.k()));

    std::vector<corpus::TextRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            err << "warning: line " << lineno << " is empty, skipped\n";
            continue;
        }
        records.push_back({line, corpus::Label::class_a});
    }
    if (records.empty()) return kOk;

    ncd::AttributeMatrix m = ncd::featurize(records, gens, static_cast<int>(o.workers));
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::span<const double> row(m.values.data() + i * m.cols, m.cols);
        double dv = svm::decision_value(model, row);
        char label = corpus::label_char(dv > 0 ? corpus::Label::class_a : corpus::Label::class_b);
        out << label << '\t' << util::format_double(dv) << '\t' << records[i].text << '\n';
    }
    return kOk;
}

// ----------------------------------------------------------------- report

int cmd_report(const std::string& run_dir, std::ostream& out) {
    fs::path tsv = fs::path(run_dir) / "report.tsv";
    if (!fs::exists(tsv)) throw ValidationError("no report.tsv under " + run_dir);
    std::istringstream in(util::read_file(tsv));
    std::string line;
    std::getline(in, line);  // header
    std::vector<eval::EvalReport> reports;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss{line};
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 12) throw std::runtime_error("malformed report.tsv line: " + line);
        eval::EvalReport r;
        r.config.dataset_id = cols[0];
        auto k = util::parse_u64(cols[1]);
        auto c = util::parse_double(cols[3]);
        auto gamma = util::parse_double(cols[4]);
        auto acc_m = util::parse_double(cols[5]);
        auto acc_s = util::parse_double(cols[6]);
        auto auc_m = util::parse_double(cols[7]);
        auto auc_s = util::parse_double(cols[8]);
        auto reps = util::parse_u64(cols[9]);
        auto seed = util::parse_u64(cols[10]);
        if (!k || !c || !gamma || !acc_m || !acc_s || !auc_m || !auc_s || !reps || !seed)
            throw std::runtime_error("malformed report.tsv line: " + line);
        r.config.k = *k;
        r.config.kernel = cols[2] == "linear" ? svm::KernelKind::linear : svm::KernelKind::rbf;
        r.reported_c = *c;
        r.reported_gamma = *gamma;
        r.acc_mean = *acc_m;
        r.acc_std = *acc_s;
        r.auc_mean = *auc_m;
        r.auc_std = *auc_s;
        r.config.repetitions = *reps;
        r.config.base_seed = *seed;
        r.config.tune = cols[11] == "1";
        r.single_run = *reps == 1;
        reports.push_back(std::move(r));
    }
    if (reports.empty()) throw std::runtime_error("report.tsv has no data rows");
    out << eval::human_table(reports);
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"compression-distance text classifier"};
    app.require_subcommand(1);
    std::string config_dummy;  // --config is expanded before parsing; kept for help text
    static constexpr const char* kConfigHelp =
        "config file with 'key = value' lines mirroring the long options "
        "(command-line flags win)";

    PrepareOptions po;
    CLI::App* prepare = app.add_subcommand(
        "prepare", "load a raw dataset, apply its preparation recipe, write a corpus cache");
    prepare->add_option("--input", po.input, "raw dataset file or directory")->required();
    prepare->add_option("--format", po.format, "dataset format")->required();
    prepare->add_option("--output", po.output, "corpus cache to write")->required();
    prepare->add_option("--dedup", po.dedup,
                        "duplicate handling: auto (per-format recipe), full, conflicts");
    prepare->add_flag("--balance", po.balance, "downsample the majority class");
    prepare->add_option("--subsample", po.subsample, "keep at most N records per class (0 = all)");
    prepare->add_option("--prep-seed", po.prep_seed, "seed for balance/subsample draws");
    prepare->add_flag("--strict", po.strict, "fail on the first malformed record");
    prepare->add_option("--config", config_dummy, kConfigHelp);

    RunOptions ro;
    CLI::App* run = app.add_subcommand("run", "run the full experiment pipeline on a corpus");
    run->add_option("--input", ro.input, "corpus cache (or raw dataset, see --format)")->required();
    run->add_option("--format", ro.format, "cache (default) or a raw dataset format");
    run->add_option("--k", ro.k, "number of attribute generators (even)");
    run->add_option("--i-per-class", ro.i_per_class, "classifier instances per class");
    run->add_option("--size-cap", ro.size_cap, "generator byte cap (0 = uncapped)");
    run->add_option("--kernel", ro.kernel, "rbf or linear");
    run->add_flag("--tune", ro.tune, "grid-search (C, gamma) per repetition");
    run->add_option("--c", ro.c, "fixed C (ignored with --tune)");
    run->add_option("--gamma", ro.gamma, "fixed rbf gamma (ignored with --tune)");
    run->add_option("--c-grid", ro.c_grid, "comma-separated C grid for --tune");
    run->add_option("--gamma-grid", ro.gamma_grid, "comma-separated gamma grid for --tune");
    run->add_option("--grid-folds", ro.grid_folds, "cross-validation folds for --tune");
    run->add_option("--repetitions", ro.repetitions, "independent repetitions");
    run->add_option("--seed", ro.seed, "base seed; repetition r uses seed+r");
    run->add_flag("--standardize", ro.standardize, "z-score attributes (fit on training part)");
    run->add_option("--tolerance", ro.tolerance, "SVM stopping tolerance");
    run->add_option("--max-passes", ro.max_passes, "SVM pair-update budget");
    run->add_option("--level", ro.level, "compression level 1..9");
    run->add_option("--separator", ro.separator, "record separator, escaped (default \\n)");
    run->add_option("--workers", ro.workers, "featurize threads (0 = auto)");
    run->add_option("--out", ro.out_dir, "output directory for reports and artifacts")->required();
    run->add_option("--config", config_dummy, kConfigHelp);

    ReproOptions xo;
    CLI::App* repro = app.add_subcommand(
        "reproduce", "run a pinned experiment profile and compare against its reference values");
    repro->add_option("profile", xo.profile,
                      "profile name (url, sms, dga, twitter, movies, synth)");
    repro->add_option("--scale", xo.scale, "full (reference sizes) or desk (subsampled; default)");
    repro->add_option("--k", xo.k, "run a single reference row instead of the default");
    repro->add_flag("--trend", xo.trend, "run the k-trend check");
    repro->add_option("--data-dir", xo.data_dir, "dataset root (default $NCDSVM_DATA_DIR or ./data)");
    repro->add_option("--out", xo.out_dir, "output directory (default runs/<profile>-<scale>)");
    repro->add_option("--repetitions", xo.repetitions, "override repetition count (0 = profile)");
    repro->add_option("--seed", xo.seed, "base seed");
    repro->add_option("--workers", xo.workers, "featurize threads (0 = auto)");
    repro->add_option("--config", config_dummy, kConfigHelp);

    ScoreOptions so;
    CLI::App* score = app.add_subcommand(
        "score", "classify newline-delimited text from stdin with a saved model");
    score->add_option("--model", so.model, "model file from a run")->required();
    score->add_option("--generators", so.generators, "generator directory from the same run")
        ->required();
    score->add_option("--workers", so.workers, "featurize threads (0 = auto)");
    score->add_option("--config", config_dummy, kConfigHelp);

    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "re-render a saved run directory as a table");
    report->add_option("--run", report_dir, "run directory holding report.tsv")->required();

    std::vector<std::string> expanded = args;
    try {
        apply_config_args(expanded);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    std::vector<const char*> argv;
    argv.reserve(expanded.size() + 1);
    argv.push_back("ncdsvm");
    for (const auto& a : expanded) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        auto subs = app.get_subcommands();
        if (!subs.empty()) target = subs.front();
        out << target->help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(po, out, err);
        if (run->parsed()) return cmd_run(ro, out, err);
        if (repro->parsed()) return cmd_reproduce(xo, out, err);
        if (score->parsed()) return cmd_score(so, in, out, err);
        if (report->parsed()) return cmd_report(report_dir, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const corpus::LoadError& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}

}  // namespace ncdsvm::cli
