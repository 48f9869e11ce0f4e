#include "ncdsvm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ncdsvm/util.hpp"

namespace ncdsvm::eval {

using corpus::Label;

double accuracy(std::span<const Label> predicted, std::span<const Label> actual) {
    if (predicted.size() != actual.size())
        throw std::invalid_argument("accuracy: " + std::to_string(predicted.size()) +
                                    " predictions for " + std::to_string(actual.size()) +
                                    " labels");
    if (actual.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < actual.size(); ++i)
        if (predicted[i] == actual[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(actual.size());
}

double auc(std::span<const double> scores, std::span<const Label> actual) {
    if (scores.size() != actual.size())
        throw std::invalid_argument("auc: " + std::to_string(scores.size()) + " scores for " +
                                    std::to_string(actual.size()) + " labels");
    std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(scores[i]))
            throw std::invalid_argument("auc: non-finite score at index " + std::to_string(i));
        if (actual[i] == Label::class_a) ++n_pos;
    }
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: both classes must be present");
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return a < b;
    });
    // Midranks: every member of a tie block gets the block's average rank,
    // which realizes the "ties count 1/2" convention exactly.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (actual[idx[t]] == Label::class_a) rank_sum_pos += midrank;
        i = j;
    }
    double u = rank_sum_pos -
               static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<std::uint32_t> kfold_indices(std::size_t n, std::size_t folds,
                                         std::span<const Label> labels, std::uint64_t seed) {
    if (labels.size() != n)
        throw std::invalid_argument("kfold_indices: " + std::to_string(labels.size()) +
                                    " labels for n = " + std::to_string(n));
    if (folds < 2) throw std::invalid_argument("kfold_indices: folds must be >= 2");
    std::array<std::vector<std::uint32_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i)
        by_class[corpus::label_index(labels[i])].push_back(static_cast<std::uint32_t>(i));
    for (std::size_t cls = 0; cls < 2; ++cls)
        if (!by_class[cls].empty() && by_class[cls].size() < folds)
            throw std::invalid_argument(
                "kfold_indices: " + std::to_string(folds) + " folds exceed the " +
                std::to_string(by_class[cls].size()) + " records of class " +
                std::string(1, corpus::label_char(static_cast<Label>(cls))));
    util::Rng rng(seed);
    std::vector<std::uint32_t> assignment(n, 0);
    for (auto& positions : by_class) {
        rng.shuffle(positions);
        for (std::size_t i = 0; i < positions.size(); ++i)
            assignment[positions[i]] = static_cast<std::uint32_t>(i % folds);
    }
    return assignment;
}

namespace {

struct SubSet {
    std::vector<double> data;
    std::vector<int> y;
    std::size_t rows = 0;
};

SubSet gather_rows(const svm::FeatureView& x, std::span<const int> y,
                   std::span<const std::uint32_t> rows) {
    SubSet s;
    s.rows = rows.size();
    s.data.reserve(rows.size() * x.cols);
    s.y.reserve(rows.size());
    for (std::uint32_t r : rows) {
        auto row = x.row(r);
        s.data.insert(s.data.end(), row.begin(), row.end());
        s.y.push_back(y[r]);
    }
    return s;
}

}  // namespace

GridResult grid_search(const svm::FeatureView& x, std::span<const int> y, svm::KernelKind kind,
                       const GridSpec& grid, std::uint64_t seed,
                       const svm::SvmParams& base_params) {
    if (grid.c_values.empty()) throw std::invalid_argument("grid_search: no C values");
    for (double c : grid.c_values)
        if (!(c > 0)) throw std::invalid_argument("grid_search: C values must be > 0");
    bool rbf = kind == svm::KernelKind::rbf;
    if (rbf) {
        if (grid.gamma_values.empty())
            throw std::invalid_argument("grid_search: no gamma values for rbf kernel");
        for (double g : grid.gamma_values)
            if (!(g > 0)) throw std::invalid_argument("grid_search: gamma values must be > 0");
    }
    std::vector<Label> labels(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        labels[i] = y[i] == 1 ? Label::class_a : Label::class_b;
    std::vector<std::uint32_t> fold_of =
        kfold_indices(y.size(), grid.folds, labels, seed);

    // Same folds for every cell: per fold, the train/test row sets.
    std::vector<std::vector<std::uint32_t>> test_rows(grid.folds), train_rows(grid.folds);
    for (std::uint32_t i = 0; i < y.size(); ++i)
        for (std::size_t f = 0; f < grid.folds; ++f)
            (fold_of[i] == f ? test_rows[f] : train_rows[f]).push_back(i);

    std::vector<double> c_sorted = grid.c_values;
    std::sort(c_sorted.begin(), c_sorted.end());
    std::vector<double> gamma_sorted = rbf ? grid.gamma_values : std::vector<double>{0.0};
    std::sort(gamma_sorted.begin(), gamma_sorted.end());

    GridResult result;
    double best_acc = -1.0;
    std::string first_error;
    for (double c : c_sorted) {
        for (double gamma : gamma_sorted) {
            GridCell cell;
            cell.c = c;
            cell.gamma = gamma;
            svm::KernelSpec spec{kind, rbf ? gamma : 1.0};
            svm::SvmParams params = base_params;
            params.c = c;
            std::size_t correct = 0;
            try {
                for (std::size_t f = 0; f < grid.folds; ++f) {
                    SubSet tr = gather_rows(x, y, train_rows[f]);
                    svm::FeatureView tv{tr.data.data(), tr.rows, x.cols};
                    svm::SvmModel model = svm::train(tv, tr.y, spec, params);
                    for (std::uint32_t r : test_rows[f])
                        if (svm::predict(model, x.row(r)) == y[r]) ++correct;
                }
                cell.cv_accuracy =
                    static_cast<double>(correct) / static_cast<double>(y.size());
            } catch (const svm::TrainingError& e) {
                cell.failed = true;
                cell.error = e.what();
                if (first_error.empty()) first_error = e.what();
            }
            if (!cell.failed && cell.cv_accuracy > best_acc) {
                best_acc = cell.cv_accuracy;
                result.best_c = c;
                result.best_gamma = gamma;
                result.best_cv_accuracy = cell.cv_accuracy;
            }
            result.cells.push_back(std::move(cell));
        }
    }
    if (best_acc < 0)
        throw std::runtime_error("grid_search: every cell failed to train; first error: " +
                                 first_error);
    return result;
}

namespace {

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.repetitions == 0)
        throw std::invalid_argument("experiment: repetitions must be >= 1");
    if (cfg.i_per_class == 0)
        throw std::invalid_argument("experiment: i_per_class must be >= 1");
    if (!cfg.tune) {
        if (!(cfg.fixed_c > 0)) throw std::invalid_argument("experiment: C must be > 0");
        if (cfg.kernel == svm::KernelKind::rbf && !(cfg.fixed_gamma > 0))
            throw std::invalid_argument("experiment: gamma must be > 0 for the rbf kernel");
    }
    if (!(cfg.svm_tolerance > 0))
        throw std::invalid_argument("experiment: svm tolerance must be > 0");
    compress::make_compressor(cfg.compressor);  // validates algorithm + level
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

EvalReport run_experiment(const corpus::Corpus& c, const ExperimentConfig& cfg,
                          FinalArtifacts* artifacts) {
    validate_config(cfg);
    auto t0 = std::chrono::steady_clock::now();
    EvalReport report;
    report.config = cfg;
    if (report.config.dataset_id.empty()) report.config.dataset_id = c.dataset_id;

    std::vector<Label> corpus_labels;
    corpus_labels.reserve(c.records.size());
    for (const auto& r : c.records) corpus_labels.push_back(r.label);

    for (std::size_t rep = 1; rep <= cfg.repetitions; ++rep) {
        std::uint64_t seed = cfg.base_seed + rep;
        try {
            corpus::SplitIndices split =
                corpus::split_gi_indices(corpus_labels, cfg.i_per_class, seed);
            std::vector<corpus::TextRecord> g_records, i_records;
            g_records.reserve(split.g_indices.size());
            i_records.reserve(split.i_indices.size());
            for (std::uint32_t idx : split.g_indices) g_records.push_back(c.records[idx]);
            for (std::uint32_t idx : split.i_indices) i_records.push_back(c.records[idx]);

            ncd::GeneratorSet gens = ncd::build_generators(g_records, cfg.k, seed,
                                                           cfg.size_cap, cfg.compressor);
            ncd::AttributeMatrix features = ncd::featurize(i_records, gens, cfg.workers);

            std::size_t n_i = features.rows;
            std::vector<std::uint32_t> fold_of =
                kfold_indices(n_i, 5, features.row_labels, seed);
            std::vector<std::uint32_t> train_rows, test_rows;
            for (std::uint32_t i = 0; i < n_i; ++i)
                (fold_of[i] == 0 ? test_rows : train_rows).push_back(i);

            std::vector<double> train_data;
            std::vector<int> y_train;
            train_data.reserve(train_rows.size() * features.cols);
            for (std::uint32_t r : train_rows) {
                const double* row = features.values.data() + r * features.cols;
                train_data.insert(train_data.end(), row, row + features.cols);
                y_train.push_back(features.row_labels[r] == Label::class_a ? 1 : -1);
            }
            std::optional<svm::Scaler> scaler;
            if (cfg.standardize) {
                scaler = svm::fit_scaler(train_data.data(), train_rows.size(), features.cols);
                for (std::size_t r = 0; r < train_rows.size(); ++r) {
                    auto scaled = scaler->apply(
                        {train_data.data() + r * features.cols, features.cols});
                    std::copy(scaled.begin(), scaled.end(),
                              train_data.begin() + static_cast<std::ptrdiff_t>(r * features.cols));
                }
            }
            svm::FeatureView train_view{train_data.data(), train_rows.size(), features.cols};

            double chosen_c = cfg.fixed_c;
            double chosen_gamma = cfg.fixed_gamma;
            svm::SvmParams params;
            params.tolerance = cfg.svm_tolerance;
            params.max_passes = cfg.svm_max_passes;
            params.seed = seed;
            if (cfg.tune) {
                GridResult gr = grid_search(train_view, y_train, cfg.kernel, cfg.grid, seed,
                                            params);
                chosen_c = gr.best_c;
                chosen_gamma = gr.best_gamma;
            }
            params.c = chosen_c;
            svm::KernelSpec spec{cfg.kernel,
                                 cfg.kernel == svm::KernelKind::rbf ? chosen_gamma : 1.0};
            svm::SvmModel model = svm::train(train_view, y_train, spec, params);
            if (scaler) model.scaler = scaler;

            std::vector<double> scores;
            std::vector<Label> predicted, actual;
            scores.reserve(test_rows.size());
            for (std::uint32_t r : test_rows) {
                std::span<const double> row{features.values.data() + r * features.cols,
                                            features.cols};
                double dv = svm::decision_value(model, row);
                scores.push_back(dv);
                predicted.push_back(dv > 0 ? Label::class_a : Label::class_b);
                actual.push_back(features.row_labels[r]);
            }

            RepetitionResult rr;
            rr.seed = seed;
            rr.chosen_c = chosen_c;
            rr.chosen_gamma = cfg.kernel == svm::KernelKind::rbf ? chosen_gamma : 0.0;
            rr.accuracy = accuracy(predicted, actual);
            rr.auc = auc(scores, actual);
            rr.model_fingerprint = model.data_fingerprint;
            rr.svm_iterations = model.iterations;
            rr.n_sv = model.n_sv();
            rr.test_corpus_indices.reserve(test_rows.size());
            for (std::uint32_t r : test_rows)
                rr.test_corpus_indices.push_back(split.i_indices[r]);
            report.repetitions.push_back(std::move(rr));

            if (artifacts && rep == cfg.repetitions) {
                artifacts->model = std::move(model);
                artifacts->generators = std::move(gens);
                artifacts->test_records.clear();
                for (std::uint32_t r : test_rows) artifacts->test_records.push_back(i_records[r]);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("repetition " + std::to_string(rep) + ": " + e.what());
        }
    }

    std::vector<double> accs, aucs;
    for (const auto& r : report.repetitions) {
        accs.push_back(r.accuracy);
        aucs.push_back(r.auc);
    }
    report.acc_mean = mean_of(accs);
    report.auc_mean = mean_of(aucs);
    report.acc_std = sample_std(accs, report.acc_mean);
    report.auc_std = sample_std(aucs, report.auc_mean);
    report.single_run = cfg.repetitions == 1;

    if (cfg.tune) {
        std::map<std::pair<double, double>, std::size_t> votes;
        for (const auto& r : report.repetitions) ++votes[{r.chosen_c, r.chosen_gamma}];
        std::size_t best = 0;
        for (const auto& [pair, count] : votes) {
            if (count > best) {  // map order: ties keep the smaller (C, gamma)
                best = count;
                report.reported_c = pair.first;
                report.reported_gamma = pair.second;
            }
        }
    } else {
        report.reported_c = cfg.fixed_c;
        report.reported_gamma =
            cfg.kernel == svm::KernelKind::rbf ? cfg.fixed_gamma : 0.0;
    }

    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

namespace {

std::string kernel_name(svm::KernelKind k) {
    return k == svm::KernelKind::rbf ? "rbf" : "linear";
}

std::string join_u32(std::span<const std::uint32_t> v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string EvalReport::canonical_text() const {
    const ExperimentConfig& c = config;
    std::string out;
    out += "dataset = " + c.dataset_id + "\n";
    out += "k = " + std::to_string(c.k) + "\n";
    out += "i_per_class = " + std::to_string(c.i_per_class) + "\n";
    out += "size_cap = " + std::to_string(c.size_cap.value_or(0)) + "\n";
    out += "kernel = " + kernel_name(c.kernel) + "\n";
    out += std::string("tune = ") + (c.tune ? "1" : "0") + "\n";
    if (c.tune) {
        out += "grid_c =";
        for (double v : c.grid.c_values) out += " " + util::format_double(v);
        out += "\ngrid_gamma =";
        for (double v : c.grid.gamma_values) out += " " + util::format_double(v);
        out += "\ngrid_folds = " + std::to_string(c.grid.folds) + "\n";
    } else {
        out += "c = " + util::format_double(c.fixed_c) + "\n";
        out += "gamma = " + util::format_double(c.fixed_gamma) + "\n";
    }
    out += "repetitions = " + std::to_string(c.repetitions) + "\n";
    out += "base_seed = " + std::to_string(c.base_seed) + "\n";
    out += std::string("standardize = ") + (c.standardize ? "1" : "0") + "\n";
    out += "svm_tolerance = " + util::format_double(c.svm_tolerance) + "\n";
    out += "svm_max_passes = " + std::to_string(c.svm_max_passes) + "\n";
    out += "compressor = " + c.compressor.algorithm + " level " +
           std::to_string(c.compressor.level) + " sep " +
           util::escape_bytes(c.compressor.record_separator) + "\n";
    for (std::size_t i = 0; i < repetitions.size(); ++i) {
        const RepetitionResult& r = repetitions[i];
        out += "rep = " + std::to_string(i + 1) + " seed " + std::to_string(r.seed) + " c " +
               util::format_double(r.chosen_c) + " gamma " +
               util::format_double(r.chosen_gamma) + " acc " + util::format_double(r.accuracy) +
               " auc " + util::format_double(r.auc) + " fingerprint " +
               std::to_string(r.model_fingerprint) + " iterations " +
               std::to_string(r.svm_iterations) + " n_sv " + std::to_string(r.n_sv) + "\n";
    }
    out += "reported_c = " + util::format_double(reported_c) + "\n";
    out += "reported_gamma = " + util::format_double(reported_gamma) + "\n";
    out += "acc_mean = " + util::format_double(acc_mean) + "\n";
    out += "acc_std = " + util::format_double(acc_std) + "\n";
    out += "auc_mean = " + util::format_double(auc_mean) + "\n";
    out += "auc_std = " + util::format_double(auc_std) + "\n";
    out += std::string("single_run = ") + (single_run ? "1" : "0") + "\n";
    return out;
}

std::string human_table(std::span<const EvalReport> reports) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"dataset", "kernel", "reps", "k", "C", "gamma", "Acc", "AUC"});
    for (const EvalReport& r : reports) {
        std::string gamma = r.config.kernel == svm::KernelKind::linear
                                ? "-"
                                : util::format_double(r.reported_gamma);
        std::string acc = fixed4(r.acc_mean);
        if (!r.single_run) acc += " +/- " + fixed4(r.acc_std);
        std::string auc_s = fixed4(r.auc_mean);
        if (!r.single_run) auc_s += " +/- " + fixed4(r.auc_std);
        rows.push_back({r.config.dataset_id, kernel_name(r.config.kernel),
                        std::to_string(r.config.repetitions), std::to_string(r.config.k),
                        util::format_double(r.reported_c), gamma, acc, auc_s});
    }
    std::vector<std::size_t> widths(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += row[i];
            if (i + 1 < row.size()) out += std::string(widths[i] - row[i].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

void write_report_files(std::span<const EvalReport> reports, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    // No wall-clock column: report files are byte-identical across runs of
    // the same config and seed; timings go to the caller's console only.
    std::string report_tsv =
        "dataset\tk\tkernel\tc\tgamma\tacc_mean\tacc_std\tauc_mean\tauc_std\trepetitions\t"
        "base_seed\ttuned\n";
    std::string reps_tsv =
        "dataset\tk\trep\tseed\tc\tgamma\tacc\tauc\tn_sv\titerations\tfingerprint\t"
        "test_corpus_indices\n";
    for (const EvalReport& r : reports) {
        const ExperimentConfig& c = r.config;
        report_tsv += c.dataset_id + "\t" + std::to_string(c.k) + "\t" +
                      kernel_name(c.kernel) + "\t" + util::format_double(r.reported_c) + "\t" +
                      util::format_double(r.reported_gamma) + "\t" +
                      util::format_double(r.acc_mean) + "\t" + util::format_double(r.acc_std) +
                      "\t" + util::format_double(r.auc_mean) + "\t" +
                      util::format_double(r.auc_std) + "\t" + std::to_string(c.repetitions) +
                      "\t" + std::to_string(c.base_seed) + "\t" + (c.tune ? "1" : "0") + "\n";
        for (std::size_t i = 0; i < r.repetitions.size(); ++i) {
            const RepetitionResult& rr = r.repetitions[i];
            reps_tsv += c.dataset_id + "\t" + std::to_string(c.k) + "\t" +
                        std::to_string(i + 1) + "\t" + std::to_string(rr.seed) + "\t" +
                        util::format_double(rr.chosen_c) + "\t" +
                        util::format_double(rr.chosen_gamma) + "\t" +
                        util::format_double(rr.accuracy) + "\t" + util::format_double(rr.auc) +
                        "\t" + std::to_string(rr.n_sv) + "\t" +
                        std::to_string(rr.svm_iterations) + "\t" +
                        std::to_string(rr.model_fingerprint) + "\t" +
                        join_u32(rr.test_corpus_indices, ',') + "\n";
        }
    }
    util::atomic_write_file(dir / "report.tsv", report_tsv);
    util::atomic_write_file(dir / "repetitions.tsv", reps_tsv);
    util::atomic_write_file(dir / "table.txt", human_table(reports));
}

}  // namespace ncdsvm::eval
