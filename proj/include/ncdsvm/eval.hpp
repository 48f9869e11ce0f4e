// eval.hpp — metrics (accuracy, rank-based AUC), stratified k-fold CV,
// (C, gamma) grid search, and the repeated split→generators→featurize→
// train→score experiment loop with mean ± std aggregation.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncdsvm/compress.hpp"
#include "ncdsvm/corpus.hpp"
#include "ncdsvm/ncd.hpp"
#include "ncdsvm/svm.hpp"

namespace ncdsvm::eval {

// Fraction of exact matches.
double accuracy(std::span<const corpus::Label> predicted, std::span<const corpus::Label> actual);

// Probability that a uniformly chosen class-A ("positive") score exceeds a
// class-B score, ties counted 1/2 (Mann–Whitney with midranks; equal to
// trapezoidal ROC integration).
double auc(std::span<const double> scores, std::span<const corpus::Label> actual);

// Stratified fold assignment: result[i] in [0, folds); per-class counts
// differ by at most one across folds. Seeded and deterministic.
std::vector<std::uint32_t> kfold_indices(std::size_t n, std::size_t folds,
                                         std::span<const corpus::Label> labels,
                                         std::uint64_t seed);

struct GridSpec {
    std::vector<double> c_values = {0.01, 0.1, 0.5, 1, 1.5, 2, 5, 10, 20, 100};
    std::vector<double> gamma_values = {0.1, 1, 5, 10, 25, 50, 100};  // ignored for linear
    std::size_t folds = 10;
};

struct GridCell {
    double c = 0;
    double gamma = 0;  // 0 for linear
    double cv_accuracy = 0;
    bool failed = false;
    std::string error;
};

struct GridResult {
    double best_c = 0;
    double best_gamma = 0;  // 0 for linear
    double best_cv_accuracy = 0;
    std::vector<GridCell> cells;
};

// Evaluates every grid cell by stratified k-fold CV accuracy (same folds
// for every cell) and returns the argmax; exact ties resolve to the
// smaller C, then the smaller gamma. Cells whose training fails are
// recorded and skipped; if every cell fails, throws.
GridResult grid_search(const svm::FeatureView& x, std::span<const int> y, svm::KernelKind kind,
                       const GridSpec& grid, std::uint64_t seed,
                       const svm::SvmParams& base_params);

struct ExperimentConfig {
    std::string dataset_id;
    std::size_t k = 8;
    std::size_t i_per_class = 100;
    std::optional<std::uint64_t> size_cap;
    svm::KernelKind kernel = svm::KernelKind::rbf;

    bool tune = false;  // true: per-repetition grid search; false: fixed (C, gamma)
    double fixed_c = 1.0;
    double fixed_gamma = 1.0;
    GridSpec grid;

    std::size_t repetitions = 5;
    std::uint64_t base_seed = 1;
    bool standardize = false;  // per-feature z-scoring fit on the training portion
    double svm_tolerance = 1e-3;
    std::uint64_t svm_max_passes = 10'000'000;
    compress::CompressorConfig compressor;
    int workers = 0;  // featurize parallelism; <= 0 selects automatically
};

struct RepetitionResult {
    std::uint64_t seed = 0;  // base_seed + repetition index (1-based)
    double chosen_c = 0;
    double chosen_gamma = 0;  // 0 for linear
    double accuracy = 0;
    double auc = 0;
    std::uint64_t model_fingerprint = 0;  // hash of the exact (features, labels) trained on
    std::uint64_t svm_iterations = 0;
    std::size_t n_sv = 0;
    std::vector<std::uint32_t> test_corpus_indices;  // positions in the input corpus
};

struct EvalReport {
    ExperimentConfig config;
    std::vector<RepetitionResult> repetitions;
    double acc_mean = 0;
    double acc_std = 0;  // sample std over repetitions (0 when single_run)
    double auc_mean = 0;
    double auc_std = 0;
    bool single_run = false;
    double wall_clock_seconds = 0;

    // Reported headline (C, gamma): the fixed values, or under tuning the
    // most frequently selected pair (ties to the smaller pair).
    double reported_c = 0;
    double reported_gamma = 0;

    // Full deterministic serialization minus wall-clock time; two runs of
    // the same config and seed produce byte-identical canonical text.
    std::string canonical_text() const;
};

// Artifacts of the last repetition, for callers that persist a usable
// classifier alongside the report.
struct FinalArtifacts {
    svm::SvmModel model;
    ncd::GeneratorSet generators;
    std::vector<corpus::TextRecord> test_records;
};

// One full experiment: for r = 1..R with seed base_seed + r, split the
// corpus into G/I, build generators from G, featurize I, hold out a
// stratified 20% of I, tune or take fixed (C, gamma), train on the rest
// and score the held-out part. The corpus must arrive prepared
// (deduplicated as desired, balanced).
EvalReport run_experiment(const corpus::Corpus& c, const ExperimentConfig& cfg,
                          FinalArtifacts* artifacts = nullptr);

// report.tsv (one line per report), repetitions.tsv (one line per
// repetition), table.txt (human-readable rows: k, C, gamma, Acc ± std, AUC).
void write_report_files(std::span<const EvalReport> reports, const std::filesystem::path& dir);
std::string human_table(std::span<const EvalReport> reports);

}  // namespace ncdsvm::eval
