// cli.hpp — command-line front end: prepare / run / reproduce / score /
// report subcommands, plus the pinned reproduction profiles.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ncdsvm/corpus.hpp"
#include "ncdsvm/svm.hpp"

namespace ncdsvm::cli {

// One published result row: k generators trained with (C, gamma) reached
// the given accuracy / AUC. gamma is 0 for linear-kernel profiles.
struct ReferenceRow {
    std::size_t k = 0;
    double c = 1.0;
    double gamma = 0.0;
    double accuracy = 0.0;
    double auc = 0.0;
};

// A named experiment bundle: dataset format and preparation recipe, the
// reference result table, and the pinned full / desk scale parameters.
// "desk" is a subsampled configuration sized to finish on a laptop;
// "full" matches the reference setup.
struct ReproProfile {
    std::string name;        // url | sms | dga | twitter | movies | synth
    std::string dataset_id;  // corpus cache stem
    corpus::DatasetFormat format = corpus::DatasetFormat::generic_labeled_lines;
    std::string raw_hint;  // conventional location under the data dir, for messages
    svm::KernelKind kernel = svm::KernelKind::rbf;

    std::vector<ReferenceRow> rows;  // ascending k
    std::size_t headline_k = 0;      // row used for the default comparison

    // preparation recipe (applied when building the cache from raw data)
    bool full_dedup = false;  // collapse within-label duplicates too
    bool balance = false;     // downsample the majority class

    // scale parameters; subsample 0 = use the whole prepared corpus
    std::size_t full_subsample_per_class = 0;
    std::size_t full_i_per_class = 0;
    std::size_t full_repetitions = 5;
    std::size_t desk_subsample_per_class = 0;
    std::size_t desk_i_per_class = 0;
    std::size_t desk_repetitions = 3;

    std::uint64_t size_cap = 0;  // generator byte cap; 0 = uncapped

    // synth only: rows hold minimum thresholds (pass when strictly above)
    // instead of reference values compared within a tolerance.
    bool threshold_mode = false;

    const ReferenceRow* row_for_k(std::size_t k) const;
};

const std::vector<ReproProfile>& repro_profiles();
const ReproProfile* find_profile(std::string_view name);

// Absolute-comparison tolerance for reproduce: |achieved - reference| must
// be <= this for both accuracy and AUC.
inline constexpr double kReproTolerance = 0.05;

// Entry point used by both the binary and in-process tests. args excludes
// the program name. Exit codes: 0 success, 1 reproduce comparison failed,
// 2 validation error, 3 runtime failure.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace ncdsvm::cli
