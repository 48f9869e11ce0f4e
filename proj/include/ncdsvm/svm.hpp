// svm.hpp — binary soft-margin SVM (linear / RBF) trained by sequential
// minimal optimization on the dual. Deterministic: identical inputs give
// bit-identical models, and negating every label negates every decision
// value exactly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncdsvm::svm {

enum class KernelKind { linear, rbf };

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double gamma = 1.0;  // rbf only; must be > 0

    bool operator==(const KernelSpec&) const = default;
};

struct SvmParams {
    double c = 1.0;
    double tolerance = 1e-3;  // KKT violation tolerance (stopping gap)
    std::uint64_t max_passes = 10'000'000;  // pair updates before giving up
    // Retained for interface stability; the solver's pair selection is
    // fully deterministic, so the seed does not influence the result.
    std::uint64_t seed = 0;
};

// Per-feature z-scoring fit on training data; applied to raw inputs at
// prediction time when attached to a model.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> inv_std;  // 1/std, with 1.0 for zero-variance features

    std::vector<double> apply(std::span<const double> x) const;
};
Scaler fit_scaler(const double* data, std::size_t rows, std::size_t cols);

// Non-owning row-major view of a feature matrix.
struct FeatureView {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const double> row(std::size_t i) const { return {data + i * cols, cols}; }
};

struct SvmModel {
    KernelSpec kernel;
    std::size_t dim = 0;
    std::vector<double> support_vectors;  // n_sv × dim, row-major; only alpha > 0 rows
    std::vector<double> dual_coeffs;      // alpha_i * y_i per stored vector
    double bias = 0.0;

    // training metadata
    SvmParams params;
    std::uint64_t data_fingerprint = 0;
    std::size_t train_size = 0;
    std::uint64_t iterations = 0;
    double dual_objective = 0.0;

    std::optional<Scaler> scaler;        // applied to inputs before the kernel
    std::vector<double> linear_weights;  // folded w for linear kernels (derived)

    std::size_t n_sv() const { return dual_coeffs.size(); }
};

struct TrainingError : std::runtime_error {
    TrainingError(const std::string& what, std::uint64_t iterations, double gap);
    std::uint64_t iterations;
    double gap;
};

// linear: dot(a,b); rbf: exp(-gamma * |a-b|^2). Compensated summation so
// the value is independent of how callers chunk their work.
double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

// Trains on rows of x with labels y in {-1,+1} (class A = +1). Throws
// std::invalid_argument for malformed input and TrainingError when the
// stopping gap is not reached within params.max_passes updates.
SvmModel train(const FeatureView& x, std::span<const int> y, const KernelSpec& kernel,
               const SvmParams& params);

// Signed margin. If the model carries a scaler it is applied to x first,
// so callers always pass raw feature rows.
double decision_value(const SvmModel& model, std::span<const double> x);

// +1 for decision_value > 0, else -1 (an exact 0 maps to -1, class B).
int predict(const SvmModel& model, std::span<const double> x);

// Versioned line-oriented text format; doubles use shortest round-trip
// formatting so save/load is exact.
void save_model(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_model(const std::filesystem::path& path);

}  // namespace ncdsvm::svm
