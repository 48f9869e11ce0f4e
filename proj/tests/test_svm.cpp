#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ncdsvm/svm.hpp"
#include "ncdsvm/util.hpp"
#include "oracles.hpp"

using namespace ncdsvm;
namespace fs = std::filesystem;

namespace {

struct Problem {
    std::vector<double> x;  // row-major
    std::vector<int> y;
    std::size_t cols = 0;
    svm::FeatureView view() const { return {x.data(), y.size(), cols}; }
};

// Two seeded Gaussian-ish blobs, one per class, mildly overlapping.
Problem blobs(std::size_t per_class, std::size_t cols, std::uint64_t seed, double spread = 1.0) {
    util::Rng rng(seed);
    auto noise = [&] { return (rng.unit() + rng.unit() + rng.unit()) - 1.5; };  // ~N(0, 0.5)
    Problem p;
    p.cols = cols;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t j = 0; j < cols; ++j) p.x.push_back(1.0 + spread * noise());
        p.y.push_back(1);
        for (std::size_t j = 0; j < cols; ++j) p.x.push_back(-1.0 + spread * noise());
        p.y.push_back(-1);
    }
    return p;
}

// Reconstructs alpha per training row by matching rows against the stored
// support vectors (rows assumed unique).
std::vector<double> alphas_by_row(const Problem& p, const svm::SvmModel& m) {
    std::vector<double> alpha(p.y.size(), 0.0);
    for (std::size_t s = 0; s < m.n_sv(); ++s) {
        std::span<const double> sv(m.support_vectors.data() + s * m.dim, m.dim);
        for (std::size_t i = 0; i < p.y.size(); ++i) {
            if (std::equal(sv.begin(), sv.end(), p.x.begin() + i * p.cols,
                           p.x.begin() + (i + 1) * p.cols)) {
                alpha[i] = m.dual_coeffs[s] * p.y[i];  // alpha = (alpha*y)*y
                break;
            }
        }
    }
    return alpha;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("ncdsvm_svm_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("kernel_eval computes dot products and gaussian similarities") {
    std::vector<double> a{1.0, 2.0, -3.0};
    std::vector<double> b{0.5, -1.0, 2.0};
    svm::KernelSpec lin{svm::KernelKind::linear, 1.0};
    CHECK(svm::kernel_eval(lin, a, b) == doctest::Approx(0.5 - 2.0 - 6.0));
    svm::KernelSpec rbf{svm::KernelKind::rbf, 0.25};
    double d2 = 0.25 + 9.0 + 25.0;
    CHECK(svm::kernel_eval(rbf, a, b) == doctest::Approx(std::exp(-0.25 * d2)));
    CHECK(svm::kernel_eval(rbf, a, a) == 1.0);
    std::vector<double> short_vec{1.0};
    CHECK_THROWS_AS((void)svm::kernel_eval(lin, a, short_vec), std::invalid_argument);
}

TEST_CASE("two separated points give the textbook maximum-margin line") {
    // x1=(0,0) -> +1, x2=(2,0) -> -1. Unconstrained alpha* = 2/|x1-x2|^2
    // = 0.5, w = (-1,0), bias = 1, so f(x) = 1 - x0.
    Problem p;
    p.cols = 2;
    p.x = {0, 0, 2, 0};
    p.y = {1, -1};
    svm::SvmParams params;
    params.c = 10;
    params.tolerance = 1e-9;
    svm::SvmModel m = svm::train(p.view(), p.y, {svm::KernelKind::linear, 1.0}, params);
    REQUIRE(m.n_sv() == 2);
    CHECK(m.dual_coeffs[0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(m.dual_coeffs[1] == doctest::Approx(-0.5).epsilon(1e-7));
    CHECK(m.bias == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(svm::decision_value(m, std::vector<double>{0, 0}) == doctest::Approx(1.0));
    CHECK(svm::decision_value(m, std::vector<double>{2, 0}) == doctest::Approx(-1.0));
    CHECK(svm::decision_value(m, std::vector<double>{1, 0}) == doctest::Approx(0.0));
    CHECK(m.linear_weights[0] == doctest::Approx(-1.0));
    CHECK(m.linear_weights[1] == doctest::Approx(0.0));
    CHECK(m.dual_objective == doctest::Approx(-0.5).epsilon(1e-7));  // 1/2 w.w - sum(a) = 2*0.5... min form
}

TEST_CASE("rbf machine separates xor, which no linear one can") {
    Problem p;
    p.cols = 2;
    p.x = {0, 0, 1, 1, 0, 1, 1, 0};
    p.y = {1, 1, -1, -1};
    svm::SvmParams params;
    params.c = 100;
    params.tolerance = 1e-6;
    svm::SvmModel m = svm::train(p.view(), p.y, {svm::KernelKind::rbf, 2.0}, params);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> xi{p.x[2 * i], p.x[2 * i + 1]};
        CHECK(svm::predict(m, xi) == p.y[i]);
    }
}

TEST_CASE("trained model satisfies the KKT optimality conditions") {
    svm::SvmParams params;
    params.tolerance = 1e-4;
    const double eps = 2 * params.tolerance;
    for (auto [kind, gamma, c, seed] :
         {std::tuple{svm::KernelKind::rbf, 0.5, 1.0, 31ull},
          std::tuple{svm::KernelKind::rbf, 2.0, 10.0, 32ull},
          std::tuple{svm::KernelKind::linear, 1.0, 0.5, 33ull}}) {
        Problem p = blobs(15, 3, seed, 1.5);
        params.c = c;
        svm::SvmModel m = svm::train(p.view(), p.y, {kind, gamma}, params);
        std::vector<double> alpha = alphas_by_row(p, m);
        for (std::size_t i = 0; i < p.y.size(); ++i) {
            std::vector<double> xi(p.x.begin() + i * p.cols, p.x.begin() + (i + 1) * p.cols);
            double margin = p.y[i] * svm::decision_value(m, xi);
            CAPTURE(i);
            CAPTURE(alpha[i]);
            CAPTURE(margin);
            if (alpha[i] <= 0.0) CHECK(margin >= 1.0 - eps);
            else if (alpha[i] >= c) CHECK(margin <= 1.0 + eps);
            else CHECK(std::abs(margin - 1.0) <= eps);
            // Box constraint holds exactly, not approximately.
            CHECK(alpha[i] >= 0.0);
            CHECK(alpha[i] <= c);
        }
        // Equality constraint sum(alpha_i y_i) = sum(dual_coeffs) ~ 0.
        double s = 0;
        for (double dc : m.dual_coeffs) s += dc;
        CHECK(std::abs(s) < 1e-9 * c * static_cast<double>(p.y.size()));
    }
}

TEST_CASE("solver reaches the reference optimum on small dense problems") {
    for (auto [kind, gamma, c, seed] :
         {std::tuple{svm::KernelKind::rbf, 1.0, 1.0, 41ull},
          std::tuple{svm::KernelKind::rbf, 0.25, 10.0, 42ull},
          std::tuple{svm::KernelKind::rbf, 4.0, 0.1, 43ull},
          std::tuple{svm::KernelKind::linear, 1.0, 1.0, 44ull},
          std::tuple{svm::KernelKind::linear, 1.0, 0.3, 45ull}}) {
        Problem p = blobs(10, 3, seed, 2.0);  // n = 20, overlapping enough to be non-trivial
        svm::SvmParams params;
        params.c = c;
        params.tolerance = 1e-6;
        svm::KernelSpec spec{kind, gamma};
        svm::SvmModel m = svm::train(p.view(), p.y, spec, params);
        oracles::QpOracle oracle(p.view(), p.y, spec, c);
        double reference = oracle.solve();
        CAPTURE(c);
        CAPTURE(gamma);
        CHECK(m.dual_objective == doctest::Approx(reference).epsilon(1e-4));
        // The solver can never beat the true optimum by more than tolerance noise.
        CHECK(m.dual_objective >= reference - 1e-6 * (1.0 + std::abs(reference)));
    }
}

TEST_CASE("negating every label negates every decision value exactly") {
    Problem p = blobs(12, 4, 77, 2.5);
    std::vector<int> flipped(p.y.size());
    for (std::size_t i = 0; i < p.y.size(); ++i) flipped[i] = -p.y[i];
    for (svm::KernelSpec spec : {svm::KernelSpec{svm::KernelKind::rbf, 0.7},
                                 svm::KernelSpec{svm::KernelKind::linear, 1.0}}) {
        svm::SvmParams params;
        params.c = 2.0;
        svm::SvmModel m1 = svm::train(p.view(), p.y, spec, params);
        svm::SvmModel m2 = svm::train(p.view(), flipped, spec, params);
        CHECK(m1.bias == -m2.bias);  // bit-exact, not approximate
        util::Rng rng(5);
        for (int probe = 0; probe < 20; ++probe) {
            std::vector<double> x(4);
            for (double& v : x) v = 4.0 * rng.unit() - 2.0;
            CHECK(svm::decision_value(m1, x) == -svm::decision_value(m2, x));
        }
    }
}

TEST_CASE("training is deterministic in every stored byte") {
    Problem p = blobs(10, 3, 9);
    svm::SvmParams params;
    svm::KernelSpec spec{svm::KernelKind::rbf, 1.0};
    svm::SvmModel a = svm::train(p.view(), p.y, spec, params);
    svm::SvmModel b = svm::train(p.view(), p.y, spec, params);
    CHECK(a.dual_coeffs == b.dual_coeffs);
    CHECK(a.support_vectors == b.support_vectors);
    CHECK(a.bias == b.bias);
    CHECK(a.iterations == b.iterations);
    CHECK(a.dual_objective == b.dual_objective);
    CHECK(a.data_fingerprint == b.data_fingerprint);
    // The fingerprint reacts to any feature change.
    Problem q = p;
    q.x[0] += 1e-9;
    svm::SvmModel c = svm::train(q.view(), q.y, spec, params);
    CHECK(c.data_fingerprint != a.data_fingerprint);
}

TEST_CASE("duplicated rows and tight budgets are handled predictably") {
    Problem p = blobs(6, 2, 3);
    Problem doubled = p;
    doubled.x.insert(doubled.x.end(), p.x.begin(), p.x.end());
    doubled.y.insert(doubled.y.end(), p.y.begin(), p.y.end());
    svm::SvmParams params;
    svm::SvmModel m = svm::train(doubled.view(), doubled.y, {svm::KernelKind::rbf, 1.0}, params);
    CHECK(m.train_size == 24);
    CHECK(m.n_sv() >= 2);

    params.max_passes = 1;  // no chance to converge on overlapping blobs
    Problem hard = blobs(15, 2, 8, 3.0);
    try {
        (void)svm::train(hard.view(), hard.y, {svm::KernelKind::rbf, 1.0}, params);
        CHECK(false);
    } catch (const svm::TrainingError& e) {
        CHECK(e.iterations == 1);
        CHECK(e.gap > 0.0);
        CHECK(std::string(e.what()).find("did not converge") != std::string::npos);
    }
}

TEST_CASE("malformed training input is rejected up front") {
    Problem p = blobs(4, 2, 1);
    svm::SvmParams params;
    svm::KernelSpec rbf{svm::KernelKind::rbf, 1.0};
    CHECK_THROWS_AS((void)svm::train({nullptr, 0, 2}, p.y, rbf, params), std::invalid_argument);
    std::vector<int> bad_labels(p.y.size(), 1);
    CHECK_THROWS_AS((void)svm::train(p.view(), bad_labels, rbf, params), std::invalid_argument);
    bad_labels[0] = 2;
    CHECK_THROWS_AS((void)svm::train(p.view(), bad_labels, rbf, params), std::invalid_argument);
    std::vector<int> short_labels(p.y.begin(), p.y.end() - 1);
    CHECK_THROWS_AS((void)svm::train(p.view(), short_labels, rbf, params), std::invalid_argument);
    svm::SvmParams bad = params;
    bad.c = 0;
    CHECK_THROWS_AS((void)svm::train(p.view(), p.y, rbf, bad), std::invalid_argument);
    CHECK_THROWS_AS((void)svm::train(p.view(), p.y, {svm::KernelKind::rbf, 0.0}, params),
                    std::invalid_argument);
    Problem nan_prob = p;
    nan_prob.x[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)svm::train(nan_prob.view(), nan_prob.y, rbf, params),
                    std::invalid_argument);
}

TEST_CASE("scaler fits per-feature mean and population deviation") {
    // Column 0: {1,3} -> mean 2, var 1. Column 1: constant -> inv_std 1.
    std::vector<double> data{1, 5, 3, 5};
    svm::Scaler s = svm::fit_scaler(data.data(), 2, 2);
    CHECK(s.mean[0] == doctest::Approx(2.0));
    CHECK(s.inv_std[0] == doctest::Approx(1.0));
    CHECK(s.mean[1] == doctest::Approx(5.0));
    CHECK(s.inv_std[1] == 1.0);
    std::vector<double> z = s.apply(std::vector<double>{4.0, 5.0});
    CHECK(z[0] == doctest::Approx(2.0));
    CHECK(z[1] == doctest::Approx(0.0));

    // A model with an attached scaler standardizes raw inputs itself.
    Problem p = blobs(8, 2, 12);
    svm::Scaler fitted = svm::fit_scaler(p.x.data(), p.y.size(), p.cols);
    std::vector<double> scaled = p.x;
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        auto row = fitted.apply(std::span<const double>(p.x).subspan(i * p.cols, p.cols));
        std::copy(row.begin(), row.end(), scaled.begin() + i * p.cols);
    }
    svm::SvmParams params;
    svm::KernelSpec spec{svm::KernelKind::rbf, 1.0};
    svm::SvmModel on_scaled =
        svm::train({scaled.data(), p.y.size(), p.cols}, p.y, spec, params);
    svm::SvmModel carrying = on_scaled;
    carrying.scaler = fitted;
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        std::vector<double> raw(p.x.begin() + i * p.cols, p.x.begin() + (i + 1) * p.cols);
        std::vector<double> pre(scaled.begin() + i * p.cols, scaled.begin() + (i + 1) * p.cols);
        CHECK(svm::decision_value(carrying, raw) == svm::decision_value(on_scaled, pre));
    }
}

TEST_CASE("predict maps the zero boundary to class B") {
    svm::SvmModel m;
    m.kernel = {svm::KernelKind::linear, 1.0};
    m.dim = 1;
    m.linear_weights = {1.0};
    m.bias = 0.0;
    CHECK(svm::predict(m, std::vector<double>{0.5}) == 1);
    CHECK(svm::predict(m, std::vector<double>{-0.5}) == -1);
    CHECK(svm::predict(m, std::vector<double>{0.0}) == -1);  // exact zero -> -1
    CHECK_THROWS_AS((void)svm::decision_value(m, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
}

TEST_CASE("model files round-trip to bit-identical decision values") {
    TempDir t("model");
    Problem p = blobs(10, 3, 21, 2.0);
    svm::SvmParams params;
    params.c = 3.5;
    params.tolerance = 1e-5;
    svm::SvmModel m = svm::train(p.view(), p.y, {svm::KernelKind::rbf, 0.8}, params);
    m.scaler = svm::fit_scaler(p.x.data(), p.y.size(), p.cols);
    fs::path file = t.path / "model.txt";
    svm::save_model(m, file);
    svm::SvmModel back = svm::load_model(file);
    CHECK(back.kernel == m.kernel);
    CHECK(back.dim == m.dim);
    CHECK(back.support_vectors == m.support_vectors);
    CHECK(back.dual_coeffs == m.dual_coeffs);
    CHECK(back.bias == m.bias);
    CHECK(back.params.c == m.params.c);
    CHECK(back.params.tolerance == m.params.tolerance);
    CHECK(back.data_fingerprint == m.data_fingerprint);
    CHECK(back.train_size == m.train_size);
    CHECK(back.iterations == m.iterations);
    CHECK(back.dual_objective == m.dual_objective);
    REQUIRE(back.scaler.has_value());
    CHECK(back.scaler->mean == m.scaler->mean);
    CHECK(back.scaler->inv_std == m.scaler->inv_std);
    util::Rng rng(2);
    for (int probe = 0; probe < 25; ++probe) {
        std::vector<double> x(p.cols);
        for (double& v : x) v = 6.0 * rng.unit() - 3.0;
        CHECK(svm::decision_value(back, x) == svm::decision_value(m, x));
    }

    // Linear models keep their folded weights through the file.
    svm::SvmModel lin = svm::train(p.view(), p.y, {svm::KernelKind::linear, 1.0}, params);
    svm::save_model(lin, t.path / "lin.txt");
    svm::SvmModel lin_back = svm::load_model(t.path / "lin.txt");
    CHECK(lin_back.linear_weights == lin.linear_weights);
    std::vector<double> probe{0.3, -0.7, 1.1};
    CHECK(svm::decision_value(lin_back, probe) == svm::decision_value(lin, probe));

    // Corruption fails loudly.
    std::string text = util::read_file(file);
    util::atomic_write_file(t.path / "trunc.txt", text.substr(0, text.size() / 2));
    CHECK_THROWS_AS((void)svm::load_model(t.path / "trunc.txt"), std::runtime_error);
    CHECK_THROWS_AS((void)svm::load_model(t.path / "missing.txt"), std::runtime_error);
}
