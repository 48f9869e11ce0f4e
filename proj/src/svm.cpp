#include "ncdsvm/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>
#include <utility>

#include "ncdsvm/util.hpp"

namespace ncdsvm::svm {

namespace {

constexpr double kEtaFloor = 1e-12;  // curvature floor for duplicate rows

// Neumaier compensated accumulator. Negating every addend negates the
// result exactly, which the label-symmetry guarantee relies on.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

double dot(std::span<const double> a, std::span<const double> b) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc.add(d * d);
    }
    return acc.value();
}

}  // namespace

std::vector<double> Scaler::apply(std::span<const double> x) const {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) * inv_std[i];
    return out;
}

Scaler fit_scaler(const double* data, std::size_t rows, std::size_t cols) {
    Scaler s;
    s.mean.assign(cols, 0.0);
    s.inv_std.assign(cols, 1.0);
    if (rows == 0) return s;
    for (std::size_t j = 0; j < cols; ++j) {
        CompensatedSum acc;
        for (std::size_t i = 0; i < rows; ++i) acc.add(data[i * cols + j]);
        s.mean[j] = acc.value() / static_cast<double>(rows);
        CompensatedSum var;
        for (std::size_t i = 0; i < rows; ++i) {
            double d = data[i * cols + j] - s.mean[j];
            var.add(d * d);
        }
        double v = var.value() / static_cast<double>(rows);
        s.inv_std[j] = v > 0.0 ? 1.0 / std::sqrt(v) : 1.0;
    }
    return s;
}

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("kernel_eval: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                    ")");
    switch (spec.kind) {
        case KernelKind::linear: return dot(a, b);
        case KernelKind::rbf:
            if (!(spec.gamma > 0.0))
                throw std::invalid_argument("rbf kernel requires gamma > 0");
            return std::exp(-spec.gamma * squared_distance(a, b));
    }
    throw std::invalid_argument("unknown kernel kind");
}

TrainingError::TrainingError(const std::string& what, std::uint64_t it, double g)
    : std::runtime_error(what), iterations(it), gap(g) {}

namespace {

// Lazy kernel-row cache. Small problems end up fully resident; large ones
// evict least-recently-used rows. Cache state never changes row values,
// so the solver's trajectory is independent of the cache size.
class KernelTable {
public:
    KernelTable(const FeatureView& x, const KernelSpec& spec) : x_(x), spec_(spec), n_(x.rows) {
        diag_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) diag_[i] = kernel_eval(spec_, x_.row(i), x_.row(i));
        std::size_t budget_rows = (512ull << 20) / (std::max<std::size_t>(n_, 1) * sizeof(double));
        cap_ = std::max<std::size_t>(16, budget_rows);
    }

    double diag(std::size_t i) const { return diag_[i]; }

    // Reference stays valid until more than cap_-1 other rows are fetched.
    const std::vector<double>& row(std::size_t i) {
        if (auto it = pos_.find(i); it != pos_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->second;
        }
        std::vector<double> r(n_);
        auto xi = x_.row(i);
        for (std::size_t t = 0; t < n_; ++t) r[t] = kernel_eval(spec_, xi, x_.row(t));
        lru_.emplace_front(i, std::move(r));
        pos_[i] = lru_.begin();
        if (lru_.size() > cap_) {
            pos_.erase(lru_.back().first);
            lru_.pop_back();
        }
        return lru_.front().second;
    }

private:
    const FeatureView& x_;
    KernelSpec spec_;
    std::size_t n_;
    std::vector<double> diag_;
    std::size_t cap_;
    std::list<std::pair<std::size_t, std::vector<double>>> lru_;
    std::unordered_map<std::size_t, decltype(lru_)::iterator> pos_;
};

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

SvmModel train(const FeatureView& x, std::span<const int> y, const KernelSpec& kernel,
               const SvmParams& params) {
    const std::size_t n = x.rows;
    if (x.data == nullptr || n == 0) throw std::invalid_argument("train: empty feature matrix");
    if (x.cols == 0) throw std::invalid_argument("train: zero-dimensional features");
    if (y.size() != n)
        throw std::invalid_argument("train: " + std::to_string(y.size()) + " labels for " +
                                    std::to_string(n) + " rows");
    if (!(params.c > 0.0)) throw std::invalid_argument("train: C must be > 0");
    if (!(params.tolerance > 0.0)) throw std::invalid_argument("train: tolerance must be > 0");
    if (kernel.kind == KernelKind::rbf && !(kernel.gamma > 0.0))
        throw std::invalid_argument("train: rbf kernel requires gamma > 0");
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] == 1) has_pos = true;
        else if (y[i] == -1) has_neg = true;
        else throw std::invalid_argument("train: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("train: single-class input");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            if (!std::isfinite(x.data[i * x.cols + j]))
                throw std::invalid_argument("train: non-finite feature at row " +
                                            std::to_string(i) + " col " + std::to_string(j));

    const double C = params.c;
    const double tol = params.tolerance;
    std::vector<double> alpha(n, 0.0);
    std::vector<double> G(n, -1.0);  // gradient of the dual objective
    std::vector<double> ylab(n);
    for (std::size_t i = 0; i < n; ++i) ylab[i] = y[i];
    KernelTable table(x, kernel);

    // Two mirrored views of the second-order working-pair search run every
    // iteration and the better pair wins. A single max-violator view would
    // already converge, but the mirrored pass keeps the whole trajectory
    // invariant under negating all labels, which the label-symmetry
    // guarantee (decision values exactly negated) requires.
    auto movable_up = [&](std::size_t t) {
        return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
    };
    auto movable_low = [&](std::size_t t) {
        return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < C);
    };

    std::uint64_t iters = 0;
    double vmax = 0, vmin = 0;
    std::size_t imax = kNone, imin = kNone;
    while (true) {
        vmax = -std::numeric_limits<double>::infinity();
        vmin = std::numeric_limits<double>::infinity();
        imax = imin = kNone;
        for (std::size_t t = 0; t < n; ++t) {
            double vt = -ylab[t] * G[t];
            if (movable_up(t) && vt > vmax) {
                vmax = vt;
                imax = t;
            }
            if (movable_low(t) && vt < vmin) {
                vmin = vt;
                imin = t;
            }
        }
        double gap = (imax == kNone || imin == kNone) ? 0.0 : vmax - vmin;
        if (gap <= tol) break;
        if (iters >= params.max_passes)
            throw TrainingError("SMO did not converge: gap " + util::format_double(gap) +
                                    " > tolerance " + util::format_double(tol) + " after " +
                                    std::to_string(iters) + " updates (n=" + std::to_string(n) +
                                    ", C=" + util::format_double(C) + ")",
                                iters, gap);

        const std::vector<double>& row_up = table.row(imax);
        double best1 = -1.0;
        std::size_t j1 = kNone;
        for (std::size_t t = 0; t < n; ++t) {
            if (!movable_low(t)) continue;
            double vt = -ylab[t] * G[t];
            if (!(vt < vmax)) continue;
            double b = vmax - vt;
            double a = table.diag(imax) + table.diag(t) - 2.0 * row_up[t];
            if (a < kEtaFloor) a = kEtaFloor;
            double gain = (b * b) / a;
            if (gain > best1) {
                best1 = gain;
                j1 = t;
            }
        }
        const std::vector<double>& row_low = table.row(imin);
        double best2 = -1.0;
        std::size_t j2 = kNone;
        for (std::size_t t = 0; t < n; ++t) {
            if (!movable_up(t)) continue;
            double vt = -ylab[t] * G[t];
            if (!(vt > vmin)) continue;
            double b = vt - vmin;
            double a = table.diag(imin) + table.diag(t) - 2.0 * row_low[t];
            if (a < kEtaFloor) a = kEtaFloor;
            double gain = (b * b) / a;
            if (gain > best2) {
                best2 = gain;
                j2 = t;
            }
        }
        // gap > tol guarantees each view found a partner
        bool use2;
        if (best2 > best1) use2 = true;
        else if (best1 > best2) use2 = false;
        else {
            auto pair1 = std::minmax(imax, j1);
            auto pair2 = std::minmax(imin, j2);
            use2 = pair2 < pair1;
        }
        std::size_t si = use2 ? imin : imax;
        std::size_t sj = use2 ? j2 : j1;
        std::size_t p = std::min(si, sj);
        std::size_t q = std::max(si, sj);

        // Exact two-variable subproblem along alpha_p += y_p t,
        // alpha_q -= y_q t (which keeps sum(alpha_i y_i) fixed).
        double eta = table.diag(p) + table.diag(q) - 2.0 * table.row(p)[q];
        if (eta < kEtaFloor) eta = kEtaFloor;
        double vp = -ylab[p] * G[p];
        double vq = -ylab[q] * G[q];
        double tstar = (vp - vq) / eta;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        if (ylab[p] > 0) {
            lo = std::max(lo, -alpha[p]);
            hi = std::min(hi, C - alpha[p]);
        } else {
            lo = std::max(lo, alpha[p] - C);
            hi = std::min(hi, alpha[p]);
        }
        if (ylab[q] > 0) {
            lo = std::max(lo, alpha[q] - C);
            hi = std::min(hi, alpha[q]);
        } else {
            lo = std::max(lo, -alpha[q]);
            hi = std::min(hi, C - alpha[q]);
        }
        double tc = std::min(std::max(tstar, lo), hi);
        double oldp = alpha[p];
        double oldq = alpha[q];
        alpha[p] = std::min(std::max(oldp + ylab[p] * tc, 0.0), C);
        alpha[q] = std::min(std::max(oldq - ylab[q] * tc, 0.0), C);
        double dp = alpha[p] - oldp;
        double dq = alpha[q] - oldq;
        if (dp != 0.0 || dq != 0.0) {
            const std::vector<double>& rp = table.row(p);
            const std::vector<double>& rq = table.row(q);
            for (std::size_t t = 0; t < n; ++t)
                G[t] += ylab[t] * (ylab[p] * dp * rp[t] + ylab[q] * dq * rq[t]);
        }
        ++iters;
    }

    SvmModel model;
    model.kernel = kernel;
    model.dim = x.cols;
    model.params = params;
    model.train_size = n;
    model.iterations = iters;
    std::uint64_t fp = util::fnv1a64(
        std::string_view(reinterpret_cast<const char*>(x.data), n * x.cols * sizeof(double)));
    model.data_fingerprint = util::fnv1a64(
        std::string_view(reinterpret_cast<const char*>(y.data()), n * sizeof(int)), fp);

    CompensatedSum obj;
    for (std::size_t t = 0; t < n; ++t) obj.add(alpha[t] * (G[t] - 1.0));
    model.dual_objective = 0.5 * obj.value();

    CompensatedSum bias_sum;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0.0 && alpha[t] < C) {
            bias_sum.add(-ylab[t] * G[t]);
            ++free_count;
        }
    }
    if (free_count > 0) model.bias = bias_sum.value() / static_cast<double>(free_count);
    else if (imax == kNone) model.bias = vmin;
    else if (imin == kNone) model.bias = vmax;
    else model.bias = (vmax + vmin) / 2.0;

    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            model.dual_coeffs.push_back(alpha[t] * ylab[t]);
            auto r = x.row(t);
            model.support_vectors.insert(model.support_vectors.end(), r.begin(), r.end());
        }
    }
    if (kernel.kind == KernelKind::linear) {
        model.linear_weights.assign(model.dim, 0.0);
        for (std::size_t s = 0; s < model.n_sv(); ++s)
            for (std::size_t d = 0; d < model.dim; ++d)
                model.linear_weights[d] += model.dual_coeffs[s] *
                                           model.support_vectors[s * model.dim + d];
    }
    return model;
}

double decision_value(const SvmModel& model, std::span<const double> x) {
    if (x.size() != model.dim)
        throw std::invalid_argument("decision_value: input has " + std::to_string(x.size()) +
                                    " features, model expects " + std::to_string(model.dim));
    std::vector<double> scaled;
    std::span<const double> in = x;
    if (model.scaler) {
        scaled = model.scaler->apply(x);
        in = scaled;
    }
    if (model.kernel.kind == KernelKind::linear && !model.linear_weights.empty())
        return dot(model.linear_weights, in) + model.bias;
    CompensatedSum acc;
    for (std::size_t s = 0; s < model.n_sv(); ++s) {
        std::span<const double> sv(model.support_vectors.data() + s * model.dim, model.dim);
        acc.add(model.dual_coeffs[s] * kernel_eval(model.kernel, sv, in));
    }
    return acc.value() + model.bias;
}

int predict(const SvmModel& model, std::span<const double> x) {
    return decision_value(model, x) > 0.0 ? 1 : -1;
}

namespace {

std::string join_doubles(std::span<const double> v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += util::format_double(v[i]);
    }
    return out;
}

std::vector<std::string_view> split_spaces(std::string_view s) {
    std::vector<std::string_view> parts;
    std::size_t p = 0;
    while (p < s.size()) {
        std::size_t sp = s.find(' ', p);
        if (sp == std::string_view::npos) sp = s.size();
        if (sp > p) parts.push_back(s.substr(p, sp - p));
        p = sp + 1;
    }
    return parts;
}

[[noreturn]] void model_error(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("model file " + path.string() + ": " + what);
}

}  // namespace

void save_model(const SvmModel& model, const std::filesystem::path& path) {
    std::string out;
    out += "format_version = 1\n";
    out += std::string("kernel = ") +
           (model.kernel.kind == KernelKind::rbf ? "rbf" : "linear") + "\n";
    out += "gamma = " + util::format_double(model.kernel.gamma) + "\n";
    out += "c = " + util::format_double(model.params.c) + "\n";
    out += "tolerance = " + util::format_double(model.params.tolerance) + "\n";
    out += "max_passes = " + std::to_string(model.params.max_passes) + "\n";
    out += "seed = " + std::to_string(model.params.seed) + "\n";
    out += "bias = " + util::format_double(model.bias) + "\n";
    out += "dim = " + std::to_string(model.dim) + "\n";
    out += "n_sv = " + std::to_string(model.n_sv()) + "\n";
    out += "train_size = " + std::to_string(model.train_size) + "\n";
    out += "iterations = " + std::to_string(model.iterations) + "\n";
    out += "objective = " + util::format_double(model.dual_objective) + "\n";
    out += "fingerprint = " + std::to_string(model.data_fingerprint) + "\n";
    out += std::string("scaler = ") + (model.scaler ? "1" : "0") + "\n";
    if (model.scaler) {
        out += "scaler_mean = " + join_doubles(model.scaler->mean) + "\n";
        out += "scaler_inv_std = " + join_doubles(model.scaler->inv_std) + "\n";
    }
    for (std::size_t s = 0; s < model.n_sv(); ++s) {
        out += "sv = " + util::format_double(model.dual_coeffs[s]);
        for (std::size_t d = 0; d < model.dim; ++d) {
            out += ' ';
            out += util::format_double(model.support_vectors[s * model.dim + d]);
        }
        out += '\n';
    }
    util::atomic_write_file(path, out);
}

SvmModel load_model(const std::filesystem::path& path) {
    std::string content;
    try {
        content = util::read_file(path);
    } catch (const std::exception& e) {
        throw std::runtime_error(e.what());
    }
    std::unordered_map<std::string, std::string> kv;
    std::vector<std::string> sv_lines;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) nl = content.size();
        std::string_view line(content.data() + pos, nl - pos);
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::size_t eq = line.find(" = ");
        if (eq == std::string_view::npos) model_error(path, "malformed line: no ' = '");
        std::string key(line.substr(0, eq));
        std::string value(line.substr(eq + 3));
        if (key == "sv") sv_lines.push_back(std::move(value));
        else kv[key] = std::move(value);
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) model_error(path, "missing '" + key + "'");
        return it->second;
    };
    auto need_u64 = [&](const std::string& key) {
        auto v = util::parse_u64(need(key));
        if (!v) model_error(path, "'" + key + "' is not an integer");
        return *v;
    };
    auto need_double = [&](const std::string& key) {
        auto v = util::parse_double(need(key));
        if (!v) model_error(path, "'" + key + "' is not a number");
        return *v;
    };
    if (need_u64("format_version") != 1) model_error(path, "unsupported format_version");
    SvmModel model;
    const std::string& kind = need("kernel");
    if (kind == "rbf") model.kernel.kind = KernelKind::rbf;
    else if (kind == "linear") model.kernel.kind = KernelKind::linear;
    else model_error(path, "unknown kernel '" + kind + "'");
    model.kernel.gamma = need_double("gamma");
    model.params.c = need_double("c");
    model.params.tolerance = need_double("tolerance");
    model.params.max_passes = need_u64("max_passes");
    model.params.seed = need_u64("seed");
    model.bias = need_double("bias");
    model.dim = need_u64("dim");
    std::size_t n_sv = need_u64("n_sv");
    model.train_size = need_u64("train_size");
    model.iterations = need_u64("iterations");
    model.dual_objective = need_double("objective");
    model.data_fingerprint = need_u64("fingerprint");
    if (need_u64("scaler") == 1) {
        Scaler s;
        for (auto field : {&Scaler::mean, &Scaler::inv_std}) {
            const std::string& key = field == &Scaler::mean ? "scaler_mean" : "scaler_inv_std";
            for (std::string_view part : split_spaces(need(key))) {
                auto v = util::parse_double(part);
                if (!v) model_error(path, "bad number in '" + key + "'");
                (s.*field).push_back(*v);
            }
            if ((s.*field).size() != model.dim)
                model_error(path, "'" + key + "' length does not match dim");
        }
        model.scaler = std::move(s);
    }
    if (sv_lines.size() != n_sv)
        model_error(path, std::to_string(sv_lines.size()) + " sv lines, header says " +
                              std::to_string(n_sv));
    model.support_vectors.reserve(n_sv * model.dim);
    for (const std::string& line : sv_lines) {
        auto parts = split_spaces(line);
        if (parts.size() != model.dim + 1)
            model_error(path, "sv line has " + std::to_string(parts.size()) +
                                  " fields, expected " + std::to_string(model.dim + 1));
        for (std::size_t i = 0; i < parts.size(); ++i) {
            auto v = util::parse_double(parts[i]);
            if (!v) model_error(path, "bad number in sv line");
            if (i == 0) model.dual_coeffs.push_back(*v);
            else model.support_vectors.push_back(*v);
        }
    }
    if (model.kernel.kind == KernelKind::linear) {
        model.linear_weights.assign(model.dim, 0.0);
        for (std::size_t s = 0; s < model.n_sv(); ++s)
            for (std::size_t d = 0; d < model.dim; ++d)
                model.linear_weights[d] += model.dual_coeffs[s] *
                                           model.support_vectors[s * model.dim + d];
    }
    return model;
}

}  // namespace ncdsvm::svm
