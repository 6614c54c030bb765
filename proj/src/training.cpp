#include "ltpfleo/training.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ltpfleo/rng.hpp"

namespace ltp {
namespace {

// Layout helpers for the softmax and MLP parameter vectors.
struct MlpView {
    std::size_t D, H, C;
    std::size_t w1() const { return 0; }
    std::size_t b1() const { return H * D; }
    std::size_t w2() const { return H * D + H; }
    std::size_t b2() const { return H * D + H + C * H; }
};

void softmax_inplace(std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (auto& v : z) {
        v = std::exp(v - m);
        s += v;
    }
    for (auto& v : z) v /= s;
}

double log_sum_exp(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

std::vector<double> linear_scores(const LossSpec& spec, std::span<const double> w, std::span<const double> x) {
    const std::size_t D = spec.num_features, C = spec.num_classes;
    std::vector<double> z(C);
    for (std::size_t c = 0; c < C; ++c) {
        const double* wc = w.data() + c * (D + 1);
        double s = wc[D];
        for (std::size_t i = 0; i < D; ++i) s += wc[i] * x[i];
        z[c] = s;
    }
    return z;
}

void mlp_forward(const LossSpec& spec, std::span<const double> w, std::span<const double> x,
                 std::vector<double>& h, std::vector<double>& z) {
    const MlpView v{spec.num_features, spec.hidden_units, spec.num_classes};
    h.assign(v.H, 0.0);
    for (std::size_t j = 0; j < v.H; ++j) {
        double s = w[v.b1() + j];
        const double* row = w.data() + v.w1() + j * v.D;
        for (std::size_t i = 0; i < v.D; ++i) s += row[i] * x[i];
        h[j] = std::tanh(s);
    }
    z.assign(v.C, 0.0);
    for (std::size_t c = 0; c < v.C; ++c) {
        double s = w[v.b2() + c];
        const double* row = w.data() + v.w2() + c * v.H;
        for (std::size_t j = 0; j < v.H; ++j) s += row[j] * h[j];
        z[c] = s;
    }
}

std::size_t label_index(const LossSpec& spec, double y) {
    const auto c = static_cast<long long>(std::llround(y));
    if (c < 0 || static_cast<std::size_t>(c) >= spec.num_classes || static_cast<double>(c) != y)
        throw std::invalid_argument(fmt::format("label {} is not a class index in [0, {})", y, spec.num_classes));
    return static_cast<std::size_t>(c);
}

// Adds the per-sample loss gradient into g.
void add_sample_gradient(const LossSpec& spec, std::span<const double> w, std::span<const double> x, double y,
                         std::span<double> g) {
    switch (spec.kind) {
        case LossKind::quadratic: {
            double r = -y;
            for (std::size_t i = 0; i < x.size(); ++i) r += w[i] * x[i];
            for (std::size_t i = 0; i < x.size(); ++i) g[i] += r * x[i];
            return;
        }
        case LossKind::logistic_l2: {
            const std::size_t D = spec.num_features;
            auto p = linear_scores(spec, w, x);
            softmax_inplace(p);
            p[label_index(spec, y)] -= 1.0;
            for (std::size_t c = 0; c < spec.num_classes; ++c) {
                double* gc = g.data() + c * (D + 1);
                for (std::size_t i = 0; i < D; ++i) gc[i] += p[c] * x[i];
                gc[D] += p[c];
            }
            return;
        }
        case LossKind::mlp_small: {
            const MlpView v{spec.num_features, spec.hidden_units, spec.num_classes};
            std::vector<double> h, p;
            mlp_forward(spec, w, x, h, p);
            softmax_inplace(p);
            p[label_index(spec, y)] -= 1.0;
            std::vector<double> dh(v.H, 0.0);
            for (std::size_t c = 0; c < v.C; ++c) {
                g[v.b2() + c] += p[c];
                const double* w2row = w.data() + v.w2() + c * v.H;
                double* g2row = g.data() + v.w2() + c * v.H;
                for (std::size_t j = 0; j < v.H; ++j) {
                    g2row[j] += p[c] * h[j];
                    dh[j] += w2row[j] * p[c];
                }
            }
            for (std::size_t j = 0; j < v.H; ++j) {
                const double dpre = dh[j] * (1.0 - h[j] * h[j]);
                g[v.b1() + j] += dpre;
                double* g1row = g.data() + v.w1() + j * v.D;
                for (std::size_t i = 0; i < v.D; ++i) g1row[i] += dpre * x[i];
            }
            return;
        }
    }
}

void check_dims(const LossSpec& spec, std::span<const double> w, const Dataset& data) {
    if (w.size() != spec.dimension())
        throw std::invalid_argument(
            fmt::format("model dimension {} does not match loss dimension {}", w.size(), spec.dimension()));
    if (data.num_features != spec.num_features)
        throw std::invalid_argument(fmt::format("dataset has {} features, loss expects {}", data.num_features,
                                                spec.num_features));
}

}  // namespace

void Dataset::push_back(std::span<const double> x, double y) {
    if (x.size() != num_features) throw std::invalid_argument("feature dimension mismatch");
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(y);
}

void Dataset::validate() const {
    if (features.size() != labels.size() * num_features)
        throw std::invalid_argument("dataset feature storage does not match sample count");
}

Dataset concatenate(const std::vector<Dataset>& parts) {
    Dataset out;
    if (parts.empty()) return out;
    out.num_features = parts.front().num_features;
    for (const auto& p : parts) {
        if (p.num_features != out.num_features) throw std::invalid_argument("feature dimension mismatch");
        out.features.insert(out.features.end(), p.features.begin(), p.features.end());
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

const char* to_string(LossKind kind) {
    switch (kind) {
        case LossKind::quadratic: return "quadratic";
        case LossKind::logistic_l2: return "logistic-l2";
        case LossKind::mlp_small: return "mlp-small";
    }
    return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "quadratic") return LossKind::quadratic;
    if (s == "logistic-l2") return LossKind::logistic_l2;
    if (s == "mlp-small") return LossKind::mlp_small;
    throw std::invalid_argument(fmt::format("unknown loss kind '{}' (quadratic | logistic-l2 | mlp-small)", s));
}

std::size_t LossSpec::dimension() const {
    switch (kind) {
        case LossKind::quadratic: return num_features;
        case LossKind::logistic_l2: return num_classes * (num_features + 1);
        case LossKind::mlp_small: return hidden_units * num_features + hidden_units + num_classes * hidden_units + num_classes;
    }
    return 0;
}

void LossSpec::validate() const {
    if (num_features < 1) throw std::invalid_argument("loss.num_features must be >= 1");
    if (regularization < 0.0) throw std::invalid_argument("loss.regularization must be >= 0");
    if (clip_radius && !(*clip_radius > 0.0)) throw std::invalid_argument("loss.clip_radius must be > 0");
    if (kind != LossKind::quadratic && num_classes < 2)
        throw std::invalid_argument("classifiers need loss.num_classes >= 2");
    if (kind == LossKind::mlp_small && (hidden_units < 1 || hidden_units > 64))
        throw std::invalid_argument("mlp-small hidden_units must lie in [1, 64]");
}

double sample_loss(const LossSpec& spec, std::span<const double> w, std::span<const double> x, double y) {
    switch (spec.kind) {
        case LossKind::quadratic: {
            double r = -y;
            for (std::size_t i = 0; i < x.size(); ++i) r += w[i] * x[i];
            return 0.5 * r * r;
        }
        case LossKind::logistic_l2: {
            const auto z = linear_scores(spec, w, x);
            return log_sum_exp(z) - z[label_index(spec, y)];
        }
        case LossKind::mlp_small: {
            std::vector<double> h, z;
            mlp_forward(spec, w, x, h, z);
            return log_sum_exp(z) - z[label_index(spec, y)];
        }
    }
    return 0.0;
}

double dataset_loss(const LossSpec& spec, std::span<const double> w, const Dataset& data) {
    check_dims(spec, w, data);
    if (data.size() == 0) throw std::invalid_argument("empty dataset");
    double s = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) s += sample_loss(spec, w, data.row(j), data.labels[j]);
    return s / static_cast<double>(data.size()) + 0.5 * spec.regularization * norm2(w);
}

Params batch_gradient(const LossSpec& spec, std::span<const double> w, const Dataset& data,
                      std::span<const std::size_t> indices) {
    check_dims(spec, w, data);
    if (indices.empty()) throw std::invalid_argument("empty mini-batch");
    Params g(w.size(), 0.0);
    for (auto j : indices) add_sample_gradient(spec, w, data.row(j), data.labels[j], g);
    const double inv = 1.0 / static_cast<double>(indices.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * inv + spec.regularization * w[i];
    return g;
}

Params full_gradient(const LossSpec& spec, std::span<const double> w, const Dataset& data) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return batch_gradient(spec, w, data, all);
}

std::size_t predict_class(const LossSpec& spec, std::span<const double> w, std::span<const double> x) {
    std::vector<double> z;
    if (spec.kind == LossKind::logistic_l2) {
        z = linear_scores(spec, w, x);
    } else if (spec.kind == LossKind::mlp_small) {
        std::vector<double> h;
        mlp_forward(spec, w, x, h, z);
    } else {
        throw std::invalid_argument("quadratic loss has no class prediction");
    }
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double accuracy(const LossSpec& spec, std::span<const double> w, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < data.size(); ++j)
        if (predict_class(spec, w, data.row(j)) == label_index(spec, data.labels[j])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

double global_loss(const LossSpec& spec, std::span<const double> w, const std::vector<Dataset>& datasets) {
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& d : datasets) {
        weighted += static_cast<double>(d.size()) * dataset_loss(spec, w, d);
        total += d.size();
    }
    if (total == 0) throw std::invalid_argument("no data");
    return weighted / static_cast<double>(total);
}

Params init_model(const LossSpec& spec, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Params w(spec.dimension());
    for (auto& v : w) v = n(rng);
    if (spec.clip_radius) project_to_ball(w, *spec.clip_radius);
    return w;
}

double LearningRate::at(std::size_t global_step) const {
    if (kind == Kind::constant) return c;
    return c / (offset + static_cast<double>(global_step));
}

void project_to_ball(std::span<double> w, double radius) {
    const double n = norm(w);
    if (n > radius) {
        const double s = radius / n;
        for (auto& v : w) v *= s;
    }
}

Params local_sgd(std::span<const double> model, const Dataset& data, const LossSpec& spec, const SgdConfig& cfg) {
    check_dims(spec, model, data);
    if (data.size() == 0) throw std::invalid_argument("local_sgd on an empty dataset");
    if (cfg.steps < 1) throw std::invalid_argument("local steps I must be >= 1");
    if (cfg.mini_batch < 1) throw std::invalid_argument("mini_batch must be >= 1");

    Params w(model.begin(), model.end());
    std::mt19937_64 rng(cfg.seed);
    const std::size_t n = data.size();
    const std::size_t b = std::min(cfg.mini_batch, n);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});

    for (std::size_t i = 0; i < cfg.steps; ++i) {
        // Partial Fisher-Yates: the first b entries of pool become the batch.
        if (b < n) {
            for (std::size_t j = 0; j < b; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, n - 1);
                std::swap(pool[j], pool[pick(rng)]);
            }
        }
        const auto g = batch_gradient(spec, w, data, std::span<const std::size_t>(pool.data(), b));
        for (std::size_t q = 0; q < g.size(); ++q) {
            if (!std::isfinite(g[q]))
                throw std::runtime_error(fmt::format(
                    "non-finite gradient at local step {} (global step {}), coordinate {}, |w| = {}, satellite {}",
                    i + 1, cfg.first_step + i, q, norm(w), data.owner ? fmt::to_string(*data.owner) : "-"));
        }
        const double eta = cfg.lr.at(cfg.first_step + i);
        axpy(-eta, g, w);
        if (spec.clip_radius) project_to_ball(w, *spec.clip_radius);
    }
    return w;
}

std::vector<std::size_t> orbit_classes(std::size_t orbit, std::size_t num_classes) {
    return {(2 * orbit) % num_classes, (2 * orbit + 1) % num_classes};
}

std::vector<Dataset> synthesize_data(const SynthSpec& spec) {
    const std::size_t K = spec.per_sat_sizes.size();
    const std::size_t D = spec.num_features;
    if (K == 0) throw std::invalid_argument("synthesize_data needs at least one satellite");
    if (D < 1) throw std::invalid_argument("num_features must be >= 1");
    for (auto s : spec.per_sat_sizes)
        if (s < 1) throw std::invalid_argument("every satellite needs at least one sample");

    std::vector<Dataset> out(K);
    if (spec.kind == DataKind::blobs) {
        const std::size_t C = spec.num_classes;
        if (C < 2) throw std::invalid_argument("blobs need num_classes >= 2");
        if (D < C) throw std::invalid_argument("blobs need num_features >= num_classes (simplex centers)");
        if (spec.split == SplitKind::non_iid_2class && spec.orbit_of_sat.size() != K)
            throw std::invalid_argument("non-iid-2class split needs the orbit of every satellite");
        // Centers e_c / sqrt(2): every pair of class centers is exactly 1 apart.
        const double center = 1.0 / std::sqrt(2.0);
        for (std::size_t k = 0; k < K; ++k) {
            auto rng = make_rng(spec.seed, Stream::data, k);
            std::normal_distribution<double> noise(0.0, spec.blob_std);
            std::vector<std::size_t> classes;
            if (spec.split == SplitKind::iid) {
                classes.resize(C);
                std::iota(classes.begin(), classes.end(), std::size_t{0});
            } else {
                classes = orbit_classes(spec.orbit_of_sat[k], C);
            }
            // Balanced labels, then shuffled, so every held class is represented.
            std::vector<std::size_t> labels(spec.per_sat_sizes[k]);
            for (std::size_t j = 0; j < labels.size(); ++j) labels[j] = classes[j % classes.size()];
            std::shuffle(labels.begin(), labels.end(), rng);
            Dataset& d = out[k];
            d.num_features = D;
            d.owner = k;
            std::vector<double> x(D);
            for (auto c : labels) {
                for (std::size_t i = 0; i < D; ++i) x[i] = (i == c ? center : 0.0) + noise(rng);
                d.push_back(x, static_cast<double>(c));
            }
        }
        return out;
    }

    if (spec.split != SplitKind::iid)
        throw std::invalid_argument("linear-regression data supports only the iid split (use heterogeneity)");
    auto base_rng = make_rng(spec.seed, Stream::data, 0xffff);
    std::normal_distribution<double> unit(0.0, 1.0);
    Params w0(D);
    for (auto& v : w0) v = unit(base_rng);
    for (std::size_t k = 0; k < K; ++k) {
        auto rng = make_rng(spec.seed, Stream::data, k);
        Params wk(D), mean(D);
        for (std::size_t i = 0; i < D; ++i) wk[i] = w0[i] + spec.heterogeneity * unit(rng);
        for (std::size_t i = 0; i < D; ++i) mean[i] = 0.5 * spec.heterogeneity * unit(rng);
        Dataset& d = out[k];
        d.num_features = D;
        d.owner = k;
        std::vector<double> x(D);
        for (std::size_t j = 0; j < spec.per_sat_sizes[k]; ++j) {
            double y = 0.0;
            for (std::size_t i = 0; i < D; ++i) {
                x[i] = mean[i] + unit(rng);
                y += wk[i] * x[i];
            }
            d.push_back(x, y + spec.noise_std * unit(rng));
        }
    }
    return out;
}

HoldoutSplit split_holdout(const std::vector<Dataset>& data, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("holdout fraction must lie in [0, 1)");
    HoldoutSplit out;
    if (data.empty()) return out;
    out.holdout.num_features = data.front().num_features;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& d = data[k];
        std::vector<std::size_t> idx(d.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        auto rng = make_rng(seed, Stream::holdout, k);
        std::shuffle(idx.begin(), idx.end(), rng);
        auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d.size())));
        held = std::min(held, d.size() - 1);  // every satellite keeps at least one sample
        std::vector<bool> is_held(d.size(), false);
        for (std::size_t j = 0; j < held; ++j) is_held[idx[j]] = true;
        Dataset train;
        train.num_features = d.num_features;
        train.owner = d.owner;
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (is_held[j])
                out.holdout.push_back(d.row(j), d.labels[j]);
            else
                train.push_back(d.row(j), d.labels[j]);
        }
        out.train.push_back(std::move(train));
    }
    return out;
}

void write_csv(std::ostream& out, const Dataset& data) {
    for (std::size_t i = 0; i < data.num_features; ++i) fmt::print(out, "f{},", i);
    out << "y\n";
    for (std::size_t j = 0; j < data.size(); ++j) {
        for (double v : data.row(j)) fmt::print(out, "{},", v);
        fmt::print(out, "{}\n", data.labels[j]);
    }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
    write_csv(out, data);
}

Dataset load_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) break;
    }
    if (line.empty()) throw std::runtime_error(fmt::format("{}: empty file", source));
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 2 || header.back() != "y")
        throw std::runtime_error(fmt::format("{}:{}: header must be f0,...,fn,y", source, line_no));
    for (std::size_t i = 0; i + 1 < header.size(); ++i)
        if (header[i] != fmt::format("f{}", i))
            throw std::runtime_error(
                fmt::format("{}:{}: column {} is '{}', expected 'f{}'", source, line_no, i + 1, header[i], i));

    Dataset d;
    d.num_features = header.size() - 1;
    std::vector<double> row(header.size());
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t col = 0;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            const std::string_view cell(line.data() + pos, (comma == std::string::npos ? line.size() : comma) - pos);
            if (col >= row.size())
                throw std::runtime_error(fmt::format("{}:{}: too many columns (expected {})", source, line_no, row.size()));
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(value))
                throw std::runtime_error(fmt::format("{}:{}: column {} ('{}') is not a finite number: '{}'", source,
                                                     line_no, col + 1, header[col], cell));
            row[col++] = value;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (col != row.size())
            throw std::runtime_error(
                fmt::format("{}:{}: expected {} columns, found {}", source, line_no, row.size(), col));
        d.push_back(std::span<const double>(row.data(), d.num_features), row.back());
    }
    if (d.size() == 0) throw std::runtime_error(fmt::format("{}: no data rows", source));
    return d;
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open dataset {}", path.string()));
    return load_csv(in, path.string());
}

}  // namespace ltp
