#include "ltpfleo/analysis.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ltpfleo/diagnostics.hpp"
#include "ltpfleo/rng.hpp"

namespace ltp {
namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat hessian_of(const Dataset& d, double reg) {
    const auto n = static_cast<Eigen::Index>(d.size());
    const auto D = static_cast<Eigen::Index>(d.num_features);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(d.features.data(), n, D);
    Mat A = X.transpose() * X / static_cast<double>(n);
    A.diagonal().array() += reg;
    return A;
}

Vec moment_of(const Dataset& d) {
    const auto n = static_cast<Eigen::Index>(d.size());
    const auto D = static_cast<Eigen::Index>(d.num_features);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(d.features.data(), n, D);
    Eigen::Map<const Vec> y(d.labels.data(), n);
    return X.transpose() * y / static_cast<double>(n);
}

std::vector<double> to_row_major(const Mat& A) {
    std::vector<double> out(static_cast<std::size_t>(A.size()));
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) out[static_cast<std::size_t>(i * A.cols() + j)] = A(i, j);
    return out;
}

Params to_params(const Vec& v) { return Params(v.data(), v.data() + v.size()); }

// Accelerated full-gradient descent for a smooth, strongly convex objective.
Params minimize_logistic(const LossSpec& loss, const Dataset& data, double L, double mu, const Params& start,
                         double tolerance) {
    Params w = start, prev = start, y = start;
    const double momentum = (std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu));
    const std::size_t max_iter = 2'000'000;
    for (std::size_t it = 0; it < max_iter; ++it) {
        const auto g = full_gradient(loss, y, data);
        prev = w;
        w = y;
        axpy(-1.0 / L, g, w);
        for (std::size_t i = 0; i < w.size(); ++i) y[i] = w[i] + momentum * (w[i] - prev[i]);
        if (it % 16 == 15 && norm(full_gradient(loss, w, data)) <= tolerance) return w;
    }
    warn(fmt::format("logistic minimizer did not reach gradient norm {} in {} iterations", tolerance, max_iter));
    return w;
}

double minibatch_variance(const LossSpec& loss, const Params& w, const Dataset& d, std::size_t batch) {
    const std::size_t n = d.size();
    const std::size_t b = std::min(batch, n);
    if (b >= n || n < 2) return 0.0;
    const LossSpec plain = [&] {
        LossSpec s = loss;
        s.regularization = 0.0;  // the regularizer gradient is deterministic
        return s;
    }();
    std::vector<Params> g(n);
    Params mean(w.size(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx[1] = {j};
        g[j] = batch_gradient(plain, w, d, idx);
        axpy(1.0 / static_cast<double>(n), g[j], mean);
    }
    double v = 0.0;
    for (const auto& gj : g) v += distance2(gj, mean);
    v /= static_cast<double>(n);
    return v / static_cast<double>(b) * static_cast<double>(n - b) / static_cast<double>(n - 1);
}

double max_sample_gradient_norm(const LossSpec& loss, const Params& w, const Dataset& d) {
    double m = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        const std::size_t idx[1] = {j};
        m = std::max(m, norm(batch_gradient(loss, w, d, idx)));
    }
    return m;
}

}  // namespace

double power_iteration_max(const std::vector<double>& A, std::size_t n, std::size_t iterations, std::uint64_t seed) {
    if (A.size() != n * n) throw std::invalid_argument("matrix is not n x n");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n), w(n);
    for (auto& x : v) x = g(rng);
    double nv = norm(v);
    for (auto& x : v) x /= nv;
    double lambda = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * v[j];
            w[i] = s;
        }
        const double rayleigh = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
        const double nw = norm(w);
        if (nw == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
        if (it > 0 && std::abs(rayleigh - lambda) <= 1e-15 * std::abs(rayleigh)) return rayleigh;
        lambda = rayleigh;
    }
    return lambda;
}

double power_iteration_min(const std::vector<double>& A, std::size_t n, std::size_t iterations, std::uint64_t seed) {
    const double top = power_iteration_max(A, n, iterations, seed);
    std::vector<double> shifted(A.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) shifted[i * n + j] = (i == j ? top : 0.0) - A[i * n + j];
    return top - power_iteration_max(shifted, n, iterations, seed + 1);
}

ConvexityConstants estimate_constants(const LossSpec& loss, const std::vector<Dataset>& datasets,
                                      const ConstantsOptions& options) {
    loss.validate();
    if (loss.kind == LossKind::mlp_small)
        throw std::invalid_argument("mlp-small is non-convex; convergence constants are undefined for it");
    if (datasets.empty()) throw std::invalid_argument("no datasets");
    if (!(options.clip_radius > 0.0)) throw std::invalid_argument("clip radius must be positive");

    const std::size_t K = datasets.size();
    const std::size_t dim = loss.dimension();
    ConvexityConstants c;
    std::size_t total = 0;
    for (const auto& d : datasets) {
        if (d.size() == 0) throw std::invalid_argument("satellite without data");
        total += d.size();
    }
    for (const auto& d : datasets) c.weights.push_back(static_cast<double>(d.size()) / static_cast<double>(total));

    std::vector<Params> local_opt(K);
    if (loss.kind == LossKind::quadratic) {
        const auto D = static_cast<Eigen::Index>(loss.num_features);
        Mat A = Mat::Zero(D, D);
        Vec b = Vec::Zero(D);
        std::vector<double> top(K), bottom(K);
        for (std::size_t k = 0; k < K; ++k) {
            const Mat Ak = hessian_of(datasets[k], loss.regularization);
            const Vec bk = moment_of(datasets[k]);
            const auto flat = to_row_major(Ak);
            top[k] = power_iteration_max(flat, dim, options.power_iterations, options.seed + k);
            bottom[k] = power_iteration_min(flat, dim, options.power_iterations, options.seed + k);
            local_opt[k] = to_params(Ak.ldlt().solve(bk));
            A += c.weights[k] * Ak;
            b += c.weights[k] * bk;
        }
        c.smoothness = *std::max_element(top.begin(), top.end());
        c.strong_convexity = *std::min_element(bottom.begin(), bottom.end());
        c.optimum = to_params(A.ldlt().solve(b));
        double h = 0.0;
        for (const auto& d : datasets)
            for (std::size_t j = 0; j < d.size(); ++j) {
                const double nx = norm(d.row(j));
                h = std::max(h, nx * (nx * options.clip_radius + std::abs(d.labels[j])));
            }
        c.gradient_bound = h + loss.regularization * options.clip_radius;
    } else {
        double max_row = 0.0;
        std::vector<double> local_L(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < datasets[k].size(); ++j)
                local_L[k] = std::max(local_L[k], norm2(datasets[k].row(j)) + 1.0);
            max_row = std::max(max_row, local_L[k]);
            local_L[k] = 0.5 * local_L[k] + loss.regularization;
        }
        c.smoothness = 0.5 * max_row + loss.regularization;
        c.strong_convexity = loss.regularization;
        if (!(c.strong_convexity > 0.0))
            throw std::invalid_argument("logistic-l2 needs regularization > 0 for strong convexity");
        const Params zero(dim, 0.0);
        for_each_index(options.exec, K, [&](std::size_t k) {
            local_opt[k] = minimize_logistic(loss, datasets[k], local_L[k], c.strong_convexity, zero,
                                             options.solve_tolerance);
        });
        c.optimum = minimize_logistic(loss, concatenate(datasets), c.smoothness, c.strong_convexity, zero,
                                      options.solve_tolerance);
    }

    c.local_optimal_loss.resize(K);
    double weighted_local = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        c.local_optimal_loss[k] = dataset_loss(loss, local_opt[k], datasets[k]);
        weighted_local += c.weights[k] * c.local_optimal_loss[k];
    }
    c.optimal_loss = global_loss(loss, c.optimum, datasets);
    c.heterogeneity = std::max(0.0, c.optimal_loss - weighted_local);

    // Sample points uniformly in the ball, shared by every satellite.
    auto rng = make_rng(options.seed, Stream::constants);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Params> points(options.sample_points, Params(dim));
    for (auto& p : points) {
        for (auto& v : p) v = g(rng);
        const double scale =
            options.clip_radius * std::pow(u(rng), 1.0 / static_cast<double>(dim)) / std::max(norm(p), 1e-300);
        for (auto& v : p) v *= scale;
    }

    c.sigma.assign(K, 0.0);
    std::vector<double> sampled_h(K, 0.0);
    for_each_index(options.exec, K, [&](std::size_t k) {
        double worst = 0.0, hmax = 0.0;
        for (const auto& p : points) {
            worst = std::max(worst, minibatch_variance(loss, p, datasets[k], options.mini_batch));
            if (loss.kind != LossKind::quadratic) hmax = std::max(hmax, max_sample_gradient_norm(loss, p, datasets[k]));
        }
        c.sigma[k] = std::sqrt(worst);
        sampled_h[k] = hmax;
    });
    if (loss.kind != LossKind::quadratic)
        c.gradient_bound = 1.1 * *std::max_element(sampled_h.begin(), sampled_h.end());
    return c;
}

BoundParams make_bound_params(const ConvexityConstants& c, std::size_t I, std::size_t num_satellites,
                              const Params& initial_model) {
    if (I < 1) throw std::invalid_argument("local steps must be >= 1");
    if (num_satellites < 1) throw std::invalid_argument("need at least one satellite");
    if (!(c.strong_convexity > 0.0)) throw std::invalid_argument("bound needs mu > 0");
    BoundParams p;
    p.kappa = c.smoothness / c.strong_convexity;
    p.upsilon = std::max(8.0 * p.kappa, static_cast<double>(I));
    double noise = 0.0;
    for (std::size_t k = 0; k < c.sigma.size(); ++k) noise += c.weights[k] * c.weights[k] * c.sigma[k] * c.sigma[k];
    const double H2 = c.gradient_bound * c.gradient_bound;
    const double Im1 = static_cast<double>(I) - 1.0;
    p.lambda = noise + 6.0 * c.smoothness * c.heterogeneity + 8.0 * Im1 * Im1 * H2;
    p.nu = 4.0 * static_cast<double>(I) * static_cast<double>(I) * H2 / static_cast<double>(num_satellites);
    p.initial_gap = distance2(initial_model, c.optimum);
    p.optimal_loss = c.optimal_loss;
    return p;
}

double gap_bound(const ConvexityConstants& c, const BoundParams& p, std::size_t I, double T) {
    const double mu = c.strong_convexity;
    return (2.0 * p.kappa / (p.upsilon + static_cast<double>(I) * T)) *
           ((p.lambda + p.nu) / mu + (mu * p.upsilon / 4.0) * p.initial_gap);
}

double rounds_bracket(const ConvexityConstants& c, std::size_t I, std::size_t num_partitions) {
    if (I < 1 || num_partitions < 1) throw std::invalid_argument("I and |G| must be >= 1");
    double noise = 0.0;
    for (std::size_t k = 0; k < c.sigma.size(); ++k) noise += c.weights[k] * c.weights[k] * c.sigma[k] * c.sigma[k];
    const double H2 = c.gradient_bound * c.gradient_bound;
    const double kappa = c.strong_convexity > 0.0 ? c.smoothness / c.strong_convexity : 0.0;
    const double Id = static_cast<double>(I);
    return (1.0 + 1.0 / static_cast<double>(num_partitions)) * Id * H2 +
           (noise + c.smoothness * c.heterogeneity + kappa * H2) / Id + H2;
}

RoundsEstimate rounds_estimate(const ConvexityConstants& c, std::size_t I, std::size_t num_partitions, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("target accuracy rho must be positive");
    RoundsEstimate out;
    out.rounds = rounds_bracket(c, I, num_partitions) / rho;
    double best = rounds_bracket(c, 1, num_partitions);
    out.optimal_steps = 1;
    for (std::size_t i = 2; i <= 1000; ++i) {
        const double v = rounds_bracket(c, i, num_partitions);
        if (v < best) {
            best = v;
            out.optimal_steps = i;
        }
    }
    out.rounds_at_optimum = best / rho;
    return out;
}

double ContractionReport::nonnegative_fraction() const {
    return steps.empty() ? 1.0 : static_cast<double>(nonnegative) / static_cast<double>(steps.size());
}

ContractionReport check_one_step_contraction(const std::vector<std::vector<Params>>& trajectories,
                                             const ConvexityConstants& c, const BoundParams& p,
                                             const std::vector<std::vector<double>>& step_rates) {
    if (trajectories.empty()) throw std::invalid_argument("no replica trajectories");
    const std::size_t len = trajectories.front().size();
    for (const auto& t : trajectories)
        if (t.size() != len) throw std::invalid_argument("replica trajectories differ in length");
    if (len < 2) return {};
    if (step_rates.size() < len - 1) throw std::invalid_argument("missing learning rates for some steps");
    const double mu = c.strong_convexity;
    const double noise = p.lambda + p.nu;
    const std::size_t R = trajectories.size();

    ContractionReport out;
    for (std::size_t i = 0; i + 1 < len; ++i) {
        double factor = 1.0, additive = 0.0;
        for (double eta : step_rates[i]) {
            additive = (1.0 - eta * mu) * additive + eta * eta * noise;
            factor *= 1.0 - eta * mu;
        }
        std::vector<double> lhs(R), rhs(R), diff(R);
        for (std::size_t r = 0; r < R; ++r) {
            const double a = distance2(trajectories[r][i], c.optimum);
            const double b = distance2(trajectories[r][i + 1], c.optimum);
            lhs[r] = b;
            rhs[r] = factor * a + additive;
            diff[r] = rhs[r] - b;
        }
        ContractionStep s;
        s.step = i;
        const double n = static_cast<double>(R);
        s.lhs = pairwise_sum(lhs) / n;
        s.rhs = pairwise_sum(rhs) / n;
        s.margin = pairwise_sum(diff) / n;
        if (R > 1) {
            std::vector<double> sq(R);
            for (std::size_t r = 0; r < R; ++r) sq[r] = (diff[r] - s.margin) * (diff[r] - s.margin);
            s.standard_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
        }
        s.violation = s.margin < -2.0 * s.standard_error;
        if (s.margin >= 0.0) ++out.nonnegative;
        if (s.violation) ++out.violations;
        out.steps.push_back(s);
    }
    return out;
}

FairnessReport fairness_gap(const ParticipationLog& log, std::size_t T) {
    if (T > log.rounds())
        throw std::invalid_argument(fmt::format("log covers {} rounds, asked for {}", log.rounds(), T));
    FairnessReport out;
    out.rounds = T;
    out.rates.assign(log.num_partitions(), 0.0);
    if (T == 0 || log.num_partitions() == 0) return out;
    for (PartitionId g = 0; g < log.num_partitions(); ++g)
        out.rates[g] = static_cast<double>(participation_frequency(log, g, T + 1)) / static_cast<double>(T);
    const auto [lo, hi] = std::minmax_element(out.rates.begin(), out.rates.end());
    out.gap = *hi - *lo;
    return out;
}

void add_confusion(FairnessReport& report, const LossSpec& loss, const Params& model, const Dataset& data) {
    if (!loss.is_classifier()) throw std::invalid_argument("confusion matrix needs a classifier");
    const std::size_t C = loss.num_classes;
    report.confusion.assign(C, std::vector<std::size_t>(C, 0));
    for (std::size_t j = 0; j < data.size(); ++j) {
        const auto truth = static_cast<std::size_t>(data.labels[j]);
        report.confusion.at(truth).at(predict_class(loss, model, data.row(j)))++;
    }
    report.per_class_accuracy.assign(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        const auto row = std::accumulate(report.confusion[c].begin(), report.confusion[c].end(), std::size_t{0});
        report.per_class_accuracy[c] = row == 0 ? 0.0 : static_cast<double>(report.confusion[c][c]) / static_cast<double>(row);
    }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs two or more paired points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("log-log slope needs positive values");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double pairwise_sum(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    std::vector<double> level = v;
    while (level.size() > 1) {
        std::vector<double> next((level.size() + 1) / 2);
        for (std::size_t i = 0; i < next.size(); ++i)
            next[i] = level[2 * i] + (2 * i + 1 < level.size() ? level[2 * i + 1] : 0.0);
        level = std::move(next);
    }
    return level.front();
}

}  // namespace ltp
