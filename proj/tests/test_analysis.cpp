#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ltpfleo/analysis.hpp"
#include "ltpfleo/model.hpp"

using namespace ltp;

namespace {

LossSpec quadratic(std::size_t D) {
    LossSpec s;
    s.kind = LossKind::quadratic;
    s.num_features = D;
    s.regularization = 0.0;
    return s;
}

Dataset regression_data(std::size_t n, std::size_t D, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Dataset d;
    d.num_features = D;
    std::vector<double> w(D);
    for (auto& v : w) v = g(rng) + shift;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(D);
        double y = 0.3 * g(rng);
        for (std::size_t j = 0; j < D; ++j) {
            x[j] = g(rng) + 0.5 * shift;
            y += w[j] * x[j];
        }
        d.push_back(x, y);
    }
    return d;
}

// Least squares by normal equations and naive elimination.
Params solve_least_squares(const std::vector<Dataset>& parts) {
    const std::size_t D = parts.front().num_features;
    std::vector<std::vector<double>> A(D, std::vector<double>(D + 1, 0.0));
    for (const auto& d : parts)
        for (std::size_t i = 0; i < d.size(); ++i)
            for (std::size_t a = 0; a < D; ++a) {
                for (std::size_t b = 0; b < D; ++b) A[a][b] += d.row(i)[a] * d.row(i)[b];
                A[a][D] += d.row(i)[a] * d.labels[i];
            }
    for (std::size_t c = 0; c < D; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < D; ++r)
            if (std::abs(A[r][c]) > std::abs(A[p][c])) p = r;
        std::swap(A[p], A[c]);
        for (std::size_t r = 0; r < D; ++r) {
            if (r == c) continue;
            const double f = A[r][c] / A[c][c];
            for (std::size_t j = c; j <= D; ++j) A[r][j] -= f * A[c][j];
        }
    }
    Params w(D);
    for (std::size_t c = 0; c < D; ++c) w[c] = A[c][D] / A[c][c];
    return w;
}

double half_mse(const Params& w, const Dataset& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double r = -d.labels[i];
        for (std::size_t j = 0; j < d.num_features; ++j) r += w[j] * d.row(i)[j];
        s += 0.5 * r * r;
    }
    return s / static_cast<double>(d.size());
}

std::vector<Dataset> heterogeneous(std::size_t K, std::size_t D) {
    std::vector<Dataset> parts;
    for (std::size_t k = 0; k < K; ++k) {
        parts.push_back(regression_data(20 + 10 * k, D, 0.4 * static_cast<double>(k), 100 + k));
        parts.back().owner = k;
    }
    return parts;
}

}  // namespace

TEST_CASE("constants of a scalar quadratic") {
    const double a = 2.5, b = -1.0;
    Dataset d;
    d.num_features = 1;
    d.push_back(std::vector<double>{std::sqrt(a)}, std::sqrt(a) * b);
    ConstantsOptions opt;
    opt.mini_batch = 1;
    const auto c = estimate_constants(quadratic(1), {d, d}, opt);
    CHECK(c.smoothness == doctest::Approx(a).epsilon(1e-9));
    CHECK(c.strong_convexity == doctest::Approx(a).epsilon(1e-9));
    CHECK(c.optimum[0] == doctest::Approx(b).epsilon(1e-12));
    CHECK(std::abs(c.heterogeneity) <= 1e-12);
}

TEST_CASE("heterogeneity against closed-form minimizers") {
    const auto parts = heterogeneous(5, 3);
    const auto c = estimate_constants(quadratic(3), parts);

    double total = 0.0;
    for (const auto& d : parts) total += static_cast<double>(d.size());
    const auto w_star = solve_least_squares(parts);
    double f_star = 0.0, local = 0.0;
    for (const auto& d : parts) {
        const double s = static_cast<double>(d.size()) / total;
        f_star += s * half_mse(w_star, d);
        local += s * half_mse(solve_least_squares({d}), d);
    }
    CHECK(std::abs(c.heterogeneity - (f_star - local)) <= 1e-10);
    CHECK(c.optimal_loss == doctest::Approx(f_star).epsilon(1e-12));
    CHECK(c.heterogeneity > 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(c.optimum[j] == doctest::Approx(w_star[j]).epsilon(1e-10));

    const auto same = estimate_constants(quadratic(3), {parts[0], parts[0], parts[0]});
    CHECK(std::abs(same.heterogeneity) <= 1e-12);
}

TEST_CASE("constants are stable across execution modes") {
    const auto parts = heterogeneous(4, 3);
    ConstantsOptions serial;
    serial.exec = Exec::serial;
    const auto a = estimate_constants(quadratic(3), parts, serial);
    const auto b = estimate_constants(quadratic(3), parts);
    CHECK(a.sigma == b.sigma);
    CHECK(a.smoothness == b.smoothness);
    CHECK(a.gradient_bound == b.gradient_bound);

    LossSpec logistic;
    logistic.num_features = 3;
    logistic.num_classes = 2;
    logistic.regularization = 0.05;
    std::vector<Dataset> cls(2);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (auto& d : cls) {
        d.num_features = 3;
        for (int i = 0; i < 30; ++i) d.push_back(std::vector<double>{g(rng), g(rng), g(rng)}, static_cast<double>(i % 2));
    }
    const auto lc = estimate_constants(logistic, cls);
    CHECK(lc.strong_convexity == 0.05);
    CHECK(lc.smoothness > lc.strong_convexity);
    CHECK(norm(full_gradient(logistic, lc.optimum, concatenate(cls))) <= 1e-10);

    LossSpec mlp = logistic;
    mlp.kind = LossKind::mlp_small;
    CHECK_THROWS_AS(estimate_constants(mlp, cls), std::invalid_argument);
}

TEST_CASE("power iteration") {
    const std::vector<double> m{4, 1, 0, 1, 3, 0, 0, 0, 1};
    // eigenvalues: 1 and (7 +- sqrt 5) / 2
    CHECK(power_iteration_max(m, 3, 2000) == doctest::Approx((7 + std::sqrt(5.0)) / 2).epsilon(1e-9));
    CHECK(power_iteration_min(m, 3, 2000) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("convergence bound") {
    const auto parts = heterogeneous(5, 3);
    const auto c = estimate_constants(quadratic(3), parts);
    const Params w1{0.0, 0.0, 0.0};
    const std::size_t I = 5, K = 5;
    const auto p = make_bound_params(c, I, K, w1);

    // written out from the definitions
    const double L = c.smoothness, mu = c.strong_convexity, H = c.gradient_bound;
    const double kappa = L / mu;
    const double upsilon = std::max(8 * kappa, 5.0);
    double noise = 0.0;
    for (std::size_t k = 0; k < K; ++k) noise += std::pow(c.weights[k] * c.sigma[k], 2);
    const double lambda = noise + 6 * L * c.heterogeneity + 8 * 16 * H * H;
    const double nu = 4 * 25 * H * H / 5.0;
    const double gap = norm2(c.optimum);
    for (double T : {1.0, 10.0, 250.0, 500.0}) {
        const double expect = 2 * kappa / (upsilon + 5 * T) * ((lambda + nu) / mu + mu * upsilon / 4 * gap);
        CHECK(std::abs(gap_bound(c, p, I, T) - expect) <= 1e-12 * expect);
    }

    double prev = gap_bound(c, p, I, 1.0);
    for (double T = 2.0; T < 1e7; T *= 3.0) {
        const double b = gap_bound(c, p, I, T);
        CHECK(b < prev);
        prev = b;
    }
    CHECK(prev < 1e-2 * gap_bound(c, p, I, 1.0));

    auto doubled = p;
    doubled.initial_gap *= 2.0;
    const double share = 2 * kappa / (upsilon + 50.0) * (mu * upsilon / 4) * p.initial_gap;
    CHECK(gap_bound(c, doubled, I, 10.0) - gap_bound(c, p, I, 10.0) == doctest::Approx(share).epsilon(1e-10));
}

TEST_CASE("rounds estimate") {
    const auto parts = heterogeneous(5, 3);
    const auto c = estimate_constants(quadratic(3), parts);
    const auto a = rounds_estimate(c, 5, 3, 0.1);
    const auto b = rounds_estimate(c, 5, 3, 0.05);
    CHECK(b.rounds == doctest::Approx(2 * a.rounds).epsilon(1e-14));

    // grid scan: decreasing up to I*, increasing after
    std::vector<double> grid;
    for (std::size_t i = 1; i <= 1000; ++i) grid.push_back(rounds_bracket(c, i, 3));
    const auto best = static_cast<std::size_t>(std::min_element(grid.begin(), grid.end()) - grid.begin()) + 1;
    CHECK(a.optimal_steps == best);
    for (std::size_t i = 1; i < best; ++i) CHECK(grid[i] <= grid[i - 1]);
    for (std::size_t i = best; i < grid.size(); ++i) CHECK(grid[i] >= grid[i - 1]);

    ConvexityConstants quiet;
    quiet.smoothness = 1.0;
    quiet.strong_convexity = 1.0;
    quiet.sigma = {0.0};
    quiet.weights = {1.0};
    quiet.gradient_bound = 1e-9;
    CHECK(rounds_estimate(quiet, 3, 2, 0.1).rounds < 1e-15);
}

TEST_CASE("one-step contraction") {
    const auto parts = heterogeneous(1, 2);
    const auto c = estimate_constants(quadratic(2), parts);
    const auto p = make_bound_params(c, 1, 1, Params{0.0, 0.0});

    // frozen dynamics
    const std::vector<std::vector<Params>> frozen{{{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}};
    const auto f = check_one_step_contraction(frozen, c, p, {{0.0}, {0.0}});
    CHECK(f.nonnegative == 2);
    CHECK(f.steps[0].margin == 0.0);

    // full-batch gradient descent on the single client
    const double eta = 0.5 / c.smoothness;
    std::vector<Params> traj{{3.0, -2.0}};
    for (int i = 0; i < 40; ++i) {
        auto w = traj.back();
        axpy(-eta, full_gradient(quadratic(2), w, parts[0]), w);
        traj.push_back(w);
    }
    const auto r = check_one_step_contraction({traj}, c, p, std::vector<std::vector<double>>(40, {eta}));
    CHECK(r.nonnegative == 40);
    CHECK(r.violations == 0);
    CHECK(r.nonnegative_fraction() == 1.0);
}

TEST_CASE("fairness gap") {
    ParticipationLog always(2);
    for (std::size_t t = 1; t <= 50; ++t) always.record_round({0}, t);
    CHECK(fairness_gap(always, 50).gap == 1.0);

    ParticipationLog log(3);
    const std::vector<std::vector<PartitionId>> rounds{{0}, {1}, {0, 2}, {}, {0, 1}, {2}, {0}, {1, 2}, {0}, {0, 1, 2}};
    for (std::size_t t = 0; t < rounds.size(); ++t) log.record_round(rounds[t], t + 1);
    const auto r = fairness_gap(log, 10);
    CHECK(r.rates == std::vector<double>{0.6, 0.4, 0.4});
    CHECK(r.gap == doctest::Approx(0.2));

    ParticipationLog all(3);
    for (std::size_t t = 1; t <= 10; ++t) all.record_round({0, 1, 2}, t);
    CHECK(fairness_gap(all, 10).gap == 0.0);
}

TEST_CASE("confusion matrix") {
    LossSpec spec;
    spec.num_features = 2;
    spec.num_classes = 2;
    Dataset d;
    d.num_features = 2;
    d.push_back(std::vector<double>{1, 0}, 0);
    d.push_back(std::vector<double>{0, 1}, 1);
    d.push_back(std::vector<double>{0, 2}, 0);
    // class 0 score = x0, class 1 score = x1
    const Params w{1, 0, 0, 0, 1, 0};
    FairnessReport r;
    add_confusion(r, spec, w, d);
    CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}});
    CHECK(r.per_class_accuracy == std::vector<double>{0.5, 1.0});
}

TEST_CASE("numeric utilities") {
    std::vector<double> x, y;
    for (double t = 1; t <= 64; t *= 2) {
        x.push_back(t);
        y.push_back(3.0 / t);
    }
    CHECK(loglog_slope(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
    std::vector<double> v(1001);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    CHECK(pairwise_sum(v) == 500500.0);
    CHECK(pairwise_sum({}) == 0.0);
}
