#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ltpfleo/model.hpp"
#include "ltpfleo/training.hpp"

using namespace ltp;

namespace {

Dataset random_dataset(const LossSpec& spec, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Dataset d;
    d.num_features = spec.num_features;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(spec.num_features);
        for (auto& v : x) v = g(rng);
        const double y = spec.is_classifier() ? static_cast<double>(rng() % spec.num_classes) : g(rng);
        d.push_back(x, y);
    }
    return d;
}

Params random_params(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.5);
    Params w(dim);
    for (auto& v : w) v = g(rng);
    return w;
}

// Softmax cross-entropy written out directly: per class [W_c, b_c].
double softmax_loss_oracle(const Params& w, const Dataset& d, std::size_t C, double reg) {
    const std::size_t D = d.num_features;
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::vector<double> z(C);
        for (std::size_t c = 0; c < C; ++c) {
            z[c] = w[c * (D + 1) + D];
            for (std::size_t j = 0; j < D; ++j) z[c] += w[c * (D + 1) + j] * d.row(i)[j];
        }
        double lse = 0.0;
        for (double v : z) lse += std::exp(v);
        total += std::log(lse) - z[static_cast<std::size_t>(d.labels[i])];
    }
    double sq = 0.0;
    for (double v : w) sq += v * v;
    return total / static_cast<double>(d.size()) + 0.5 * reg * sq;
}

}  // namespace

TEST_CASE("finite-difference gradients") {
    for (auto kind : {LossKind::quadratic, LossKind::logistic_l2, LossKind::mlp_small}) {
        LossSpec spec;
        spec.kind = kind;
        spec.num_features = 4;
        spec.num_classes = 3;
        spec.hidden_units = 5;
        spec.regularization = 0.01;
        const auto d = random_dataset(spec, 25, 1);
        const auto w = random_params(spec.dimension(), 2);
        const auto g = full_gradient(spec, w, d);
        REQUIRE(g.size() == spec.dimension());
        Params fd(w.size());
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double h = 1e-5;
            Params wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            fd[j] = (dataset_loss(spec, wp, d) - dataset_loss(spec, wm, d)) / (2 * h);
        }
        CAPTURE(to_string(kind));
        CHECK(std::sqrt(distance2(fd, g)) / norm(g) <= 1e-4);
    }
}

TEST_CASE("loss values against direct formulas") {
    LossSpec soft;
    soft.num_features = 3;
    soft.num_classes = 4;
    soft.regularization = 0.1;
    const auto d = random_dataset(soft, 30, 4);
    const auto w = random_params(soft.dimension(), 5);
    CHECK(dataset_loss(soft, w, d) == doctest::Approx(softmax_loss_oracle(w, d, 4, 0.1)).epsilon(1e-12));

    LossSpec quad;
    quad.kind = LossKind::quadratic;
    quad.num_features = 3;
    quad.regularization = 0.0;
    const auto dq = random_dataset(quad, 10, 6);
    const auto wq = random_params(3, 7);
    double expect = 0.0;
    for (std::size_t i = 0; i < dq.size(); ++i) {
        double r = -dq.labels[i];
        for (std::size_t j = 0; j < 3; ++j) r += wq[j] * dq.row(i)[j];
        expect += 0.5 * r * r;
    }
    CHECK(dataset_loss(quad, wq, dq) == doctest::Approx(expect / 10.0).epsilon(1e-12));
}

TEST_CASE("local SGD steps") {
    LossSpec spec;
    spec.kind = LossKind::quadratic;
    spec.num_features = 1;
    spec.regularization = 0.0;
    Dataset d;
    d.num_features = 1;
    d.push_back(std::vector<double>{1.0}, 3.0);
    SgdConfig cfg;
    cfg.steps = 1;
    cfg.lr.c = 0.5;
    cfg.mini_batch = 1;
    CHECK(local_sgd(Params{0.0}, d, spec, cfg) == Params{1.5});

    cfg.lr.c = 0.0;
    cfg.steps = 4;
    CHECK(local_sgd(Params{0.25}, d, spec, cfg) == Params{0.25});

    LossSpec soft;
    soft.num_features = 3;
    soft.num_classes = 2;
    const auto data = random_dataset(soft, 20, 8);
    const auto w0 = random_params(soft.dimension(), 9);
    SgdConfig s;
    s.steps = 5;
    s.mini_batch = 32;
    s.lr.c = 0.1;
    const auto w5 = local_sgd(w0, data, soft, s);
    CHECK(softmax_loss_oracle(w5, data, 2, soft.regularization) <= softmax_loss_oracle(w0, data, 2, soft.regularization));
}

TEST_CASE("learning-rate schedule and projection") {
    LearningRate lr;
    lr.kind = LearningRate::Kind::inverse;
    lr.c = 2.0;
    lr.offset = 3.0;
    CHECK(lr.at(1) == 0.5);
    CHECK(lr.at(5) == 0.25);

    Params w{3.0, 4.0};
    project_to_ball(w, 1.0);
    CHECK(norm(w) == doctest::Approx(1.0));
    Params inside{0.1, 0.1};
    project_to_ball(inside, 1.0);
    CHECK(inside == Params{0.1, 0.1});
}

TEST_CASE("non-finite gradients are reported") {
    LossSpec spec;
    spec.kind = LossKind::quadratic;
    spec.num_features = 1;
    Dataset d;
    d.num_features = 1;
    d.push_back(std::vector<double>{1e200}, 0.0);
    d.owner = 4;
    SgdConfig cfg;
    cfg.lr.c = 1.0;
    try {
        local_sgd(Params{1e200}, d, spec, cfg);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("satellite 4") != std::string::npos);
    }
}

TEST_CASE("global loss is the pooled mean") {
    LossSpec spec;
    spec.kind = LossKind::quadratic;
    spec.num_features = 3;
    spec.regularization = 0.0;
    std::vector<Dataset> parts;
    for (std::size_t k = 0; k < 5; ++k) parts.push_back(random_dataset(spec, 5 + 7 * k, 20 + k));
    const auto w = random_params(3, 30);
    CHECK(std::abs(global_loss(spec, w, parts) - dataset_loss(spec, w, concatenate(parts))) <= 1e-12);
    CHECK(global_loss(spec, w, {parts[0]}) == dataset_loss(spec, w, parts[0]));
    CHECK(global_loss(spec, w, {parts[1], parts[1]}) == doctest::Approx(dataset_loss(spec, w, parts[1])));
}

TEST_CASE("synthetic data") {
    SynthSpec s;
    s.per_sat_sizes.assign(10, 100);
    s.orbit_of_sat = {0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
    s.seed = 3;
    const auto iid = synthesize_data(s);
    std::size_t total = 0;
    for (const auto& d : iid) {
        std::set<double> labels(d.labels.begin(), d.labels.end());
        CHECK(labels.size() == 10);
        total += d.size();
    }
    CHECK(total == 1000);

    s.split = SplitKind::non_iid_2class;
    const auto non = synthesize_data(s);
    for (std::size_t k = 0; k < 10; ++k) {
        const double p = static_cast<double>(s.orbit_of_sat[k]);
        std::set<double> labels(non[k].labels.begin(), non[k].labels.end());
        CHECK(labels == std::set<double>{2 * p, 2 * p + 1});
    }
    CHECK(orbit_classes(4, 10) == std::vector<std::size_t>{8, 9});

    SynthSpec r;
    r.kind = DataKind::linear_regression;
    r.per_sat_sizes = {30, 40};
    r.num_features = 5;
    const auto reg = synthesize_data(r);
    CHECK(reg[0].size() == 30);
    CHECK(reg[1].size() == 40);
    CHECK(reg[1].owner == SatelliteId{1});

    const auto again = synthesize_data(s);
    CHECK(again[3].features == non[3].features);
}

TEST_CASE("holdout split") {
    SynthSpec s;
    s.per_sat_sizes = {50, 50, 3};
    s.seed = 1;
    const auto data = synthesize_data(s);
    const auto split = split_holdout(data, 0.1, 1);
    CHECK(split.train[0].size() == 45);
    CHECK(split.train[2].size() == 3);
    CHECK(split.holdout.size() == 10);
}

TEST_CASE("csv round trip and validation") {
    SynthSpec s;
    s.per_sat_sizes = {7};
    s.num_features = 3;
    s.num_classes = 3;
    const auto d = synthesize_data(s)[0];
    std::stringstream buf;
    write_csv(buf, d);
    const auto back = load_csv(buf);
    CHECK(back.features == d.features);
    CHECK(back.labels == d.labels);
    std::stringstream again;
    write_csv(again, back);
    CHECK(again.str() == buf.str());

    std::istringstream three("f0,f1,y\n1,2,0\n3,4,1\n5,6,0\n");
    CHECK(load_csv(three).size() == 3);

    std::istringstream bad("f0,f1,y\n1,2,0\n3,x,1\n");
    try {
        load_csv(bad, "bad.csv");
        FAIL("expected an error");
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bad.csv:3") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }
}

TEST_CASE("checkpoint format") {
    const auto path = std::filesystem::temp_directory_path() / "ltpfleo_ckpt_test.bin";
    const Params w{1.0, -2.5, 3.25};
    write_checkpoint(path, w);
    CHECK(std::filesystem::file_size(path) == 8 + 3 * 8);
    CHECK(read_checkpoint(path) == w);
    std::filesystem::remove(path);
}
