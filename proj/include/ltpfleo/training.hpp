#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltpfleo/model.hpp"

namespace ltp {

struct Dataset {
    std::size_t num_features = 0;
    std::vector<double> features;  // row-major, size() x num_features
    std::vector<double> labels;    // class index for classifiers, target for regression
    std::optional<SatelliteId> owner;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t j) const {
        return {features.data() + j * num_features, num_features};
    }
    void push_back(std::span<const double> x, double y);
    void validate() const;
};

Dataset concatenate(const std::vector<Dataset>& parts);

enum class LossKind { quadratic, logistic_l2, mlp_small };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

// quadratic:   f = 1/2 (x.w - y)^2, d = num_features
// logistic_l2: multinomial softmax, d = num_classes * (num_features + 1)
// mlp_small:   one tanh hidden layer + softmax, d = H*D + H + C*H + C
// Every kind adds regularization/2 * |w|^2 to the mean sample loss.
struct LossSpec {
    LossKind kind = LossKind::logistic_l2;
    double regularization = 1e-3;
    std::optional<double> clip_radius;
    std::size_t num_features = 10;
    std::size_t num_classes = 10;
    std::size_t hidden_units = 32;

    std::size_t dimension() const;
    bool is_classifier() const { return kind != LossKind::quadratic; }
    bool strongly_convex() const { return kind != LossKind::mlp_small && regularization > 0.0; }
    void validate() const;
};

// Mean sample loss over the dataset plus the regularizer (F_k).
double dataset_loss(const LossSpec& spec, std::span<const double> w, const Dataset& data);
// Mean gradient over the given sample indices plus the regularizer gradient.
Params batch_gradient(const LossSpec& spec, std::span<const double> w, const Dataset& data,
                      std::span<const std::size_t> indices);
Params full_gradient(const LossSpec& spec, std::span<const double> w, const Dataset& data);
// Per-sample loss without the regularizer.
double sample_loss(const LossSpec& spec, std::span<const double> w, std::span<const double> x, double y);

// Class scores for classifiers; the prediction for regression.
std::size_t predict_class(const LossSpec& spec, std::span<const double> w, std::span<const double> x);
double accuracy(const LossSpec& spec, std::span<const double> w, const Dataset& data);

// F(w) = (1/|D|) sum_k |D_k| F_k(w).
double global_loss(const LossSpec& spec, std::span<const double> w, const std::vector<Dataset>& datasets);

Params init_model(const LossSpec& spec, std::uint64_t seed, double scale = 0.1);

struct LearningRate {
    enum class Kind { constant, inverse } kind = Kind::constant;
    double c = 0.01;       // constant value, or numerator of c / (offset + step)
    double offset = 0.0;   // upsilon for the inverse schedule

    double at(std::size_t global_step) const;
};

struct SgdConfig {
    std::size_t steps = 5;  // local mini-batch steps I
    LearningRate lr;
    std::size_t mini_batch = 32;
    std::uint64_t seed = 0;
    std::size_t first_step = 1;  // global step index of the first local step (learning-rate clock)
};

// I mini-batch SGD steps (batches sampled without replacement; full batch when the
// dataset is not larger than mini_batch), projected onto the clip ball when set.
Params local_sgd(std::span<const double> model, const Dataset& data, const LossSpec& spec,
                 const SgdConfig& cfg);

// Projects onto {|w| <= radius} in place.
void project_to_ball(std::span<double> w, double radius);

enum class DataKind { blobs, linear_regression };
enum class SplitKind { iid, non_iid_2class };

struct SynthSpec {
    DataKind kind = DataKind::blobs;
    SplitKind split = SplitKind::iid;
    std::size_t num_classes = 10;
    std::size_t num_features = 10;
    std::vector<std::size_t> per_sat_sizes;
    std::vector<std::size_t> orbit_of_sat;  // required for non_iid_2class
    double blob_std = 0.15;
    double noise_std = 0.5;          // regression target noise
    double heterogeneity = 1.0;      // regression: spread of per-satellite optima and feature means
    std::uint64_t seed = 0;
};

// Classes held by an orbit under the two-class split: {2p mod C, (2p+1) mod C}.
std::vector<std::size_t> orbit_classes(std::size_t orbit, std::size_t num_classes);

std::vector<Dataset> synthesize_data(const SynthSpec& spec);

// Removes a seeded fraction of each satellite's samples into a pooled held-out set.
struct HoldoutSplit {
    std::vector<Dataset> train;
    Dataset holdout;
};
HoldoutSplit split_holdout(const std::vector<Dataset>& data, double fraction, std::uint64_t seed);

// CSV: header f0..f{n-1},y; one sample per row.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);
Dataset load_csv(std::istream& in, const std::string& source_name = "<stream>");
Dataset load_csv(const std::filesystem::path& path);

}  // namespace ltp
