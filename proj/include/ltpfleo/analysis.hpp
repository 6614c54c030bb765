#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ltpfleo/parallel.hpp"
#include "ltpfleo/scheduling.hpp"
#include "ltpfleo/training.hpp"

namespace ltp {

struct ConvexityConstants {
    double smoothness = 0.0;        // L (script)
    double strong_convexity = 0.0;  // mu
    std::vector<double> sigma;      // per satellite
    double gradient_bound = 0.0;    // H
    double heterogeneity = 0.0;     // Gamma
    std::vector<double> weights;    // s_k = |D_k| / |D|
    Params optimum;                 // w*
    double optimal_loss = 0.0;      // F*
    std::vector<double> local_optimal_loss;  // F_k*
};

struct ConstantsOptions {
    double clip_radius = 10.0;
    std::size_t mini_batch = 32;
    std::size_t sample_points = 100;
    std::uint64_t seed = 0;
    std::size_t power_iterations = 2000;
    double solve_tolerance = 1e-12;
    Exec exec = Exec::parallel;
};

// quadratic: L, mu from per-satellite Hessian extremes (power iteration), H analytic
// over the ball, Gamma from closed-form minimizers. logistic-l2: L = 1/2 max |x~|^2 +
// reg, mu = reg, H sampled x1.1, minimizers by full-gradient descent.
// sigma_k: exact without-replacement mini-batch gradient variance, maximized over sampled ball points.
ConvexityConstants estimate_constants(const LossSpec& loss, const std::vector<Dataset>& datasets,
                                      const ConstantsOptions& options = {});

// Largest eigenvalue of a symmetric matrix (row-major, n x n) by power iteration.
double power_iteration_max(const std::vector<double>& matrix, std::size_t n, std::size_t iterations,
                           std::uint64_t seed = 1);
// Smallest eigenvalue, via power iteration on (lambda_max I - A).
double power_iteration_min(const std::vector<double>& matrix, std::size_t n, std::size_t iterations,
                           std::uint64_t seed = 1);

struct BoundParams {
    double kappa = 0.0;
    double upsilon = 0.0;
    double lambda = 0.0;
    double nu = 0.0;
    double initial_gap = 0.0;  // |w1 - w*|^2
    double optimal_loss = 0.0;
};

BoundParams make_bound_params(const ConvexityConstants& c, std::size_t local_steps, std::size_t num_satellites,
                              const Params& initial_model);

// (2 kappa / (upsilon + I T)) ((lambda + nu) / mu + (mu upsilon / 4) |w1 - w*|^2)
double gap_bound(const ConvexityConstants& c, const BoundParams& p, std::size_t local_steps, double T);

struct RoundsEstimate {
    double rounds = 0.0;           // T-hat at the given I
    std::size_t optimal_steps = 1;  // I* in [1, 1000]
    double rounds_at_optimum = 0.0;
};

// T-hat = (1/rho) [(1 + 1/|G|) I H^2 + (sum s^2 sigma^2 + L Gamma + kappa H^2) / I + H^2]
double rounds_bracket(const ConvexityConstants& c, std::size_t local_steps, std::size_t num_partitions);
RoundsEstimate rounds_estimate(const ConvexityConstants& c, std::size_t local_steps, std::size_t num_partitions,
                               double rho);

struct ContractionStep {
    std::size_t step = 0;  // synchronization index i: compares i and i+1
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double standard_error = 0.0;
    bool violation = false;  // margin below -2 standard errors
};

struct ContractionReport {
    std::vector<ContractionStep> steps;
    std::size_t nonnegative = 0;
    std::size_t violations = 0;
    double nonnegative_fraction() const;
};

// trajectories[r][i]: replica r's model at synchronization i. step_rates[i] lists the
// learning rates of the local steps between synchronizations i and i+1; the one-step
// recursion is composed over them (a single rate reduces to the plain form).
ContractionReport check_one_step_contraction(const std::vector<std::vector<Params>>& trajectories,
                                             const ConvexityConstants& c, const BoundParams& p,
                                             const std::vector<std::vector<double>>& step_rates);

struct FairnessReport {
    std::size_t rounds = 0;
    std::vector<double> rates;  // per partition
    double gap = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

// Rates f_G^{T+1} / T and their spread.
FairnessReport fairness_gap(const ParticipationLog& log, std::size_t T);

// Adds per-class accuracy and the confusion matrix of a classifier.
void add_confusion(FairnessReport& report, const LossSpec& loss, const Params& model, const Dataset& data);

// Log-log least-squares slope of y against x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Fixed-tree pairwise sum, independent of thread count.
double pairwise_sum(const std::vector<double>& v);

}  // namespace ltp
