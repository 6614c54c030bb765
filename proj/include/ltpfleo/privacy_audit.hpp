#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ltpfleo/event_log.hpp"
#include "ltpfleo/model.hpp"
#include "ltpfleo/parallel.hpp"

namespace ltp {

using Rational = mpq_class;
using RationalRow = std::vector<Rational>;

struct ObservationRecord {
    std::size_t round = 0;
    RationalRow coefficients;  // per satellite; zero for non-participants
    std::size_t global_id = 0;  // index of the observed global model (round number)
};

struct ObservationMatrix {
    std::size_t num_satellites = 0;
    std::size_t first_round = 0;
    std::size_t last_round = 0;
    std::vector<ObservationRecord> rows;

    std::size_t num_rows() const { return rows.size(); }
};

struct RowSpace {
    std::vector<RationalRow> basis;  // reduced row-echelon form
    std::vector<std::size_t> pivots;
    std::size_t rank() const { return basis.size(); }
};

// Exact Gaussian elimination.
RowSpace row_space_basis(const std::vector<RationalRow>& rows, std::size_t num_columns);
RowSpace row_space_basis(const ObservationMatrix& matrix);
std::size_t rational_rank(const std::vector<RationalRow>& rows, std::size_t num_columns);

// Exact coefficient the server applies to satellite k: beta as logged (a binary64,
// converted exactly) times |D_k|/|D_G| (data inner weighting) or 1 (sum).
Rational exact_coefficient(double beta, std::uint64_t member_data, std::uint64_t group_data,
                           InnerWeighting inner);

// Rows for rounds [first_round, last_round]; skipped rounds contribute nothing.
// Columns of colluding satellites are zeroed (the server already knows their models).
ObservationMatrix build_observation_matrix(const EventLog& log, std::size_t first_round,
                                           std::size_t last_round,
                                           const std::vector<SatelliteId>& colluders = {});

enum class Verdict { pass, fail };

struct LeakageReport {
    std::size_t first_round = 0;
    std::size_t last_round = 0;
    std::size_t target_ltp = 1;
    std::size_t rank = 0;
    std::vector<RationalRow> recoverable_basis;
    std::optional<std::size_t> min_support;  // nullopt: nothing recoverable
    std::vector<SatelliteId> individually_exposed;
    // Per partition: every recoverable vector restricted to the partition is a multiple of
    // its data-weight vector. Unset when no partition structure is known.
    std::optional<bool> partition_structure_ok;
    Verdict verdict = Verdict::pass;
    std::uint64_t subsets_tested = 0;
};

struct SupportOptions {
    std::uint64_t max_subset_tests = std::uint64_t{1} << 22;
    std::size_t max_columns = 64;
};

// Smallest support of a nonzero vector in the row space. Proportional columns
// always share support status, so the search runs over blocks of parallel columns,
// enumerated in increasing total size. A set S contains the support of some
// recoverable vector iff removing S's columns lowers the rank.
LeakageReport min_support_leakage(const ObservationMatrix& matrix, std::size_t target_ltp,
                                  const SupportOptions& options = {});

// Adds the partition structure check against a known layout.
void check_partition_structure(LeakageReport& report,
                               const std::vector<std::vector<SatelliteId>>& partitions,
                               const std::vector<std::uint64_t>& data_sizes, InnerWeighting inner);

struct AttackResult {
    Params estimate;
    std::vector<SatelliteId> target;  // satellites in the participation delta
    bool individual = false;          // false: estimate is a weighted average of several models
    double ratio = 0.0;               // common-coefficient ratio c^{t+1} / c^t
    double target_coefficient = 0.0;  // summed coefficient of the delta block at t+1
    std::optional<double> residual;   // |estimate - truth| when ground truth is supplied
};

// Recovers the joining block from two consecutive global models. blocks lists the
// partition layout (singletons when empty). coefficients are the per-satellite
// coefficients (doubles) of rounds t and t+1. ground_truth, when given, holds the
// block members' models at t+1 (member order) and sets the residual.
AttackResult differencing_attack(const Params& global_t, const Params& global_t1,
                                 const std::vector<double>& coefficients_t,
                                 const std::vector<double>& coefficients_t1,
                                 const std::vector<std::vector<SatelliteId>>& blocks = {},
                                 const std::vector<Params>& ground_truth = {});

// Per-satellite coefficients of one round as doubles.
std::vector<double> round_coefficients(const EventLog& log, const RoundRecord& record);

struct RunAudit {
    std::vector<LeakageReport> windows;
    bool passed() const;
};

// Audits every window of W consecutive rounds (a single window when the run is
// shorter). Windows are independent; reports come back in window order.
RunAudit ltp_verdict_over_run(const EventLog& log, std::size_t target_ltp, std::size_t window,
                              Exec exec = Exec::parallel, const std::vector<SatelliteId>& colluders = {},
                              const SupportOptions& options = {});

std::string rational_to_string(const Rational& q);
std::string report_to_json(const LeakageReport& report);
std::string run_audit_to_json(const RunAudit& audit);

}  // namespace ltp
