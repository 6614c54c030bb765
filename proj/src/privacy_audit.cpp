#include "ltpfleo/privacy_audit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace ltp {
namespace {

using json = nlohmann::ordered_json;

// Rank of the basis restricted to the columns where keep[j] is true.
std::size_t rank_on_columns(const std::vector<RationalRow>& basis, const std::vector<char>& keep) {
    std::vector<RationalRow> m;
    m.reserve(basis.size());
    for (const auto& row : basis) {
        RationalRow r;
        for (std::size_t j = 0; j < row.size(); ++j)
            if (keep[j]) r.push_back(row[j]);
        m.push_back(std::move(r));
    }
    const std::size_t cols = m.empty() ? 0 : m.front().size();
    return rational_rank(m, cols);
}

bool is_zero_column(const std::vector<RationalRow>& basis, std::size_t j) {
    for (const auto& row : basis)
        if (sgn(row[j]) != 0) return false;
    return true;
}

bool parallel_columns(const std::vector<RationalRow>& basis, std::size_t a, std::size_t b) {
    std::optional<Rational> lambda;
    for (const auto& row : basis) {
        const bool za = sgn(row[a]) == 0, zb = sgn(row[b]) == 0;
        if (za != zb) return false;
        if (za) continue;
        Rational q = row[b] / row[a];
        if (!lambda)
            lambda = q;
        else if (*lambda != q)
            return false;
    }
    return true;
}

// Depth-first enumeration of block subsets with total size exactly target.
struct SubsetSearch {
    const std::vector<RationalRow>& basis;
    const std::vector<std::vector<std::size_t>>& blocks;
    std::size_t rank;
    std::uint64_t budget;
    std::uint64_t tested = 0;
    std::vector<char> keep;

    bool search(std::size_t first, std::size_t remaining) {
        if (remaining == 0) {
            if (++tested > budget)
                throw std::runtime_error(fmt::format(
                    "min-support search exceeded its budget of {} subset tests; shrink the audit window "
                    "or the constellation",
                    budget));
            return rank_on_columns(basis, keep) < rank;
        }
        for (std::size_t b = first; b < blocks.size(); ++b) {
            if (blocks[b].size() > remaining) continue;
            for (auto j : blocks[b]) keep[j] = 0;
            const bool hit = search(b + 1, remaining - blocks[b].size());
            for (auto j : blocks[b]) keep[j] = 1;
            if (hit) return true;
        }
        return false;
    }
};

}  // namespace

RowSpace row_space_basis(const std::vector<RationalRow>& rows, std::size_t num_columns) {
    std::vector<RationalRow> m;
    for (const auto& r : rows) {
        if (r.size() != num_columns)
            throw std::invalid_argument(
                fmt::format("row of length {} in a matrix with {} columns", r.size(), num_columns));
        m.push_back(r);
    }
    RowSpace out;
    std::size_t rank = 0;
    for (std::size_t col = 0; col < num_columns && rank < m.size(); ++col) {
        std::size_t p = rank;
        while (p < m.size() && sgn(m[p][col]) == 0) ++p;
        if (p == m.size()) continue;
        std::swap(m[p], m[rank]);
        const Rational pivot = m[rank][col];
        for (auto& v : m[rank]) v /= pivot;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (i == rank || sgn(m[i][col]) == 0) continue;
            const Rational factor = m[i][col];
            for (std::size_t j = col; j < num_columns; ++j) m[i][j] -= factor * m[rank][j];
        }
        out.pivots.push_back(col);
        ++rank;
    }
    m.resize(rank);
    out.basis = std::move(m);
    return out;
}

RowSpace row_space_basis(const ObservationMatrix& matrix) {
    std::vector<RationalRow> rows;
    for (const auto& r : matrix.rows) rows.push_back(r.coefficients);
    return row_space_basis(rows, matrix.num_satellites);
}

std::size_t rational_rank(const std::vector<RationalRow>& rows, std::size_t num_columns) {
    std::vector<RationalRow> m = rows;
    std::size_t rank = 0;
    for (std::size_t col = 0; col < num_columns && rank < m.size(); ++col) {
        std::size_t p = rank;
        while (p < m.size() && sgn(m[p][col]) == 0) ++p;
        if (p == m.size()) continue;
        std::swap(m[p], m[rank]);
        for (std::size_t i = rank + 1; i < m.size(); ++i) {
            if (sgn(m[i][col]) == 0) continue;
            const Rational factor = m[i][col] / m[rank][col];
            for (std::size_t j = col; j < num_columns; ++j) m[i][j] -= factor * m[rank][j];
        }
        ++rank;
    }
    return rank;
}

Rational exact_coefficient(double beta, std::uint64_t member_data, std::uint64_t group_data,
                           InnerWeighting inner) {
    Rational b(beta);  // exact binary64 value
    if (inner == InnerWeighting::sum) return b;
    if (group_data == 0) throw std::invalid_argument("group with no data");
    Rational w(mpz_class(std::to_string(member_data)), mpz_class(std::to_string(group_data)));
    w.canonicalize();
    return b * w;
}

namespace {

std::uint64_t group_data(const EventLogHeader& h, const GroupRecord& g) {
    std::uint64_t s = 0;
    for (auto k : g.members) s += h.data_sizes.at(k);
    return s;
}

}  // namespace

ObservationMatrix build_observation_matrix(const EventLog& log, std::size_t first_round, std::size_t last_round,
                                           const std::vector<SatelliteId>& colluders) {
    const auto& h = log.header;
    ObservationMatrix m;
    m.num_satellites = h.num_satellites();
    m.first_round = first_round;
    m.last_round = last_round;
    for (const auto& r : log.rounds) {
        if (r.round < first_round || r.round > last_round) continue;
        if (r.skipped || r.groups.empty()) continue;
        if (r.dim != h.dim)
            throw std::invalid_argument(fmt::format("round {} has model dimension {}, the window expects {}",
                                                    r.round, r.dim, h.dim));
        ObservationRecord rec;
        rec.round = r.round;
        rec.global_id = r.round;
        rec.coefficients.assign(m.num_satellites, Rational(0));
        for (const auto& g : r.groups) {
            const auto gd = group_data(h, g);
            for (auto k : g.members) rec.coefficients.at(k) = exact_coefficient(g.beta, h.data_sizes[k], gd, h.inner);
        }
        for (auto k : colluders)
            if (k < m.num_satellites) rec.coefficients[k] = 0;
        m.rows.push_back(std::move(rec));
    }
    return m;
}

LeakageReport min_support_leakage(const ObservationMatrix& matrix, std::size_t target_ltp,
                                  const SupportOptions& options) {
    const std::size_t K = matrix.num_satellites;
    if (K > options.max_columns)
        throw std::invalid_argument(fmt::format(
            "{} satellite columns exceed the exact-search limit of {}; shrink the audit window or the constellation",
            K, options.max_columns));
    LeakageReport rep;
    rep.first_round = matrix.first_round;
    rep.last_round = matrix.last_round;
    rep.target_ltp = target_ltp;
    const RowSpace rs = row_space_basis(matrix);
    rep.rank = rs.rank();
    rep.recoverable_basis = rs.basis;
    if (rep.rank == 0) {
        rep.verdict = Verdict::pass;
        return rep;
    }

    // Blocks of mutually parallel nonzero columns.
    std::vector<std::vector<std::size_t>> blocks;
    for (std::size_t j = 0; j < K; ++j) {
        if (is_zero_column(rs.basis, j)) continue;
        bool placed = false;
        for (auto& b : blocks) {
            if (parallel_columns(rs.basis, b.front(), j)) {
                b.push_back(j);
                placed = true;
                break;
            }
        }
        if (!placed) blocks.push_back({j});
    }

    std::vector<char> all(K, 1);
    for (const auto& b : blocks) {
        if (b.size() != 1) continue;
        all[b.front()] = 0;
        ++rep.subsets_tested;
        if (rank_on_columns(rs.basis, all) < rep.rank) rep.individually_exposed.push_back(b.front());
        all[b.front()] = 1;
    }

    // Every basis row is itself recoverable, which caps the search.
    std::size_t upper = K;
    for (const auto& row : rs.basis) {
        const auto s = static_cast<std::size_t>(
            std::count_if(row.begin(), row.end(), [](const Rational& q) { return sgn(q) != 0; }));
        upper = std::min(upper, s);
    }

    if (!rep.individually_exposed.empty()) {
        rep.min_support = 1;
    } else {
        SubsetSearch search{rs.basis, blocks, rep.rank, options.max_subset_tests, 0, std::vector<char>(K, 1)};
        rep.min_support = upper;
        for (std::size_t s = 2; s < upper; ++s) {
            if (search.search(0, s)) {
                rep.min_support = s;
                break;
            }
        }
        rep.subsets_tested += search.tested;
    }
    const bool ok = (!rep.min_support || *rep.min_support >= target_ltp) && rep.individually_exposed.empty();
    rep.verdict = ok ? Verdict::pass : Verdict::fail;
    return rep;
}

void check_partition_structure(LeakageReport& report, const std::vector<std::vector<SatelliteId>>& partitions,
                               const std::vector<std::uint64_t>& data_sizes, InnerWeighting inner) {
    bool ok = true;
    for (const auto& members : partitions) {
        if (members.empty()) continue;
        for (const auto& row : report.recoverable_basis) {
            // row restricted to the partition must equal c * weight for one scalar c.
            const auto k0 = members.front();
            const Rational w0 = inner == InnerWeighting::data ? Rational(mpz_class(std::to_string(data_sizes.at(k0))))
                                                              : Rational(1);
            const Rational c = row.at(k0) / w0;
            for (auto k : members) {
                const Rational wk = inner == InnerWeighting::data
                                        ? Rational(mpz_class(std::to_string(data_sizes.at(k))))
                                        : Rational(1);
                if (row.at(k) != c * wk) ok = false;
            }
        }
    }
    report.partition_structure_ok = ok;
    if (!ok) report.verdict = Verdict::fail;
}

std::vector<double> round_coefficients(const EventLog& log, const RoundRecord& record) {
    const auto& h = log.header;
    std::vector<double> c(h.num_satellites(), 0.0);
    for (const auto& g : record.groups) {
        const auto gd = group_data(h, g);
        for (auto k : g.members)
            c.at(k) = member_coefficient(g.beta, h.data_sizes.at(k), gd, h.inner);
    }
    return c;
}

AttackResult differencing_attack(const Params& global_t, const Params& global_t1,
                                 const std::vector<double>& coefficients_t,
                                 const std::vector<double>& coefficients_t1,
                                 const std::vector<std::vector<SatelliteId>>& blocks,
                                 const std::vector<Params>& ground_truth) {
    if (global_t.size() != global_t1.size()) throw std::invalid_argument("global models differ in dimension");
    const std::size_t K = coefficients_t.size();
    if (coefficients_t1.size() != K) throw std::invalid_argument("coefficient vectors differ in length");

    std::vector<SatelliteId> common, delta;
    for (std::size_t k = 0; k < K; ++k) {
        const bool a = coefficients_t[k] != 0.0, b = coefficients_t1[k] != 0.0;
        if (a && !b)
            throw std::invalid_argument(fmt::format("satellite {} left between the rounds; the difference mixes "
                                                    "departures and arrivals",
                                                    k));
        if (a) common.push_back(k);
        if (b && !a) delta.push_back(k);
    }
    if (delta.empty()) throw std::invalid_argument("participation sets do not differ");

    std::vector<SatelliteId> owner_block;
    if (!blocks.empty()) {
        std::map<SatelliteId, std::size_t> owner;
        for (std::size_t i = 0; i < blocks.size(); ++i)
            for (auto k : blocks[i]) owner[k] = i;
        const auto it = owner.find(delta.front());
        if (it == owner.end()) throw std::invalid_argument("delta satellite is not in any block");
        auto members = blocks[it->second];
        std::sort(members.begin(), members.end());
        if (members != delta)
            throw std::invalid_argument(
                "participation delta is not a single block; the difference would be a sum, not an individual");
    } else if (delta.size() != 1) {
        throw std::invalid_argument(
            fmt::format("participation delta has {} satellites, not a single block", delta.size()));
    }

    AttackResult out;
    out.target = delta;
    out.individual = delta.size() == 1;
    if (!common.empty()) {
        out.ratio = coefficients_t1[common.front()] / coefficients_t[common.front()];
        for (auto k : common) {
            const double r = coefficients_t1[k] / coefficients_t[k];
            if (std::abs(r - out.ratio) > 1e-12 * std::abs(out.ratio))
                throw std::invalid_argument("common coefficients are not proportional; the shared part does not cancel");
        }
    }
    for (auto k : delta) out.target_coefficient += coefficients_t1[k];

    out.estimate.resize(global_t.size());
    for (std::size_t i = 0; i < global_t.size(); ++i)
        out.estimate[i] = (global_t1[i] - out.ratio * global_t[i]) / out.target_coefficient;

    if (!ground_truth.empty()) {
        if (ground_truth.size() != delta.size())
            throw std::invalid_argument("ground truth must hold one model per delta satellite");
        Params truth(global_t.size(), 0.0);
        for (std::size_t q = 0; q < delta.size(); ++q)
            axpy(coefficients_t1[delta[q]] / out.target_coefficient, ground_truth[q], truth);
        out.residual = std::sqrt(distance2(out.estimate, truth));
    }
    return out;
}

bool RunAudit::passed() const {
    return std::all_of(windows.begin(), windows.end(), [](const LeakageReport& r) { return r.verdict == Verdict::pass; });
}

RunAudit ltp_verdict_over_run(const EventLog& log, std::size_t target_ltp, std::size_t window, Exec exec,
                              const std::vector<SatelliteId>& colluders, const SupportOptions& options) {
    if (window < 1) throw std::invalid_argument("audit window must be >= 1 round");
    const std::size_t n = log.rounds.size();
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    if (n <= window) {
        spans.emplace_back(1, n);
    } else {
        for (std::size_t s = 1; s + window - 1 <= n; ++s) spans.emplace_back(s, s + window - 1);
    }
    RunAudit out;
    out.windows.resize(spans.size());
    for_each_index(exec, spans.size(), [&](std::size_t i) {
        const auto m = build_observation_matrix(log, spans[i].first, spans[i].second, colluders);
        auto rep = min_support_leakage(m, target_ltp, options);
        if (log.header.mode == RunMode::ltp)
            check_partition_structure(rep, log.header.partitions, log.header.data_sizes, log.header.inner);
        out.windows[i] = std::move(rep);
    });
    return out;
}

std::string rational_to_string(const Rational& q) { return q.get_str(); }

namespace {

json report_json(const LeakageReport& r) {
    json j;
    j["window"] = {r.first_round, r.last_round};
    j["rank"] = r.rank;
    j["min_support"] = r.min_support ? json(*r.min_support) : json(nullptr);
    j["exposed"] = r.individually_exposed;
    j["verdict"] = r.verdict == Verdict::pass ? fmt::format("LTP-PASS({})", r.target_ltp) : std::string("LTP-FAIL");
    j["partition_structure_ok"] = r.partition_structure_ok ? json(*r.partition_structure_ok) : json(nullptr);
    json basis = json::array();
    for (const auto& row : r.recoverable_basis) {
        json jr = json::array();
        for (const auto& q : row) jr.push_back(rational_to_string(q));
        basis.push_back(std::move(jr));
    }
    j["basis"] = std::move(basis);
    return j;
}

}  // namespace

std::string report_to_json(const LeakageReport& report) { return report_json(report).dump(2); }

std::string run_audit_to_json(const RunAudit& audit) {
    json j;
    j["passed"] = audit.passed();
    j["windows"] = json::array();
    for (const auto& r : audit.windows) j["windows"].push_back(report_json(r));
    return j.dump(2);
}

}  // namespace ltp
