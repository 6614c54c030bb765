#include "ltpfleo/simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ltpfleo/diagnostics.hpp"
#include "ltpfleo/rng.hpp"

namespace ltp {
namespace {

struct Engine {
    const SimConfig& cfg;
    SimResult res;
    ContactSchedule schedule;
    double horizon = 0.0;
    std::size_t K = 0;

    explicit Engine(const SimConfig& c) : cfg(c) {
        cfg.validate();
        res.data = cfg.prepared ? *cfg.prepared : prepare_data(cfg);
        K = res.data.train.size();
        if (cfg.schedule) {
            schedule = *cfg.schedule;
            if (schedule.num_satellites() != K)
                throw std::invalid_argument(fmt::format("schedule covers {} satellites but {} datasets were given",
                                                        schedule.num_satellites(), K));
            horizon = schedule.horizon_s;
        } else {
            if (cfg.constellation.num_satellites() != K)
                throw std::invalid_argument(fmt::format("constellation has {} satellites but {} datasets were given",
                                                        cfg.constellation.num_satellites(), K));
            horizon = cfg.horizon_s;
            schedule = compute_visibility(cfg.constellation, cfg.station, horizon, cfg.visibility);
        }
        res.initial_model = cfg.initial_model ? *cfg.initial_model
                                              : init_model(cfg.loss, derive_seed(cfg.seed, Stream::init_model));
        if (res.initial_model.size() != cfg.loss.dimension())
            throw std::invalid_argument(fmt::format("initial model has dimension {}, loss expects {}",
                                                    res.initial_model.size(), cfg.loss.dimension()));
        res.final_model = res.initial_model;
        if (cfg.record_trajectory) res.trajectory.push_back(res.initial_model);
    }

    // Doubles the horizon; false once the limit is reached or the schedule is fixed.
    bool extend_horizon() {
        if ((cfg.schedule && !cfg.schedule_extendable) || horizon >= cfg.max_horizon_s) return false;
        horizon = std::min(2.0 * horizon, cfg.max_horizon_s);
        extend_visibility(schedule, cfg.constellation, cfg.station, horizon, cfg.visibility);
        return true;
    }

    double draw_overhead(std::size_t t) const {
        auto rng = make_rng(cfg.seed, Stream::overhead, cfg.replica, t);
        return std::uniform_real_distribution<double>(cfg.overhead_min_s, cfg.overhead_max_s)(rng);
    }

    bool out_of_time(double now) const { return cfg.time_budget_s && now >= *cfg.time_budget_s; }
    std::size_t round_limit() const { return cfg.rounds ? *cfg.rounds : std::numeric_limits<std::size_t>::max(); }

    // Trains every listed satellite from the current global model; slots keep the fan-in order fixed.
    std::map<SatelliteId, Params> train(const std::vector<SatelliteId>& sats, std::size_t t) {
        std::vector<Params> out(sats.size());
        const std::size_t first_step = res.aggregations * cfg.sgd.steps + 1;
        for_each_index(cfg.exec, sats.size(), [&](std::size_t i) {
            SgdConfig s = cfg.sgd;
            s.first_step = first_step;
            s.seed = derive_seed(cfg.seed, Stream::sgd, t, (cfg.replica << 32) | sats[i]);
            out[i] = local_sgd(res.final_model, res.data.train[sats[i]], cfg.loss, s);
        });
        std::map<SatelliteId, Params> m;
        for (std::size_t i = 0; i < sats.size(); ++i) m.emplace(sats[i], std::move(out[i]));
        return m;
    }

    std::vector<double> step_rates() const {
        std::vector<double> r;
        for (std::size_t i = 0; i < cfg.sgd.steps; ++i) r.push_back(cfg.sgd.lr.at(res.aggregations * cfg.sgd.steps + 1 + i));
        return r;
    }

    void after_aggregation(std::size_t t) {
        if (cfg.record_trajectory) {
            res.trajectory.push_back(res.final_model);
            res.aggregation_rounds.push_back(t);
        }
        ++res.aggregations;
    }

    void finish_round(RoundRecord& rec) {
        rec.dim = res.final_model.size();
        if (cfg.evaluate) {
            rec.loss = global_loss(cfg.loss, res.final_model, res.data.train);
            if (cfg.loss.is_classifier() && res.data.holdout.size() > 0)
                rec.accuracy = accuracy(cfg.loss, res.final_model, res.data.holdout);
        }
        if (cfg.record_trace) res.globals.push_back(res.final_model);
        if (cfg.checkpoint_dir && cfg.checkpoint_every > 0 && rec.round % cfg.checkpoint_every == 0)
            write_checkpoint(*cfg.checkpoint_dir / fmt::format("round_{:06d}.bin", rec.round), res.final_model);
        res.simulated_seconds = rec.end_s;
        res.log.rounds.push_back(std::move(rec));
    }

    void finish_run() {
        res.schedule = schedule;
        if (cfg.checkpoint_dir) write_checkpoint(*cfg.checkpoint_dir / "final.bin", res.final_model);
    }

    EventLogHeader base_header(RunMode mode) const {
        EventLogHeader h;
        h.mode = mode;
        h.config_hash = cfg.config_hash;
        h.seed = cfg.seed;
        for (const auto& d : res.data.train) h.data_sizes.push_back(d.size());
        h.dim = res.initial_model.size();
        h.local_steps = cfg.sgd.steps;
        h.inner = cfg.inner;
        return h;
    }
};

std::vector<SatelliteId> members_of(const PartitionSet& ps, const std::vector<PartitionId>& ids) {
    std::vector<SatelliteId> out;
    for (auto g : ids) {
        const auto& m = ps.partitions.at(g).members;
        out.insert(out.end(), m.begin(), m.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

void SimConfig::validate() const {
    if (!schedule || schedule_extendable) {
        constellation.validate();
        station.validate();
    }
    loss.validate();
    if (target_ltp < 1) throw std::invalid_argument("ltp.L must be >= 1");
    if (!partitions) {
        const std::size_t K = schedule && !schedule_extendable ? schedule->num_satellites()
                                                               : constellation.num_satellites();
        if (K % target_ltp != 0)
            throw std::invalid_argument(
                fmt::format("ltp.L = {} does not divide the {} satellites", target_ltp, K));
    }
    if (!tolerance.full_fairness && tolerance.alpha < 1) throw std::invalid_argument("ltp.alpha must be >= 1 or 't'");
    if (rounds.has_value() == time_budget_s.has_value())
        throw std::invalid_argument("set exactly one of run.rounds and run.time_budget_s");
    if (time_budget_s && !(*time_budget_s >= 0.0)) throw std::invalid_argument("run.time_budget_s must be >= 0");
    if (!(overhead_min_s > 0.0) || !(overhead_max_s >= overhead_min_s))
        throw std::invalid_argument("round overhead range must satisfy 0 < min <= max");
    if (sgd.steps < 1) throw std::invalid_argument("sgd.local_steps must be >= 1");
    if (sgd.mini_batch < 1) throw std::invalid_argument("sgd.mini_batch must be >= 1");
    if (!(sgd.lr.c > 0.0)) throw std::invalid_argument("sgd.lr must be > 0");
    if (!(horizon_s > 0.0) || !(max_horizon_s >= horizon_s))
        throw std::invalid_argument("visibility horizon must satisfy 0 < horizon <= max_horizon");
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
        throw std::invalid_argument("data.holdout_fraction must lie in [0, 1)");
    if (!prepared && !data_dir && samples_per_satellite < 2 && data.per_sat_sizes.empty())
        throw std::invalid_argument("data.samples_per_satellite must be >= 2");
}

PreparedData prepare_data(const SimConfig& cfg) {
    const std::size_t K = cfg.constellation.num_satellites();
    std::vector<Dataset> all;
    if (cfg.data_dir) {
        for (std::size_t k = 0; k < K; ++k) {
            const auto path = *cfg.data_dir / fmt::format("sat_{}.csv", k);
            if (!std::filesystem::exists(path))
                throw std::runtime_error(fmt::format("missing dataset file {}", path.string()));
            auto d = load_csv(path);
            d.owner = k;
            if (d.num_features != cfg.loss.num_features)
                throw std::invalid_argument(fmt::format("{} has {} features, loss.num_features is {}", path.string(),
                                                        d.num_features, cfg.loss.num_features));
            all.push_back(std::move(d));
        }
    } else {
        SynthSpec s = cfg.data;
        s.num_features = cfg.loss.num_features;
        s.num_classes = cfg.loss.num_classes;
        if (s.per_sat_sizes.empty()) s.per_sat_sizes.assign(K, cfg.samples_per_satellite);
        if (s.orbit_of_sat.empty())
            for (std::size_t k = 0; k < K; ++k) s.orbit_of_sat.push_back(k / cfg.constellation.sats_per_orbit);
        s.seed = cfg.seed;
        all = synthesize_data(s);
    }
    auto split = split_holdout(all, cfg.holdout_fraction, cfg.seed);
    return {std::move(split.train), std::move(split.holdout)};
}

SimResult run(const SimConfig& config) {
    Engine e(config);
    const auto& cfg = e.cfg;
    auto& res = e.res;
    res.partitions = cfg.partitions ? *cfg.partitions : build_partitions(e.schedule, cfg.target_ltp);
    res.partitions.validate();
    if (res.partitions.num_satellites() != e.K)
        throw std::invalid_argument(fmt::format("partitions cover {} satellites, the run has {}",
                                                res.partitions.num_satellites(), e.K));
    const std::size_t P = res.partitions.size();
    res.participation = ParticipationLog(P);

    auto& h = res.log.header;
    h = e.base_header(RunMode::ltp);
    for (const auto& p : res.partitions.partitions) h.partitions.push_back(p.members);
    h.target_ltp = res.partitions.target_ltp;
    if (!cfg.tolerance.full_fairness) h.alpha = cfg.tolerance.alpha;

    std::map<PartitionId, std::uint64_t> pdata;
    for (const auto& p : res.partitions.partitions) {
        std::uint64_t s = 0;
        for (auto k : p.members) s += res.data.train[k].size();
        pdata[p.id] = s;
    }

    ModelCache cache;
    auto index = index_common_windows(res.partitions, e.schedule);
    double now = 0.0;
    for (std::size_t t = 1; t <= e.round_limit() && !e.out_of_time(now); ++t) {
        const double overhead = e.draw_overhead(t);
        auto cands = select_candidates(res.partitions, e.schedule, index, now, overhead);
        while (cands.empty() && e.extend_horizon()) {
            index = index_common_windows(res.partitions, e.schedule);
            cands = select_candidates(res.partitions, e.schedule, index, now, overhead);
        }
        if (cands.empty()) {
            if (t == 1)
                throw std::runtime_error(fmt::format(
                    "no partition achieves a common visibility window of {:.0f} s within {:.0f} s", overhead, e.horizon));
            warn(fmt::format("round {}: no common visibility left within {:.0f} s; stopping", t, e.horizon));
            break;
        }

        const auto plan = plan_round(res.participation, cands, t, cfg.tolerance);
        const bool warmup = cfg.tolerance.full_fairness && cache.size() < P;
        std::vector<PartitionId> trained = cfg.tolerance.full_fairness ? cands.ids() : plan.filter.selected;
        std::sort(trained.begin(), trained.end());
        std::vector<PartitionId> selected = warmup ? std::vector<PartitionId>{} : plan.filter.selected;

        RoundRecord rec;
        rec.round = t;
        rec.start_s = now;
        rec.primary = cands.primary;
        rec.candidates = cands.ids();
        rec.warmup = warmup;
        rec.trained = trained;
        double end = 0.0;
        for (auto g : trained) {
            const auto* entry = cands.find(g);
            const Interval span{std::max(now, entry->window.start), std::max(now, entry->window.start) + overhead};
            rec.spans.push_back({g, span});
            end = std::max(end, span.end);
        }
        if (trained.empty()) {
            const auto* entry = cands.find(*cands.primary);
            end = std::max(now, entry->window.start) + overhead;
        }
        rec.end_s = end;

        const auto rates = e.step_rates();
        auto local = e.train(members_of(res.partitions, trained), t);
        for (auto g : trained) {
            std::vector<Params> models;
            for (auto k : res.partitions.partitions[g].members) models.push_back(local.at(k));
            fetch_or_cache(g, cache, std::move(models), t);
        }

        if (!selected.empty()) {
            const auto weights = compute_weights(selected, plan.frequencies, pdata);
            std::vector<PartitionModels> models;
            PrivateRound pr{t, {}};
            for (const auto& w : weights.entries) {
                const auto contrib = fetch_or_cache(w.partition, cache, std::nullopt, t);
                if (!contrib) throw std::logic_error(fmt::format("partition {} selected without models", w.partition));
                PartitionModels pm{w.partition, {}};
                const auto& members = res.partitions.partitions[w.partition].members;
                for (std::size_t q = 0; q < members.size(); ++q) {
                    pm.members.push_back({members[q], res.data.train[members[q]].size(), &(*contrib->member_models)[q]});
                    if (cfg.record_trace) pr.local_models.emplace(members[q], (*contrib->member_models)[q]);
                }
                models.push_back(std::move(pm));
                GroupRecord gr;
                gr.partition = w.partition;
                gr.members = members;
                gr.beta = w.beta;
                gr.gamma = w.gamma;
                gr.frequency = w.frequency;
                gr.age = contrib->staleness_age;
                gr.cached = std::find(trained.begin(), trained.end(), w.partition) == trained.end();
                rec.groups.push_back(std::move(gr));
            }
            rec.data_size_fallback = weights.data_size_fallback;
            for (auto g : weights.weight_starved)
                warn(fmt::format("round {}: partition {} has frequency 0 and receives zero weight", t, g));
            res.final_model = aggregate(weights, models, res.partitions, cfg.inner);
            if (!res.final_model.empty() && !std::isfinite(norm(res.final_model)))
                throw std::runtime_error(fmt::format("round {}: global model diverged", t));
            if (cfg.record_trajectory) res.step_rates.push_back(rates);
            e.after_aggregation(t);
            if (cfg.record_trace) res.trace.push_back(std::move(pr));
        } else if (cfg.record_trace) {
            res.trace.push_back(PrivateRound{t, {}});
        }

        rec.selected = selected;
        rec.promoted = warmup ? std::vector<PartitionId>{} : plan.filter.promoted;
        rec.skipped = selected.empty();
        res.participation.record_round(selected, t);
        now = end;
        e.finish_round(rec);
    }
    e.finish_run();
    return std::move(e.res);
}

SimResult run_baseline(const SimConfig& config) {
    Engine e(config);
    const auto& cfg = e.cfg;
    auto& res = e.res;
    std::vector<std::vector<SatelliteId>> singles;
    for (SatelliteId k = 0; k < e.K; ++k) singles.push_back({k});
    res.partitions = make_partition_set(singles);
    res.participation = ParticipationLog(e.K);
    auto& h = res.log.header;
    h = e.base_header(RunMode::baseline);
    h.partitions = singles;
    h.target_ltp = 1;
    h.inner = InnerWeighting::data;

    double now = 0.0;
    for (std::size_t t = 1; t <= e.round_limit() && !e.out_of_time(now); ++t) {
        const double overhead = e.draw_overhead(t);
        // Earliest anchor at which some satellite still has overhead seconds of visibility.
        auto find_anchor = [&]() -> std::optional<double> {
            std::optional<double> best;
            for (SatelliteId k = 0; k < e.K; ++k)
                for (const auto& w : e.schedule.windows[k]) {
                    const double a = std::max(now, w.start);
                    if (w.end - a >= overhead) {
                        if (!best || a < *best) best = a;
                        break;
                    }
                }
            return best;
        };
        auto anchor = find_anchor();
        while (!anchor && e.extend_horizon()) anchor = find_anchor();
        if (!anchor) {
            if (t == 1)
                throw std::runtime_error(
                    fmt::format("no satellite is visible for {:.0f} s within {:.0f} s", overhead, e.horizon));
            warn(fmt::format("round {}: no visibility left within {:.0f} s; stopping", t, e.horizon));
            break;
        }
        std::vector<SatelliteId> participants;
        for (SatelliteId k = 0; k < e.K; ++k)
            for (const auto& w : e.schedule.windows[k])
                if (w.start <= *anchor && w.end >= *anchor + overhead) {
                    participants.push_back(k);
                    break;
                }

        RoundRecord rec;
        rec.round = t;
        rec.start_s = now;
        rec.end_s = *anchor + overhead;
        rec.spans.push_back({std::nullopt, Interval{*anchor, *anchor + overhead}});

        auto local = e.train(participants, t);
        std::uint64_t group_data = 0;
        for (auto k : participants) group_data += res.data.train[k].size();
        const auto rates = e.step_rates();
        Params next(res.final_model.size(), 0.0);
        for (auto k : participants)
            axpy(member_coefficient(1.0, res.data.train[k].size(), group_data, InnerWeighting::data), local.at(k), next);
        res.final_model = std::move(next);
        PrivateRound pr{t, {}};
        if (cfg.record_trace) {
            pr.local_models = std::move(local);
            res.trace.push_back(std::move(pr));
        }
        if (cfg.record_trajectory) res.step_rates.push_back(rates);
        e.after_aggregation(t);

        GroupRecord gr;
        gr.members = participants;
        gr.beta = 1.0;
        gr.gamma = 1.0;
        rec.groups.push_back(std::move(gr));
        rec.selected = participants;
        rec.trained = participants;
        rec.candidates = participants;
        res.participation.record_round(participants, t);
        now = rec.end_s;
        e.finish_round(rec);
    }
    e.finish_run();
    return std::move(e.res);
}

std::vector<SimResult> run_replicas(const SimConfig& config, std::size_t count, Exec exec) {
    SimConfig base = config;
    if (!base.prepared) base.prepared = prepare_data(base);
    if (!base.initial_model) base.initial_model = init_model(base.loss, derive_seed(base.seed, Stream::init_model));
    std::vector<SimResult> out(count);
    if (count == 0) return out;
    {
        SimConfig c = base;
        c.replica = 0;
        c.checkpoint_dir.reset();
        out[0] = run(c);
    }
    // Later replicas reuse the first one's partitions and start from the schedule it needed.
    if (!base.partitions) base.partitions = out[0].partitions;
    if (!base.schedule) {
        base.schedule = out[0].schedule;
        base.schedule_extendable = true;
    }
    for_each_index(exec, count - 1, [&](std::size_t i) {
        const std::size_t r = i + 1;
        SimConfig c = base;
        c.replica = r;
        c.exec = Exec::serial;
        c.checkpoint_dir.reset();
        out[r] = run(c);
    });
    return out;
}

}  // namespace ltp
