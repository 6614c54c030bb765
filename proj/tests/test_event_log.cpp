#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "ltpfleo/event_log.hpp"

using namespace ltp;

namespace {

std::string text_of(const EventLog& log) {
    std::ostringstream out;
    write_event_log(out, log);
    return out.str();
}

}  // namespace

TEST_CASE("event log round trip") {
    for (auto tol : {StalenessTolerance::fixed(2), StalenessTolerance::always_t()}) {
        auto cfg = ltp::testing::smoke_config();
        cfg.tolerance = tol;
        cfg.rounds = 15;
        cfg.config_hash = "abc123";
        const auto res = run(cfg);
        const auto text = text_of(res.log);
        std::istringstream in(text);
        const auto back = read_event_log(in);
        CHECK(text_of(back) == text);
        CHECK(back.header.config_hash == "abc123");
        CHECK(back.header.alpha == (tol.full_fairness ? std::nullopt : std::optional<std::size_t>(2)));
        CHECK(back.rounds.size() == 15);
    }
}

TEST_CASE("event log validation") {
    auto cfg = ltp::testing::smoke_config();
    cfg.rounds = 3;
    const auto text = text_of(run(cfg).log);

    auto bad_schema = text;
    bad_schema.replace(bad_schema.find("\"schema_version\":1"), 18, "\"schema_version\":2");
    std::istringstream a(bad_schema);
    try {
        read_event_log(a, "log.jsonl");
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("expected 1, found 2") != std::string::npos);
    }

    auto bad_round = text;
    bad_round.replace(bad_round.find("\"round\":2"), 9, "\"round\":7");
    std::istringstream b(bad_round);
    CHECK_THROWS_WITH_AS(read_event_log(b, "log.jsonl"), doctest::Contains("log.jsonl:3"), std::runtime_error);

    std::istringstream c("not json\n");
    CHECK_THROWS_AS(read_event_log(c), std::runtime_error);
    std::istringstream d("");
    CHECK_THROWS_AS(read_event_log(d), std::runtime_error);
}
