#include <doctest.h>

#include <sstream>

#include "ltpfleo/config.hpp"

using namespace ltp;

namespace {

ConfigFile parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "test.cfg");
}

}  // namespace

TEST_CASE("parsing and resolution") {
    const auto f = parse("# comment\n[run]\nseed = 7\nrounds = 12 # trailing\n\n[ltp]\nL = 3\nalpha = t\n");
    CHECK(f.values.at("run.seed") == "7");
    const auto rc = resolve_config(f);
    CHECK(rc.sim.seed == 7);
    CHECK(rc.sim.rounds == std::size_t{12});
    CHECK(rc.sim.target_ltp == 3);
    CHECK(rc.sim.tolerance.full_fairness);
    CHECK(rc.sim.constellation.num_satellites() == 50);
    CHECK(rc.hash.size() == 64);
    CHECK(rc.sim.config_hash == rc.hash);
}

TEST_CASE("field-level errors") {
    CHECK_THROWS_WITH_AS(resolve_config(parse("[run]\nseeds = 1\n")), doctest::Contains("run.seeds"), ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(parse("[sgd]\nlr = fast\n")), doctest::Contains("sgd.lr"), ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(parse("[ltp]\nalpha = 0\n")), doctest::Contains("ltp.alpha"), ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(parse("[loss]\nkind = svm\n")), doctest::Contains("loss.kind"), ConfigError);
    CHECK_THROWS_WITH_AS(resolve_config(parse("[run]\ntime_budget_s = 10\nrounds = 5\n")),
                         doctest::Contains("run.rounds"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("[run\nseed = 1\n"), doctest::Contains("test.cfg:1"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("[run]\nseed\n"), doctest::Contains("test.cfg:2"), ConfigError);
    CHECK_THROWS_WITH_AS(parse("[run]\nseed = 1\nseed = 2\n"), doctest::Contains("duplicate"), ConfigError);
}

TEST_CASE("overrides and hashing") {
    auto f = parse("[run]\nseed = 1\n");
    const auto base = resolve_config(f);
    apply_override(f, "run.seed=2");
    const auto changed = resolve_config(f);
    CHECK(changed.sim.seed == 2);
    CHECK(changed.hash != base.hash);
    CHECK_THROWS_AS(apply_override(f, "noequals"), ConfigError);

    // equivalent spellings hash identically
    const auto a = resolve_config(parse("[sgd]\nlr = 0.10\n"));
    const auto b = resolve_config(parse("[sgd]\nlr = 1e-1\n"));
    CHECK(a.hash == b.hash);

    // the documented defaults resolve to the same configuration as an empty file
    const auto defaults = resolve_config(parse(default_config_text()));
    CHECK(defaults.hash == resolve_config(ConfigFile{}).hash);
    CHECK(defaults.canonical.find("ltp.alpha=3\n") != std::string::npos);
}

TEST_CASE("sha256") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
