#include <doctest.h>

#include <string>

#include "inn/config.hpp"
#include "inn/error.hpp"

using namespace inn;

TEST_CASE("an empty file yields the full-scale defaults") {
    const auto parsed = parse_config("");
    const RunConfig& c = parsed.config;
    CHECK(parsed.warnings.empty());
    CHECK(c.data.n == 512);
    CHECK(c.data.m == 2000);
    CHECK(c.base.epochs == 100);
    CHECK(c.base.lr == 1e-3);
    CHECK(c.base.batch == 256);
    CHECK(c.inn.epochs == 100);
    CHECK(c.inn.lr == 1e-5);
    REQUIRE(c.inn.beta.has_value());
    CHECK(*c.inn.beta == 2e-3);
    CHECK(c.mcdrop.samples == 64);
    CHECK(c.probout.lr == 1e-4);
    CHECK(c.eval.sigma_grid.size() == 6);
    CHECK(c.eval.sigma_grid.back() == 0.05);
    CHECK(to_text(c) == to_text(default_config(Scale::Paper)));
}

TEST_CASE("desk scale shrinks the problem") {
    const RunConfig c = default_config(Scale::Desk);
    CHECK(c.data.n == 128);
    CHECK(c.data.m == 500);
    CHECK(c.base.epochs == 30);
    CHECK(c.inn.epochs == 30);
    CHECK(c.mcdrop.samples == 16);
    CHECK_FALSE(c.inn.beta.has_value());
    CHECK(parse_scale("desk") == Scale::Desk);
    CHECK_THROWS_AS(parse_scale("huge"), ConfigError);
}

TEST_CASE("values are parsed, including comments and exponents") {
    const auto parsed = parse_config(
        "# comment line\n"
        "inn.lr = 2.5e-4   # trailing comment\n"
        "inn.beta = auto\n"
        "base.arch = 4,4,1\n"
        "base.dropout = 2:0.5\n"
        "data.jumps = 1,3\n"
        "data.noise = both\n"
        "eval.lambda_grid = 0, 2, 4\n"
        "seed = 17\n");
    const RunConfig& c = parsed.config;
    CHECK(c.inn.lr == 2.5e-4);
    CHECK_FALSE(c.inn.beta.has_value());
    CHECK(c.base.arch == std::vector<std::size_t>{4, 4, 1});
    REQUIRE(c.base.dropout.size() == 1);
    CHECK(c.base.dropout[0] == DropoutSite{2, 0.5});
    CHECK(c.data.jumps_min == 1);
    CHECK(c.data.jumps_max == 3);
    CHECK(c.data.noise == NoiseMode::InputsAndTargets);
    CHECK(c.eval.lambda_grid == std::vector<double>{0, 2, 4});
    CHECK(c.seed == 17);
}

TEST_CASE("beta = 0 is a range error") {
    CHECK_THROWS_AS(parse_config("inn.beta = 0"), ConfigError);
    CHECK_THROWS_AS(parse_config("inn.beta = -1e-3"), ConfigError);
}

TEST_CASE("errors name the line") {
    try {
        parse_config("seed = 1\nnot.a.key = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("not.a.key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("base.epochs = ten"), ConfigError);
    CHECK_THROWS_AS(parse_config("base.epochs = 3.5"), ConfigError);
    CHECK_THROWS_AS(parse_config("base.kernel = 4"), ConfigError);
    CHECK_THROWS_AS(parse_config("just some text"), ConfigError);
    CHECK_THROWS_AS(parse_config("data.jumps = 5,2"), ConfigError);
    CHECK_THROWS_AS(parse_config("base.dropout = 2:1.0"), ConfigError);
}

TEST_CASE("a repeated key keeps the last value and warns") {
    const auto parsed = parse_config("seed = 1\nseed = 2\n");
    CHECK(parsed.config.seed == 2);
    REQUIRE(parsed.warnings.size() == 1);
    CHECK(parsed.warnings[0].find("seed") != std::string::npos);
    CHECK(parsed.warnings[0].find("line 1") != std::string::npos);
}

TEST_CASE("cross-field validation") {
    // Dropout after a conv that does not exist.
    CHECK_THROWS_AS(parse_config("base.arch = 4,1\nbase.dropout = 5:0.5"), ConfigError);
    // Jump range must fit the signal length.
    CHECK_THROWS_AS(parse_config("data.n = 8\ndata.jumps = 2,8", Scale::Desk), ConfigError);
    // Layer mask must match the number of conv layers.
    CHECK_THROWS_AS(parse_config("base.arch = 4,1\nbase.dropout = none\ninn.mask = last:3"), ConfigError);
}

TEST_CASE("to_text round-trips every key") {
    RunConfig c = default_config(Scale::Desk);
    set_config_value(c, "inn.beta", "0.0123456789012345");
    set_config_value(c, "base.lr", "3e-4");
    set_config_value(c, "eval.thresholds", "1,2,4");
    set_config_value(c, "inn.mask", "last:3");
    const std::string text = to_text(c);
    const auto back = parse_config(text, Scale::Paper);
    CHECK(back.warnings.empty());
    CHECK(to_text(back.config) == text);
    CHECK(*back.config.inn.beta == 0.0123456789012345);
    for (const auto& key : config_keys()) CHECK(text.find(key + " = ") != std::string::npos);
}
