#include <doctest.h>

#include "tamperlab/core/errors.hpp"
#include "tamperlab/io/config_file.hpp"

using namespace tamperlab;

TEST_CASE("parse sections, values, comments") {
    auto cfg = ConfigFile::parse_string(R"(
# a comment
[synth]
train_count = 2000
feather = false

[train]
base_lr = 2e-4
epochs = 20
; another comment
)");
    CHECK(cfg.get_int("synth", "train_count", 0) == 2000);
    CHECK(cfg.get_bool("synth", "feather", true) == false);
    CHECK(cfg.get_double("train", "base_lr", 0) == doctest::Approx(2e-4));
    CHECK(cfg.get_int("train", "epochs", 0) == 20);
    CHECK(cfg.get("train", "missing", "dflt") == "dflt");
    CHECK(cfg.has("train", "epochs"));
    CHECK(!cfg.has("train", "nothing"));
}

TEST_CASE("dump is canonical and reparsable") {
    ConfigFile cfg;
    cfg.set("b", "y", "2");
    cfg.set("a", "x", "1");
    cfg.set("a", "w", "0");
    const std::string text = cfg.dump();
    CHECK(text == "[a]\nw = 0\nx = 1\n\n[b]\ny = 2\n");
    auto again = ConfigFile::parse_string(text);
    CHECK(again.dump() == text);
}

TEST_CASE("malformed input raises ConfigError") {
    CHECK_THROWS_AS(ConfigFile::parse_string("[unterminated\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_string("novalue\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_string("= 3\n"), ConfigError);
    auto cfg = ConfigFile::parse_string("[a]\nx = notanumber\n");
    CHECK_THROWS_AS(cfg.get_int("a", "x", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("a", "x", false), ConfigError);
}

TEST_CASE("missing file raises ConfigError") {
    CHECK_THROWS_AS(ConfigFile::parse_file("/nonexistent/config.ini"), ConfigError);
}
