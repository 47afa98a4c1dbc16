// Config file parsing: syntax, typing, coercions, errors, and the
// parse(to_string(t)) == t snapshot guarantee.
#include <string>
#include <vector>

#include "doctest.h"
#include "mvfr/configfile.hpp"
#include "mvfr/errors.hpp"

using mvfr::ConfigTree;
using mvfr::ConfigError;

TEST_CASE("sections, scalars, comments, and arrays parse") {
  const std::string text = R"(# top comment
title = "demo run"   # trailing comment
debug = false

[mcmc]
iterations = 4000
thin = 2

[hyper]
alpha = [10, 10, 10]
rates = [0.5, 1.0]
d0 = -0.5
names = ["a", "b"]
)";
  const auto t = ConfigTree::parse_string(text);
  CHECK(t.get_string("title") == "demo run");
  CHECK(t.get_bool("debug") == false);
  CHECK(t.get_int("mcmc.iterations") == 4000);
  CHECK(t.get_int("mcmc.thin") == 2);
  CHECK(t.get_int_array("hyper.alpha") == std::vector<std::int64_t>{10, 10, 10});
  CHECK(t.get_double_array("hyper.rates") == std::vector<double>{0.5, 1.0});
  CHECK(t.get_double("hyper.d0") == -0.5);
  CHECK(t.get_string_array("hyper.names") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("numeric typing and coercions") {
  const auto t = ConfigTree::parse_string(
      "i = 3\nx = 3.5\ne = 1e-2\nmixed = [1, 2.5]\nsingle = 7\n");
  CHECK(t.get_int("i") == 3);
  CHECK(t.get_double("i") == 3.0);            // int read as double is fine
  CHECK(t.get_double("x") == 3.5);
  CHECK(t.get_double("e") == 0.01);
  CHECK_THROWS_AS((void)t.get_int("x"), ConfigError);  // no silent truncation
  CHECK(t.get_double_array("mixed") == std::vector<double>{1.0, 2.5});
  // scalar accepted where an array is wanted
  CHECK(t.get_int_array("single") == std::vector<std::int64_t>{7});
  CHECK(t.get_double_array("single") == std::vector<double>{7.0});
}

TEST_CASE("string escapes and quote-aware comment stripping") {
  const auto t = ConfigTree::parse_string(R"(s = "a # not comment \"q\" \n tail")");
  CHECK(t.get_string("s") == "a # not comment \"q\" \n tail");
}

TEST_CASE("defaults via the _or getters") {
  const auto t = ConfigTree::parse_string("present = 1\n");
  CHECK(t.get_int_or("present", 9) == 1);
  CHECK(t.get_int_or("absent", 9) == 9);
  CHECK(t.get_double_or("absent", 2.5) == 2.5);
  CHECK(t.get_bool_or("absent", true) == true);
  CHECK(t.get_string_or("absent", "d") == "d");
}

TEST_CASE("malformed input is rejected with the offending line") {
  auto expect_mentions_line = [](const std::string& text, const std::string& line_tag) {
    try {
      ConfigTree::parse_string(text, "cfg.toml");
      FAIL("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("cfg.toml") != std::string::npos);
      CHECK(std::string(e.what()).find(line_tag) != std::string::npos);
    }
  };
  expect_mentions_line("a = 1\nnonsense\n", "2");             // no '='
  expect_mentions_line("a = 1\na = 2\n", "2");                // duplicate key
  expect_mentions_line("x = \n", "1");                        // empty value
  expect_mentions_line("x = 1 2\n", "1");                     // trailing junk
  expect_mentions_line("x = \"open\n", "1");                  // unterminated string
  expect_mentions_line("x = [1, \"a\"]\n", "1");              // mixed array
  expect_mentions_line("[]\ny = 1\n", "1");                   // empty section name
  CHECK_THROWS_AS(ConfigTree::parse_file("/nonexistent/cfg.toml"), ConfigError);
}

TEST_CASE("missing and mistyped keys throw by name") {
  const auto t = ConfigTree::parse_string("x = 1\n");
  try {
    (void)t.get_string("mcmc.seed");
    FAIL("expected throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mcmc.seed") != std::string::npos);
  }
  CHECK_THROWS_AS((void)t.get_string("x"), ConfigError);
  CHECK_THROWS_AS((void)t.get_bool("x"), ConfigError);
}

TEST_CASE("key enumeration by prefix") {
  const auto t = ConfigTree::parse_string("[hyper]\na = 1\nb = 2\n[hyperx]\nc = 3\n");
  CHECK(t.keys_with_prefix("hyper.") == std::vector<std::string>{"hyper.a", "hyper.b"});
  CHECK(t.keys().size() == 3);
}

TEST_CASE("to_string round-trips every value type exactly") {
  ConfigTree t;
  t.set("bare", std::string("top-level"));
  t.set("flag", true);
  t.set("mcmc.iterations", std::int64_t{10000});
  t.set("hyper.b_L", 0.1);
  t.set("hyper.tiny", 5e-324);  // denormal survives %.17g
  t.set("hyper.alpha", std::vector<double>{10.0, 40.0});
  t.set("ranks.K_m_max", std::vector<std::int64_t>{30, 30, 30});
  t.set("io.names", std::vector<std::string>{"x_1.csv", "y.csv"});
  t.set("io.whole", 2.0);  // float-typed integer must stay a double
  const auto back = ConfigTree::parse_string(t.to_string());
  CHECK(back == t);
  CHECK(back.get_double("io.whole") == 2.0);
  CHECK_THROWS_AS((void)back.get_int("io.whole"), ConfigError);

  // a bare key that sorts after section keys must not leak into a section
  ConfigTree u;
  u.set("adaptation.d0", -0.5);
  u.set("family", std::string("jafar"));
  u.set("hyper.a_L", 0.5);
  CHECK(ConfigTree::parse_string(u.to_string()) == u);
}

TEST_CASE("file write/parse round-trip") {
  ConfigTree t;
  t.set("sim.n", std::int64_t{50});
  t.set("sim.p", std::vector<std::int64_t>{100, 200, 300});
  const std::string path = "test_configfile_roundtrip.toml";
  t.write_file(path);
  CHECK(ConfigTree::parse_file(path) == t);
  std::remove(path.c_str());
}
