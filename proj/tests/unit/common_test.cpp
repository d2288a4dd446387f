#include <doctest.h>

#include <filesystem>
#include <random>

#include "sankofa/common/clock.hpp"
#include "sankofa/common/config.hpp"
#include "sankofa/common/error.hpp"
#include "sankofa/common/text.hpp"

using namespace sankofa;

TEST_CASE("format_half_up rounds ties away from zero despite binary noise") {
  CHECK(format_half_up((0.72 + 0.68 + 0.70 + 0.65) / 4.0, 3) == "0.688");
  CHECK(format_half_up((4.5 + 4.3 + 4.6 + 4.2) / 4.0, 1) == "4.4");
  CHECK(format_half_up((4.3 + 4.1 + 4.4 + 4.0) / 4.0, 1) == "4.2");
  CHECK(format_half_up(0.25, 1) == "0.3");
  CHECK(format_half_up(9.96, 1) == "10.0");
  CHECK(format_half_up(-1.25, 1) == "-1.3");
  CHECK(format_half_up(-0.01, 1) == "0.0");
  CHECK(format_half_up(129.0, 1) == "129.0");
  CHECK(format_half_up(3.0, 0) == "3");
  CHECK(round_half_up(0.6875, 3) == 0.688);
}

TEST_CASE("config parses sections and typed values") {
  const Config c = Config::parse(
      "[runtime]\nstage_timeout_s = 30\nheartbeat_s = 2.5\n\n[backend.mock]\nlanguages = sw yo\n"
      "[backend.inkubalm]\nendpoint = unix:/tmp/x\n");
  CHECK(c.get_int("runtime", "stage_timeout_s", 120) == 30);
  CHECK(c.get_double("runtime", "heartbeat_s", 5) == 2.5);
  CHECK(c.get_int("runtime", "missing", 7) == 7);
  CHECK(c.get_or("backend.mock", "languages", "") == "sw yo");
  CHECK(c.sections_with_prefix("backend.") == std::vector<std::string>{"inkubalm", "mock"});
  CHECK_THROWS_AS(c.get_int("backend.mock", "languages", 0), Error);
  CHECK_THROWS_AS(Config::parse("[a\nb=1"), Error);
  CHECK_THROWS_AS(Config::load("/nonexistent/sankofa.conf"), Error);
}

TEST_CASE("read_lines drops terminators without inventing a trailing line") {
  const auto path = std::filesystem::temp_directory_path() / "sankofa_common_lines.txt";
  write_file(path, "one\r\ntwo\n\nfour\n");
  CHECK(read_lines(path) == std::vector<std::string>{"one", "two", "", "four"});
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_lines(path), Error);
}

TEST_CASE("seeded helpers are reproducible and in range") {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const auto x = uniform_index(a, 3);
    CHECK(x == uniform_index(b, 3));
    CHECK(x < 3);
    const double u = unit_interval(a);
    CHECK(u == unit_interval(b));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("virtual clock advances only when slept on") {
  VirtualClock clock(100);
  CHECK(clock.now() == 100);
  clock.sleep_for(millis(10));
  CHECK(clock.now() == 100 + millis(10));
  clock.sleep_until(50);
  CHECK(clock.now() == 100 + millis(10));
  clock.advance(5);
  CHECK(clock.now() == 100 + millis(10) + 5);
}
