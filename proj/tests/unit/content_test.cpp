#include <doctest.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <thread>

#include "sankofa/common/text.hpp"
#include "sankofa/content/content.hpp"

using namespace sankofa;
using namespace sankofa::content;

namespace {

ModelBackendDescriptor desc(std::string name, std::set<std::string> langs) {
  return {std::move(name), std::move(langs), 2048, ""};
}

std::vector<ScriptedToken> uniform_script(int n, std::int64_t gap_ms) {
  std::vector<ScriptedToken> s;
  for (int i = 0; i < n; ++i) s.push_back({gap_ms, "t" + std::to_string(i) + " "});
  return s;
}

GenerationRequest request(std::string lang = "sw", std::size_t max_tokens = 64) {
  GenerationRequest r;
  r.language = std::move(lang);
  r.subject = "fractions";
  r.grade = 5;
  r.max_tokens = max_tokens;
  return r;
}

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::InvalidArgument;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sankofa_content_" + name);
}

}  // namespace

TEST_CASE("register_backend: lookup by name and language, duplicates rejected") {
  BackendRegistry reg;
  reg.register_backend(std::make_shared<MockBackend>(desc("mock", {"sw", "yo", "zu", "am"}),
                                                     uniform_script(1, 0)));
  CHECK(reg.for_language("sw") == std::vector<std::string>{"mock"});
  CHECK(reg.resolve("mock")->descriptor().name == "mock");
  CHECK(code_of([&] {
          reg.register_backend(
              std::make_shared<MockBackend>(desc("mock", {"sw"}), uniform_script(1, 0)));
        }) == Errc::DuplicateName);

  reg.register_backend(std::make_shared<MockBackend>(desc("zeta", {"sw"}), uniform_script(1, 0)));
  reg.register_backend(std::make_shared<MockBackend>(desc("alpha", {"sw", "ha"}), uniform_script(1, 0)));
  CHECK(reg.for_language("sw") == std::vector<std::string>{"alpha", "mock", "zeta"});
  CHECK(reg.for_language("ha") == std::vector<std::string>{"alpha"});
  CHECK(reg.languages().count("am") == 1);
  CHECK(code_of([&] { reg.resolve("nope"); }) == Errc::BackendUnavailable);
  CHECK_THROWS_AS(reg.register_backend(std::make_shared<MockBackend>(desc("empty", {}),
                                                                     uniform_script(1, 0))),
                  Error);
}

TEST_CASE("select_model: argmax, errors, exploration frequency and reproducibility") {
  BackendRegistry reg;
  reg.register_backend(std::make_shared<MockBackend>(desc("inkubalm", {"sw", "yo"}), uniform_script(1, 0)));
  reg.register_backend(std::make_shared<MockBackend>(desc("lugha-llama", {"sw", "am"}), uniform_script(1, 0)));

  SelectionTable table;
  table.epsilon = 0.0;
  table.scores[{"sw", "inkubalm"}] = 0.9;
  table.scores[{"sw", "lugha-llama"}] = 0.5;
  CHECK(select_model(reg, "sw", table, std::uint64_t{1}) == "inkubalm");
  CHECK(code_of([&] { select_model(reg, "xx", table, std::uint64_t{1}); }) ==
        Errc::NoBackendForLanguage);

  // Rescaling every score for the language never changes the greedy choice.
  SelectionTable scaled = table;
  for (auto& [key, s] : scaled.scores) s *= 0.37;
  CHECK(select_model(reg, "sw", scaled, std::uint64_t{9}) == "inkubalm");

  SelectionTable tie;
  tie.epsilon = 0.0;
  CHECK(select_model(reg, "sw", tie, std::uint64_t{3}) == "inkubalm");

  SelectionTable explore;
  explore.epsilon = 1.0;
  std::mt19937_64 a(42), b(42);
  int inkuba = 0;
  std::vector<std::string> first, second;
  for (int i = 0; i < 1000; ++i) {
    first.push_back(select_model(reg, "sw", explore, a));
    second.push_back(select_model(reg, "sw", explore, b));
    inkuba += first.back() == "inkubalm";
  }
  CHECK(first == second);
  CHECK(inkuba >= 450);
  CHECK(inkuba <= 550);
}

TEST_CASE("update_selection: formula, fixed point, closed form, bounds") {
  SelectionTable t;
  t.alpha = 0.1;
  t.scores[{"sw", "m"}] = 0.5;
  CHECK(update_selection(t, "sw", "m", 1.0) == doctest::Approx(0.55).epsilon(1e-15));
  t.scores[{"sw", "m"}] = 0.3;
  CHECK(update_selection(t, "sw", "m", 0.3) == 0.3);
  CHECK(code_of([&] { update_selection(t, "sw", "m", 1.5); }) == Errc::RewardOutOfRange);
  CHECK(code_of([&] { update_selection(t, "sw", "m", -0.1); }) == Errc::RewardOutOfRange);

  SelectionTable h;
  h.alpha = 0.5;
  const double expected[] = {0.5, 0.75, 0.875};
  for (int k = 1; k <= 12; ++k) {
    const double s = update_selection(h, "yo", "m", 1.0);
    CHECK(std::fabs(s - (1.0 - std::pow(0.5, k))) < 1e-15);
    if (k <= 3) CHECK(s == expected[k - 1]);
  }

  std::mt19937_64 rng(4);
  SelectionTable fuzz;
  for (int i = 0; i < 5000; ++i) {
    fuzz.alpha = 0.01 + 0.99 * unit_interval(rng);
    const double s = update_selection(fuzz, "am", "m" + std::to_string(i % 3), unit_interval(rng));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("generate_stream: script replay with timestamps and truncation") {
  VirtualClock clock(millis(1000));
  MockBackend mock(desc("mock", {"sw"}), uniform_script(5, 10));
  std::vector<std::size_t> seen;
  const auto content = generate_stream(request(), mock, clock,
                                       [&](const TokenEvent& e) { seen.push_back(e.index); });
  REQUIRE(content.events.size() == 5);
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(content.finish_reason == FinishReason::Stop);
  CHECK(content.request_sent_at == millis(1000));
  CHECK(content.events[0].arrived_at - content.request_sent_at >= millis(10));
  for (std::size_t i = 1; i < 5; ++i) {
    CHECK(content.events[i].index == i);
    CHECK(content.events[i].arrived_at - content.events[i - 1].arrived_at >= millis(10));
  }
  CHECK(content.text == "t0 t1 t2 t3 t4 ");

  const auto truncated = generate_stream(request("sw", 3), mock, clock);
  CHECK(truncated.events.size() == 3);
  CHECK(truncated.finish_reason == FinishReason::MaxTokens);

  CHECK(code_of([&] { generate_stream(request("yo"), mock, clock); }) == Errc::NoBackendForLanguage);
}

TEST_CASE("generate_stream: real clock never reports gaps below the script") {
  MockBackend mock(desc("mock", {"sw"}), uniform_script(5, 10));
  const auto content = generate_stream(request(), mock, SteadyClock::instance());
  REQUIRE(content.events.size() == 5);
  CHECK(content.events[0].arrived_at - content.request_sent_at >= millis(10));
  for (std::size_t i = 1; i < 5; ++i) {
    CHECK(content.events[i].arrived_at - content.events[i - 1].arrived_at >= millis(10));
  }
}

TEST_CASE("generate_stream: deadline keeps partial events") {
  VirtualClock clock;
  MockBackend mock(desc("mock", {"sw"}), uniform_script(5, 10));
  auto r = request();
  r.deadline = millis(25);
  try {
    generate_stream(r, mock, clock);
    FAIL("expected DeadlineExceeded");
  } catch (const GenerationError& e) {
    CHECK(e.code() == Errc::DeadlineExceeded);
    CHECK(e.partial().events.size() >= 2);
    CHECK(e.partial().events.size() <= 3);
    CHECK(e.partial().finish_reason == FinishReason::Error);
    CHECK(e.partial().text == "t0 t1 ");
  }
}

TEST_CASE("generate_stream: backend failures surface as GenerationError") {
  VirtualClock clock;
  MockBackend mock(desc("mock", {"sw"}), uniform_script(5, 1));
  mock.fail_after(2);
  try {
    generate_stream(request(), mock, clock);
    FAIL("expected failure");
  } catch (const GenerationError& e) {
    CHECK(e.code() == Errc::BackendUnavailable);
    CHECK(e.partial().events.size() == 2);
  }
  mock.fail_after(std::nullopt);
  mock.fail_on_open(true);
  CHECK(code_of([&] { generate_stream(request(), mock, clock); }) == Errc::BackendUnavailable);
}

TEST_CASE("property: text equals the concatenation of event texts on fuzzed scripts") {
  std::mt19937_64 rng(77);
  VirtualClock clock;
  const std::string alphabet = "ab \n\\xyz\xE1\x8D\xA2";
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ScriptedToken> script;
    const std::size_t n = 1 + uniform_index(rng, 30);
    for (std::size_t i = 0; i < n; ++i) {
      std::string token;
      const std::size_t len = uniform_index(rng, 5);
      for (std::size_t j = 0; j < len; ++j) token += alphabet[uniform_index(rng, alphabet.size())];
      script.push_back({static_cast<std::int64_t>(uniform_index(rng, 20)), token});
    }
    // Round-trip through the script file format as well.
    std::string file;
    for (const auto& t : script) file += std::to_string(t.delay_ms) + " " + escape_token(t.text) + "\n";
    const auto parsed = parse_mock_script(file);
    REQUIRE(parsed.size() == script.size());
    for (std::size_t i = 0; i < n; ++i) CHECK(parsed[i].text == script[i].text);

    MockBackend mock(desc("mock", {"sw"}), parsed);
    const auto content = generate_stream(request("sw", 1 + uniform_index(rng, 40)), mock, clock);
    std::string joined;
    for (const auto& e : content.events) joined += e.text;
    CHECK(content.text == joined);
    CHECK(content.events.size() <= content.request.max_tokens);
    for (std::size_t i = 1; i < content.events.size(); ++i) {
      CHECK(content.events[i].arrived_at >= content.events[i - 1].arrived_at);
    }
  }
}

TEST_CASE("mock lesson script is deterministic per seed") {
  auto r = request();
  const auto a = mock_lesson_script(r, 0, 0);
  const auto b = mock_lesson_script(r, 0, 0);
  REQUIRE(a.size() == b.size());
  std::string ta, tb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ta += a[i].text;
    tb += b[i].text;
  }
  CHECK(ta == tb);
  r.seed = 1;
  std::string tc;
  for (const auto& t : mock_lesson_script(r, 0, 0)) tc += t.text;
  CHECK(tc != ta);
  CHECK(ta.find("\n\n") != std::string::npos);
}

TEST_CASE("stream client: reads frames from a local socket, fails after retries") {
  const auto sock_path = temp_path("backend.sock");
  std::filesystem::remove(sock_path);
  const int listener = ::socket(AF_UNIX, SOCK_STREAM, 0);
  REQUIRE(listener >= 0);
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  std::strcpy(addr.sun_path, sock_path.c_str());
  REQUIRE(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  REQUIRE(::listen(listener, 1) == 0);

  std::string received;
  std::thread server([&] {
    const int conn = ::accept(listener, nullptr, nullptr);
    char buf[1024];
    while (received.find('\n') == std::string::npos) {
      const auto n = ::recv(conn, buf, sizeof(buf), 0);
      if (n <= 0) break;
      received.append(buf, static_cast<std::size_t>(n));
    }
    const std::string reply = "T Habari\nT \\syako\nT \\n\\nMwisho.\nDONE stop\n";
    ::send(conn, reply.data(), reply.size(), 0);
    ::close(conn);
  });

  auto d = desc("inkubalm", {"sw"});
  d.endpoint = "unix:" + sock_path.string();
  StreamClientBackend client(d);
  const auto content = generate_stream(request(), client, SteadyClock::instance());
  server.join();
  ::close(listener);
  std::filesystem::remove(sock_path);

  CHECK(content.text == "Habari yako\n\nMwisho.");
  CHECK(content.events.size() == 3);
  CHECK(content.finish_reason == FinishReason::Stop);
  CHECK(received.find("\"language\":\"sw\"") != std::string::npos);

  VirtualClock clock;
  StreamClientBackend missing(d, 2, millis(50));
  CHECK(code_of([&] { generate_stream(request(), missing, clock); }) == Errc::BackendUnavailable);
  CHECK(clock.now() == millis(100));  // two retries with backoff
}

TEST_CASE("adapt: empty input, per-paragraph summary, glossary hits") {
  const AdaptationProfile none{"sw", {}};
  const auto empty = adapt("  \n\n ", none);
  CHECK(empty.summary.empty());
  CHECK(empty.has(AdaptationFlag::EmptyInput));

  const std::string text =
      "Fractions name parts. They have two numbers.\n\n"
      "The numerator is on top! It counts parts.\n\n"
      "The denominator is below? It counts all parts";
  const auto three = adapt(text, none);
  CHECK(three.summary ==
        "Fractions name parts. The numerator is on top! The denominator is below?");
  CHECK_FALSE(three.has(AdaptationFlag::EmptyInput));

  AdaptationConfig capped;
  capped.summary_cap = 2;
  CHECK(adapt(text, none, capped).summary == "Fractions name parts. The numerator is on top!");

  const AdaptationProfile profile{
      "sw",
      {{"numerator", "kiasi"}, {"mango", "embe"}, {"denominator", "kigawanyo"}, {"sum", "jumla"},
       {"whole", "nzima"}}};
  const auto glossed = adapt(text, profile);
  // Substring-scan oracle over the glossary.
  std::vector<std::pair<std::string, std::string>> expected;
  for (const auto& entry : profile.glossary) {
    if (text.find(entry.first) != std::string::npos) expected.push_back(entry);
  }
  CHECK(expected.size() == 2);
  CHECK(glossed.localized_terms == expected);
  CHECK(glossed.summary.find("kiasi") != std::string::npos);
  CHECK(adapt(text, profile).summary == glossed.summary);

  const auto untranslated = adapt(text, AdaptationProfile{"sw", {{"numerator", ""}}});
  CHECK(untranslated.has(AdaptationFlag::UntranslatedTerm));
  AdaptationConfig tight;
  tight.max_sentence_bytes = 10;
  CHECK(adapt(text, none, tight).has(AdaptationFlag::LengthAnomaly));

  const auto amharic = adapt("\xE1\x88\xB0\xE1\x88\x8B\xE1\x88\x9D\xE1\x8D\xA2 more", none);
  CHECK(amharic.summary == "\xE1\x88\xB0\xE1\x88\x8B\xE1\x88\x9D\xE1\x8D\xA2");
}

TEST_CASE("load_corpus: alignment, mismatches and discovery") {
  const auto cand = temp_path("sw.txt");
  std::string ten, nine;
  for (int i = 0; i < 10; ++i) ten += "line " + std::to_string(i) + "\n";
  for (int i = 0; i < 9; ++i) nine += "ref " + std::to_string(i) + "\n";
  write_file(cand, ten);
  write_file(temp_path("sw.ref0"), ten);
  std::filesystem::remove(temp_path("sw.ref1"));

  const auto single = load_corpus(cand);
  CHECK(single.pairs.size() == 10);
  CHECK(single.pairs[3].references == std::vector<std::string>{"line 3"});

  write_file(temp_path("sw.ref1"), ten + "");
  const auto both = load_corpus(cand, {temp_path("sw.ref1"), temp_path("sw.ref0")});
  CHECK(both.pairs[0].references.size() == 2);
  CHECK(discover_references(cand).size() == 2);

  write_file(temp_path("sw.ref1"), nine);
  CHECK(code_of([&] { load_corpus(cand); }) == Errc::LineCountMismatch);
  CHECK(code_of([&] { load_corpus(temp_path("missing.txt"), {cand}); }) == Errc::UnreadableFile);
  for (auto n : {"sw.txt", "sw.ref0", "sw.ref1"}) std::filesystem::remove(temp_path(n));
}
