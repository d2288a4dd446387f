#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <thread>

#include "sankofa/common/text.hpp"
#include "sankofa/metrics/metrics.hpp"

using namespace sankofa;
using namespace sankofa::metrics;

namespace {

const std::filesystem::path kSource = SANKOFA_SOURCE_DIR;

InferenceTrace trace_from_gaps(Nanos ttft, const std::vector<Nanos>& gaps) {
  InferenceTrace t;
  t.request_sent_at = 0;
  Nanos at = ttft;
  t.token_times.push_back(at);
  for (Nanos g : gaps) t.token_times.push_back(at += g);
  t.completed_at = at;
  return t;
}

content::ModelBackendDescriptor desc(const std::string& name) { return {name, {"sw"}, 2048, ""}; }

std::shared_ptr<content::MockBackend> uniform_backend(const std::string& name, std::int64_t first,
                                                      std::int64_t gap, int count) {
  std::vector<content::ScriptedToken> script;
  for (int i = 0; i < count; ++i) script.push_back({i == 0 ? first : gap, "x "});
  return std::make_shared<content::MockBackend>(desc(name), script);
}

BenchmarkCell cell_of(std::string device, std::string model, std::shared_ptr<content::Backend> b) {
  BenchmarkCell c;
  c.device = std::move(device);
  c.model = std::move(model);
  c.ttft_backend = c.itl_backend = c.tps_backend = std::move(b);
  return c;
}

BenchmarkPlan plan_of(std::vector<BenchmarkCell> cells, int runs = 5, int warmup = 2) {
  BenchmarkPlan plan;
  plan.cells = std::move(cells);
  content::GenerationRequest r;
  r.language = "sw";
  r.max_tokens = 4096;
  plan.requests = {r};
  plan.runs = runs;
  plan.warmup_runs = warmup;
  return plan;
}

// Independent percentile: weights on the two neighbouring order statistics.
double percentile_oracle(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return (1.0 - (h - lo)) * v[i] + (h - lo) * v[j];
}

}  // namespace

TEST_CASE("record_trace copies arrival stamps, keeps partial traces") {
  VirtualClock clock;
  auto backend = uniform_backend("m", 10, 10, 5);
  content::GenerationRequest r;
  r.language = "sw";
  const auto content = content::generate_stream(r, *backend, clock);
  const auto trace = record_trace(content);
  REQUIRE(trace.token_times.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(trace.token_times[i] == content.events[i].arrived_at);
  CHECK_FALSE(trace.error);

  backend->fail_after(2);
  try {
    content::generate_stream(r, *backend, clock);
    FAIL("expected failure");
  } catch (const content::GenerationError& e) {
    const auto partial = record_trace(e);
    CHECK(partial.token_times.size() == 2);
    CHECK(partial.error);
  }
  CHECK_THROWS_AS(record_trace(content::GeneratedContent{}), Error);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<content::ScriptedToken> script(1 + uniform_index(rng, 40));
    for (auto& t : script) t = {static_cast<std::int64_t>(uniform_index(rng, 50)), "w "};
    content::MockBackend mock(desc("m"), script);
    const auto c = content::generate_stream(r, mock, clock);
    const auto t = record_trace(c);
    CHECK(t.token_times.size() == c.events.size());
    CHECK(std::is_sorted(t.token_times.begin(), t.token_times.end()));
    CHECK(t.request_sent_at <= t.token_times.front());
    CHECK(t.token_times.back() <= t.completed_at);
  }
}

TEST_CASE("compute_metrics: worked examples") {
  const auto ttft = compute_metrics(trace_from_gaps(millis(129), {millis(33)}));
  CHECK(ttft.ttft_ms == 129.0);
  CHECK(ttft.itl_ms.mean == 33.0);

  const auto uniform = compute_metrics(trace_from_gaps(millis(5), std::vector<Nanos>(100, millis(10))));
  CHECK(uniform.token_count == 101);
  CHECK(uniform.itl_ms.mean == 10.0);
  CHECK(uniform.throughput_tps == 100.0);

  const auto mixed =
      compute_metrics(trace_from_gaps(millis(1), {millis(10), millis(20), millis(30), millis(40)}));
  CHECK(mixed.itl_ms.mean == 25.0);
  CHECK(mixed.itl_ms.p50 == 25.0);
  CHECK(mixed.itl_ms.p95 == doctest::Approx(38.5).epsilon(1e-12));
  CHECK(mixed.throughput_tps == 40.0);

  const auto single = compute_metrics(trace_from_gaps(millis(7), {}));
  CHECK(single.token_count == 1);
  CHECK(single.throughput_tps == 0.0);
  CHECK((single.flags & kSingleToken) != 0);
}

TEST_CASE("property: fuzzed traces match closed forms and the percentile oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Nanos sent = static_cast<Nanos>(uniform_index(rng, 1'000'000'000));
    const Nanos ttft = static_cast<Nanos>(uniform_index(rng, 2'000'000'000));
    const std::size_t n = 1 + uniform_index(rng, 300);
    InferenceTrace t;
    t.request_sent_at = sent;
    Nanos at = sent + ttft;
    t.token_times.push_back(at);
    std::vector<double> gaps_ms;
    for (std::size_t i = 1; i < n; ++i) {
      const Nanos gap = static_cast<Nanos>(uniform_index(rng, 400'000'000));
      at += gap;
      t.token_times.push_back(at);
      gaps_ms.push_back(static_cast<double>(gap) / 1e6);
    }
    t.completed_at = at;
    const auto m = compute_metrics(t);
    const Nanos span = t.token_times.back() - t.token_times.front();
    CHECK(m.ttft_ms == static_cast<double>(ttft) / 1e6);
    CHECK(m.token_count == n);
    if (n == 1) continue;
    CHECK(m.itl_ms.mean == static_cast<double>(span) / static_cast<double>(n - 1) / 1e6);
    if (span > 0) CHECK(m.throughput_tps == static_cast<double>(n - 1) * 1e9 / static_cast<double>(span));
    CHECK(std::fabs(m.itl_ms.p50 - percentile_oracle(gaps_ms, 0.50)) < 1e-9);
    CHECK(std::fabs(m.itl_ms.p95 - percentile_oracle(gaps_ms, 0.95)) < 1e-9);
    CHECK(m.itl_ms.p50 <= m.itl_ms.p95);
  }
}

TEST_CASE("median is order independent") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + uniform_index(rng, 9));
    for (auto& x : v) x = static_cast<double>(uniform_index(rng, 1000)) / 7.0;
    const double m = median(v);
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(median(v) == m);
  }
  CHECK(median({1, 2, 100, 3, 4}) == 3);
  CHECK(median({1, 2, 3, 4}) == 2.5);
}

TEST_CASE("summarize_power: constant, halves, irregular step oracle, scaling") {
  CHECK(summarize_power({{0, 8.4}, {millis(100), 8.4}, {millis(250), 8.4}}, 0, millis(1000)).avg_watts ==
        8.4);
  CHECK(summarize_power({{0, 8.0}, {millis(500), 8.8}}, 0, millis(1000)).avg_watts ==
        doctest::Approx(8.4).epsilon(1e-12));
  CHECK_THROWS_AS(summarize_power({{millis(5), 1.0}}, millis(10), millis(20)), Error);

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::int64_t start_ms = static_cast<std::int64_t>(uniform_index(rng, 50));
    const std::int64_t end_ms = start_ms + 1 + static_cast<std::int64_t>(uniform_index(rng, 500));
    std::vector<PowerSample> samples;
    std::vector<std::pair<std::int64_t, double>> inside;
    const std::size_t k = 1 + uniform_index(rng, 8);
    for (std::size_t i = 0; i < k; ++i) {
      const auto t = start_ms + static_cast<std::int64_t>(uniform_index(rng, end_ms - start_ms + 1));
      const double w = static_cast<double>(uniform_index(rng, 20000)) / 1000.0;
      samples.push_back({millis(t), w});
      inside.push_back({t, w});
    }
    samples.push_back({millis(end_ms + 3), 99.0});  // outside the window
    std::stable_sort(inside.begin(), inside.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    // Step integral on a 1 ms grid: each millisecond takes the latest reading at or before it,
    // or the first reading when none precedes it.
    double oracle = 0;
    for (std::int64_t ms = start_ms; ms < end_ms; ++ms) {
      double w = inside.front().second;
      for (const auto& [t, v] : inside) {
        if (t <= ms) w = v;
      }
      oracle += w;
    }
    oracle /= static_cast<double>(end_ms - start_ms);
    const auto summary = summarize_power(samples, millis(start_ms), millis(end_ms));
    CHECK(summary.sample_count == k);
    CHECK(std::fabs(summary.avg_watts - oracle) < 1e-9);

    for (double scale : {0.25, 2.0, 8.0}) {
      auto scaled = samples;
      for (auto& s : scaled) s.watts *= scale;
      CHECK(summarize_power(scaled, millis(start_ms), millis(end_ms)).avg_watts ==
            summary.avg_watts * scale);
    }
  }
}

TEST_CASE("power meters: scripted replay and sensor polling") {
  auto points = ScriptedPowerMeter::parse("# t uW\n0 8000000\n500 8800000\n2000 1\n");
  ScriptedPowerMeter scripted(points);
  scripted.begin(millis(100));
  const auto samples = scripted.end(millis(1100));
  REQUIRE(samples.size() == 2);
  CHECK(samples[1].at == millis(600));
  CHECK(samples[1].watts == 8.8);
  CHECK_THROWS_AS(ScriptedPowerMeter::parse("10 abc\n"), Error);
  CHECK_THROWS_AS(ScriptedPowerMeter::parse("10 -4\n"), Error);

  const auto sensor_path = std::filesystem::temp_directory_path() / "sankofa_power_sensor";
  write_file(sensor_path, "5200000\n");
  SensorPowerMeter sensor(sensor_path, millis(2));
  auto& clock = SteadyClock::instance();
  const Nanos start = clock.now();
  sensor.begin(start);
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  const auto readings = sensor.end(clock.now());
  CHECK(readings.size() >= 3);
  for (const auto& r : readings) CHECK(r.watts == 5.2);
  CHECK(summarize_power(readings, start, clock.now()).avg_watts == 5.2);
  std::filesystem::remove(sensor_path);
}

TEST_CASE("token script specs") {
  const auto span = token_script_from_spec("span 129 453 10000", ".");
  REQUIRE(span.size() == 453);
  std::int64_t total = 0;
  for (std::size_t i = 1; i < span.size(); ++i) {
    total += span[i].delay_ms;
    CHECK(span[i].delay_ms >= 22);
    CHECK(span[i].delay_ms <= 23);
  }
  CHECK(total == 10000);
  CHECK(token_script_from_spec("uniform 5 7 3", ".").size() == 3);
  CHECK_THROWS_AS(token_script_from_spec("uniform 5 x 3", "."), Error);
  CHECK_THROWS_AS(token_script_from_spec("sine 1 2", "."), Error);
}

TEST_CASE("run_benchmark: latency cells, median, ordering, failures") {
  VirtualClock clock;
  auto jetson = cell_of("jetson-nano", "inkubalm", uniform_backend("inkubalm", 129, 33, 20));
  jetson.power = std::make_shared<ScriptedPowerMeter>(std::vector<ScriptedPowerMeter::Point>{{0, 8400000}});
  const auto report = run_benchmark(plan_of({jetson}), clock);
  REQUIRE(report.rows.size() == 1);
  CHECK(*report.rows[0].ttft_ms == 129.0);
  CHECK(*report.rows[0].itl_ms == 33.0);
  CHECK(*report.rows[0].avg_watts == 8.4);
  CHECK(report.runs == 5);
  CHECK(report.aggregation == "median");

  // Warmups consume the first two calls; one of the five measured runs is an outlier.
  auto calls = std::make_shared<int>(0);
  auto outlier = std::make_shared<content::MockBackend>(
      desc("m"), [calls](const content::GenerationRequest&) {
        const int call = (*calls)++;
        const std::int64_t first = call == 4 ? 900 : 100;
        return std::vector<content::ScriptedToken>{{first, "a "}, {10, "b "}};
      });
  const auto robust = run_benchmark(plan_of({cell_of("d", "m", outlier)}), clock);
  CHECK(*robust.rows[0].ttft_ms == 100.0);
  CHECK(*calls == 7);

  std::vector<BenchmarkCell> grid;
  for (const char* device : {"raspberry-pi-4b", "jetson-nano"}) {
    for (const char* model : {"nguni-xlmr", "inkubalm", "lugha-llama"}) {
      grid.push_back(cell_of(device, model, uniform_backend(model, 10, 10, 3)));
    }
  }
  const auto six = run_benchmark(plan_of(grid, 1, 0), clock);
  REQUIRE(six.rows.size() == 6);
  CHECK(six.rows[0].device == "jetson-nano");
  CHECK(six.rows[0].model == "inkubalm");
  CHECK(six.rows[5].device == "raspberry-pi-4b");
  CHECK(six.rows[5].model == "nguni-xlmr");

  auto broken = uniform_backend("broken", 10, 10, 3);
  broken->fail_on_open(true);
  auto failed = run_benchmark(plan_of({cell_of("d", "broken", broken), cell_of("d", "ok", uniform_backend("ok", 1, 1, 2))}), clock);
  REQUIRE(failed.rows.size() == 2);
  CHECK_FALSE(failed.rows[0].ttft_ms.has_value());
  CHECK_FALSE(failed.rows[0].error.empty());
  CHECK(failed.rows[1].ttft_ms.has_value());
  CHECK(render_report(failed, ReportFormat::Machine) ==
        "# device model ttft_ms itl_ms tps watts\nd broken - - - -\nd ok 1.0 1.0 1000.0 -\n");
}

TEST_CASE("render_report: six golden latency rows from the fixture plan") {
  const auto plan = load_benchmark_plan(kSource / "tests/fixtures/edge_latency/plan.conf");
  CHECK(plan.virtual_clock);
  CHECK(plan.cells.size() == 6);
  VirtualClock clock;
  const auto report = run_benchmark(plan, clock);
  const auto machine = render_report(report, ReportFormat::Machine);
  CHECK(machine == read_file(kSource / "tests/golden/edge_latency.txt"));

  const auto human = render_report(report, ReportFormat::Human);
  CHECK(human.find("Edge Device") == 0);
  CHECK(human.find("Throughput (t/s)") != std::string::npos);
  CHECK(human.find("runs: 5, warmup: 2, aggregation: median") != std::string::npos);
}

TEST_CASE("machine format: parse-render-parse fixed point") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    BenchmarkReport report;
    const std::size_t n = 1 + uniform_index(rng, 6);
    for (std::size_t i = 0; i < n; ++i) {
      auto value = [&]() -> std::optional<double> {
        if (uniform_index(rng, 5) == 0) return std::nullopt;
        return static_cast<double>(uniform_index(rng, 1'000'000)) / 997.0;
      };
      report.rows.push_back({"dev" + std::to_string(i), "model", value(), value(), value(), value(), {}});
    }
    const auto once = parse_machine_report(render_report(report, ReportFormat::Machine));
    const auto twice = parse_machine_report(render_report(once, ReportFormat::Machine));
    CHECK(once.rows == twice.rows);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(once.rows[i].ttft_ms.has_value() == report.rows[i].ttft_ms.has_value());
    }
  }
  CHECK_THROWS_AS(render_report(BenchmarkReport{}, ReportFormat::Machine), Error);
  CHECK_THROWS_AS(parse_machine_report("a b c\n"), Error);
}

TEST_CASE("trace store assigns ids and resolves them") {
  TraceStore store;
  const auto a = store.put(trace_from_gaps(1, {}));
  auto named = trace_from_gaps(2, {});
  named.trace_id = "custom";
  CHECK(store.put(named) == "custom");
  CHECK(store.contains(a));
  CHECK(store.get("custom")->token_times.front() == 2);
  CHECK_FALSE(store.get("missing").has_value());
  CHECK(store.size() == 2);
}
