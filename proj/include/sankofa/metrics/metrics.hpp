#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sankofa/common/clock.hpp"
#include "sankofa/common/error.hpp"
#include "sankofa/content/content.hpp"

namespace sankofa::metrics {

struct InferenceTrace {
  std::string trace_id;
  std::string model_name;
  Nanos request_sent_at = 0;
  std::vector<Nanos> token_times;
  Nanos completed_at = 0;
  bool error = false;
};

/// Throws Error{EmptyStream} when no token arrived.
InferenceTrace record_trace(const content::GeneratedContent& content, bool error = false);
InferenceTrace record_trace(const content::GenerationError& failure);

struct ItlStats {
  double mean = 0;
  double p50 = 0;
  double p95 = 0;
};

enum MetricFlag : unsigned {
  kSingleToken = 1u << 0,  // throughput and ITL undefined, reported as 0
};

struct LatencyMetrics {
  double ttft_ms = 0;
  ItlStats itl_ms;
  double throughput_tps = 0;
  std::size_t token_count = 0;
  unsigned flags = 0;
};

/// ttft = first token - dispatch; ITL samples are consecutive token gaps; throughput is
/// (n - 1) tokens over the first-to-last token window.
LatencyMetrics compute_metrics(const InferenceTrace& trace);

/// Linear interpolation between order statistics at rank q (n - 1). `sorted` must be non-empty.
double percentile(const std::vector<double>& sorted, double q);

/// Median of the values (mean of the two middle values for an even count). Non-empty input.
double median(std::vector<double> values);

class TraceStore {
 public:
  /// Assigns `trace-<n>` when the trace has no id. Returns the id.
  std::string put(InferenceTrace trace);
  std::optional<InferenceTrace> get(const std::string& trace_id) const;
  bool contains(const std::string& trace_id) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, InferenceTrace> traces_;
  std::size_t next_ = 1;
};

struct PowerSample {
  Nanos at = 0;
  double watts = 0;
};

struct PowerSummary {
  double avg_watts = 0;
  std::size_t sample_count = 0;
};

/// Time-weighted mean of the step function through the samples inside [start, end].
/// Throws Error{NoSamplesInWindow}.
PowerSummary summarize_power(std::vector<PowerSample> samples, Nanos start, Nanos end);

class PowerMeter {
 public:
  virtual ~PowerMeter() = default;
  virtual void begin(Nanos now) = 0;
  /// Samples collected since begin().
  virtual std::vector<PowerSample> end(Nanos now) = 0;
};

/// Replays `<t_ms> <microwatts>` lines, with t relative to begin().
class ScriptedPowerMeter final : public PowerMeter {
 public:
  struct Point {
    std::int64_t t_ms = 0;
    std::int64_t microwatts = 0;
  };

  explicit ScriptedPowerMeter(std::vector<Point> script);
  static std::vector<Point> parse(std::string_view text);
  static std::unique_ptr<ScriptedPowerMeter> load(const std::filesystem::path& path);

  void begin(Nanos now) override { origin_ = now; }
  std::vector<PowerSample> end(Nanos now) override;

 private:
  std::vector<Point> script_;
  Nanos origin_ = 0;
};

/// Polls a sensor file holding an integer microwatt reading every `period` on a background
/// thread. Unreadable or malformed readings are skipped.
class SensorPowerMeter final : public PowerMeter {
 public:
  SensorPowerMeter(std::filesystem::path path, Nanos period = millis(100),
                   Clock& clock = SteadyClock::instance());
  ~SensorPowerMeter() override;

  void begin(Nanos now) override;
  std::vector<PowerSample> end(Nanos now) override;

 private:
  void poll_once();
  void stop();

  std::filesystem::path path_;
  Nanos period_;
  Clock& clock_;
  std::mutex mutex_;
  std::condition_variable wake_;
  bool running_ = false;
  std::vector<PowerSample> log_;
  std::thread worker_;
};

/// Token script generators used by benchmark plans:
///   `uniform <first_ms> <gap_ms> <count>`
///   `span <first_ms> <count> <span_ms>`   gaps spread as evenly as integer ms allow
///   `file <path>`                          mock script file
std::vector<content::ScriptedToken> token_script_from_spec(std::string_view spec,
                                                           const std::filesystem::path& base_dir);

struct BenchmarkCell {
  std::string device;
  std::string model;
  /// Backends feeding each column; the same backend may serve several columns.
  std::shared_ptr<content::Backend> ttft_backend;
  std::shared_ptr<content::Backend> itl_backend;
  std::shared_ptr<content::Backend> tps_backend;
  /// Wraps every generation of ttft_backend. Optional.
  std::shared_ptr<PowerMeter> power;
};

struct BenchmarkPlan {
  std::vector<BenchmarkCell> cells;
  std::vector<content::GenerationRequest> requests;
  int runs = 5;
  int warmup_runs = 2;
  bool virtual_clock = false;
};

/// Plan file (INI):
///   [benchmark] runs, warmup, clock = steady|virtual, language, subject, grade, max_tokens
///   [power] path, period_ms           used by `power = sensor`
///   [cell.<label>] device, model, script, ttft, itl, tps (token script specs; the last three
///   default to `script`), endpoint (stream service instead of a mock), power =
///   `constant <watts>` | `file <path>` | `sensor`
/// Relative paths resolve against the plan file's directory. Throws Error{ParseError}.
BenchmarkPlan load_benchmark_plan(const std::filesystem::path& path);

struct BenchmarkRow {
  std::string device;
  std::string model;
  std::optional<double> ttft_ms;
  std::optional<double> itl_ms;
  std::optional<double> throughput_tps;
  std::optional<double> avg_watts;
  std::string error;

  bool operator==(const BenchmarkRow&) const = default;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  int runs = 0;
  int warmup_runs = 0;
  std::string aggregation = "median";
};

/// Warmups run and are discarded, then each column is the median over runs x requests.
/// A failing backend leaves its columns empty; the report is still produced.
BenchmarkReport run_benchmark(const BenchmarkPlan& plan, Clock& clock);

enum class ReportFormat { Human, Machine };

/// Throws Error{EmptyReport}.
std::string render_report(const BenchmarkReport& report, ReportFormat format);
/// Inverse of the machine format. Throws Error{ParseError}.
BenchmarkReport parse_machine_report(std::string_view text);

}  // namespace sankofa::metrics
