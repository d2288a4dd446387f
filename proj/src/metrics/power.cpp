#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sankofa/common/text.hpp"
#include "sankofa/metrics/metrics.hpp"

namespace sankofa::metrics {

PowerSummary summarize_power(std::vector<PowerSample> samples, Nanos start, Nanos end) {
  if (end < start) throw Error(Errc::InvalidArgument, "power window ends before it starts");
  std::erase_if(samples, [&](const PowerSample& s) { return s.at < start || s.at > end; });
  if (samples.empty()) {
    throw Error(Errc::NoSamplesInWindow, fmt::format("no power samples in [{}, {}] ns", start, end));
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const PowerSample& a, const PowerSample& b) { return a.at < b.at; });
  PowerSummary summary;
  summary.sample_count = samples.size();
  const double base = samples.front().watts;
  summary.avg_watts = base;
  if (end == start) return summary;
  // Accumulated as offsets from the first reading so a constant trace comes back unchanged.
  const auto window = static_cast<double>(end - start);
  double offset = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Nanos from = i == 0 ? start : samples[i].at;
    const Nanos to = i + 1 == samples.size() ? end : samples[i + 1].at;
    offset += (samples[i].watts - base) * static_cast<double>(to - from);
  }
  summary.avg_watts = base + offset / window;
  return summary;
}

ScriptedPowerMeter::ScriptedPowerMeter(std::vector<Point> script) : script_(std::move(script)) {
  for (const auto& p : script_) {
    if (p.microwatts < 0) throw Error(Errc::InvalidArgument, "negative power reading");
  }
}

std::vector<ScriptedPowerMeter::Point> ScriptedPowerMeter::parse(std::string_view text) {
  std::vector<Point> points;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    Point p;
    std::size_t used_t = 0, used_w = 0;
    try {
      if (fields.size() != 2) throw std::invalid_argument("field count");
      p.t_ms = std::stoll(fields[0], &used_t);
      p.microwatts = std::stoll(fields[1], &used_w);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, fmt::format("power script line {}: expected <t_ms> <microwatts>", line_no));
    }
    if (used_t != fields[0].size() || used_w != fields[1].size() || p.microwatts < 0) {
      throw Error(Errc::ParseError, fmt::format("power script line {}: bad value", line_no));
    }
    points.push_back(p);
  }
  return points;
}

std::unique_ptr<ScriptedPowerMeter> ScriptedPowerMeter::load(const std::filesystem::path& path) {
  return std::make_unique<ScriptedPowerMeter>(parse(read_file(path)));
}

std::vector<PowerSample> ScriptedPowerMeter::end(Nanos now) {
  std::vector<PowerSample> samples;
  for (const auto& p : script_) {
    const Nanos at = origin_ + millis(p.t_ms);
    if (at > now) break;
    samples.push_back({at, static_cast<double>(p.microwatts) / 1e6});
  }
  return samples;
}

SensorPowerMeter::SensorPowerMeter(std::filesystem::path path, Nanos period, Clock& clock)
    : path_(std::move(path)), period_(period), clock_(clock) {
  if (period_ <= 0) throw Error(Errc::InvalidArgument, "power poll period must be positive");
}

SensorPowerMeter::~SensorPowerMeter() { stop(); }

void SensorPowerMeter::poll_once() {
  std::ifstream in(path_);
  long long microwatts = -1;
  if (!(in >> microwatts) || microwatts < 0) return;
  const PowerSample sample{clock_.now(), static_cast<double>(microwatts) / 1e6};
  std::lock_guard lock(mutex_);
  log_.push_back(sample);
}

void SensorPowerMeter::begin(Nanos) {
  stop();
  {
    std::lock_guard lock(mutex_);
    log_.clear();
    running_ = true;
  }
  worker_ = std::thread([this] {
    std::unique_lock lock(mutex_);
    while (running_) {
      lock.unlock();
      poll_once();
      lock.lock();
      wake_.wait_for(lock, std::chrono::nanoseconds(period_), [this] { return !running_; });
    }
  });
}

void SensorPowerMeter::stop() {
  {
    std::lock_guard lock(mutex_);
    running_ = false;
  }
  wake_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::vector<PowerSample> SensorPowerMeter::end(Nanos) {
  stop();
  poll_once();
  std::lock_guard lock(mutex_);
  return log_;
}

}  // namespace sankofa::metrics
