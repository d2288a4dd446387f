#include <algorithm>
#include <cmath>

#include "sankofa/metrics/metrics.hpp"

namespace sankofa::metrics {

InferenceTrace record_trace(const content::GeneratedContent& content, bool error) {
  if (content.events.empty()) {
    throw Error(Errc::EmptyStream, "no tokens from " + content.model_name);
  }
  InferenceTrace trace;
  trace.model_name = content.model_name;
  trace.request_sent_at = content.request_sent_at;
  trace.token_times.reserve(content.events.size());
  for (const auto& e : content.events) trace.token_times.push_back(e.arrived_at);
  trace.completed_at = content.completed_at;
  trace.error = error;
  return trace;
}

InferenceTrace record_trace(const content::GenerationError& failure) {
  return record_trace(failure.partial(), true);
}

double percentile(const std::vector<double>& sorted, double q) {
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

LatencyMetrics compute_metrics(const InferenceTrace& trace) {
  if (trace.token_times.empty()) throw Error(Errc::EmptyStream, "trace has no tokens");
  const auto& t = trace.token_times;
  LatencyMetrics m;
  m.token_count = t.size();
  m.ttft_ms = static_cast<double>(t.front() - trace.request_sent_at) / 1e6;
  if (t.size() == 1) {
    m.flags |= kSingleToken;
    return m;
  }
  const Nanos span = t.back() - t.front();
  const auto gaps = static_cast<double>(t.size() - 1);
  m.itl_ms.mean = static_cast<double>(span) / gaps / 1e6;
  m.throughput_tps = span > 0 ? gaps * 1e9 / static_cast<double>(span) : 0.0;

  std::vector<double> samples;
  samples.reserve(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) samples.push_back(static_cast<double>(t[i] - t[i - 1]) / 1e6);
  std::sort(samples.begin(), samples.end());
  m.itl_ms.p50 = percentile(samples, 0.50);
  m.itl_ms.p95 = percentile(samples, 0.95);
  return m;
}

std::string TraceStore::put(InferenceTrace trace) {
  std::lock_guard lock(mutex_);
  if (trace.trace_id.empty()) trace.trace_id = "trace-" + std::to_string(next_++);
  std::string id = trace.trace_id;
  traces_[id] = std::move(trace);
  return id;
}

std::optional<InferenceTrace> TraceStore::get(const std::string& trace_id) const {
  std::lock_guard lock(mutex_);
  auto it = traces_.find(trace_id);
  if (it == traces_.end()) return std::nullopt;
  return it->second;
}

bool TraceStore::contains(const std::string& trace_id) const {
  std::lock_guard lock(mutex_);
  return traces_.count(trace_id) != 0;
}

std::size_t TraceStore::size() const {
  std::lock_guard lock(mutex_);
  return traces_.size();
}

}  // namespace sankofa::metrics
