#include <fmt/format.h>

#include <algorithm>
#include <sstream>

#include "sankofa/common/config.hpp"
#include "sankofa/common/text.hpp"
#include "sankofa/metrics/metrics.hpp"

namespace sankofa::metrics {

namespace {

long long parse_count(const std::string& field, std::string_view spec) {
  std::size_t used = 0;
  long long v = -1;
  try {
    v = std::stoll(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || v < 0) {
    throw Error(Errc::ParseError, fmt::format("bad number '{}' in '{}'", field, spec));
  }
  return v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<content::ScriptedToken> token_script_from_spec(std::string_view spec,
                                                           const std::filesystem::path& base_dir) {
  const auto f = split_ws(spec);
  if (f.empty()) throw Error(Errc::ParseError, "empty token script spec");
  std::vector<content::ScriptedToken> script;
  if (f[0] == "uniform" && f.size() == 4) {
    const auto first = parse_count(f[1], spec);
    const auto gap = parse_count(f[2], spec);
    const auto count = parse_count(f[3], spec);
    for (long long i = 0; i < count; ++i) script.push_back({i == 0 ? first : gap, "tok "});
  } else if (f[0] == "span" && f.size() == 4) {
    const auto first = parse_count(f[1], spec);
    const auto count = parse_count(f[2], spec);
    const auto span = parse_count(f[3], spec);
    if (count < 1) throw Error(Errc::ParseError, "span needs at least one token: " + std::string(spec));
    script.push_back({first, "tok "});
    const long long gaps = count - 1;
    for (long long i = 1; i <= gaps; ++i) {
      script.push_back({span * i / gaps - span * (i - 1) / gaps, "tok "});
    }
  } else if (f[0] == "file" && f.size() == 2) {
    script = content::load_mock_script(resolve(base_dir, f[1]));
  } else {
    throw Error(Errc::ParseError, "unknown token script spec: " + std::string(spec));
  }
  return script;
}

BenchmarkPlan load_benchmark_plan(const std::filesystem::path& path) {
  const Config cfg = Config::load(path);
  const auto base = path.parent_path();
  BenchmarkPlan plan;
  plan.runs = static_cast<int>(cfg.get_int("benchmark", "runs", 5));
  plan.warmup_runs = static_cast<int>(cfg.get_int("benchmark", "warmup", 2));
  if (plan.runs < 1 || plan.warmup_runs < 0) {
    throw Error(Errc::ParseError, "runs must be >= 1 and warmup >= 0");
  }
  const std::string clock = cfg.get_or("benchmark", "clock", "steady");
  if (clock != "steady" && clock != "virtual") {
    throw Error(Errc::ParseError, "clock must be steady or virtual, got " + clock);
  }
  plan.virtual_clock = clock == "virtual";

  content::GenerationRequest request;
  request.template_id = "benchmark";
  request.language = cfg.get_or("benchmark", "language", "sw");
  request.subject = cfg.get_or("benchmark", "subject", "fractions");
  request.grade = static_cast<int>(cfg.get_int("benchmark", "grade", 5));
  request.max_tokens = static_cast<std::size_t>(cfg.get_int("benchmark", "max_tokens", 4096));
  const auto request_count = cfg.get_int("benchmark", "requests", 1);
  if (request_count < 1) throw Error(Errc::ParseError, "requests must be >= 1");
  for (long long i = 0; i < request_count; ++i) {
    request.seed = static_cast<std::uint64_t>(i);
    plan.requests.push_back(request);
  }

  const auto labels = cfg.sections_with_prefix("cell.");
  if (labels.empty()) throw Error(Errc::ParseError, "plan has no [cell.<label>] sections");
  for (const auto& label : labels) {
    const std::string section = "cell." + label;
    BenchmarkCell cell;
    cell.device = cfg.get_or(section, "device", "");
    cell.model = cfg.get_or(section, "model", "");
    if (cell.device.empty() || cell.model.empty()) {
      throw Error(Errc::ParseError, section + " needs device and model");
    }
    content::ModelBackendDescriptor descriptor{cell.model, {request.language}, 2048, ""};

    const auto endpoint = cfg.get(section, "endpoint");
    const auto script = cfg.get(section, "script");
    std::map<std::string, std::shared_ptr<content::Backend>> by_spec;
    auto backend_for = [&](const char* column) -> std::shared_ptr<content::Backend> {
      if (endpoint) {
        if (!by_spec.count("")) {
          auto d = descriptor;
          d.endpoint = *endpoint;
          by_spec[""] = std::make_shared<content::StreamClientBackend>(d);
        }
        return by_spec[""];
      }
      const auto spec = cfg.get(section, column) ? cfg.get(section, column) : script;
      if (!spec) throw Error(Errc::ParseError, fmt::format("{} has no script for {}", section, column));
      auto& slot = by_spec[*spec];
      if (!slot) {
        slot = std::make_shared<content::MockBackend>(descriptor, token_script_from_spec(*spec, base));
      }
      return slot;
    };
    cell.ttft_backend = backend_for("ttft");
    cell.itl_backend = backend_for("itl");
    cell.tps_backend = backend_for("tps");

    if (const auto power = cfg.get(section, "power")) {
      const auto f = split_ws(*power);
      if (f.size() == 2 && f[0] == "constant") {
        double watts = -1;
        try {
          watts = std::stod(f[1]);
        } catch (const std::exception&) {
        }
        if (!(watts >= 0)) throw Error(Errc::ParseError, "bad constant power: " + *power);
        cell.power = std::make_shared<ScriptedPowerMeter>(std::vector<ScriptedPowerMeter::Point>{
            {0, static_cast<std::int64_t>(round_half_up(watts * 1e6, 0))}});
      } else if (f.size() == 2 && f[0] == "file") {
        cell.power = ScriptedPowerMeter::load(resolve(base, f[1]));
      } else if (f.size() == 1 && f[0] == "sensor") {
        const auto sensor = cfg.get("power", "path");
        if (!sensor) throw Error(Errc::ParseError, "power = sensor needs [power] path");
        const auto period = cfg.get_int("power", "period_ms", 100);
        if (period < 1) throw Error(Errc::ParseError, "[power] period_ms must be >= 1");
        cell.power = std::make_shared<SensorPowerMeter>(resolve(base, *sensor), millis(period));
      } else {
        throw Error(Errc::ParseError, "unknown power spec: " + *power);
      }
    }
    plan.cells.push_back(std::move(cell));
  }
  return plan;
}

namespace {

struct ColumnSamples {
  std::vector<double> values;
  bool failed = false;
};

std::optional<double> aggregate(const ColumnSamples& c) {
  if (c.failed || c.values.empty()) return std::nullopt;
  return median(c.values);
}

void note(std::string& errors, const std::string& message) {
  if (errors.find(message) != std::string::npos) return;
  if (!errors.empty()) errors += "; ";
  errors += message;
}

BenchmarkRow run_cell(const BenchmarkCell& cell, const BenchmarkPlan& plan, Clock& clock) {
  std::vector<content::Backend*> distinct;
  for (auto* b : {cell.ttft_backend.get(), cell.itl_backend.get(), cell.tps_backend.get()}) {
    if (b && std::find(distinct.begin(), distinct.end(), b) == distinct.end()) distinct.push_back(b);
  }
  for (int w = 0; w < plan.warmup_runs; ++w) {
    for (auto* backend : distinct) {
      for (const auto& request : plan.requests) {
        try {
          content::generate_stream(request, *backend, clock);
        } catch (const Error&) {
        }
      }
    }
  }

  BenchmarkRow row{cell.device, cell.model, {}, {}, {}, {}, {}};
  ColumnSamples ttft, itl, tps, watts;
  watts.failed = !cell.power;
  for (int r = 0; r < plan.runs; ++r) {
    for (auto* backend : distinct) {
      const bool metered = cell.power && backend == cell.ttft_backend.get();
      for (const auto& request : plan.requests) {
        try {
          if (metered) cell.power->begin(clock.now());
          const auto content = content::generate_stream(request, *backend, clock);
          if (metered) {
            try {
              const auto samples = cell.power->end(clock.now());
              watts.values.push_back(
                  summarize_power(samples, content.request_sent_at, content.completed_at).avg_watts);
            } catch (const Error& e) {
              watts.failed = true;
              note(row.error, e.what());
            }
          }
          const auto m = compute_metrics(record_trace(content));
          if (backend == cell.ttft_backend.get()) ttft.values.push_back(m.ttft_ms);
          if (backend == cell.itl_backend.get()) itl.values.push_back(m.itl_ms.mean);
          if (backend == cell.tps_backend.get()) tps.values.push_back(m.throughput_tps);
        } catch (const Error& e) {
          if (metered) {
            cell.power->end(clock.now());
            watts.failed = true;
          }
          if (backend == cell.ttft_backend.get()) ttft.failed = true;
          if (backend == cell.itl_backend.get()) itl.failed = true;
          if (backend == cell.tps_backend.get()) tps.failed = true;
          note(row.error, e.what());
        }
      }
    }
  }
  row.ttft_ms = aggregate(ttft);
  row.itl_ms = aggregate(itl);
  row.throughput_tps = aggregate(tps);
  row.avg_watts = aggregate(watts);
  return row;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkPlan& plan, Clock& clock) {
  if (plan.runs < 1) throw Error(Errc::InvalidArgument, "runs must be >= 1");
  if (plan.requests.empty()) throw Error(Errc::InvalidArgument, "benchmark plan has no requests");
  BenchmarkReport report;
  report.runs = plan.runs;
  report.warmup_runs = plan.warmup_runs;
  for (const auto& cell : plan.cells) report.rows.push_back(run_cell(cell, plan, clock));
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.device, a.model) < std::tie(b.device, b.model);
  });
  return report;
}

namespace {

std::string cell_text(const std::optional<double>& v) { return v ? format_half_up(*v, 1) : "-"; }

}  // namespace

std::string render_report(const BenchmarkReport& report, ReportFormat format) {
  if (report.rows.empty()) throw Error(Errc::EmptyReport, "benchmark report has no rows");
  std::string out;
  if (format == ReportFormat::Machine) {
    out = "# device model ttft_ms itl_ms tps watts\n";
    for (const auto& r : report.rows) {
      out += fmt::format("{} {} {} {} {} {}\n", r.device, r.model, cell_text(r.ttft_ms),
                         cell_text(r.itl_ms), cell_text(r.throughput_tps), cell_text(r.avg_watts));
    }
    return out;
  }

  std::vector<std::vector<std::string>> table;
  table.push_back({"Edge Device", "Core Model", "TTFT (ms)", "Avg. ITL (ms)", "Throughput (t/s)",
                   "Power (W)"});
  for (const auto& r : report.rows) {
    table.push_back({r.device, r.model, cell_text(r.ttft_ms), cell_text(r.itl_ms),
                     cell_text(r.throughput_tps), cell_text(r.avg_watts)});
  }
  std::vector<std::size_t> width(6, 0);
  for (const auto& line : table) {
    for (std::size_t c = 0; c < 6; ++c) width[c] = std::max(width[c], line[c].size());
  }
  for (const auto& line : table) {
    std::string text;
    for (std::size_t c = 0; c < 6; ++c) {
      if (c > 0) text += "  ";
      text += c < 2 ? fmt::format("{:<{}}", line[c], width[c]) : fmt::format("{:>{}}", line[c], width[c]);
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + "\n";
  }
  out += fmt::format("runs: {}, warmup: {}, aggregation: {}\n", report.runs, report.warmup_runs,
                     report.aggregation);
  for (const auto& r : report.rows) {
    if (!r.error.empty()) out += fmt::format("failed {} {}: {}\n", r.device, r.model, r.error);
  }
  return out;
}

BenchmarkReport parse_machine_report(std::string_view text) {
  BenchmarkReport report;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto value = [&](const std::string& field) -> std::optional<double> {
    if (field == "-") return std::nullopt;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != field.size()) {
      throw Error(Errc::ParseError, fmt::format("report line {}: bad value '{}'", line_no, field));
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_ws(line);
    if (f.empty() || f[0].front() == '#') continue;
    if (f.size() != 6) {
      throw Error(Errc::ParseError, fmt::format("report line {}: expected 6 fields", line_no));
    }
    report.rows.push_back({f[0], f[1], value(f[2]), value(f[3]), value(f[4]), value(f[5]), {}});
  }
  return report;
}

}  // namespace sankofa::metrics
