#include <CLI11.hpp>
#include <fmt/format.h>
#include <unistd.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sankofa/agent/runtime.hpp"
#include "sankofa/agent/setup.hpp"
#include "sankofa/common/config.hpp"
#include "sankofa/common/text.hpp"
#include "sankofa/content/content.hpp"
#include "sankofa/gateway/gateway.hpp"
#include "sankofa/irt/irt.hpp"
#include "sankofa/metrics/metrics.hpp"
#include "sankofa/quality/quality.hpp"

namespace fs = std::filesystem;
using namespace sankofa;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kPipeline = 3;
constexpr int kBind = 4;

/// Exits the command with a code and a message on standard error.
struct Exit {
  int code;
  std::string message;
};

fs::path config_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SANKOFA_CONFIG"); env && *env) return env;
  return "sankofa.conf";
}

struct LoadedConfig {
  Config config;
  fs::path base_dir;
};

LoadedConfig load_config(const std::string& flag) {
  const auto path = config_path(flag);
  try {
    LoadedConfig c{Config::load(path), fs::absolute(path).parent_path()};
    return c;
  } catch (const Error& e) {
    throw Exit{kUsage, fmt::format("config {}: {}", path.string(), e.what())};
  }
}

template <typename F>
auto config_step(const fs::path& where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Exit{kUsage, fmt::format("config {}: {}", where.string(), e.what())};
  }
}

// generate ------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string lang;
  std::string subject;
  int grade = 0;
  std::string backend;
  std::string out = "lesson_bundle";
  std::uint64_t seed = 0;
  std::size_t max_tokens = 256;
};

std::string provenance_text(const agent::LessonPackage& pkg) {
  std::string out = "# stage agent model trace\n";
  for (const auto& p : pkg.provenance) {
    out += fmt::format("{} {} {} {}\n", agent::to_string(p.stage), agent::to_string(p.agent), p.model_name,
                       p.trace_id.value_or("-"));
  }
  return out;
}

std::string lesson_text(const agent::LessonPackage& pkg) {
  const auto& r = pkg.request;
  std::string out = fmt::format("# language {} subject {} grade {} seed {} model {} finish {}\n\n", r.language,
                                r.subject, r.grade, r.seed, pkg.content.model_name,
                                content::to_string(pkg.content.finish_reason));
  out += pkg.content.text;
  out += "\n\n# summary\n";
  out += pkg.adaptation.summary;
  out += "\n";
  for (const auto& [term, local] : pkg.adaptation.localized_terms) out += fmt::format("# term {}\t{}\n", term, local);
  return out;
}

int run_generate(const GenerateArgs& a) {
  const auto cfg = load_config(a.config);
  const auto where = config_path(a.config);
  auto resources = config_step(where, [&] { return agent::load_resources(cfg.config, cfg.base_dir); });
  auto rc = config_step(where, [&] { return agent::runtime_config_from(cfg.config); });
  rc.mode = agent::RunMode::Cooperative;
  rc.schedule_seed = a.seed;
  const auto clock_name = cfg.config.get_or("runtime", "clock", "steady");
  if (clock_name != "steady" && clock_name != "virtual") {
    throw Exit{kUsage, fmt::format("config {}: [runtime] clock must be steady or virtual", where.string())};
  }
  VirtualClock virtual_clock;
  Clock& clock = clock_name == "virtual" ? static_cast<Clock&>(virtual_clock) : SteadyClock::instance();

  agent::LessonRequest request;
  request.language = a.lang;
  request.subject = a.subject;
  request.grade = a.grade;
  request.max_tokens = a.max_tokens;
  request.seed = a.seed;
  if (!a.backend.empty()) request.backend = a.backend;

  agent::Runtime rt(std::move(resources), rc, clock);
  agent::TaskId root = 0;
  try {
    root = rt.submit_request(request);
  } catch (const Error& e) {
    switch (e.code()) {
      case Errc::UnknownLanguage: throw Exit{kUsage, "--lang: " + std::string(e.what())};
      case Errc::InvalidGrade: throw Exit{kUsage, "--grade: " + std::string(e.what())};
      case Errc::BackendUnavailable: throw Exit{kUsage, "--backend: " + std::string(e.what())};
      default: throw Exit{kUsage, "--max-tokens: " + std::string(e.what())};
    }
  }
  agent::LessonPackage pkg;
  try {
    pkg = rt.wait(root);
  } catch (const agent::StageError& e) {
    throw Exit{kPipeline, fmt::format("pipeline failed at stage {}: {}", agent::to_string(e.stage()), e.what())};
  }
  rt.shutdown();

  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Exit{kUsage, "--out: " + ec.message()};
  write_file(out / "lesson.txt", lesson_text(pkg));
  write_file(out / "pathway.txt", pkg.pathway.text);
  write_file(out / "items.txt", irt::format_item_pool(pkg.assessment.pool));
  write_file(out / "provenance.txt", provenance_text(pkg));
  fmt::print("{} tokens from {}, {} pathway steps, {} items -> {}\n", pkg.content.events.size(),
             pkg.content.model_name, pkg.pathway.pathway.steps.size(), pkg.assessment.pool.size(), out.string());
  return kOk;
}

// benchmark -----------------------------------------------------------------

struct BenchmarkArgs {
  std::string plan;
  std::optional<int> runs;
  std::string out;
};

int run_benchmark_cmd(const BenchmarkArgs& a) {
  metrics::BenchmarkPlan plan;
  try {
    plan = metrics::load_benchmark_plan(a.plan);
  } catch (const Error& e) {
    throw Exit{kUsage, "--plan: " + std::string(e.what())};
  }
  if (a.runs) {
    if (*a.runs < 1) throw Exit{kUsage, "--runs must be >= 1"};
    plan.runs = *a.runs;
  }
  VirtualClock virtual_clock;
  Clock& clock = plan.virtual_clock ? static_cast<Clock&>(virtual_clock) : SteadyClock::instance();
  const auto report = metrics::run_benchmark(plan, clock);
  fmt::print("{}", metrics::render_report(report, metrics::ReportFormat::Human));
  if (!a.out.empty()) write_file(a.out, metrics::render_report(report, metrics::ReportFormat::Machine));
  return kOk;
}

// assess --------------------------------------------------------------------

struct AssessArgs {
  std::string pool;
  double se = 0.35;
  std::size_t max_items = 20;
  std::size_t min_items = 3;
  std::string method = "eap";
};

std::optional<bool> parse_answer(std::string_view s) {
  if (s == "1" || s == "y" || s == "yes" || s == "correct" || s == "true") return true;
  if (s == "0" || s == "n" || s == "no" || s == "wrong" || s == "false") return false;
  return std::nullopt;
}

int run_assess(const AssessArgs& a) {
  std::vector<irt::ItemParams> pool;
  try {
    pool = irt::load_item_pool(a.pool);
  } catch (const Error& e) {
    throw Exit{kUsage, "--pool: " + std::string(e.what())};
  }
  if (pool.empty()) throw Exit{kUsage, "--pool: " + a.pool + " has no items"};
  if (a.method != "eap" && a.method != "mle") throw Exit{kUsage, "--method must be eap or mle"};
  irt::StopRule rule{a.se, a.max_items, a.min_items};
  irt::AdaptiveSession session("terminal", pool, rule, a.method == "mle" ? irt::Method::MLE : irt::Method::EAP);

  const bool interactive = isatty(STDIN_FILENO) != 0;
  int item = session.begin();
  std::size_t step = 0;
  std::string line;
  while (!session.stopped()) {
    fmt::print("item {} {}\n", item, session.item(item).prompt_ref);
    std::optional<bool> answer;
    while (!answer) {
      if (interactive) {
        fmt::print("answer [1 correct / 0 incorrect]: ");
        std::fflush(stdout);
      }
      if (!std::getline(std::cin, line)) {
        fmt::print("stopped: input ended\n# transcript\n{}", irt::format_transcript(session.transcript()));
        return kOk;
      }
      const auto t = trim(line);
      if (t.empty()) continue;
      answer = parse_answer(t);
      if (!answer) fmt::print(stderr, "answer 1 (correct) or 0 (incorrect), got '{}'\n", t);
    }
    const auto outcome = session.step(*answer);
    fmt::print("step {}: item {} {} theta {:.6f} se {:.6f}\n", ++step, item, *answer ? "correct" : "incorrect",
               outcome.estimate.theta, outcome.estimate.standard_error);
    if (outcome.next_item) item = *outcome.next_item;
  }
  fmt::print("stopped: {}\n# transcript\n{}", irt::to_string(session.stop_reason()),
             irt::format_transcript(session.transcript()));
  return kOk;
}

// evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  std::string bleu_table;
  std::string cands;
  std::vector<std::string> refs;
  std::string rubric;
  std::string lang = "xx";
  std::string model = "-";
  int max_n = 4;
  bool no_smoothing = false;
  bool machine = false;
};

int run_evaluate(const EvaluateArgs& a) {
  if (a.bleu_table.empty() == a.cands.empty()) throw Exit{kUsage, "give exactly one of --bleu or --cands"};
  try {
    std::vector<quality::LanguageBleu> rows;
    if (!a.cands.empty()) {
      std::vector<fs::path> refs(a.refs.begin(), a.refs.end());
      const auto corpus = refs.empty() ? content::load_corpus(a.cands) : content::load_corpus(a.cands, refs);
      std::vector<std::string> cands;
      std::vector<std::vector<std::string>> references;
      for (const auto& p : corpus.pairs) {
        cands.push_back(p.segment);
        references.push_back(p.references);
      }
      quality::BleuConfig cfg{a.max_n, a.no_smoothing ? quality::Smoothing::None : quality::Smoothing::AddOne};
      const auto r = quality::bleu(cands, references, cfg);
      std::string precisions;
      for (double p : r.precisions) precisions += fmt::format(" {:.6f}", p);
      fmt::print("bleu {:.6f} bp {:.6f} c {} r {} p{}\n", r.score, r.brevity_penalty, r.candidate_length,
                 r.reference_length, precisions);
      rows.push_back({a.lang, a.model, r.score});
    } else {
      rows = quality::parse_bleu_table(read_file(a.bleu_table));
    }
    if (a.rubric.empty()) {
      if (!a.cands.empty()) return kOk;
      throw Exit{kUsage, "--bleu needs --rubric"};
    }
    const auto report = quality::build_quality_report(rows, quality::load_rubric(a.rubric));
    fmt::print("{}", a.machine ? quality::render_quality_machine(report) : quality::render_quality_human(report));
  } catch (const Error& e) {
    throw Exit{kUsage, e.what()};
  }
  return kOk;
}

// serve ---------------------------------------------------------------------

int run_serve(const std::string& config_flag) {
  // Blocked before any thread starts; sigwait receives them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  const auto cfg = load_config(config_flag);
  const auto where = config_path(config_flag);
  auto resources = config_step(where, [&] { return agent::load_resources(cfg.config, cfg.base_dir); });
  auto rc = config_step(where, [&] { return agent::runtime_config_from(cfg.config); });
  auto gc = config_step(where, [&] { return gateway::gateway_config_from(cfg.config, cfg.base_dir); });
  gc.version = SANKOFA_VERSION;
  if (gc.teacher_secret.empty() && gc.learner_secret.empty()) {
    throw Exit{kUsage, fmt::format("config {}: [auth] defines no roles", where.string())};
  }

  gateway::Gateway gw(std::move(resources), rc, gc);
  gateway::Server server(gw);
  int port = 0;
  try {
    port = server.bind();
  } catch (const Error& e) {
    throw Exit{kBind, e.what()};
  }
  server.start();
  fmt::print("listening on http://{}:{}\n", gc.bind_host, port);
  std::fflush(stdout);
  int sig = 0;
  sigwait(&stop_signals, &sig);
  fmt::print("signal {}, shutting down\n", sig);
  server.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sankofa: offline lesson generation, benchmarking and adaptive assessment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SANKOFA_VERSION);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Run the lesson pipeline and write a document bundle");
  generate->add_option("--config", gen.config, "Config file (else $SANKOFA_CONFIG, else ./sankofa.conf)");
  generate->add_option("--lang", gen.lang, "Language code")->required();
  generate->add_option("--subject", gen.subject, "Subject")->required();
  generate->add_option("--grade", gen.grade, "Grade level 1-12")->required();
  generate->add_option("--backend", gen.backend, "Pin a backend by name");
  generate->add_option("--out", gen.out, "Bundle directory")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  generate->add_option("--max-tokens", gen.max_tokens, "Token limit")->capture_default_str();

  BenchmarkArgs bench;
  auto* benchmark = app.add_subcommand("benchmark", "Run a benchmark plan and print the latency table");
  benchmark->add_option("--plan", bench.plan, "Plan file")->required();
  benchmark->add_option("--runs", bench.runs, "Override measured runs per cell");
  benchmark->add_option("--out", bench.out, "Write the machine report here");

  AssessArgs as;
  auto* assess = app.add_subcommand("assess", "Adaptive assessment on the terminal; answers on standard input");
  assess->add_option("--pool", as.pool, "Item pool file")->required();
  assess->add_option("--se", as.se, "Stop when the standard error falls below this")->capture_default_str();
  assess->add_option("--max-items", as.max_items, "Item limit")->capture_default_str();
  assess->add_option("--min-items", as.min_items, "Items before the precision rule applies")->capture_default_str();
  assess->add_option("--method", as.method, "eap or mle")->capture_default_str();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "BLEU and rubric quality report");
  evaluate->add_option("--bleu", ev.bleu_table, "Table of `language model bleu` lines");
  evaluate->add_option("--cands", ev.cands, "Candidate segments, one per line");
  evaluate->add_option("--refs", ev.refs, "Reference files (default: candidates with extension .ref0 to .ref9)");
  evaluate->add_option("--rubric", ev.rubric, "Rubric scores `language metric value rater`");
  evaluate->add_option("--lang", ev.lang, "Language label for --cands")->capture_default_str();
  evaluate->add_option("--model", ev.model, "Model label for --cands")->capture_default_str();
  evaluate->add_option("--max-n", ev.max_n, "Highest n-gram order")->capture_default_str();
  evaluate->add_flag("--no-smoothing", ev.no_smoothing, "Disable add-one smoothing");
  evaluate->add_flag("--machine", ev.machine, "Machine-readable report");

  std::string serve_config;
  auto* serve = app.add_subcommand("serve", "Serve the classroom API");
  serve->add_option("--config", serve_config, "Config file (else $SANKOFA_CONFIG, else ./sankofa.conf)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*benchmark) return run_benchmark_cmd(bench);
    if (*assess) return run_assess(as);
    if (*evaluate) return run_evaluate(ev);
    if (*serve) return run_serve(serve_config);
  } catch (const Exit& e) {
    fmt::print(stderr, "sankofa: {}\n", e.message);
    return e.code;
  } catch (const std::exception& e) {
    fmt::print(stderr, "sankofa: {}\n", e.what());
    return kUsage;
  }
  return kUsage;
}
