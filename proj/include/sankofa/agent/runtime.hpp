#pragma once

#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sankofa/agent/agent.hpp"
#include "sankofa/common/config.hpp"
#include "sankofa/content/content.hpp"
#include "sankofa/irt/irt.hpp"
#include "sankofa/mdp/mdp.hpp"
#include "sankofa/metrics/metrics.hpp"

namespace sankofa::agent {

struct LessonRequest {
  std::string language;
  std::string subject;
  int grade = 1;
  std::size_t max_tokens = 256;
  std::uint64_t seed = 0;
  /// Pin a backend instead of letting the selector choose.
  std::optional<std::string> backend;
};

struct PlannedPathway {
  mdp::LearningPathway pathway;
  std::vector<mdp::StateLabel> states;
  /// format_pathway output.
  std::string text;
};

struct AssessmentPlan {
  std::vector<irt::ItemParams> pool;
  irt::StopRule stop_rule;
  irt::Method method = irt::Method::EAP;
};

struct StageProvenance {
  TaskKind stage = TaskKind::Lesson;
  AgentId agent;
  std::string model_name;
  std::optional<std::string> trace_id;
};

struct LessonPackage {
  TaskId root = 0;
  LessonRequest request;
  PlannedPathway pathway;
  content::GeneratedContent content;
  content::AdaptationResult adaptation;
  AssessmentPlan assessment;
  std::vector<StageProvenance> provenance;
};

/// A pipeline that ended without a package. code() is StageFailed or Timeout.
class StageError : public Error {
 public:
  StageError(Errc code, TaskKind stage, Errc cause, const std::string& message)
      : Error(code, std::string(to_string(stage)) + ": " + message), stage_(stage), cause_(cause) {}
  TaskKind stage() const { return stage_; }
  Errc cause() const { return cause_; }

 private:
  TaskKind stage_;
  Errc cause_;
};

struct RuntimeResources {
  std::shared_ptr<content::BackendRegistry> registry;
  content::SelectionTable selection;
  /// Keyed by subject; "*" is the fallback.
  std::map<std::string, mdp::CurriculumGraph> curricula;
  mdp::MdpConfig mdp_config;
  std::size_t pathway_horizon = 64;
  std::vector<irt::ItemTemplate> template_bank;
  /// Keyed by language.
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> glossaries;
  irt::StopRule stop_rule;
  std::shared_ptr<metrics::TraceStore> traces = std::make_shared<metrics::TraceStore>();
};

enum class RunMode { Threaded, Cooperative };

struct RuntimeConfig {
  Nanos stage_timeout = seconds(120);
  Nanos heartbeat_period = seconds(5);
  int missed_heartbeats = 3;
  std::optional<std::filesystem::path> trace_log;
  /// Instances per role agent.
  int instances = 1;
  RunMode mode = RunMode::Threaded;
  /// Seeds the cooperative scheduler's choice among runnable agents.
  std::uint64_t schedule_seed = 0;
};

/// `[runtime]` keys stage_timeout_s, heartbeat_s, trace_log, instances.
RuntimeConfig runtime_config_from(const Config& config);

/// `dispatched_at` is when the generation request was sent.
using StreamObserver = std::function<void(TaskId root, const content::TokenEvent&, Nanos dispatched_at)>;

class Coordinator;
class RoleAgent;

/// The coordinator plus one or more instances of each role agent over a shared router.
/// Threaded mode runs every agent on its own thread. Cooperative mode runs nothing until
/// wait()/step() is called, and then interleaves agents one message at a time on the calling
/// thread, choosing among runnable agents with a seeded generator.
class Runtime {
 public:
  Runtime(RuntimeResources resources, RuntimeConfig config, Clock& clock = SteadyClock::instance());
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Receives every token of every generation with its root task id. Set before start().
  void set_stream_observer(StreamObserver observer);
  void start();
  /// Fails every unfinished request with QueueClosed and stops the agents.
  void shutdown();

  /// Creates a root task and its four Pending subtasks.
  /// Throws Error{UnknownLanguage}, Error{InvalidGrade}, Error{InvalidArgument}.
  TaskId submit_request(const LessonRequest& request);
  std::shared_future<LessonPackage> result(TaskId root);
  /// Blocks (threaded) or drives the scheduler (cooperative) until the root settles.
  /// Throws StageError.
  LessonPackage wait(TaskId root);
  LessonPackage run_pipeline(const LessonRequest& request);

  /// Cooperative mode: one scheduling decision. False when nothing was runnable.
  bool step();

  /// Test hook: the agent stops sending heartbeats and ignores its mailbox.
  void freeze(const AgentId& id, bool frozen);

  const TaskTable& tasks() const { return tasks_; }
  const Router& router() const { return router_; }
  SharedState& state() { return state_; }
  const RuntimeResources& resources() const { return resources_; }
  const RuntimeConfig& config() const { return config_; }
  Clock& clock() { return clock_; }
  std::vector<AgentId> dead_agents() const;

 private:
  friend class Coordinator;
  friend class RoleAgent;

  void idle_advance();

  RuntimeResources resources_;
  RuntimeConfig config_;
  Clock& clock_;
  Router router_;
  TaskTable tasks_;
  SharedState state_;
  StreamObserver observer_;
  std::unique_ptr<Coordinator> coordinator_;
  std::vector<std::unique_ptr<RoleAgent>> agents_;
  std::vector<std::thread> threads_;
  std::mt19937_64 schedule_rng_;
  std::mutex drive_mutex_;
  std::mutex submit_mutex_;
  bool started_ = false;
  bool stopped_ = false;
};

}  // namespace sankofa::agent
