#include "sankofa/agent/runtime.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <deque>
#include <set>

#include "sankofa/common/text.hpp"

namespace sankofa::agent {

namespace {

constexpr auto kPollInterval = std::chrono::milliseconds(10);
const AgentId kCoordinatorId{Role::Coordinator, 0};

constexpr TaskKind kStages[] = {TaskKind::PlanCurriculum, TaskKind::GenerateContent, TaskKind::AdaptContent,
                                TaskKind::SynthesizeAssessment};

std::string output_key(TaskId root, TaskKind stage) { return fmt::format("lesson/{}/{}", root, to_string(stage)); }

}  // namespace

RuntimeConfig runtime_config_from(const Config& config) {
  RuntimeConfig rc;
  const double timeout_s = config.get_double("runtime", "stage_timeout_s", 120.0);
  const double heartbeat_s = config.get_double("runtime", "heartbeat_s", 5.0);
  if (!(timeout_s > 0) || !(heartbeat_s > 0)) {
    throw Error(Errc::ParseError, "[runtime] stage_timeout_s and heartbeat_s must be positive");
  }
  rc.stage_timeout = static_cast<Nanos>(timeout_s * 1e9);
  rc.heartbeat_period = static_cast<Nanos>(heartbeat_s * 1e9);
  if (auto log = config.get("runtime", "trace_log"); log && !log->empty()) rc.trace_log = *log;
  rc.instances = static_cast<int>(config.get_int("runtime", "instances", 1));
  if (rc.instances < 1) throw Error(Errc::ParseError, "[runtime] instances must be >= 1");
  return rc;
}

class Coordinator {
 public:
  explicit Coordinator(Runtime& rt) : rt_(rt) {}

  void begin(const std::vector<AgentId>& agents) {
    std::lock_guard lock(mutex_);
    for (const auto& a : agents) {
      if (a.role != Role::Coordinator) last_seen_[a] = rt_.clock_.now();
    }
  }

  void submit(TaskId root) {
    {
      std::lock_guard lock(mutex_);
      auto& state = roots_[root];
      state.future = state.promise.get_future().share();
      submissions_.push_back(root);
    }
    if (!rt_.router_.closed()) rt_.router_.interrupt(kCoordinatorId);
  }

  std::shared_future<LessonPackage> result(TaskId root) {
    std::lock_guard lock(mutex_);
    auto it = roots_.find(root);
    if (it == roots_.end()) throw Error(Errc::UnknownTask, fmt::format("no request {}", root));
    return it->second.future;
  }

  bool runnable() {
    {
      std::lock_guard lock(mutex_);
      if (!submissions_.empty()) return true;
    }
    return rt_.router_.has_mail(kCoordinatorId);
  }

  /// Cooperative mode: drain submissions, then handle at most one message.
  void step() {
    std::lock_guard lock(mutex_);
    if (!submissions_.empty()) {
      drain_submissions();
    } else if (auto m = rt_.router_.take(kCoordinatorId)) {
      handle(*m);
    }
    housekeeping_locked();
  }

  void loop() {
    while (!rt_.router_.closed()) {
      auto m = rt_.router_.take_wait(kCoordinatorId, kPollInterval);
      std::lock_guard lock(mutex_);
      try {
        drain_submissions();
        if (m) handle(*m);
        housekeeping_locked();
      } catch (const Error& e) {
        if (e.code() != Errc::QueueClosed) throw;
        return;
      }
    }
  }

  void housekeeping() {
    std::lock_guard lock(mutex_);
    housekeeping_locked();
  }

  std::optional<Nanos> next_deadline() {
    std::lock_guard lock(mutex_);
    std::optional<Nanos> next;
    auto consider = [&](Nanos t) {
      if (!next || t < *next) next = t;
    };
    for (const auto& [root, state] : roots_) {
      if (state.settled) continue;
      for (TaskId child : rt_.tasks_.children(root)) {
        const auto rec = rt_.tasks_.get(child);
        if (rec.state.current == TaskStatus::Assigned || rec.state.current == TaskStatus::Running) {
          consider(rec.assigned_at + rt_.config_.stage_timeout + 1);
        }
      }
    }
    for (const auto& [agent, seen] : last_seen_) {
      if (!dead_.count(agent)) consider(seen + liveness_window() + 1);
    }
    return next;
  }

  std::vector<AgentId> dead() {
    std::lock_guard lock(mutex_);
    return {dead_.begin(), dead_.end()};
  }

  void fail_all(const std::string& reason) {
    std::lock_guard lock(mutex_);
    for (auto& [root, state] : roots_) {
      if (state.settled) continue;
      state.settled = true;
      state.promise.set_exception(std::make_exception_ptr(Error(Errc::QueueClosed, reason)));
    }
  }

 private:
  struct RootState {
    std::promise<LessonPackage> promise;
    std::shared_future<LessonPackage> future;
    bool settled = false;
    std::vector<StageProvenance> provenance;
    std::vector<std::pair<TaskKind, std::string>> outputs;
  };

  Nanos liveness_window() const { return rt_.config_.heartbeat_period * rt_.config_.missed_heartbeats; }

  void drain_submissions() {
    while (!submissions_.empty()) {
      const TaskId root = submissions_.front();
      submissions_.pop_front();
      rt_.tasks_.set_owner(root, kCoordinatorId);
      rt_.tasks_.transition(root, TaskEvent::Assign);
      rt_.tasks_.transition(root, TaskEvent::Start);
      dispatch(root);
    }
  }

  void handle(const Message& m) {
    if (last_seen_.count(m.sender)) last_seen_[m.sender] = std::max(last_seen_[m.sender], rt_.clock_.now());
    if (m.kind == MessageKind::Heartbeat) return;
    if (!rt_.tasks_.contains(m.correlation_id)) return;
    const auto rec = rt_.tasks_.get(m.correlation_id);
    auto root_it = roots_.find(rec.spec.root);
    if (root_it == roots_.end() || root_it->second.settled) return;
    if (!rec.owner || *rec.owner != m.sender) return;
    const TaskId task = m.correlation_id;

    switch (m.kind) {
      case MessageKind::StateSync:
        if (rec.state.current == TaskStatus::Assigned) rt_.tasks_.transition(task, TaskEvent::Start);
        break;
      case MessageKind::TaskResult: {
        if (rec.state.current != TaskStatus::Running) return;
        const auto& result = std::get<TaskResultPayload>(m.payload);
        rt_.tasks_.transition(task, TaskEvent::Complete);
        root_it->second.provenance.push_back({rec.spec.kind, m.sender, result.model_name, result.trace_id});
        root_it->second.outputs.push_back({rec.spec.kind, result.output_key});
        dispatch(rec.spec.root);
        break;
      }
      case MessageKind::Failure: {
        const auto& failure = std::get<FailurePayload>(m.payload);
        const bool timed_out = failure.code == Errc::DeadlineExceeded || failure.code == Errc::Timeout;
        fail_root(rec.spec.root, task, timed_out ? Errc::Timeout : Errc::StageFailed, failure.code,
                  failure.message);
        break;
      }
      default:
        break;
    }
  }

  std::optional<AgentId> pick(Role role) {
    std::vector<AgentId> live;
    for (const auto& [agent, seen] : last_seen_) {
      if (agent.role == role && !dead_.count(agent)) live.push_back(agent);
    }
    if (live.empty()) return std::nullopt;
    return live[rr_[role]++ % live.size()];
  }

  void dispatch(TaskId root) {
    auto& state = roots_.at(root);
    if (state.settled) return;
    const auto children = rt_.tasks_.children(root);
    bool all_done = true;
    for (TaskId child : children) {
      const auto rec = rt_.tasks_.get(child);
      if (rec.state.current != TaskStatus::Completed) all_done = false;
      if (rec.state.current != TaskStatus::Pending) continue;
      const bool ready = std::all_of(rec.spec.depends_on.begin(), rec.spec.depends_on.end(), [&](TaskId d) {
        return rt_.tasks_.get(d).state.current == TaskStatus::Completed;
      });
      if (!ready) continue;
      const auto agent = pick(role_for(rec.spec.kind));
      if (!agent) {
        fail_root(root, child, Errc::StageFailed, Errc::UnknownRecipient,
                  fmt::format("no live {} agent", to_string(role_for(rec.spec.kind))));
        return;
      }
      rt_.tasks_.set_inputs(child, state.outputs);
      rt_.tasks_.set_owner(child, *agent);
      rt_.tasks_.transition(child, TaskEvent::Assign);
      Message assign;
      assign.sender = kCoordinatorId;
      assign.recipient = *agent;
      assign.correlation_id = child;
      assign.kind = MessageKind::TaskAssign;
      assign.payload = rt_.tasks_.get(child).spec;
      rt_.router_.route(std::move(assign));
    }
    if (all_done) complete_root(root);
  }

  template <typename T>
  T output(const RootState& state, TaskKind kind) {
    for (const auto& [k, key] : state.outputs) {
      if (k == kind) {
        if (auto v = rt_.state_.get<T>(key)) return *v;
      }
    }
    throw Error(Errc::StageFailed, fmt::format("missing {} output", to_string(kind)));
  }

  void complete_root(TaskId root) {
    auto& state = roots_.at(root);
    LessonPackage package;
    try {
      package.root = root;
      const auto spec = rt_.tasks_.get(root).spec;
      package.request = {spec.language, spec.subject, spec.grade, spec.max_tokens, spec.seed, spec.backend};
      package.pathway = output<PlannedPathway>(state, TaskKind::PlanCurriculum);
      package.content = output<content::GeneratedContent>(state, TaskKind::GenerateContent);
      package.adaptation = output<content::AdaptationResult>(state, TaskKind::AdaptContent);
      package.assessment = output<AssessmentPlan>(state, TaskKind::SynthesizeAssessment);
      for (TaskKind stage : kStages) {
        for (const auto& p : state.provenance) {
          if (p.stage == stage) package.provenance.push_back(p);
        }
      }
    } catch (const Error& e) {
      fail_root(root, root, Errc::StageFailed, e.code(), e.what());
      return;
    }
    rt_.tasks_.transition(root, TaskEvent::Complete);
    state.settled = true;
    state.promise.set_value(std::move(package));
  }

  void fail_root(TaskId root, TaskId stage_task, Errc code, Errc cause, const std::string& message) {
    auto& state = roots_.at(root);
    if (state.settled) return;
    const auto stage = rt_.tasks_.get(stage_task).spec.kind;
    for (TaskId child : rt_.tasks_.children(root)) {
      const auto current = rt_.tasks_.get(child).state.current;
      if (is_terminal(current)) continue;
      const bool failing = child == stage_task &&
                           (current == TaskStatus::Running || current == TaskStatus::AwaitingDependency);
      rt_.tasks_.transition(child, failing ? TaskEvent::Fail : TaskEvent::Cancel);
    }
    rt_.tasks_.transition(root, TaskEvent::Fail);
    state.settled = true;
    state.promise.set_exception(std::make_exception_ptr(StageError(code, stage, cause, message)));
  }

  void housekeeping_locked() {
    const Nanos now = rt_.clock_.now();
    for (auto& [agent, seen] : last_seen_) {
      if (dead_.count(agent) || now - seen <= liveness_window()) continue;
      dead_.insert(agent);
      for (auto& [root, state] : roots_) {
        if (state.settled) continue;
        for (TaskId child : rt_.tasks_.children(root)) {
          const auto rec = rt_.tasks_.get(child);
          if (rec.owner == agent && !is_terminal(rec.state.current) && rec.state.current != TaskStatus::Pending) {
            fail_root(root, child, Errc::StageFailed, Errc::Timeout,
                      fmt::format("{} missed {} heartbeats", to_string(agent), rt_.config_.missed_heartbeats));
            break;
          }
        }
      }
    }
    for (auto& [root, state] : roots_) {
      if (state.settled) continue;
      for (TaskId child : rt_.tasks_.children(root)) {
        const auto rec = rt_.tasks_.get(child);
        if ((rec.state.current == TaskStatus::Assigned || rec.state.current == TaskStatus::Running) &&
            now > rec.assigned_at + rt_.config_.stage_timeout) {
          fail_root(root, child, Errc::Timeout, Errc::Timeout,
                    fmt::format("no result within {} ms", rt_.config_.stage_timeout / kNanosPerMilli));
          break;
        }
      }
    }
  }

  Runtime& rt_;
  std::mutex mutex_;
  std::deque<TaskId> submissions_;
  std::map<TaskId, RootState> roots_;
  std::map<AgentId, Nanos> last_seen_;
  std::set<AgentId> dead_;
  std::map<Role, std::size_t> rr_;
};

class RoleAgent {
 public:
  RoleAgent(Runtime& rt, AgentId id) : id_(id), rt_(rt), last_heartbeat_(rt.clock_.now()) {}

  const AgentId& id() const { return id_; }
  bool runnable() const { return !frozen_ && rt_.router_.has_mail(id_); }
  void set_frozen(bool f) { frozen_ = f; }
  bool frozen() const { return frozen_; }
  Nanos next_heartbeat() const { return last_heartbeat_ + rt_.config_.heartbeat_period; }

  void step() {
    if (auto m = rt_.router_.take(id_)) handle(*m);
  }

  void loop() {
    try {
      while (!rt_.router_.closed()) {
        if (frozen_) {
          std::this_thread::sleep_for(kPollInterval);
          continue;
        }
        if (auto m = rt_.router_.take_wait(id_, kPollInterval)) handle(*m);
        maybe_heartbeat();
      }
    } catch (const Error& e) {
      if (e.code() != Errc::QueueClosed) throw;
    }
  }

  void maybe_heartbeat() {
    if (frozen_) return;
    const Nanos now = rt_.clock_.now();
    if (now < next_heartbeat()) return;
    last_heartbeat_ = now;
    Message hb;
    hb.sender = id_;
    hb.recipient = kCoordinatorId;
    hb.kind = MessageKind::Heartbeat;
    rt_.router_.route(std::move(hb));
  }

 private:
  void send(TaskId task, MessageKind kind, Payload payload = {}) {
    Message m;
    m.sender = id_;
    m.recipient = kCoordinatorId;
    m.correlation_id = task;
    m.kind = kind;
    m.payload = std::move(payload);
    rt_.router_.route(std::move(m));
    last_heartbeat_ = rt_.clock_.now();
  }

  void handle(const Message& m) {
    if (m.kind != MessageKind::TaskAssign) return;
    const auto& spec = std::get<TaskSpec>(m.payload);
    send(spec.task_id, MessageKind::StateSync);
    TaskResultPayload result;
    try {
      std::any out = run_stage(spec, result);
      result.output_key = output_key(spec.root, spec.kind);
      result.version = rt_.state_.sync_state(result.output_key, std::move(out), 0);
    } catch (const Error& e) {
      if (e.code() == Errc::QueueClosed) throw;
      send(spec.task_id, MessageKind::Failure, FailurePayload{e.code(), e.what()});
      return;
    } catch (const std::exception& e) {
      send(spec.task_id, MessageKind::Failure, FailurePayload{Errc::StageFailed, e.what()});
      return;
    }
    send(spec.task_id, MessageKind::TaskResult, std::move(result));
  }

  template <typename T>
  T input(const TaskSpec& spec, TaskKind kind) {
    for (const auto& [k, key] : spec.inputs) {
      if (k == kind) {
        if (auto v = rt_.state_.get<T>(key)) return *v;
      }
    }
    throw Error(Errc::StageFailed, fmt::format("{} input missing", to_string(kind)));
  }

  std::any run_stage(const TaskSpec& spec, TaskResultPayload& result) {
    const auto& res = rt_.resources_;
    switch (spec.kind) {
      case TaskKind::PlanCurriculum: {
        auto it = res.curricula.find(spec.subject);
        if (it == res.curricula.end()) it = res.curricula.find("*");
        if (it == res.curricula.end()) throw Error(Errc::EmptyCurriculum, "no curriculum for " + spec.subject);
        const auto model = mdp::build_mdp(it->second, res.mdp_config);
        const auto values = mdp::value_iterate(model);
        const auto policy = mdp::extract_policy(model, values.values);
        PlannedPathway planned;
        planned.pathway = mdp::plan_pathway(model, policy, 0, res.pathway_horizon);
        planned.states = model.states;
        planned.text = mdp::format_pathway(model, planned.pathway);
        result.model_name = "value-iteration";
        return planned;
      }
      case TaskKind::GenerateContent: {
        content::GenerationRequest request;
        request.template_id = "lesson";
        request.language = spec.language;
        request.subject = spec.subject;
        request.grade = spec.grade;
        request.max_tokens = spec.max_tokens;
        request.seed = spec.seed;
        request.deadline = rt_.config_.stage_timeout;
        const std::string name =
            spec.backend ? *spec.backend : content::select_model(*res.registry, spec.language, res.selection, spec.seed);
        auto backend = res.registry->resolve(name);
        const TaskId root = spec.root;
        const Nanos dispatched = rt_.clock_.now();
        auto observe = [this, root, dispatched](const content::TokenEvent& e) {
          if (rt_.observer_) rt_.observer_(root, e, dispatched);
          maybe_heartbeat();
        };
        try {
          auto generated = content::generate_stream(request, *backend, rt_.clock_, observe);
          result.model_name = backend->descriptor().name;
          result.trace_id = res.traces->put(metrics::record_trace(generated));
          return generated;
        } catch (const content::GenerationError& e) {
          if (!e.partial().events.empty()) res.traces->put(metrics::record_trace(e));
          throw;
        }
      }
      case TaskKind::AdaptContent: {
        const auto generated = input<content::GeneratedContent>(spec, TaskKind::GenerateContent);
        content::AdaptationProfile profile{spec.language, {}};
        if (auto it = res.glossaries.find(spec.language); it != res.glossaries.end()) profile.glossary = it->second;
        result.model_name = "extractive-summary";
        return content::adapt(generated, profile);
      }
      case TaskKind::SynthesizeAssessment: {
        const auto generated = input<content::GeneratedContent>(spec, TaskKind::GenerateContent);
        AssessmentPlan plan;
        plan.pool = irt::synthesize_assessment(generated.text, res.template_bank);
        plan.stop_rule = res.stop_rule;
        result.model_name = "irt-3pl-template-bank";
        return plan;
      }
      case TaskKind::Lesson:
        break;
    }
    throw Error(Errc::InvalidArgument, "not a stage task");
  }

  AgentId id_;
  Runtime& rt_;
  std::atomic<bool> frozen_{false};
  std::atomic<Nanos> last_heartbeat_;
};

Runtime::Runtime(RuntimeResources resources, RuntimeConfig config, Clock& clock)
    : resources_(std::move(resources)),
      config_(std::move(config)),
      clock_(clock),
      router_(clock, config_.trace_log),
      tasks_(clock),
      schedule_rng_(config_.schedule_seed) {
  if (!resources_.registry) throw Error(Errc::InvalidArgument, "runtime needs a backend registry");
  if (config_.instances < 1) throw Error(Errc::InvalidArgument, "instances must be >= 1");
  coordinator_ = std::make_unique<Coordinator>(*this);
  router_.register_agent(kCoordinatorId);
  for (Role role : {Role::CurriculumPlanner, Role::ContentGenerator, Role::LinguisticAdapter,
                    Role::AssessmentSynthesizer}) {
    for (int i = 0; i < config_.instances; ++i) {
      agents_.push_back(std::make_unique<RoleAgent>(*this, AgentId{role, i}));
      router_.register_agent(agents_.back()->id());
    }
  }
}

Runtime::~Runtime() { shutdown(); }

void Runtime::set_stream_observer(StreamObserver observer) { observer_ = std::move(observer); }

void Runtime::start() {
  std::lock_guard lock(drive_mutex_);
  if (started_) return;
  started_ = true;
  coordinator_->begin(router_.agents());
  if (config_.mode == RunMode::Threaded) {
    threads_.emplace_back([this] { coordinator_->loop(); });
    for (auto& a : agents_) threads_.emplace_back([agent = a.get()] { agent->loop(); });
  }
}

void Runtime::shutdown() {
  {
    std::lock_guard lock(drive_mutex_);
    if (stopped_) return;
    stopped_ = true;
  }
  router_.close();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  coordinator_->fail_all("runtime shut down");
}

TaskId Runtime::submit_request(const LessonRequest& request) {
  if (stopped_) throw Error(Errc::QueueClosed, "runtime shut down");
  if (request.language.empty() || !resources_.registry->languages().count(request.language)) {
    throw Error(Errc::UnknownLanguage, "no backend serves language '" + request.language + "'");
  }
  if (request.grade < 1 || request.grade > 12) {
    throw Error(Errc::InvalidGrade, fmt::format("grade {} outside 1-12", request.grade));
  }
  if (request.max_tokens < 1) throw Error(Errc::InvalidArgument, "max_tokens must be >= 1");
  if (request.backend && !resources_.registry->contains(*request.backend)) {
    throw Error(Errc::BackendUnavailable, "unknown backend " + *request.backend);
  }
  start();

  TaskSpec base;
  base.language = request.language;
  base.subject = request.subject;
  base.grade = request.grade;
  base.max_tokens = request.max_tokens;
  base.seed = request.seed;
  base.backend = request.backend;

  // Validate the stage chain on provisional ids before anything enters the table.
  std::vector<TaskSpec> chain;
  for (std::size_t i = 0; i < 4; ++i) {
    TaskSpec s = base;
    s.task_id = i + 1;
    s.kind = kStages[i];
    if (i > 0) s.depends_on = {i};
    chain.push_back(s);
  }
  validate_dag(chain);

  std::lock_guard lock(submit_mutex_);
  TaskSpec root_spec = base;
  root_spec.kind = TaskKind::Lesson;
  const TaskId root = tasks_.create(root_spec);
  std::vector<TaskId> ids;
  for (std::size_t i = 0; i < 4; ++i) {
    TaskSpec s = base;
    s.kind = kStages[i];
    s.root = root;
    if (i > 0) s.depends_on = {ids.back()};
    ids.push_back(tasks_.create(s));
  }
  coordinator_->submit(root);
  return root;
}

std::shared_future<LessonPackage> Runtime::result(TaskId root) { return coordinator_->result(root); }

bool Runtime::step() {
  std::lock_guard lock(drive_mutex_);
  if (stopped_) return false;
  for (auto& a : agents_) a->maybe_heartbeat();
  std::vector<std::size_t> runnable;  // index 0 is the coordinator
  if (coordinator_->runnable()) runnable.push_back(0);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (agents_[i]->runnable()) runnable.push_back(i + 1);
  }
  if (runnable.empty()) {
    coordinator_->housekeeping();
    return false;
  }
  const std::size_t pick = runnable[uniform_index(schedule_rng_, runnable.size())];
  if (pick == 0) {
    coordinator_->step();
  } else {
    agents_[pick - 1]->step();
    coordinator_->housekeeping();
  }
  return true;
}

void Runtime::idle_advance() {
  std::optional<Nanos> next = coordinator_->next_deadline();
  for (auto& a : agents_) {
    if (!a->frozen() && (!next || a->next_heartbeat() < *next)) next = a->next_heartbeat();
  }
  if (!next) throw Error(Errc::Timeout, "pipeline cannot make progress");
  clock_.sleep_until(*next);
}

LessonPackage Runtime::wait(TaskId root) {
  auto future = result(root);
  if (config_.mode == RunMode::Cooperative) {
    while (future.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
      if (!step()) {
        if (stopped_) break;
        idle_advance();
      }
    }
  }
  return future.get();
}

LessonPackage Runtime::run_pipeline(const LessonRequest& request) { return wait(submit_request(request)); }

void Runtime::freeze(const AgentId& id, bool frozen) {
  for (auto& a : agents_) {
    if (a->id() == id) {
      a->set_frozen(frozen);
      return;
    }
  }
  throw Error(Errc::UnknownRecipient, "no such agent " + to_string(id));
}

std::vector<AgentId> Runtime::dead_agents() const { return coordinator_->dead(); }

}  // namespace sankofa::agent
