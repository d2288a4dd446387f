#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "sankofa/agent/agent.hpp"

namespace sankofa::agent {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Lesson: return "Lesson";
    case TaskKind::PlanCurriculum: return "PlanCurriculum";
    case TaskKind::GenerateContent: return "GenerateContent";
    case TaskKind::AdaptContent: return "AdaptContent";
    case TaskKind::SynthesizeAssessment: return "SynthesizeAssessment";
  }
  return "?";
}

Role role_for(TaskKind k) {
  switch (k) {
    case TaskKind::Lesson: return Role::Coordinator;
    case TaskKind::PlanCurriculum: return Role::CurriculumPlanner;
    case TaskKind::GenerateContent: return Role::ContentGenerator;
    case TaskKind::AdaptContent: return Role::LinguisticAdapter;
    case TaskKind::SynthesizeAssessment: return Role::AssessmentSynthesizer;
  }
  return Role::Coordinator;
}

void validate_dag(const std::vector<TaskSpec>& specs) {
  std::map<TaskId, const TaskSpec*> by_id;
  for (const auto& s : specs) by_id[s.task_id] = &s;
  for (const auto& s : specs) {
    for (TaskId d : s.depends_on) {
      if (!by_id.count(d)) throw Error(Errc::UnknownTask, fmt::format("task {} depends on unknown {}", s.task_id, d));
    }
  }
  // Kahn: anything left after peeling zero in-degree nodes sits on a cycle.
  std::map<TaskId, std::size_t> indegree;
  for (const auto& s : specs) indegree[s.task_id] = s.depends_on.size();
  std::vector<TaskId> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push_back(id);
  }
  std::size_t done = 0;
  while (!ready.empty()) {
    const TaskId id = ready.back();
    ready.pop_back();
    ++done;
    for (const auto& s : specs) {
      for (TaskId d : s.depends_on) {
        if (d == id && --indegree[s.task_id] == 0) ready.push_back(s.task_id);
      }
    }
  }
  if (done != specs.size()) throw Error(Errc::CyclicDependency, "task dependencies form a cycle");
}

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Pending: return "Pending";
    case TaskStatus::Assigned: return "Assigned";
    case TaskStatus::Running: return "Running";
    case TaskStatus::AwaitingDependency: return "AwaitingDependency";
    case TaskStatus::Completed: return "Completed";
    case TaskStatus::Failed: return "Failed";
    case TaskStatus::Cancelled: return "Cancelled";
  }
  return "?";
}

std::string_view to_string(TaskEvent e) {
  switch (e) {
    case TaskEvent::Assign: return "Assign";
    case TaskEvent::Start: return "Start";
    case TaskEvent::Block: return "Block";
    case TaskEvent::Unblock: return "Unblock";
    case TaskEvent::Complete: return "Complete";
    case TaskEvent::Fail: return "Fail";
    case TaskEvent::Cancel: return "Cancel";
  }
  return "?";
}

bool is_terminal(TaskStatus s) {
  return s == TaskStatus::Completed || s == TaskStatus::Failed || s == TaskStatus::Cancelled;
}

std::optional<TaskStatus> apply_event(TaskStatus from, TaskEvent event) {
  using S = TaskStatus;
  switch (event) {
    case TaskEvent::Assign:
      if (from == S::Pending) return S::Assigned;
      break;
    case TaskEvent::Start:
      if (from == S::Assigned) return S::Running;
      break;
    case TaskEvent::Block:
      if (from == S::Running) return S::AwaitingDependency;
      break;
    case TaskEvent::Unblock:
      if (from == S::AwaitingDependency) return S::Running;
      break;
    case TaskEvent::Complete:
      if (from == S::Running) return S::Completed;
      break;
    case TaskEvent::Fail:
      if (from == S::Running || from == S::AwaitingDependency) return S::Failed;
      break;
    case TaskEvent::Cancel:
      if (!is_terminal(from)) return S::Cancelled;
      break;
  }
  return std::nullopt;
}

bool permitted_edge(TaskStatus from, TaskStatus to) {
  for (auto e : {TaskEvent::Assign, TaskEvent::Start, TaskEvent::Block, TaskEvent::Unblock, TaskEvent::Complete,
                 TaskEvent::Fail, TaskEvent::Cancel}) {
    if (apply_event(from, e) == to) return true;
  }
  return false;
}

std::size_t count_edge_violations(const std::vector<TransitionRecord>& log) {
  std::map<TaskId, std::pair<TaskStatus, Nanos>> current;
  std::size_t violations = 0;
  for (const auto& r : log) {
    auto it = current.find(r.task);
    const TaskStatus from = it == current.end() ? TaskStatus::Pending : it->second.first;
    if (from != r.from || !permitted_edge(r.from, r.to)) ++violations;
    if (it != current.end() && r.at < it->second.second) ++violations;
    current[r.task] = {r.to, r.at};
  }
  return violations;
}

TaskId TaskTable::create(TaskSpec spec) {
  std::lock_guard lock(mutex_);
  const TaskId id = next_id_++;
  spec.task_id = id;
  if (spec.kind == TaskKind::Lesson) spec.root = id;
  TaskRecord record;
  record.spec = std::move(spec);
  record.state.history.push_back({TaskStatus::Pending, clock_.now()});
  tasks_.emplace(id, std::move(record));
  return id;
}

TaskState TaskTable::transition(TaskId id, TaskEvent event) {
  std::lock_guard lock(mutex_);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw Error(Errc::UnknownTask, fmt::format("task {}", id));
  auto& state = it->second.state;
  const auto next = apply_event(state.current, event);
  if (!next) {
    throw Error(Errc::IllegalTransition,
                fmt::format("task {}: {} from {}", id, to_string(event), to_string(state.current)));
  }
  // History timestamps never go backwards even if threads read the clock out of order.
  const Nanos at = std::max(clock_.now(), state.history.back().second);
  log_.push_back({at, id, state.current, *next});
  state.current = *next;
  state.history.push_back({*next, at});
  if (event == TaskEvent::Assign) it->second.assigned_at = at;
  return state;
}

void TaskTable::set_owner(TaskId id, const AgentId& owner) {
  std::lock_guard lock(mutex_);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw Error(Errc::UnknownTask, fmt::format("task {}", id));
  it->second.owner = owner;
}

void TaskTable::set_inputs(TaskId id, std::vector<std::pair<TaskKind, std::string>> inputs) {
  std::lock_guard lock(mutex_);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw Error(Errc::UnknownTask, fmt::format("task {}", id));
  it->second.spec.inputs = std::move(inputs);
}

TaskRecord TaskTable::get(TaskId id) const {
  std::lock_guard lock(mutex_);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw Error(Errc::UnknownTask, fmt::format("task {}", id));
  return it->second;
}

bool TaskTable::contains(TaskId id) const {
  std::lock_guard lock(mutex_);
  return tasks_.count(id) != 0;
}

std::vector<TaskId> TaskTable::children(TaskId root) const {
  std::lock_guard lock(mutex_);
  std::vector<TaskId> out;
  for (const auto& [id, rec] : tasks_) {
    if (rec.spec.root == root && id != root) out.push_back(id);
  }
  return out;
}

std::vector<TaskId> TaskTable::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<TaskId> out;
  for (const auto& [id, rec] : tasks_) out.push_back(id);
  return out;
}

std::vector<TransitionRecord> TaskTable::transitions() const {
  std::lock_guard lock(mutex_);
  return log_;
}

Versioned SharedState::read(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  return it == entries_.end() ? Versioned{} : it->second;
}

std::uint64_t SharedState::sync_state(const std::string& key, std::any value, std::uint64_t expected_version) {
  auto stored = std::make_shared<const std::any>(std::move(value));
  std::lock_guard lock(mutex_);
  auto& entry = entries_[key];
  if (entry.version != expected_version) {
    throw Error(Errc::VersionConflict,
                fmt::format("{}: expected version {}, found {}", key, expected_version, entry.version));
  }
  entry.value = std::move(stored);
  return ++entry.version;
}

}  // namespace sankofa::agent
