#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sankofa::mdp {

/// Activity kinds. Enum order is the policy tie-break order.
enum class Action : int { Lesson = 0, Exercise = 1, Assessment = 2, Review = 3 };
inline constexpr std::size_t kActionCount = 4;
inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::Lesson, Action::Exercise, Action::Assessment, Action::Review};

std::string_view to_string(Action a);
Action action_from_string(std::string_view s);

struct CurriculumGraph {
  std::vector<std::string> topics;
  /// (prerequisite, dependent): the first topic must be completed before the second.
  std::vector<std::pair<std::string, std::string>> prerequisites;
  int mastery_levels = 2;
  /// (topic, level) targets; level in [0, mastery_levels).
  std::vector<std::pair<std::string, int>> goal;
};

/// Reads the JSON curriculum format: {"topics": [...], "prereq": [["a","b"], ...],
/// "levels": L, "goal": [["b", 2], ...]}.
CurriculumGraph load_curriculum(const std::filesystem::path& path);
CurriculumGraph parse_curriculum(std::string_view json_text);

struct MdpConfig {
  /// Probability that each action advances mastery by one step; indexed by Action.
  std::array<double, kActionCount> advance_probability = {0.6, 0.7, 0.5, 0.4};
  double step_reward = -0.01;
  double goal_reward = 1.0;
  double discount = 0.95;
};

/// Label of a curriculum state. The goal state has topic "GOAL" and level -1.
struct StateLabel {
  std::string topic;
  int level = 0;

  bool operator==(const StateLabel&) const = default;
};

struct Transition {
  std::size_t next = 0;
  double probability = 0.0;
};

/// Finite MDP with dense reward and sparse transition rows.
/// transitions[s][a] lists successors with positive probability, sorted by state index.
struct MdpModel {
  std::vector<StateLabel> states;
  std::size_t action_count = kActionCount;
  std::vector<std::vector<std::vector<Transition>>> transitions;
  std::vector<std::vector<double>> rewards;
  double discount = 0.95;
  std::optional<std::size_t> goal;

  std::size_t state_count() const { return states.size(); }

  /// Throws Error{InvalidModel} when a row is not stochastic within 1e-9, the goal is not
  /// absorbing, shapes disagree, or the discount is outside [0, 1).
  void validate() const;
};

/// States are (topic, level) tuples along the prerequisite-ordered path to the goal, plus
/// one absorbing goal state (always the last index). Start state is index 0.
/// Throws Error{CyclicPrerequisites}, Error{EmptyCurriculum}, Error{InvalidArgument}.
MdpModel build_mdp(const CurriculumGraph& curriculum, const MdpConfig& config = {});

struct ValueFunction {
  std::vector<double> values;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
  /// Sup-norm change of each sweep, in order.
  std::vector<double> residual_history;
};

/// Synchronous Bellman optimality sweeps from V = 0 until the sup-norm change drops below
/// `tolerance`. Hitting `max_iters` returns the last iterate with converged = false.
ValueFunction value_iterate(const MdpModel& mdp, double tolerance = 1e-6,
                            std::size_t max_iters = 10'000);

/// R(s,a) + discount * sum_s' P(s'|s,a) V(s').
double backup(const MdpModel& mdp, const std::vector<double>& values, std::size_t state,
              std::size_t action);

using Policy = std::vector<std::size_t>;

/// Greedy argmax of the backup; ties go to the lowest action index.
Policy extract_policy(const MdpModel& mdp, const std::vector<double>& values);

struct PathwayStep {
  std::size_t state = 0;
  std::size_t action = 0;
};

struct LearningPathway {
  std::vector<PathwayStep> steps;
  bool reached_goal = false;
};

/// Follows the policy from `start`, moving each step to the most likely successor (lowest
/// index on ties), until the goal or `horizon` steps.
/// Throws Error{UnreachableStart} if start is not a state, Error{InvalidArgument} if horizon < 1.
LearningPathway plan_pathway(const MdpModel& mdp, const Policy& policy, std::size_t start,
                             std::size_t horizon);

/// `topic level action` per line.
std::string format_pathway(const MdpModel& mdp, const LearningPathway& pathway);

}  // namespace sankofa::mdp
