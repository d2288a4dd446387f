#include "sankofa/mdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <json.hpp>
#include <queue>
#include <set>
#include <sstream>

#include "sankofa/common/error.hpp"
#include "sankofa/common/text.hpp"

namespace sankofa::mdp {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Lesson: return "lesson";
    case Action::Exercise: return "exercise";
    case Action::Assessment: return "assessment";
    case Action::Review: return "review";
  }
  return "?";
}

Action action_from_string(std::string_view s) {
  for (Action a : kAllActions) {
    if (to_string(a) == s) return a;
  }
  throw Error(Errc::ParseError, "unknown action '" + std::string(s) + "'");
}

CurriculumGraph parse_curriculum(std::string_view json_text) {
  CurriculumGraph graph;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    graph.topics = doc.at("topics").get<std::vector<std::string>>();
    if (doc.contains("prereq")) {
      for (const auto& edge : doc.at("prereq")) {
        graph.prerequisites.emplace_back(edge.at(0).get<std::string>(),
                                         edge.at(1).get<std::string>());
      }
    }
    graph.mastery_levels = doc.at("levels").get<int>();
    for (const auto& target : doc.at("goal")) {
      graph.goal.emplace_back(target.at(0).get<std::string>(), target.at(1).get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("curriculum: ") + e.what());
  }
  return graph;
}

CurriculumGraph load_curriculum(const std::filesystem::path& path) {
  return parse_curriculum(read_file(path));
}

void MdpModel::validate() const {
  const std::size_t n = states.size();
  if (n == 0) throw Error(Errc::InvalidModel, "no states");
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw Error(Errc::InvalidModel, "discount must lie in [0, 1)");
  }
  if (transitions.size() != n || rewards.size() != n) {
    throw Error(Errc::InvalidModel, "table shapes disagree with state count");
  }
  if (goal && *goal >= n) throw Error(Errc::InvalidModel, "goal index out of range");
  for (std::size_t s = 0; s < n; ++s) {
    if (transitions[s].size() != action_count || rewards[s].size() != action_count) {
      throw Error(Errc::InvalidModel, "row shape disagrees with action count");
    }
    for (std::size_t a = 0; a < action_count; ++a) {
      double sum = 0.0;
      for (const Transition& t : transitions[s][a]) {
        if (t.next >= n || t.probability < 0.0) {
          throw Error(Errc::InvalidModel, "bad transition entry");
        }
        sum += t.probability;
      }
      if (std::fabs(sum - 1.0) > 1e-9) {
        throw Error(Errc::InvalidModel, "transition row not stochastic");
      }
      if (goal && s == *goal) {
        const auto& row = transitions[s][a];
        if (row.size() != 1 || row[0].next != s) {
          throw Error(Errc::InvalidModel, "goal state is not absorbing");
        }
      }
    }
  }
}

namespace {

std::vector<std::size_t> ordered_required_topics(const CurriculumGraph& curriculum,
                                                 const std::map<std::string, std::size_t>& index,
                                                 const std::set<std::size_t>& goal_topics) {
  const std::size_t n = curriculum.topics.size();
  std::vector<std::vector<std::size_t>> dependents(n);
  std::vector<std::vector<std::size_t>> prerequisites_of(n);
  std::vector<int> indegree(n, 0);
  for (const auto& [pre, dep] : curriculum.prerequisites) {
    const std::size_t p = index.at(pre);
    const std::size_t d = index.at(dep);
    dependents[p].push_back(d);
    prerequisites_of[d].push_back(p);
    ++indegree[d];
  }

  // Kahn's algorithm; the lowest listed topic index goes first among ready topics.
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t t = 0; t < n; ++t) {
    if (indegree[t] == 0) ready.push(t);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t t = ready.top();
    ready.pop();
    order.push_back(t);
    for (std::size_t d : dependents[t]) {
      if (--indegree[d] == 0) ready.push(d);
    }
  }
  if (order.size() != n) throw Error(Errc::CyclicPrerequisites, "prerequisite graph has a cycle");

  std::vector<bool> required(n, false);
  std::vector<std::size_t> stack(goal_topics.begin(), goal_topics.end());
  while (!stack.empty()) {
    const std::size_t t = stack.back();
    stack.pop_back();
    if (required[t]) continue;
    required[t] = true;
    for (std::size_t p : prerequisites_of[t]) stack.push_back(p);
  }

  std::vector<std::size_t> out;
  for (std::size_t t : order) {
    if (required[t]) out.push_back(t);
  }
  return out;
}

}  // namespace

MdpModel build_mdp(const CurriculumGraph& curriculum, const MdpConfig& config) {
  if (curriculum.topics.empty()) throw Error(Errc::EmptyCurriculum, "no topics");
  if (curriculum.goal.empty()) throw Error(Errc::EmptyCurriculum, "no goal targets");
  if (curriculum.mastery_levels < 2) {
    throw Error(Errc::InvalidArgument, "mastery levels must be at least 2");
  }
  if (!(config.discount > 0.0 && config.discount < 1.0)) {
    throw Error(Errc::InvalidArgument, "discount must lie strictly inside (0, 1)");
  }
  bool any_progress = false;
  for (double p : config.advance_probability) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidArgument, "advance probability");
    any_progress = any_progress || p > 0.0;
  }
  if (!any_progress) throw Error(Errc::InvalidArgument, "no action can advance mastery");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < curriculum.topics.size(); ++i) {
    if (!index.emplace(curriculum.topics[i], i).second) {
      throw Error(Errc::InvalidArgument, "duplicate topic " + curriculum.topics[i]);
    }
  }
  auto lookup = [&](const std::string& topic) {
    auto it = index.find(topic);
    if (it == index.end()) throw Error(Errc::InvalidArgument, "unknown topic " + topic);
    return it->second;
  };
  for (const auto& [pre, dep] : curriculum.prerequisites) {
    lookup(pre);
    lookup(dep);
  }

  const int top_level = curriculum.mastery_levels - 1;
  std::map<std::size_t, int> target_level;
  for (const auto& [topic, level] : curriculum.goal) {
    if (level < 0 || level > top_level) {
      throw Error(Errc::InvalidArgument, "goal level out of range for " + topic);
    }
    int& slot = target_level.try_emplace(lookup(topic), level).first->second;
    slot = std::max(slot, level);
  }
  std::set<std::size_t> goal_topics;
  for (const auto& [t, _] : target_level) goal_topics.insert(t);

  MdpModel mdp;
  mdp.discount = config.discount;
  const auto required = ordered_required_topics(curriculum, index, goal_topics);
  // Prerequisites of a required topic need full mastery; other goal topics stop at target.
  std::set<std::size_t> gating;
  for (const auto& [pre, dep] : curriculum.prerequisites) {
    if (std::find(required.begin(), required.end(), index.at(dep)) != required.end()) {
      gating.insert(index.at(pre));
    }
  }
  for (std::size_t t : required) {
    auto it = target_level.find(t);
    const int last = (gating.count(t) || it == target_level.end()) ? top_level : it->second;
    for (int level = 0; level <= last; ++level) {
      mdp.states.push_back({curriculum.topics[t], level});
    }
  }
  const std::size_t goal = mdp.states.size();
  mdp.states.push_back({"GOAL", -1});
  mdp.goal = goal;

  const std::size_t n = mdp.states.size();
  mdp.transitions.assign(n, std::vector<std::vector<Transition>>(kActionCount));
  mdp.rewards.assign(n, std::vector<double>(kActionCount, 0.0));
  for (std::size_t s = 0; s < goal; ++s) {
    for (std::size_t a = 0; a < kActionCount; ++a) {
      const double p = config.advance_probability[a];
      auto& row = mdp.transitions[s][a];
      if (p < 1.0) row.push_back({s, 1.0 - p});
      if (p > 0.0) row.push_back({s + 1, p});
      mdp.rewards[s][a] = config.step_reward + (s + 1 == goal ? p * config.goal_reward : 0.0);
    }
  }
  for (std::size_t a = 0; a < kActionCount; ++a) mdp.transitions[goal][a] = {{goal, 1.0}};
  return mdp;
}

double backup(const MdpModel& mdp, const std::vector<double>& values, std::size_t state,
              std::size_t action) {
  double expected = 0.0;
  for (const Transition& t : mdp.transitions[state][action]) {
    expected += t.probability * values[t.next];
  }
  return mdp.rewards[state][action] + mdp.discount * expected;
}

ValueFunction value_iterate(const MdpModel& mdp, double tolerance, std::size_t max_iters) {
  if (!(tolerance > 0.0)) throw Error(Errc::InvalidArgument, "tolerance must be positive");
  mdp.validate();

  const std::size_t n = mdp.state_count();
  ValueFunction result;
  result.values.assign(n, 0.0);
  std::vector<double> next(n, 0.0);
  while (result.iterations < max_iters) {
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double best = backup(mdp, result.values, s, 0);
      for (std::size_t a = 1; a < mdp.action_count; ++a) {
        best = std::max(best, backup(mdp, result.values, s, a));
      }
      next[s] = best;
      residual = std::max(residual, std::fabs(best - result.values[s]));
    }
    result.values.swap(next);
    ++result.iterations;
    result.residual = residual;
    result.residual_history.push_back(residual);
    if (residual < tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

Policy extract_policy(const MdpModel& mdp, const std::vector<double>& values) {
  if (values.size() != mdp.state_count()) {
    throw Error(Errc::InvalidArgument, "value function does not cover every state");
  }
  Policy policy(mdp.state_count(), 0);
  for (std::size_t s = 0; s < mdp.state_count(); ++s) {
    double best = backup(mdp, values, s, 0);
    for (std::size_t a = 1; a < mdp.action_count; ++a) {
      const double q = backup(mdp, values, s, a);
      if (q > best) {
        best = q;
        policy[s] = a;
      }
    }
  }
  return policy;
}

LearningPathway plan_pathway(const MdpModel& mdp, const Policy& policy, std::size_t start,
                             std::size_t horizon) {
  if (start >= mdp.state_count()) {
    throw Error(Errc::UnreachableStart, "start state " + std::to_string(start));
  }
  if (horizon < 1) throw Error(Errc::InvalidArgument, "horizon must be at least 1");
  if (policy.size() != mdp.state_count()) {
    throw Error(Errc::InvalidArgument, "policy does not cover every state");
  }

  LearningPathway pathway;
  std::size_t state = start;
  pathway.reached_goal = mdp.goal == state;
  while (!pathway.reached_goal && pathway.steps.size() < horizon) {
    const std::size_t action = policy[state];
    pathway.steps.push_back({state, action});
    // Rows are sorted by index, so strict '>' keeps the lowest index on ties.
    const Transition* likely = nullptr;
    for (const Transition& t : mdp.transitions[state][action]) {
      if (t.probability > 0.0 && (!likely || t.probability > likely->probability)) likely = &t;
    }
    state = likely->next;
    pathway.reached_goal = mdp.goal == state;
  }
  return pathway;
}

std::string format_pathway(const MdpModel& mdp, const LearningPathway& pathway) {
  std::ostringstream out;
  for (const PathwayStep& step : pathway.steps) {
    const StateLabel& label = mdp.states[step.state];
    out << label.topic << ' ' << label.level << ' '
        << (mdp.action_count == kActionCount ? to_string(static_cast<Action>(step.action))
                                              : std::to_string(step.action))
        << '\n';
  }
  return out.str();
}

}  // namespace sankofa::mdp
