#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "sankofa/common/error.hpp"
#include "sankofa/mdp/mdp.hpp"

using namespace sankofa;
using namespace sankofa::mdp;

namespace {

// Exact value of a fixed policy: solve (I - gamma P_pi) V = R_pi.
std::vector<double> evaluate_policy_exactly(const MdpModel& m, const Policy& policy) {
  const auto n = static_cast<Eigen::Index>(m.state_count());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const std::size_t act = policy[static_cast<std::size_t>(s)];
    r(s) = m.rewards[static_cast<std::size_t>(s)][act];
    for (const Transition& t : m.transitions[static_cast<std::size_t>(s)][act]) {
      a(s, static_cast<Eigen::Index>(t.next)) -= m.discount * t.probability;
    }
  }
  Eigen::VectorXd v = a.fullPivLu().solve(r);
  return {v.data(), v.data() + n};
}

// Best value per state over every deterministic stationary policy.
std::vector<double> best_by_enumeration(const MdpModel& m) {
  const std::size_t n = m.state_count();
  std::vector<double> best(n, -1e300);
  Policy policy(n, 0);
  std::function<void(std::size_t)> recurse = [&](std::size_t s) {
    if (s == n) {
      auto v = evaluate_policy_exactly(m, policy);
      for (std::size_t i = 0; i < n; ++i) best[i] = std::max(best[i], v[i]);
      return;
    }
    for (std::size_t a = 0; a < m.action_count; ++a) {
      policy[s] = a;
      recurse(s + 1);
    }
  };
  recurse(0);
  return best;
}

MdpModel random_mdp(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n_dist(1, 4), a_dist(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MdpModel m;
  const std::size_t n = n_dist(rng);
  m.action_count = a_dist(rng);
  m.discount = 0.1 + 0.85 * u(rng);
  m.states.resize(n);
  for (std::size_t s = 0; s < n; ++s) m.states[s] = {"s" + std::to_string(s), 0};
  m.transitions.assign(n, std::vector<std::vector<Transition>>(m.action_count));
  m.rewards.assign(n, std::vector<double>(m.action_count));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < m.action_count; ++a) {
      std::vector<double> w(n);
      double total = 0;
      for (auto& x : w) {
        x = u(rng) < 0.3 ? 0.0 : u(rng);
        total += x;
      }
      if (total == 0) {
        w[s] = 1;
        total = 1;
      }
      for (std::size_t t = 0; t < n; ++t) {
        if (w[t] > 0) m.transitions[s][a].push_back({t, w[t] / total});
      }
      m.rewards[s][a] = 2 * u(rng) - 1;
    }
  }
  return m;
}

MdpModel single_state_self_loop(double reward, double discount) {
  MdpModel m;
  m.states = {{"s", 0}};
  m.action_count = 1;
  m.transitions = {{{{0, 1.0}}}};
  m.rewards = {{reward}};
  m.discount = discount;
  return m;
}

// s0 -> s1 deterministically with reward 0, s1 loops with reward 1.
MdpModel two_state_chain(double discount) {
  MdpModel m;
  m.states = {{"s0", 0}, {"s1", 0}};
  m.action_count = 1;
  m.transitions = {{{{1, 1.0}}}, {{{1, 1.0}}}};
  m.rewards = {{0.0}, {1.0}};
  m.discount = discount;
  return m;
}

// Independent reachable-state count: every level of every topic needed for the goal
// (goal topics plus their transitive prerequisites), up to the target level for goal topics
// and the top level for pure prerequisites, plus the goal state.
std::size_t enumerate_reachable(const CurriculumGraph& g) {
  std::map<std::string, int> limit;
  std::function<void(const std::string&, int)> visit = [&](const std::string& topic, int level) {
    auto [it, inserted] = limit.try_emplace(topic, level);
    if (!inserted) {
      if (level <= it->second) return;
      it->second = level;
    }
    for (const auto& [pre, dep] : g.prerequisites) {
      if (dep == topic) visit(pre, g.mastery_levels - 1);
    }
  };
  for (const auto& [topic, level] : g.goal) visit(topic, level);
  std::size_t count = 0;
  for (const auto& [topic, level] : limit) {
    for (int l = 0; l <= level; ++l) ++count;
  }
  return count + 1;
}

}  // namespace

TEST_CASE("build_mdp: one topic with two levels yields two states plus goal") {
  CurriculumGraph g{{"fractions"}, {}, 2, {{"fractions", 1}}};
  const MdpModel m = build_mdp(g);
  CHECK(m.state_count() == 3);
  REQUIRE(m.goal.has_value());
  CHECK(*m.goal == 2);
  CHECK(m.states[0] == StateLabel{"fractions", 0});
  CHECK(m.states[1] == StateLabel{"fractions", 1});
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("build_mdp: rejects cycles and empty curricula") {
  CurriculumGraph cyclic{{"A", "B"}, {{"A", "B"}, {"B", "A"}}, 2, {{"B", 1}}};
  try {
    build_mdp(cyclic);
    FAIL("expected CyclicPrerequisites");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CyclicPrerequisites);
  }
  CurriculumGraph empty{{}, {}, 2, {{"A", 1}}};
  CHECK_THROWS_AS(build_mdp(empty), Error);
  CurriculumGraph no_goal{{"A"}, {}, 2, {}};
  try {
    build_mdp(no_goal);
    FAIL("expected EmptyCurriculum");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyCurriculum);
  }
}

TEST_CASE("build_mdp: state count matches independent enumeration") {
  CurriculumGraph chained{{"A", "B", "C"}, {{"A", "B"}, {"B", "C"}}, 3, {{"C", 2}}};
  CHECK(build_mdp(chained).state_count() == enumerate_reachable(chained));
  CHECK(enumerate_reachable(chained) == 10);

  CurriculumGraph branching{
      {"D", "A", "B", "C"}, {{"A", "C"}, {"B", "C"}}, 3, {{"C", 1}}};
  const MdpModel m = build_mdp(branching);
  CHECK(m.state_count() == enumerate_reachable(branching));
  for (const auto& label : m.states) CHECK(label.topic != "D");

  CurriculumGraph shallow_goal{{"A", "B"}, {{"A", "B"}}, 4, {{"A", 1}, {"B", 0}}};
  CHECK(build_mdp(shallow_goal).state_count() == enumerate_reachable(shallow_goal));
}

TEST_CASE("build_mdp: rows are stochastic, goal absorbs, rewards follow defaults") {
  CurriculumGraph g{{"A", "B"}, {{"A", "B"}}, 2, {{"B", 1}}};
  const MdpModel m = build_mdp(g);
  m.validate();
  const std::size_t last = *m.goal - 1;
  // Exercise advances with 0.7; entering the goal pays +1, every step costs 0.01.
  CHECK(m.rewards[last][1] == doctest::Approx(-0.01 + 0.7));
  CHECK(m.rewards[0][1] == doctest::Approx(-0.01));
  for (std::size_t a = 0; a < kActionCount; ++a) CHECK(m.rewards[*m.goal][a] == 0.0);
}

TEST_CASE("value_iterate: geometric self-loop") {
  const auto v = value_iterate(single_state_self_loop(1.0, 0.9), 1e-9, 10'000);
  CHECK(v.converged);
  CHECK(std::fabs(v.values[0] - 10.0) < 1e-6);
  CHECK(v.residual < 1e-9);
}

TEST_CASE("value_iterate: zero discount is myopic after one sweep") {
  std::mt19937_64 rng(7);
  MdpModel m = random_mdp(rng);
  m.discount = 0.0;
  const auto v = value_iterate(m, 1e-9, 1);
  for (std::size_t s = 0; s < m.state_count(); ++s) {
    double best = m.rewards[s][0];
    for (std::size_t a = 1; a < m.action_count; ++a) best = std::max(best, m.rewards[s][a]);
    CHECK(v.values[s] == best);
  }
  CHECK(v.iterations == 1);
}

TEST_CASE("value_iterate: two-state chain fixed point") {
  // Hand Bellman iteration: V1 <- 1 + 0.5 V1 => 2; V0 <- 0 + 0.5 V1 => 1.
  const auto v = value_iterate(two_state_chain(0.5), 1e-12, 10'000);
  CHECK(v.converged);
  CHECK(std::fabs(v.values[1] - 2.0) < 1e-9);
  CHECK(std::fabs(v.values[0] - 1.0) < 1e-9);
}

TEST_CASE("value_iterate: max iterations returns best-so-far flagged non-converged") {
  const auto v = value_iterate(single_state_self_loop(1.0, 0.9), 1e-12, 5);
  CHECK_FALSE(v.converged);
  CHECK(v.iterations == 5);
  CHECK(v.values[0] == doctest::Approx(1 + 0.9 + 0.81 + 0.729 + 0.6561));
}

TEST_CASE("value_iterate: rejects invalid input") {
  CHECK_THROWS_AS(value_iterate(single_state_self_loop(1.0, 0.9), 0.0), Error);
  MdpModel bad = two_state_chain(0.5);
  bad.transitions[0][0][0].probability = 0.9;
  try {
    value_iterate(bad);
    FAIL("expected InvalidModel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidModel);
  }
  bad = two_state_chain(1.0);
  CHECK_THROWS_AS(value_iterate(bad), Error);
}

TEST_CASE("extract_policy: tie-break and argmax") {
  MdpModel m;
  m.states = {{"s", 0}};
  m.action_count = 2;
  m.transitions = {{{{0, 1.0}}, {{0, 1.0}}}};
  m.discount = 0.0;
  m.rewards = {{3.0, 3.0}};
  CHECK(extract_policy(m, {0.0})[0] == static_cast<std::size_t>(Action::Lesson));
  m.rewards = {{1.0, 5.0}};
  CHECK(extract_policy(m, {0.0})[0] == static_cast<std::size_t>(Action::Exercise));
}

TEST_CASE("property: contraction, oracle equivalence, reward monotonicity") {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 100; ++trial) {
    const MdpModel m = random_mdp(rng);
    const auto v = value_iterate(m, 1e-12, 100'000);
    REQUIRE(v.converged);
    for (std::size_t k = 1; k < v.residual_history.size(); ++k) {
      CHECK(v.residual_history[k] <= m.discount * v.residual_history[k - 1] + 1e-12);
    }

    const auto policy = extract_policy(m, v.values);
    const auto policy_value = evaluate_policy_exactly(m, policy);
    const auto best = best_by_enumeration(m);
    for (std::size_t s = 0; s < m.state_count(); ++s) {
      CHECK(std::fabs(policy_value[s] - best[s]) <= 1e-8);
    }

    MdpModel bumped = m;
    std::uniform_int_distribution<std::size_t> ps(0, m.state_count() - 1);
    std::uniform_int_distribution<std::size_t> pa(0, m.action_count - 1);
    bumped.rewards[ps(rng)][pa(rng)] += 0.5;
    const auto vb = value_iterate(bumped, 1e-12, 100'000);
    for (std::size_t s = 0; s < m.state_count(); ++s) {
      CHECK(vb.values[s] >= v.values[s] - 1e-9);
    }
  }
}

TEST_CASE("plan_pathway: goal start, deterministic chain, truncation") {
  // s0 -> s1 -> goal, all deterministic.
  MdpModel m;
  m.states = {{"s0", 0}, {"s1", 0}, {"GOAL", -1}};
  m.action_count = 1;
  m.transitions = {{{{1, 1.0}}}, {{{2, 1.0}}}, {{{2, 1.0}}}};
  m.rewards = {{0.0}, {1.0}, {0.0}};
  m.discount = 0.5;
  m.goal = 2;
  const auto policy = extract_policy(m, value_iterate(m).values);

  auto at_goal = plan_pathway(m, policy, 2, 10);
  CHECK(at_goal.steps.empty());
  CHECK(at_goal.reached_goal);

  auto chain = plan_pathway(m, policy, 0, 10);
  REQUIRE(chain.steps.size() == 2);
  CHECK(chain.steps[0].state == 0);
  CHECK(chain.steps[1].state == 1);
  CHECK(chain.reached_goal);

  auto truncated = plan_pathway(m, policy, 0, 1);
  CHECK(truncated.steps.size() == 1);
  CHECK_FALSE(truncated.reached_goal);

  try {
    plan_pathway(m, policy, 9, 3);
    FAIL("expected UnreachableStart");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnreachableStart);
  }
}

TEST_CASE("plan_pathway: curriculum pathway follows positive transitions to the goal") {
  CurriculumGraph g{{"A", "B", "C"}, {{"A", "B"}, {"B", "C"}}, 3, {{"C", 2}}};
  const MdpModel m = build_mdp(g);
  const auto policy = extract_policy(m, value_iterate(m).values);
  // Exercise has the highest advance probability everywhere.
  for (std::size_t s = 0; s < *m.goal; ++s) CHECK(policy[s] == 1);
  const auto path = plan_pathway(m, policy, 0, 100);
  CHECK(path.reached_goal);
  CHECK(path.steps.size() == m.state_count() - 1);
  for (std::size_t i = 0; i + 1 < path.steps.size(); ++i) {
    bool connected = false;
    for (const auto& t : m.transitions[path.steps[i].state][path.steps[i].action]) {
      connected = connected || (t.next == path.steps[i + 1].state && t.probability > 0);
    }
    CHECK(connected);
  }
  const std::string text = format_pathway(m, path);
  CHECK(text.rfind("A 0 exercise\nA 1 exercise\n", 0) == 0);
}

TEST_CASE("plan_pathway: likely-stay actions loop until the horizon") {
  CurriculumGraph g{{"A"}, {}, 2, {{"A", 1}}};
  MdpConfig config;
  config.advance_probability = {0.4, 0.3, 0.2, 0.1};
  const MdpModel m = build_mdp(g, config);
  const auto policy = extract_policy(m, value_iterate(m).values);
  const auto path = plan_pathway(m, policy, 0, 4);
  CHECK(path.steps.size() == 4);
  for (const auto& step : path.steps) CHECK(step.state == 0);
}

TEST_CASE("parse_curriculum reads the documented keys") {
  const auto g = parse_curriculum(
      R"({"topics": ["a", "b"], "prereq": [["a", "b"]], "levels": 3, "goal": [["b", 2]]})");
  CHECK(g.topics.size() == 2);
  CHECK(g.prerequisites.front() == std::pair<std::string, std::string>{"a", "b"});
  CHECK(g.mastery_levels == 3);
  CHECK(g.goal.front().second == 2);
  CHECK_THROWS_AS(parse_curriculum("{\"topics\": 3}"), Error);
}
