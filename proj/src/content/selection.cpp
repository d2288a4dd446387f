#include <fmt/format.h>

#include <algorithm>

#include "sankofa/common/text.hpp"
#include "sankofa/content/content.hpp"

namespace sankofa::content {

double SelectionTable::score(const std::string& language, const std::string& model) const {
  auto it = scores.find({language, model});
  return it == scores.end() ? 0.0 : it->second;
}

std::string select_model(const BackendRegistry& registry, std::string_view language,
                         const SelectionTable& table, std::mt19937_64& rng) {
  const auto candidates = registry.for_language(language);
  if (candidates.empty()) {
    throw Error(Errc::NoBackendForLanguage, "no backend supports " + std::string(language));
  }
  if (unit_interval(rng) < table.epsilon) {
    return candidates[uniform_index(rng, candidates.size())];
  }
  // Candidates are sorted, so strict '>' keeps the smallest name among equal scores.
  const std::string lang(language);
  const std::string* best = &candidates.front();
  double best_score = table.score(lang, *best);
  for (const auto& name : candidates) {
    const double s = table.score(lang, name);
    if (s > best_score) {
      best = &name;
      best_score = s;
    }
  }
  return *best;
}

std::string select_model(const BackendRegistry& registry, std::string_view language,
                         const SelectionTable& table, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return select_model(registry, language, table, rng);
}

double update_selection(SelectionTable& table, const std::string& language,
                        const std::string& model, double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) {
    throw Error(Errc::RewardOutOfRange, fmt::format("reward {} outside [0, 1]", reward));
  }
  if (!(table.alpha > 0.0 && table.alpha <= 1.0)) {
    throw Error(Errc::InvalidArgument, "alpha must lie in (0, 1]");
  }
  double& score = table.scores[{language, model}];
  // Same as (1 - alpha) score + alpha reward, but leaves score bit-identical when reward == score.
  score += table.alpha * (reward - score);
  score = std::clamp(score, 0.0, 1.0);
  return score;
}

}  // namespace sankofa::content
