#include "sankofa/agent/setup.hpp"

#include <fmt/format.h>

#include "sankofa/common/text.hpp"

namespace sankofa::agent {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::shared_ptr<content::Backend> make_backend(const Config& config, const std::string& name,
                                               const std::filesystem::path& base) {
  const std::string section = "backend." + name;
  content::ModelBackendDescriptor d;
  d.name = name;
  for (const auto& lang : split_ws(config.get_or(section, "languages", ""))) d.supported_languages.insert(lang);
  if (d.supported_languages.empty()) throw Error(Errc::InvalidArgument, "[" + section + "] needs languages");
  d.context_window = static_cast<std::size_t>(config.get_int(section, "context_window", 2048));
  const auto kind = config.get_or(section, "kind", "mock");
  if (kind == "mock") {
    if (auto script = config.get(section, "script")) {
      return std::make_shared<content::MockBackend>(d, content::load_mock_script(resolve(base, *script)));
    }
    const auto first = config.get_int(section, "first_token_ms", 120);
    const auto gap = config.get_int(section, "gap_ms", 30);
    if (first < 0 || gap < 0) throw Error(Errc::InvalidArgument, "[" + section + "] delays must be >= 0");
    return std::make_shared<content::MockBackend>(d, [first, gap](const content::GenerationRequest& r) {
      return content::mock_lesson_script(r, first, gap);
    });
  }
  if (kind == "stream") {
    d.endpoint = config.get_or(section, "endpoint", "");
    if (d.endpoint.empty()) throw Error(Errc::InvalidArgument, "[" + section + "] needs endpoint");
    return std::make_shared<content::StreamClientBackend>(d, static_cast<int>(config.get_int(section, "retries", 2)));
  }
  throw Error(Errc::InvalidArgument, fmt::format("[{}] unknown kind '{}'", section, kind));
}

}  // namespace

RuntimeResources load_resources(const Config& config, const std::filesystem::path& base_dir) {
  RuntimeResources res;
  res.registry = std::make_shared<content::BackendRegistry>();
  for (const auto& name : config.sections_with_prefix("backend.")) {
    res.registry->register_backend(make_backend(config, name, base_dir));
  }
  if (res.registry->names().empty()) throw Error(Errc::InvalidArgument, "no [backend.<name>] section");

  res.selection.epsilon = config.get_double("selection", "epsilon", res.selection.epsilon);
  res.selection.alpha = config.get_double("selection", "alpha", res.selection.alpha);
  if (auto scores = config.get("selection", "scores")) {
    for (const auto& line : read_lines(resolve(base_dir, *scores))) {
      const auto f = split_ws(line);
      if (f.empty() || f[0][0] == '#') continue;
      if (f.size() != 3) throw Error(Errc::ParseError, "selection scores: expected `language model score`: " + line);
      try {
        res.selection.scores[{f[0], f[1]}] = std::stod(f[2]);
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, "selection scores: bad number: " + line);
      }
    }
  }

  if (const auto* section = config.section("curriculum")) {
    for (const auto& [subject, file] : *section) {
      res.curricula[subject == "default" ? "*" : subject] = mdp::load_curriculum(resolve(base_dir, file));
    }
  }
  if (res.curricula.empty()) throw Error(Errc::InvalidArgument, "[curriculum] lists no curriculum files");

  res.mdp_config.discount = config.get_double("mdp", "discount", res.mdp_config.discount);
  res.mdp_config.step_reward = config.get_double("mdp", "step_reward", res.mdp_config.step_reward);
  res.mdp_config.goal_reward = config.get_double("mdp", "goal_reward", res.mdp_config.goal_reward);
  res.pathway_horizon = static_cast<std::size_t>(config.get_int("mdp", "horizon", 64));
  if (auto advance = config.get("mdp", "advance")) {
    const auto f = split_ws(*advance);
    if (f.size() != res.mdp_config.advance_probability.size()) {
      throw Error(Errc::ParseError, "[mdp] advance needs one probability per action");
    }
    for (std::size_t i = 0; i < f.size(); ++i) res.mdp_config.advance_probability[i] = std::stod(f[i]);
  }

  const auto bank = config.get("assessment", "bank");
  if (!bank) throw Error(Errc::InvalidArgument, "[assessment] bank is required");
  res.template_bank = irt::load_template_bank(resolve(base_dir, *bank));
  res.stop_rule.se_threshold = config.get_double("assessment", "se_threshold", res.stop_rule.se_threshold);
  res.stop_rule.max_items = static_cast<std::size_t>(config.get_int("assessment", "max_items", 20));
  res.stop_rule.min_items = static_cast<std::size_t>(config.get_int("assessment", "min_items", 3));

  if (const auto* section = config.section("glossary")) {
    for (const auto& [language, file] : *section) {
      res.glossaries[language] = content::load_glossary(resolve(base_dir, file));
    }
  }
  return res;
}

}  // namespace sankofa::agent
