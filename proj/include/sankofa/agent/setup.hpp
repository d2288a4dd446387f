#pragma once

#include <filesystem>

#include "sankofa/agent/runtime.hpp"
#include "sankofa/common/config.hpp"

namespace sankofa::agent {

/// Builds runtime resources from a config file. Relative paths resolve against `base_dir`.
///
///   [backend.<name>]  kind = mock | stream, languages = sw yo ..., context_window
///                     mock: first_token_ms, gap_ms, script (fixed token script file)
///                     stream: endpoint, retries
///   [selection]       epsilon, alpha, scores (file of `language model score`)
///   [curriculum]      <subject> = file; `default` is the fallback
///   [mdp]             discount, step_reward, goal_reward, horizon, advance (4 probabilities)
///   [assessment]      bank, se_threshold, max_items, min_items
///   [glossary]        <language> = file
///
/// Throws Error{InvalidArgument}, Error{ParseError}, Error{UnreadableFile}.
RuntimeResources load_resources(const Config& config, const std::filesystem::path& base_dir);

}  // namespace sankofa::agent
