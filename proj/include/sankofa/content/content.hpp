#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sankofa/common/clock.hpp"
#include "sankofa/common/error.hpp"

namespace sankofa::content {

struct ModelBackendDescriptor {
  std::string name;
  std::set<std::string> supported_languages;
  std::size_t context_window = 2048;
  std::string endpoint;

  bool supports(std::string_view language) const {
    return supported_languages.count(std::string(language)) != 0;
  }
};

struct GenerationRequest {
  std::string template_id = "lesson";
  std::string language;
  std::string subject;
  int grade = 1;
  std::size_t max_tokens = 256;
  std::uint64_t seed = 0;
  /// Relative to request dispatch.
  std::optional<Nanos> deadline;
};

struct TokenEvent {
  std::size_t index = 0;
  std::string text;
  Nanos arrived_at = 0;
};

enum class FinishReason { Stop, MaxTokens, Error };
std::string_view to_string(FinishReason r);
FinishReason finish_reason_from_string(std::string_view s);

struct GeneratedContent {
  std::string text;
  std::vector<TokenEvent> events;
  std::string model_name;
  FinishReason finish_reason = FinishReason::Stop;
  GenerationRequest request;
  Nanos request_sent_at = 0;
  Nanos completed_at = 0;
};

/// Raised by generate_stream; carries whatever arrived before the failure.
class GenerationError : public Error {
 public:
  GenerationError(Errc code, const std::string& message, GeneratedContent partial)
      : Error(code, message), partial_(std::move(partial)) {}
  const GeneratedContent& partial() const { return partial_; }

 private:
  GeneratedContent partial_;
};

/// One unit pulled from a backend stream.
struct Frame {
  enum class Kind { Token, Done, Timeout };
  Kind kind = Kind::Done;
  std::string text;
  FinishReason finish = FinishReason::Stop;
};

class TokenSource {
 public:
  virtual ~TokenSource() = default;
  /// Blocks until the next frame or the absolute deadline (returning Kind::Timeout).
  virtual Frame next(std::optional<Nanos> deadline) = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const ModelBackendDescriptor& descriptor() const = 0;
  /// Throws Error{BackendUnavailable}.
  virtual std::unique_ptr<TokenSource> open(const GenerationRequest& request, Clock& clock) = 0;
};

struct ScriptedToken {
  std::int64_t delay_ms = 0;
  std::string text;
};

/// Mock script file: `<delay_ms> <token-text>` per line. The token is the rest of the line after
/// one separating space; `\n`, `\s` and `\\` escapes allow newlines and leading spaces.
std::vector<ScriptedToken> parse_mock_script(std::string_view text);
std::vector<ScriptedToken> load_mock_script(const std::filesystem::path& path);

/// Deterministic lesson text for a request, split into word tokens with the given delays.
/// `seed` picks among phrasing variants.
std::vector<ScriptedToken> mock_lesson_script(const GenerationRequest& request,
                                              std::int64_t first_token_ms, std::int64_t gap_ms);

/// In-process backend replaying scripted tokens with scripted delays on the supplied clock.
class MockBackend final : public Backend {
 public:
  using ScriptFn = std::function<std::vector<ScriptedToken>(const GenerationRequest&)>;

  MockBackend(ModelBackendDescriptor descriptor, std::vector<ScriptedToken> script);
  MockBackend(ModelBackendDescriptor descriptor, ScriptFn script);

  /// open() throws BackendUnavailable.
  void fail_on_open(bool fail) { fail_on_open_ = fail; }
  /// Stream reports an error after this many tokens.
  void fail_after(std::optional<std::size_t> tokens) { fail_after_ = tokens; }

  const ModelBackendDescriptor& descriptor() const override { return descriptor_; }
  std::unique_ptr<TokenSource> open(const GenerationRequest& request, Clock& clock) override;

 private:
  ModelBackendDescriptor descriptor_;
  ScriptFn script_;
  bool fail_on_open_ = false;
  std::optional<std::size_t> fail_after_;
};

/// Client for a local completion-stream service. Sends one JSON request line, then reads
/// `T <token>` frames and a terminal `DONE <finish_reason>` line (token escapes as in mock
/// scripts). Endpoint: `unix:/path/to/socket` or `tcp:host:port`. Connection attempts are
/// retried up to `max_retries` times.
class StreamClientBackend final : public Backend {
 public:
  explicit StreamClientBackend(ModelBackendDescriptor descriptor, int max_retries = 2,
                               Nanos retry_backoff = millis(50));

  const ModelBackendDescriptor& descriptor() const override { return descriptor_; }
  std::unique_ptr<TokenSource> open(const GenerationRequest& request, Clock& clock) override;

 private:
  ModelBackendDescriptor descriptor_;
  int max_retries_;
  Nanos retry_backoff_;
};

std::string escape_token(std::string_view token);
std::string unescape_token(std::string_view token);

struct RegistryHandle {
  std::string name;
};

/// Reads are concurrent; registration is serialized.
class BackendRegistry {
 public:
  /// Throws Error{DuplicateName}, Error{InvalidArgument} for an empty language set.
  RegistryHandle register_backend(std::shared_ptr<Backend> backend);

  /// Throws Error{BackendUnavailable} for an unknown name.
  std::shared_ptr<Backend> resolve(std::string_view name) const;
  bool contains(std::string_view name) const;
  /// Names of backends supporting `language`, sorted.
  std::vector<std::string> for_language(std::string_view language) const;
  std::set<std::string> languages() const;
  std::vector<std::string> names() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Backend>, std::less<>> backends_;
};

/// Exponentially weighted bandit over feedback rewards, keyed by (language, model).
struct SelectionTable {
  std::map<std::pair<std::string, std::string>, double> scores;
  double epsilon = 0.1;
  double alpha = 0.1;

  /// Missing entries score 0.
  double score(const std::string& language, const std::string& model) const;
};

/// Epsilon-greedy: with probability 1 - epsilon the highest score (ties to the
/// lexicographically smallest name), otherwise uniform over supporting backends.
/// Throws Error{NoBackendForLanguage}.
std::string select_model(const BackendRegistry& registry, std::string_view language,
                         const SelectionTable& table, std::mt19937_64& rng);
std::string select_model(const BackendRegistry& registry, std::string_view language,
                         const SelectionTable& table, std::uint64_t seed);

/// score <- (1 - alpha) score + alpha reward. Throws Error{RewardOutOfRange}.
double update_selection(SelectionTable& table, const std::string& language,
                        const std::string& model, double reward);

using TokenObserver = std::function<void(const TokenEvent&)>;

/// Pulls the backend stream to completion, stamping each token on `clock` as it arrives
/// and before handing it to `observer`. Stops at max_tokens (finish_reason MaxTokens).
/// Throws GenerationError{DeadlineExceeded | BackendUnavailable} with partial content,
/// Error{NoBackendForLanguage} if the backend does not support the request language.
GeneratedContent generate_stream(const GenerationRequest& request, Backend& backend, Clock& clock,
                                 const TokenObserver& observer = {});

enum class AdaptationFlag { UntranslatedTerm, LengthAnomaly, EmptyInput };
std::string_view to_string(AdaptationFlag f);

struct AdaptationProfile {
  std::string language;
  /// (source term, localized term)
  std::vector<std::pair<std::string, std::string>> glossary;
};

struct AdaptationConfig {
  std::size_t summary_cap = 5;
  std::size_t max_sentence_bytes = 400;
};

struct AdaptationResult {
  std::string summary;
  std::vector<std::pair<std::string, std::string>> localized_terms;
  std::vector<AdaptationFlag> flags;

  bool has(AdaptationFlag f) const;
};

/// Extractive summary: the first sentence of each blank-line-separated paragraph, capped at
/// `summary_cap` sentences, with glossary terms substituted. localized_terms lists glossary
/// entries occurring in the text, in glossary order.
AdaptationResult adapt(std::string_view text, const AdaptationProfile& profile,
                       const AdaptationConfig& config = {});
AdaptationResult adapt(const GeneratedContent& content, const AdaptationProfile& profile,
                       const AdaptationConfig& config = {});

/// Glossary lines: `source<TAB>localized`.
std::vector<std::pair<std::string, std::string>> load_glossary(const std::filesystem::path& path);

struct CorpusPair {
  std::string segment;
  std::vector<std::string> references;
};

struct Corpus {
  std::vector<CorpusPair> pairs;
};

/// Aligns candidate lines with each reference file's lines.
/// Throws Error{UnreadableFile}, Error{LineCountMismatch}.
Corpus load_corpus(const std::filesystem::path& candidates,
                   const std::vector<std::filesystem::path>& references);
/// Discovers references named like the candidate with extension `.ref<k>`, k = 0..9.
Corpus load_corpus(const std::filesystem::path& candidates);
std::vector<std::filesystem::path> discover_references(const std::filesystem::path& candidates);

}  // namespace sankofa::content
