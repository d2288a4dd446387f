#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sankofa::irt {

inline constexpr double kThetaMin = -4.0;
inline constexpr double kThetaMax = 4.0;
inline constexpr int kEapGridPoints = 61;

/// Three-parameter logistic item. 2PL is c = 0; 1PL is c = 0, a = 1.
struct ItemParams {
  int item_id = 0;
  double a = 1.0;  // discrimination, > 0
  double b = 0.0;  // difficulty
  double c = 0.0;  // guessing, in [0, 1)
  std::string prompt_ref;

  /// Throws Error{InvalidArgument} unless a > 0 and 0 <= c < 1.
  void validate() const;
};

/// c + (1 - c) / (1 + exp(-a (theta - b)))
double prob_correct(double theta, const ItemParams& item);

/// Fisher information a^2 (Q/P) ((P - c)/(1 - c))^2. Reduces to a^2 P Q when c = 0.
double item_information(double theta, const ItemParams& item);

/// d log L / d theta for a response pattern.
double log_likelihood_score(double theta, std::span<const bool> responses,
                            std::span<const ItemParams> items);
double log_likelihood(double theta, std::span<const bool> responses,
                      std::span<const ItemParams> items);

enum class Method { MLE, EAP };

enum AbilityFlag : std::uint8_t {
  kClamped = 1u << 0,
  kAllCorrect = 1u << 1,
  kAllIncorrect = 1u << 2,
};

struct AbilityEstimate {
  double theta = 0.0;
  /// +inf when the test information at theta is zero.
  double standard_error = 1.0;
  Method method = Method::EAP;
  std::uint8_t flags = 0;

  bool has(AbilityFlag f) const { return (flags & f) != 0; }
};

/// MLE: Fisher scoring safeguarded by bisection on [-4, 4]; all-correct / all-incorrect
/// patterns (and scores that never change sign) clamp to the bound. SE = 1/sqrt(sum I).
/// EAP: standard normal prior on 61 grid points over [-4, 4]; SE = posterior SD.
/// Throws Error{EmptyResponseSet}, Error{InvalidArgument} on length mismatch.
AbilityEstimate estimate_ability(std::span<const bool> responses, std::span<const ItemParams> items,
                                 Method method);

/// Item with maximum information at theta among those not yet administered; ties go to the
/// lowest item_id. Throws Error{PoolExhausted}.
int select_next_item(double theta, std::span<const ItemParams> pool,
                     std::span<const int> administered);

struct StopRule {
  double se_threshold = 0.35;
  std::size_t max_items = 20;
  std::size_t min_items = 3;
};

enum class StopReason { None, Precision, MaxItems, PoolExhausted };
std::string_view to_string(StopReason r);

struct TranscriptEntry {
  int item_id = 0;
  bool response = false;
  double theta = 0.0;
  double standard_error = 0.0;
};

struct StepOutcome {
  AbilityEstimate estimate;
  std::optional<int> next_item;
  StopReason stop = StopReason::None;
};

/// One learner's computerized adaptive test. Single owner; not thread-safe.
class AdaptiveSession {
 public:
  AdaptiveSession(std::string session_id, std::vector<ItemParams> pool, StopRule rule = {},
                  Method method = Method::EAP);

  /// Selects the first item at the prior ability (theta = 0). Throws Error{PoolExhausted}
  /// for an empty pool, Error{InvalidArgument} if already begun.
  int begin();

  /// Records the response to the pending item and re-estimates ability.
  /// Throws Error{SessionStopped}, Error{NoPendingItem}.
  StepOutcome step(bool response);

  const std::string& id() const { return id_; }
  bool stopped() const { return stop_ != StopReason::None; }
  StopReason stop_reason() const { return stop_; }
  std::optional<int> pending_item() const { return pending_; }
  const AbilityEstimate& current() const { return current_; }
  const std::vector<int>& administered() const { return administered_; }
  const std::vector<bool>& responses() const { return responses_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  const std::vector<ItemParams>& pool() const { return pool_; }
  const ItemParams& item(int item_id) const;

 private:
  std::string id_;
  std::vector<ItemParams> pool_;
  StopRule rule_;
  Method method_;
  std::vector<int> administered_;
  std::vector<bool> responses_;
  std::vector<ItemParams> administered_items_;
  std::vector<TranscriptEntry> transcript_;
  std::optional<int> pending_;
  AbilityEstimate current_;
  StopReason stop_ = StopReason::None;
  bool begun_ = false;
};

/// `item_id response theta se` per step (response as 1/0, reals to 6 decimals).
std::string format_transcript(std::span<const TranscriptEntry> transcript);

/// Calibrated template: an item is produced when `keyword` occurs in the content
/// (ASCII case-insensitive).
struct ItemTemplate {
  std::string template_id;
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  std::string keyword;
  std::string prompt;
};

/// Bank lines: `template_id a b c keyword prompt...`; '#' comments and blank lines skipped.
std::vector<ItemTemplate> parse_template_bank(std::string_view text);
std::vector<ItemTemplate> load_template_bank(const std::filesystem::path& path);

/// Items numbered 1..n in bank order over matching templates; prompt_ref = template_id.
/// Throws Error{InvalidArgument} for an empty bank, Error{NoTemplatesMatched}.
std::vector<ItemParams> synthesize_assessment(std::string_view content,
                                              std::span<const ItemTemplate> bank);

/// Pool lines: `item_id a b c prompt_ref`. Throws Error{ParseError} on malformed lines or
/// duplicate ids.
std::vector<ItemParams> parse_item_pool(std::string_view text);
std::vector<ItemParams> load_item_pool(const std::filesystem::path& path);
std::string format_item_pool(std::span<const ItemParams> pool);

}  // namespace sankofa::irt
