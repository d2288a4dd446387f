#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sankofa/common/error.hpp"

namespace sankofa::quality {

enum class Smoothing { None, AddOne };

struct BleuConfig {
  int max_n = 4;
  /// AddOne replaces a zero match count for order n with 1 / (candidate n-grams + 1).
  Smoothing smoothing = Smoothing::AddOne;
};

/// NFC, lowercase, split on Unicode whitespace.
std::vector<std::string> tokenize(std::string_view text);

enum BleuFlag : unsigned {
  kZeroNGram = 1u << 0,
};

struct BleuResult {
  double score = 0;
  std::vector<double> precisions;
  double brevity_penalty = 0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
  unsigned flags = 0;
};

/// Corpus BLEU: clipped n-gram counts pooled over segments, brevity penalty against the
/// closest reference length per segment (shorter on ties).
/// Throws Error{EmptySegmentList}, Error{LineCountMismatch}, Error{InvalidArgument}.
BleuResult bleu(const std::vector<std::string>& candidates,
                const std::vector<std::vector<std::string>>& references, const BleuConfig& config = {});

enum class RubricMetric { CulturalRelevance, Fluency };
std::string_view to_string(RubricMetric m);
/// Accepts `cultural_relevance`/`cultrel` and `fluency`. Throws Error{ParseError}.
RubricMetric rubric_metric_from_string(std::string_view s);

struct RubricScore {
  std::string language;
  RubricMetric metric = RubricMetric::Fluency;
  double value = 0;
  std::string rater_id;
};

/// Lines `language metric value rater_id`; `#` comments. Throws Error{ParseError}.
std::vector<RubricScore> parse_rubric(std::string_view text);
std::vector<RubricScore> load_rubric(const std::filesystem::path& path);

struct RubricMeans {
  double cultural_relevance = 0;
  double fluency = 0;
};

struct RubricAggregate {
  /// Mean over raters per language, in first-seen order.
  std::vector<std::pair<std::string, RubricMeans>> languages;
  /// Unweighted mean over languages, unrounded.
  RubricMeans overall;
};

/// Throws Error{MissingMetric} when a language lacks either metric, Error{InvalidArgument} for
/// values outside [1, 5] or no scores at all.
RubricAggregate aggregate_rubric(const std::vector<RubricScore>& scores);

struct LanguageBleu {
  std::string language;
  std::string model;
  double bleu = 0;
};

/// Lines `language model bleu`. Throws Error{ParseError}.
std::vector<LanguageBleu> parse_bleu_table(std::string_view text);

struct QualityRow {
  std::string language;
  std::string model;
  double bleu = 0;
  double cultural_relevance = 0;
  double fluency = 0;
};

struct QualityReport {
  std::vector<QualityRow> rows;
  /// Rounded half-up: BLEU to 3 decimals, rubric to 1.
  QualityRow overall;
};

/// Rows keep the BLEU input order. Throws Error{LanguageSetMismatch}.
QualityReport build_quality_report(const std::vector<LanguageBleu>& bleu_rows,
                                   const std::vector<RubricScore>& rubric);

std::string render_quality_human(const QualityReport& report);
/// `# language model bleu cultrel fluency`, one row per language, then `overall - ...`.
std::string render_quality_machine(const QualityReport& report);

}  // namespace sankofa::quality
