#include <fmt/format.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "sankofa/common/text.hpp"
#include "sankofa/quality/quality.hpp"

namespace sankofa::quality {

std::string_view to_string(RubricMetric m) {
  return m == RubricMetric::CulturalRelevance ? "cultural_relevance" : "fluency";
}

RubricMetric rubric_metric_from_string(std::string_view s) {
  if (s == "cultural_relevance" || s == "cultrel") return RubricMetric::CulturalRelevance;
  if (s == "fluency") return RubricMetric::Fluency;
  throw Error(Errc::ParseError, "unknown rubric metric: " + std::string(s));
}

namespace {

double parse_real(const std::string& field, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size()) {
    throw Error(Errc::ParseError, fmt::format("line {}: '{}' is not a number", line_no, field));
  }
  return v;
}

template <typename F>
void for_each_record(std::string_view text, std::size_t fields, F&& f) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto parts = split_ws(line);
    if (parts.empty() || parts[0].front() == '#') continue;
    if (parts.size() != fields) {
      throw Error(Errc::ParseError, fmt::format("line {}: expected {} fields, got {}", line_no, fields, parts.size()));
    }
    f(parts, line_no);
  }
}

// Summing in sorted order makes the mean independent of input order.
double mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

std::vector<RubricScore> parse_rubric(std::string_view text) {
  std::vector<RubricScore> scores;
  for_each_record(text, 4, [&](const std::vector<std::string>& f, std::size_t line_no) {
    scores.push_back({f[0], rubric_metric_from_string(f[1]), parse_real(f[2], line_no), f[3]});
  });
  return scores;
}

std::vector<RubricScore> load_rubric(const std::filesystem::path& path) {
  return parse_rubric(read_file(path));
}

std::vector<LanguageBleu> parse_bleu_table(std::string_view text) {
  std::vector<LanguageBleu> rows;
  for_each_record(text, 3, [&](const std::vector<std::string>& f, std::size_t line_no) {
    const double v = parse_real(f[2], line_no);
    if (v < 0.0 || v > 1.0) throw Error(Errc::ParseError, fmt::format("line {}: BLEU outside [0, 1]", line_no));
    rows.push_back({f[0], f[1], v});
  });
  return rows;
}

RubricAggregate aggregate_rubric(const std::vector<RubricScore>& scores) {
  if (scores.empty()) throw Error(Errc::InvalidArgument, "no rubric scores");
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_language;
  for (const auto& s : scores) {
    if (!(s.value >= 1.0 && s.value <= 5.0)) {
      throw Error(Errc::InvalidArgument, fmt::format("rubric value {} outside [1, 5]", s.value));
    }
    if (!by_language.count(s.language)) order.push_back(s.language);
    auto& [cult, flu] = by_language[s.language];
    (s.metric == RubricMetric::CulturalRelevance ? cult : flu).push_back(s.value);
  }
  RubricAggregate agg;
  std::vector<double> cult_means, flu_means;
  for (const auto& language : order) {
    const auto& [cult, flu] = by_language[language];
    if (cult.empty() || flu.empty()) {
      throw Error(Errc::MissingMetric, fmt::format("{} has no {} scores", language,
                                                   cult.empty() ? "cultural_relevance" : "fluency"));
    }
    agg.languages.push_back({language, {mean(cult), mean(flu)}});
    cult_means.push_back(agg.languages.back().second.cultural_relevance);
    flu_means.push_back(agg.languages.back().second.fluency);
  }
  agg.overall = {mean(cult_means), mean(flu_means)};
  return agg;
}

QualityReport build_quality_report(const std::vector<LanguageBleu>& bleu_rows,
                                   const std::vector<RubricScore>& rubric) {
  if (bleu_rows.empty()) throw Error(Errc::EmptySegmentList, "no BLEU rows");
  const auto agg = aggregate_rubric(rubric);
  std::set<std::string> bleu_langs, rubric_langs;
  for (const auto& b : bleu_rows) {
    if (!bleu_langs.insert(b.language).second) {
      throw Error(Errc::LanguageSetMismatch, "language listed twice: " + b.language);
    }
  }
  for (const auto& [language, means] : agg.languages) rubric_langs.insert(language);
  if (bleu_langs != rubric_langs) {
    throw Error(Errc::LanguageSetMismatch, "BLEU and rubric inputs cover different languages");
  }

  QualityReport report;
  std::vector<double> bleus;
  for (const auto& b : bleu_rows) {
    const auto it = std::find_if(agg.languages.begin(), agg.languages.end(),
                                 [&](const auto& entry) { return entry.first == b.language; });
    report.rows.push_back({b.language, b.model, b.bleu, it->second.cultural_relevance, it->second.fluency});
    bleus.push_back(b.bleu);
  }
  report.overall = {"overall", "-", round_half_up(mean(bleus), 3),
                    round_half_up(agg.overall.cultural_relevance, 1), round_half_up(agg.overall.fluency, 1)};
  return report;
}

std::string render_quality_machine(const QualityReport& report) {
  std::string out = "# language model bleu cultrel fluency\n";
  auto row = [](const QualityRow& r) {
    return fmt::format("{} {} {} {} {}\n", r.language, r.model, format_half_up(r.bleu, 3),
                       format_half_up(r.cultural_relevance, 1), format_half_up(r.fluency, 1));
  };
  for (const auto& r : report.rows) out += row(r);
  out += row(report.overall);
  return out;
}

std::string render_quality_human(const QualityReport& report) {
  std::vector<std::array<std::string, 4>> table;
  table.push_back({"Language (Model)", "BLEU", "Cult. Rel. (1-5)", "Fluency (1-5)"});
  for (const auto& r : report.rows) {
    table.push_back({fmt::format("{} ({})", r.language, r.model), format_half_up(r.bleu, 3),
                     format_half_up(r.cultural_relevance, 1), format_half_up(r.fluency, 1)});
  }
  table.push_back({"Average Overall", format_half_up(report.overall.bleu, 3),
                   format_half_up(report.overall.cultural_relevance, 1),
                   format_half_up(report.overall.fluency, 1)});
  std::array<std::size_t, 4> width{};
  for (const auto& line : table) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::string out;
  for (const auto& line : table) {
    std::string text = fmt::format("{:<{}}", line[0], width[0]);
    for (std::size_t c = 1; c < 4; ++c) text += fmt::format("  {:>{}}", line[c], width[c]);
    out += text + "\n";
  }
  return out;
}

}  // namespace sankofa::quality
