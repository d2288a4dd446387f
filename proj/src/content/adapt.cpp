#include <algorithm>

#include "sankofa/common/text.hpp"
#include "sankofa/content/content.hpp"

namespace sankofa::content {

std::string_view to_string(AdaptationFlag f) {
  switch (f) {
    case AdaptationFlag::UntranslatedTerm: return "UntranslatedTerm";
    case AdaptationFlag::LengthAnomaly: return "LengthAnomaly";
    case AdaptationFlag::EmptyInput: return "EmptyInput";
  }
  return "?";
}

bool AdaptationResult::has(AdaptationFlag f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

namespace {

std::vector<std::string> paragraphs_of(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  std::size_t start = 0;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    if (line.empty()) {
      flush();
    } else {
      if (!current.empty()) current += ' ';
      current += line;
    }
    start = end + 1;
  }
  flush();
  return out;
}

// Sentence ends at '.', '!' or '?' followed by whitespace or end of paragraph, or at the
// Ethiopic full stop (U+1362).
std::string first_sentence(const std::string& paragraph) {
  static const std::string ethiopic_stop = "\xE1\x8D\xA2";
  for (std::size_t i = 0; i < paragraph.size(); ++i) {
    const char ch = paragraph[i];
    if ((ch == '.' || ch == '!' || ch == '?') &&
        (i + 1 == paragraph.size() || paragraph[i + 1] == ' ')) {
      return paragraph.substr(0, i + 1);
    }
    if (paragraph.compare(i, ethiopic_stop.size(), ethiopic_stop) == 0) {
      return paragraph.substr(0, i + ethiopic_stop.size());
    }
  }
  return paragraph;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  if (from.empty()) return;
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

void add_flag(AdaptationResult& r, AdaptationFlag f) {
  if (!r.has(f)) r.flags.push_back(f);
}

}  // namespace

AdaptationResult adapt(std::string_view text, const AdaptationProfile& profile,
                       const AdaptationConfig& config) {
  AdaptationResult result;
  const auto paragraphs = paragraphs_of(text);
  if (paragraphs.empty()) {
    add_flag(result, AdaptationFlag::EmptyInput);
    return result;
  }

  for (const auto& [source, localized] : profile.glossary) {
    if (source.empty() || text.find(source) == std::string_view::npos) continue;
    result.localized_terms.emplace_back(source, localized);
    if (localized.empty() || localized == source) add_flag(result, AdaptationFlag::UntranslatedTerm);
  }

  const std::size_t count = std::min(config.summary_cap, paragraphs.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::string sentence = first_sentence(paragraphs[i]);
    if (sentence.size() > config.max_sentence_bytes) add_flag(result, AdaptationFlag::LengthAnomaly);
    if (!result.summary.empty()) result.summary += ' ';
    result.summary += sentence;
  }
  for (const auto& [source, localized] : result.localized_terms) {
    if (!localized.empty()) replace_all(result.summary, source, localized);
  }
  return result;
}

AdaptationResult adapt(const GeneratedContent& content, const AdaptationProfile& profile,
                       const AdaptationConfig& config) {
  return adapt(content.text, profile, config);
}

std::vector<std::pair<std::string, std::string>> load_glossary(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> glossary;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(Errc::ParseError, "glossary line without a tab: " + line);
    }
    glossary.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return glossary;
}

}  // namespace sankofa::content
