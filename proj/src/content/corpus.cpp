#include <fmt/format.h>

#include "sankofa/common/text.hpp"
#include "sankofa/content/content.hpp"

namespace sankofa::content {

Corpus load_corpus(const std::filesystem::path& candidates,
                   const std::vector<std::filesystem::path>& references) {
  if (references.empty()) {
    throw Error(Errc::UnreadableFile, "no reference files for " + candidates.string());
  }
  const auto segments = read_lines(candidates);
  std::vector<std::vector<std::string>> reference_lines;
  for (const auto& ref : references) {
    reference_lines.push_back(read_lines(ref));
    if (reference_lines.back().size() != segments.size()) {
      throw Error(Errc::LineCountMismatch,
                  fmt::format("{} has {} lines, {} has {}", candidates.string(), segments.size(),
                              ref.string(), reference_lines.back().size()));
    }
  }
  Corpus corpus;
  corpus.pairs.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    CorpusPair pair{segments[i], {}};
    for (const auto& lines : reference_lines) pair.references.push_back(lines[i]);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

std::vector<std::filesystem::path> discover_references(const std::filesystem::path& candidates) {
  std::vector<std::filesystem::path> found;
  for (int k = 0; k <= 9; ++k) {
    auto ref = candidates;
    ref.replace_extension(".ref" + std::to_string(k));
    if (std::filesystem::is_regular_file(ref)) found.push_back(ref);
  }
  return found;
}

Corpus load_corpus(const std::filesystem::path& candidates) {
  return load_corpus(candidates, discover_references(candidates));
}

}  // namespace sankofa::content
