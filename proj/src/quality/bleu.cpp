#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <cmath>
#include <map>

#include "sankofa/quality/quality.hpp"

namespace sankofa::quality {

std::vector<std::string> tokenize(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(Errc::InvalidArgument, "ICU NFC normalizer unavailable");
  icu::UnicodeString u =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u = nfc->normalize(u, status);
  u.toLower(icu::Locale::getRoot());
  u = nfc->normalize(u, status);
  if (U_FAILURE(status)) throw Error(Errc::InvalidArgument, "text normalization failed");

  std::vector<std::string> tokens;
  int32_t start = -1;
  auto flush = [&](int32_t end) {
    if (start < 0) return;
    std::string token;
    u.tempSubStringBetween(start, end).toUTF8String(token);
    tokens.push_back(std::move(token));
    start = -1;
  };
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    if (u_isUWhiteSpace(u.char32At(i))) {
      flush(i);
    } else if (start < 0) {
      start = i;
    }
  }
  flush(u.length());
  return tokens;
}

namespace {

using NGram = std::vector<std::string>;

std::map<NGram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<NGram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

BleuResult bleu(const std::vector<std::string>& candidates,
                const std::vector<std::vector<std::string>>& references, const BleuConfig& config) {
  if (candidates.empty()) throw Error(Errc::EmptySegmentList, "no candidate segments");
  if (candidates.size() != references.size()) {
    throw Error(Errc::LineCountMismatch, "candidate and reference segment counts differ");
  }
  if (config.max_n < 1 || config.max_n > 4) throw Error(Errc::InvalidArgument, "max_n must be in 1..4");
  const auto max_n = static_cast<std::size_t>(config.max_n);

  std::vector<std::size_t> matches(max_n, 0), totals(max_n, 0);
  BleuResult result;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    if (references[s].empty()) throw Error(Errc::InvalidArgument, "segment without references");
    const auto cand = tokenize(candidates[s]);
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references[s]) refs.push_back(tokenize(r));

    std::size_t closest = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
      if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) closest = r.size();
    }
    result.candidate_length += cand.size();
    result.reference_length += closest;

    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cand_counts = ngram_counts(cand, n);
      std::map<NGram, std::size_t> max_ref;
      for (const auto& r : refs) {
        for (const auto& [gram, count] : ngram_counts(r, n)) {
          auto& slot = max_ref[gram];
          slot = std::max(slot, count);
        }
      }
      for (const auto& [gram, count] : cand_counts) {
        totals[n - 1] += count;
        const auto it = max_ref.find(gram);
        if (it != max_ref.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }

  if (result.candidate_length == 0) {
    result.flags |= kZeroNGram;
    result.precisions.assign(max_n, 0.0);
    return result;
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    double p;
    if (matches[n] > 0) {
      p = static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
    } else if (config.smoothing == Smoothing::AddOne) {
      p = 1.0 / static_cast<double>(totals[n] + 1);
    } else {
      p = 0.0;
      result.flags |= kZeroNGram;
    }
    result.precisions.push_back(p);
    if (p > 0) log_sum += std::log(p);
  }
  const auto c = static_cast<double>(result.candidate_length);
  const auto r = static_cast<double>(result.reference_length);
  result.brevity_penalty = c > r ? 1.0 : std::exp(1.0 - r / c);
  if (result.flags & kZeroNGram) return result;
  result.score = result.brevity_penalty * std::exp(log_sum / static_cast<double>(max_n));
  return result;
}

}  // namespace sankofa::quality
