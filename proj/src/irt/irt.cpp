#include "sankofa/irt/irt.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "sankofa/common/error.hpp"
#include "sankofa/common/text.hpp"

namespace sankofa::irt {

void ItemParams::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw Error(Errc::InvalidArgument, fmt::format("item {}: discrimination must be > 0", item_id));
  }
  if (!(c >= 0.0 && c < 1.0)) {
    throw Error(Errc::InvalidArgument, fmt::format("item {}: guessing must lie in [0, 1)", item_id));
  }
  if (!std::isfinite(b)) throw Error(Errc::InvalidArgument, "non-finite difficulty");
}

double prob_correct(double theta, const ItemParams& item) {
  const double logistic = 1.0 / (1.0 + std::exp(-item.a * (theta - item.b)));
  return item.c + (1.0 - item.c) * logistic;
}

double item_information(double theta, const ItemParams& item) {
  const double p = prob_correct(theta, item);
  const double q = 1.0 - p;
  if (p <= 0.0) return 0.0;
  const double ratio = (p - item.c) / (1.0 - item.c);
  return item.a * item.a * (q / p) * ratio * ratio;
}

namespace {

void check_pattern(std::span<const bool> responses, std::span<const ItemParams> items) {
  if (responses.empty()) throw Error(Errc::EmptyResponseSet, "no responses");
  if (responses.size() != items.size()) {
    throw Error(Errc::InvalidArgument, "responses and items differ in length");
  }
}

double test_information(double theta, std::span<const ItemParams> items) {
  double total = 0.0;
  for (const auto& item : items) total += item_information(theta, item);
  return total;
}

double standard_error_at(double theta, std::span<const ItemParams> items) {
  const double info = test_information(theta, items);
  return info > 0.0 ? 1.0 / std::sqrt(info) : std::numeric_limits<double>::infinity();
}

AbilityEstimate estimate_mle(std::span<const bool> responses, std::span<const ItemParams> items) {
  AbilityEstimate est;
  est.method = Method::MLE;
  const bool all_correct = std::all_of(responses.begin(), responses.end(), [](bool r) { return r; });
  const bool all_incorrect = std::none_of(responses.begin(), responses.end(), [](bool r) { return r; });

  auto clamp_to = [&](double bound, std::uint8_t extra) {
    est.theta = bound;
    est.flags = static_cast<std::uint8_t>(kClamped | extra);
    est.standard_error = standard_error_at(bound, items);
    return est;
  };
  if (all_correct) return clamp_to(kThetaMax, kAllCorrect);
  if (all_incorrect) return clamp_to(kThetaMin, kAllIncorrect);

  double lo = kThetaMin;
  double hi = kThetaMax;
  if (log_likelihood_score(hi, responses, items) > 0.0) return clamp_to(kThetaMax, 0);
  if (log_likelihood_score(lo, responses, items) < 0.0) return clamp_to(kThetaMin, 0);

  double theta = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double score = log_likelihood_score(theta, responses, items);
    if (std::fabs(score) < 1e-10) break;
    if (score > 0.0) {
      lo = theta;
    } else {
      hi = theta;
    }
    if (hi - lo < 1e-15) break;
    const double info = test_information(theta, items);
    const double proposal = info > 0.0 ? theta + score / info : lo - 1.0;
    theta = (proposal > lo && proposal < hi) ? proposal : 0.5 * (lo + hi);
  }
  est.theta = theta;
  est.standard_error = standard_error_at(theta, items);
  return est;
}

AbilityEstimate estimate_eap(std::span<const bool> responses, std::span<const ItemParams> items) {
  constexpr double step = (kThetaMax - kThetaMin) / (kEapGridPoints - 1);
  std::array<double, kEapGridPoints> log_post{};
  double peak = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kEapGridPoints; ++k) {
    const double theta = kThetaMin + k * step;
    log_post[k] = -0.5 * theta * theta + log_likelihood(theta, responses, items);
    peak = std::max(peak, log_post[k]);
  }
  double mass = 0.0, first = 0.0;
  std::array<double, kEapGridPoints> weight{};
  for (int k = 0; k < kEapGridPoints; ++k) {
    weight[k] = std::exp(log_post[k] - peak);
    mass += weight[k];
    first += weight[k] * (kThetaMin + k * step);
  }
  const double mean = first / mass;
  double second = 0.0;
  for (int k = 0; k < kEapGridPoints; ++k) {
    const double d = kThetaMin + k * step - mean;
    second += weight[k] * d * d;
  }
  AbilityEstimate est;
  est.method = Method::EAP;
  est.theta = mean;
  est.standard_error = std::sqrt(second / mass);
  return est;
}

}  // namespace

double log_likelihood_score(double theta, std::span<const bool> responses,
                            std::span<const ItemParams> items) {
  double score = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const double p = prob_correct(theta, item);
    const double u = responses[i] ? 1.0 : 0.0;
    score += item.a * (u - p) * (p - item.c) / (p * (1.0 - item.c));
  }
  return score;
}

double log_likelihood(double theta, std::span<const bool> responses,
                      std::span<const ItemParams> items) {
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double p = prob_correct(theta, items[i]);
    total += responses[i] ? std::log(p) : std::log1p(-p);
  }
  return total;
}

AbilityEstimate estimate_ability(std::span<const bool> responses, std::span<const ItemParams> items,
                                 Method method) {
  check_pattern(responses, items);
  for (const auto& item : items) item.validate();
  return method == Method::MLE ? estimate_mle(responses, items) : estimate_eap(responses, items);
}

int select_next_item(double theta, std::span<const ItemParams> pool,
                     std::span<const int> administered) {
  const ItemParams* best = nullptr;
  double best_info = -1.0;
  for (const auto& item : pool) {
    if (std::find(administered.begin(), administered.end(), item.item_id) != administered.end()) {
      continue;
    }
    const double info = item_information(theta, item);
    if (!best || info > best_info || (info == best_info && item.item_id < best->item_id)) {
      best = &item;
      best_info = info;
    }
  }
  if (!best) throw Error(Errc::PoolExhausted, "every item has been administered");
  return best->item_id;
}

AdaptiveSession::AdaptiveSession(std::string session_id, std::vector<ItemParams> pool,
                                 StopRule rule, Method method)
    : id_(std::move(session_id)), pool_(std::move(pool)), rule_(rule), method_(method) {
  std::set<int> ids;
  for (const auto& item : pool_) {
    item.validate();
    if (!ids.insert(item.item_id).second) {
      throw Error(Errc::InvalidArgument, fmt::format("duplicate item id {}", item.item_id));
    }
  }
  if (rule_.max_items == 0) throw Error(Errc::InvalidArgument, "max_items must be positive");
  current_.method = method_;
}

int AdaptiveSession::begin() {
  if (begun_) throw Error(Errc::InvalidArgument, "session already begun");
  begun_ = true;
  pending_ = select_next_item(0.0, pool_, administered_);
  return *pending_;
}

const ItemParams& AdaptiveSession::item(int item_id) const {
  for (const auto& it : pool_) {
    if (it.item_id == item_id) return it;
  }
  throw Error(Errc::InvalidArgument, fmt::format("no item {}", item_id));
}

StepOutcome AdaptiveSession::step(bool response) {
  if (stopped()) throw Error(Errc::SessionStopped, id_);
  if (!pending_) throw Error(Errc::NoPendingItem, id_);

  const int answered = *pending_;
  pending_.reset();
  administered_.push_back(answered);
  responses_.push_back(response);
  administered_items_.push_back(item(answered));

  // vector<bool> has no contiguous storage.
  const auto pattern = std::make_unique<bool[]>(responses_.size());
  std::copy(responses_.begin(), responses_.end(), pattern.get());
  current_ = estimate_ability({pattern.get(), responses_.size()}, administered_items_, method_);
  transcript_.push_back({answered, response, current_.theta, current_.standard_error});

  const std::size_t used = administered_.size();
  if (current_.standard_error < rule_.se_threshold && used >= rule_.min_items) {
    stop_ = StopReason::Precision;
  } else if (used >= rule_.max_items) {
    stop_ = StopReason::MaxItems;
  } else if (used >= pool_.size()) {
    stop_ = StopReason::PoolExhausted;
  } else {
    pending_ = select_next_item(current_.theta, pool_, administered_);
  }
  return {current_, pending_, stop_};
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::None: return "none";
    case StopReason::Precision: return "precision";
    case StopReason::MaxItems: return "max_items";
    case StopReason::PoolExhausted: return "pool_exhausted";
  }
  return "none";
}

std::string format_transcript(std::span<const TranscriptEntry> transcript) {
  std::string out;
  for (const auto& e : transcript) {
    out += fmt::format("{} {} {:.6f} {:.6f}\n", e.item_id, e.response ? 1 : 0, e.theta,
                       e.standard_error);
  }
  return out;
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

double parse_real(const std::string& token, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used == token.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::ParseError, fmt::format("line {}: '{}' is not a number", line_no, token));
}

template <typename F>
void for_each_record(std::string_view text, F&& on_record) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    on_record(split_ws(body), line_no);
  }
}

}  // namespace

std::vector<ItemTemplate> parse_template_bank(std::string_view text) {
  std::vector<ItemTemplate> bank;
  for_each_record(text, [&](const std::vector<std::string>& f, std::size_t line_no) {
    if (f.size() < 6) {
      throw Error(Errc::ParseError, fmt::format("bank line {}: expected 6+ fields", line_no));
    }
    ItemTemplate t{f[0], parse_real(f[1], line_no), parse_real(f[2], line_no),
                   parse_real(f[3], line_no), f[4], {}};
    for (std::size_t i = 5; i < f.size(); ++i) t.prompt += (i > 5 ? " " : "") + f[i];
    ItemParams{0, t.a, t.b, t.c, t.template_id}.validate();
    bank.push_back(std::move(t));
  });
  return bank;
}

std::vector<ItemTemplate> load_template_bank(const std::filesystem::path& path) {
  return parse_template_bank(read_file(path));
}

std::vector<ItemParams> synthesize_assessment(std::string_view content,
                                              std::span<const ItemTemplate> bank) {
  if (bank.empty()) throw Error(Errc::InvalidArgument, "template bank is empty");
  const std::string haystack = ascii_lower(content);
  std::vector<ItemParams> pool;
  for (const auto& t : bank) {
    if (t.keyword.empty() || haystack.find(ascii_lower(t.keyword)) == std::string::npos) continue;
    pool.push_back({static_cast<int>(pool.size()) + 1, t.a, t.b, t.c, t.template_id});
  }
  if (pool.empty()) throw Error(Errc::NoTemplatesMatched, "no template keyword found in content");
  return pool;
}

std::vector<ItemParams> parse_item_pool(std::string_view text) {
  std::vector<ItemParams> pool;
  std::set<int> ids;
  for_each_record(text, [&](const std::vector<std::string>& f, std::size_t line_no) {
    if (f.size() != 5) {
      throw Error(Errc::ParseError, fmt::format("pool line {}: expected 5 fields", line_no));
    }
    ItemParams item;
    try {
      std::size_t used = 0;
      item.item_id = std::stoi(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("id");
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, fmt::format("pool line {}: bad item id", line_no));
    }
    item.a = parse_real(f[1], line_no);
    item.b = parse_real(f[2], line_no);
    item.c = parse_real(f[3], line_no);
    item.prompt_ref = f[4];
    try {
      item.validate();
    } catch (const Error& e) {
      throw Error(Errc::ParseError, fmt::format("pool line {}: {}", line_no, e.what()));
    }
    if (!ids.insert(item.item_id).second) {
      throw Error(Errc::ParseError, fmt::format("pool line {}: duplicate id", line_no));
    }
    pool.push_back(std::move(item));
  });
  return pool;
}

std::vector<ItemParams> load_item_pool(const std::filesystem::path& path) {
  return parse_item_pool(read_file(path));
}

std::string format_item_pool(std::span<const ItemParams> pool) {
  std::string out;
  for (const auto& item : pool) {
    out += fmt::format("{} {} {} {} {}\n", item.item_id, item.a, item.b, item.c, item.prompt_ref);
  }
  return out;
}

}  // namespace sankofa::irt
