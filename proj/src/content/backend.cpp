#include <fmt/format.h>

#include <algorithm>
#include <mutex>
#include <sstream>

#include "sankofa/common/text.hpp"
#include "sankofa/content/content.hpp"

namespace sankofa::content {

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::Stop: return "stop";
    case FinishReason::MaxTokens: return "max_tokens";
    case FinishReason::Error: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "stop") return FinishReason::Stop;
  if (s == "max_tokens" || s == "length") return FinishReason::MaxTokens;
  return FinishReason::Error;
}

std::string escape_token(std::string_view token) {
  std::string out;
  for (std::size_t i = 0; i < token.size(); ++i) {
    const char ch = token[i];
    if (ch == '\\') {
      out += "\\\\";
    } else if (ch == '\n') {
      out += "\\n";
    } else if (ch == ' ' && i == 0) {
      out += "\\s";
    } else {
      out += ch;
    }
  }
  return out;
}

std::string unescape_token(std::string_view token) {
  std::string out;
  for (std::size_t i = 0; i < token.size(); ++i) {
    if (token[i] == '\\' && i + 1 < token.size()) {
      const char next = token[++i];
      out += next == 'n' ? '\n' : next == 's' ? ' ' : next;
    } else {
      out += token[i];
    }
  }
  return out;
}

std::vector<ScriptedToken> parse_mock_script(std::string_view text) {
  std::vector<ScriptedToken> script;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const std::size_t space = line.find(' ');
    const std::string delay = line.substr(0, space);
    ScriptedToken token;
    try {
      std::size_t used = 0;
      token.delay_ms = std::stoll(delay, &used);
      if (used != delay.size() || token.delay_ms < 0) throw std::invalid_argument("delay");
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, fmt::format("mock script line {}: bad delay", line_no));
    }
    token.text = space == std::string::npos ? "" : unescape_token(line.substr(space + 1));
    script.push_back(std::move(token));
  }
  return script;
}

std::vector<ScriptedToken> load_mock_script(const std::filesystem::path& path) {
  return parse_mock_script(read_file(path));
}

std::vector<ScriptedToken> mock_lesson_script(const GenerationRequest& request,
                                              std::int64_t first_token_ms, std::int64_t gap_ms) {
  const std::string& s = request.subject.empty() ? std::string("numbers") : request.subject;
  const std::vector<std::string> openings = {
      fmt::format("Lesson: {} for grade {}. Today we learn {} step by step in language {}.", s,
                  request.grade, s, request.language),
      fmt::format("Lesson: {} for grade {}. We begin {} with ideas you already know.", s,
                  request.grade, s),
  };
  const std::vector<std::string> paragraphs = {
      openings[request.seed % openings.size()],
      "Example: a whole mango is cut into four equal pieces. Each part is one fraction of the "
      "whole, so the numerator counts the parts taken and the denominator counts all parts.",
      "Practice: solve each exercise in your book. Find the sum and the difference of two "
      "fractions, then explain your answer to a partner.",
  };
  std::vector<ScriptedToken> script;
  for (std::size_t p = 0; p < paragraphs.size(); ++p) {
    const auto words = split_ws(paragraphs[p]);
    for (std::size_t w = 0; w < words.size(); ++w) {
      const bool last_word = w + 1 == words.size();
      const bool last_paragraph = p + 1 == paragraphs.size();
      std::string text = words[w];
      if (!last_word) {
        text += ' ';
      } else if (!last_paragraph) {
        text += "\n\n";
      }
      script.push_back({script.empty() ? first_token_ms : gap_ms, std::move(text)});
    }
  }
  return script;
}

namespace {

class ScriptSource final : public TokenSource {
 public:
  ScriptSource(std::vector<ScriptedToken> script, Clock& clock,
               std::optional<std::size_t> fail_after)
      : script_(std::move(script)), clock_(clock), fail_after_(fail_after) {}

  Frame next(std::optional<Nanos> deadline) override {
    if (fail_after_ && position_ >= *fail_after_) return {Frame::Kind::Done, {}, FinishReason::Error};
    if (position_ >= script_.size()) return {Frame::Kind::Done, {}, FinishReason::Stop};
    const ScriptedToken& token = script_[position_];
    const Nanos due = clock_.now() + millis(token.delay_ms);
    if (deadline && due > *deadline) {
      clock_.sleep_until(*deadline);
      return {Frame::Kind::Timeout, {}, FinishReason::Error};
    }
    clock_.sleep_until(due);
    ++position_;
    return {Frame::Kind::Token, token.text, FinishReason::Stop};
  }

 private:
  std::vector<ScriptedToken> script_;
  Clock& clock_;
  std::size_t position_ = 0;
  std::optional<std::size_t> fail_after_;
};

}  // namespace

MockBackend::MockBackend(ModelBackendDescriptor descriptor, std::vector<ScriptedToken> script)
    : descriptor_(std::move(descriptor)),
      script_([s = std::move(script)](const GenerationRequest&) { return s; }) {}

MockBackend::MockBackend(ModelBackendDescriptor descriptor, ScriptFn script)
    : descriptor_(std::move(descriptor)), script_(std::move(script)) {}

std::unique_ptr<TokenSource> MockBackend::open(const GenerationRequest& request, Clock& clock) {
  if (fail_on_open_) throw Error(Errc::BackendUnavailable, descriptor_.name + " is scripted to fail");
  return std::make_unique<ScriptSource>(script_(request), clock, fail_after_);
}

RegistryHandle BackendRegistry::register_backend(std::shared_ptr<Backend> backend) {
  if (!backend) throw Error(Errc::InvalidArgument, "null backend");
  const auto& d = backend->descriptor();
  if (d.name.empty()) throw Error(Errc::InvalidArgument, "backend name is empty");
  if (d.supported_languages.empty()) {
    throw Error(Errc::InvalidArgument, d.name + " supports no languages");
  }
  std::unique_lock lock(mutex_);
  if (backends_.count(d.name)) throw Error(Errc::DuplicateName, d.name);
  backends_.emplace(d.name, std::move(backend));
  return {d.name};
}

std::shared_ptr<Backend> BackendRegistry::resolve(std::string_view name) const {
  std::shared_lock lock(mutex_);
  auto it = backends_.find(name);
  if (it == backends_.end()) {
    throw Error(Errc::BackendUnavailable, "no backend named " + std::string(name));
  }
  return it->second;
}

bool BackendRegistry::contains(std::string_view name) const {
  std::shared_lock lock(mutex_);
  return backends_.find(name) != backends_.end();
}

std::vector<std::string> BackendRegistry::for_language(std::string_view language) const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, backend] : backends_) {
    if (backend->descriptor().supports(language)) out.push_back(name);
  }
  return out;
}

std::set<std::string> BackendRegistry::languages() const {
  std::shared_lock lock(mutex_);
  std::set<std::string> out;
  for (const auto& [_, backend] : backends_) {
    out.insert(backend->descriptor().supported_languages.begin(),
               backend->descriptor().supported_languages.end());
  }
  return out;
}

std::vector<std::string> BackendRegistry::names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : backends_) out.push_back(name);
  return out;
}

GeneratedContent generate_stream(const GenerationRequest& request, Backend& backend, Clock& clock,
                                 const TokenObserver& observer) {
  if (request.max_tokens < 1) throw Error(Errc::InvalidArgument, "max_tokens must be at least 1");
  if (!backend.descriptor().supports(request.language)) {
    throw Error(Errc::NoBackendForLanguage,
                backend.descriptor().name + " does not support " + request.language);
  }

  GeneratedContent content;
  content.model_name = backend.descriptor().name;
  content.request = request;
  content.request_sent_at = clock.now();
  const std::optional<Nanos> deadline =
      request.deadline ? std::optional<Nanos>(content.request_sent_at + *request.deadline)
                       : std::nullopt;

  auto fail = [&](Errc code, const std::string& why) {
    content.finish_reason = FinishReason::Error;
    content.completed_at = clock.now();
    throw GenerationError(code, why, std::move(content));
  };

  std::unique_ptr<TokenSource> source;
  try {
    source = backend.open(request, clock);
  } catch (const Error& e) {
    fail(e.code(), e.what());
  }

  while (true) {
    Frame frame = source->next(deadline);
    const Nanos arrived = clock.now();
    if (frame.kind == Frame::Kind::Timeout) {
      fail(Errc::DeadlineExceeded,
           fmt::format("{} missed its deadline after {} tokens", content.model_name,
                       content.events.size()));
    }
    if (frame.kind == Frame::Kind::Done) {
      if (frame.finish == FinishReason::Error) {
        fail(Errc::BackendUnavailable,
             fmt::format("{} reported an error after {} tokens", content.model_name,
                         content.events.size()));
      }
      content.finish_reason = frame.finish;
      break;
    }
    TokenEvent event{content.events.size(), std::move(frame.text), arrived};
    content.text += event.text;
    if (observer) observer(event);
    content.events.push_back(std::move(event));
    if (content.events.size() >= request.max_tokens) {
      content.finish_reason = FinishReason::MaxTokens;
      break;
    }
  }
  content.completed_at = clock.now();
  return content;
}

}  // namespace sankofa::content
