#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sankofa {

/// Every failure the runtime can report. Grouped by the module that raises it.
enum class Errc {
  // agent-core
  UnknownLanguage,
  InvalidGrade,
  IllegalTransition,
  UnknownTask,
  UnknownRecipient,
  QueueClosed,
  VersionConflict,
  StageFailed,
  Timeout,
  CyclicDependency,
  // curriculum-mdp
  CyclicPrerequisites,
  EmptyCurriculum,
  InvalidModel,
  UnreachableStart,
  // content-pipeline
  DuplicateName,
  NoBackendForLanguage,
  BackendUnavailable,
  DeadlineExceeded,
  RewardOutOfRange,
  LineCountMismatch,
  UnreadableFile,
  // assessment-irt
  EmptyResponseSet,
  PoolExhausted,
  SessionStopped,
  NoPendingItem,
  NoTemplatesMatched,
  WrongItem,
  // edge-metrics
  EmptyStream,
  NoSamplesInWindow,
  EmptyReport,
  // quality-eval
  EmptySegmentList,
  MissingMetric,
  LanguageSetMismatch,
  // service-gateway
  Unauthorized,
  UnknownLesson,
  LessonNotReady,
  UnknownSession,
  NoReportYet,
  BindFailed,
  // shared
  InvalidArgument,
  ParseError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace sankofa
