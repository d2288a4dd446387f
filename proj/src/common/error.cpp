#include "sankofa/common/error.hpp"

namespace sankofa {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownLanguage: return "UnknownLanguage";
    case Errc::InvalidGrade: return "InvalidGrade";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::UnknownRecipient: return "UnknownRecipient";
    case Errc::QueueClosed: return "QueueClosed";
    case Errc::VersionConflict: return "VersionConflict";
    case Errc::StageFailed: return "StageFailed";
    case Errc::Timeout: return "Timeout";
    case Errc::CyclicDependency: return "CyclicDependency";
    case Errc::CyclicPrerequisites: return "CyclicPrerequisites";
    case Errc::EmptyCurriculum: return "EmptyCurriculum";
    case Errc::InvalidModel: return "InvalidModel";
    case Errc::UnreachableStart: return "UnreachableStart";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::NoBackendForLanguage: return "NoBackendForLanguage";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::DeadlineExceeded: return "DeadlineExceeded";
    case Errc::RewardOutOfRange: return "RewardOutOfRange";
    case Errc::LineCountMismatch: return "LineCountMismatch";
    case Errc::UnreadableFile: return "UnreadableFile";
    case Errc::EmptyResponseSet: return "EmptyResponseSet";
    case Errc::PoolExhausted: return "PoolExhausted";
    case Errc::SessionStopped: return "SessionStopped";
    case Errc::NoPendingItem: return "NoPendingItem";
    case Errc::NoTemplatesMatched: return "NoTemplatesMatched";
    case Errc::WrongItem: return "WrongItem";
    case Errc::EmptyStream: return "EmptyStream";
    case Errc::NoSamplesInWindow: return "NoSamplesInWindow";
    case Errc::EmptyReport: return "EmptyReport";
    case Errc::EmptySegmentList: return "EmptySegmentList";
    case Errc::MissingMetric: return "MissingMetric";
    case Errc::LanguageSetMismatch: return "LanguageSetMismatch";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::UnknownLesson: return "UnknownLesson";
    case Errc::LessonNotReady: return "LessonNotReady";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::NoReportYet: return "NoReportYet";
    case Errc::BindFailed: return "BindFailed";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace sankofa
