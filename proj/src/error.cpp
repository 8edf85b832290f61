#include "echoreason/error.hpp"

namespace echoreason {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidScale: return "InvalidScale";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
    case Errc::DuplicateTool: return "DuplicateTool";
    case Errc::NoCycle: return "NoCycle";
    case Errc::BadFrame: return "BadFrame";
    case Errc::NotMeasurable: return "NotMeasurable";
    case Errc::NotFeasible: return "NotFeasible";
    case Errc::UnsupportedKind: return "UnsupportedKind";
    case Errc::InvalidChunking: return "InvalidChunking";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptyQuery: return "EmptyQuery";
    case Errc::MetricsError: return "MetricsError";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::SessionError: return "SessionError";
    case Errc::JudgeError: return "JudgeError";
    case Errc::AdapterProtocolError: return "AdapterProtocolError";
    case Errc::ExecutionFailure: return "ExecutionFailure";
    case Errc::FormatError: return "FormatError";
    case Errc::IoError: return "IoError";
    case Errc::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace echoreason
