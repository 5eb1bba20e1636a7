#include "dibc/error.hpp"

namespace dibc {

ErrorCategory categorize(const std::exception& e) {
  if (const auto* p = dynamic_cast<const PipelineError*>(&e)) return p->category();
  if (dynamic_cast<const ParameterError*>(&e)) return ErrorCategory::kParameter;
  if (dynamic_cast<const NumericalError*>(&e)) return ErrorCategory::kNumerical;
  if (dynamic_cast<const ConfigError*>(&e)) return ErrorCategory::kConfig;
  if (dynamic_cast<const IoError*>(&e)) return ErrorCategory::kIo;
  if (dynamic_cast<const TransportError*>(&e)) return ErrorCategory::kTransport;
  return ErrorCategory::kOther;
}

void throw_categorized(ErrorCategory category, const std::string& what) {
  switch (category) {
    case ErrorCategory::kParameter: throw ParameterError(what);
    case ErrorCategory::kNumerical: throw NumericalError(what);
    case ErrorCategory::kConfig: throw ConfigError(what);
    case ErrorCategory::kIo: throw IoError(what);
    case ErrorCategory::kTransport: throw TransportError(what);
    case ErrorCategory::kOther: break;
  }
  throw Error(what);
}

}  // namespace dibc
