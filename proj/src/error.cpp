#include "dragkit/error.hpp"

namespace dragkit {

FormatError::FormatError(std::string path, const std::string& message)
    : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)), message_(message) {}

}  // namespace dragkit
