#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dragkit/error.hpp"
#include "dragkit/geometry.hpp"
#include "dragkit/schedule.hpp"

namespace dragkit {

class IntentError : public Error {
public:
    using Error::Error;
};

/// Missing credentials or an unusable endpoint; raised before any request.
class IntentConfigError : public IntentError {
public:
    using IntentError::IntentError;
};

class IntentTimeoutError : public IntentError {
public:
    using IntentError::IntentError;
};

/// Connection failures other than timeouts.
class IntentNetworkError : public IntentError {
public:
    using IntentError::IntentError;
};

class IntentHttpError : public IntentError {
public:
    IntentHttpError(int status, std::string body);
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

/// Unparseable response; raw_text() holds the model output (or HTTP body).
class IntentParseError : public IntentError {
public:
    IntentParseError(const std::string& message, std::string raw_text);
    const std::string& raw_text() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// A label line named something outside {relocation, deformation, rotation}.
class IntentLabelError : public IntentParseError {
public:
    IntentLabelError(std::string label, std::string raw_text);
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

/// Geometry of one region shown to the model.
struct PromptRegion {
    Point2 begin;
    Point2 target;
    std::optional<Point2> anchor;
};

inline constexpr int kMaxCandidates = 10;
inline constexpr int kMaxCandidateWords = 60;

/// Instruction template, followed by the region geometry and the expected
/// answer layout. Deterministic. Throws InvalidArgument for no regions.
std::string build_prompt(std::span<const PromptRegion> regions);

/// The fixed instruction block shared by every prompt.
std::string_view intent_protocol_text();

struct IntentRequest {
    std::vector<std::uint8_t> original_png;
    std::vector<std::uint8_t> overlay_png;  // blue source, green target, arrow
    std::string prompt;
};

struct IntentResult {
    TaskKind label = TaskKind::Relocation;
    std::vector<std::string> candidates;
    std::vector<std::optional<TaskKind>> candidate_labels;  // per-guess tag, if given
    std::optional<int> chosen_index;
    bool truncated = false;
    std::vector<std::string> warnings;
    std::string description;
};

/// Accepted response syntax:
///   Label: rotation            (also "Task:" / "Class:", any case, optional **)
///   1. first guess             (also "1)" or "Guess 1:")
///   2. [rotation] second guess (an optional leading [label] or (label) tag)
/// Lines after a guess continue it until a blank line. Text before the first
/// label or guess becomes the description. At most ten guesses are kept and
/// each is cut to 60 words with a warning.
IntentResult parse_response(std::string_view text);

/// Renders a response in the accepted syntax (used by mocks and fixtures).
std::string render_response(const IntentResult& result);

struct IntentEndpoint {
    std::string url = "http://127.0.0.1:8080/v1/chat/completions";
    std::string model = "gpt-5";
    std::string api_key_env = "DRAGKIT_INTENT_API_KEY";
    std::chrono::milliseconds timeout{30000};
    int retries = 1;
    std::chrono::milliseconds retry_jitter{250};  // upper bound of the random delay
};

/// OpenAI-compatible chat-completions body with base64 PNG attachments.
std::string build_request_body(const IntentEndpoint& endpoint, const IntentRequest& request);

/// Text of choices[0].message.content. Throws IntentParseError.
std::string extract_completion_text(std::string_view body);

/// One round trip, retried once on timeout or 5xx. Throws IntentConfigError,
/// IntentTimeoutError, IntentNetworkError, IntentHttpError or IntentParseError.
IntentResult request_intent(const IntentEndpoint& endpoint, const IntentRequest& request);

}  // namespace dragkit
