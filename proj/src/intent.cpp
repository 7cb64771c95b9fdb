#include "dragkit/intent.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "dragkit/serialize.hpp"

namespace dragkit {

namespace {

using nlohmann::json;

constexpr std::string_view kProtocol =
    "Refer to the original image, and the \xE2\x80\x9C" "dragged\" image with the blue starting "
    "region, estimated green target region, and the arrow direction. You need to describe the "
    "content and the object for editing of the picture in English, in terms of \xE2\x80\x9C"
    "background details\" and \xE2\x80\x9C" "editing changes\". Then you should guess the editing "
    "intents from the user by selecting one label for each answer, where the label classes have "
    "{relocation, deformation, rotation}.\n"
    "\n"
    "Your tasks:\n"
    "\n"
    "- (a) You should first provide a detailed description about the original image (e.g., "
    "include, but are not limited to objects, spatial relationship, color, style, structure). "
    "Then try to describe the motion/editing in short words.\n"
    "\n"
    "- (b) You should provide the ten most possible guesses about the static condition of the "
    "after-dragged image, and at most 60 words for each. See if you can provide more details to "
    "facilitate the editing.\n";

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// First word of a label value, without markup or punctuation.
std::string label_word(const std::string& value) {
    std::string s;
    for (char ch : value) {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        } else if (!s.empty()) {
            break;
        }
    }
    return s;
}

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    return words;
}

std::string fmt_point(Point2 p) {
    std::ostringstream s;
    s << "(" << p.x << ", " << p.y << ")";
    return s.str();
}

}  // namespace

IntentHttpError::IntentHttpError(int status, std::string body)
    : IntentError("intent endpoint returned HTTP " + std::to_string(status)),
      status_(status),
      body_(std::move(body)) {}

IntentParseError::IntentParseError(const std::string& message, std::string raw_text)
    : IntentError(message), raw_(std::move(raw_text)) {}

IntentLabelError::IntentLabelError(std::string label, std::string raw_text)
    : IntentParseError("invalid task label '" + label +
                           "' (expected relocation, deformation or rotation)",
                       std::move(raw_text)),
      label_(std::move(label)) {}

std::string_view intent_protocol_text() { return kProtocol; }

std::string build_prompt(std::span<const PromptRegion> regions) {
    if (regions.empty()) throw InvalidArgument("build_prompt: at least one region is required");
    std::ostringstream out;
    out << kProtocol << "\n";
    out << "Drag instructions (pixel coordinates, x rightward, y downward):\n";
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const PromptRegion& r = regions[i];
        out << "- Region " << i << ": from " << fmt_point(r.begin) << " to " << fmt_point(r.target);
        if (r.anchor) out << ", rotating about " << fmt_point(*r.anchor);
        out << "\n";
    }
    out << "\nAnswer format:\n"
           "Label: <relocation|deformation|rotation>\n"
           "Description: <your description>\n"
           "1. <guess>\n"
           "...\n"
           "10. <guess>\n";
    return out.str();
}

IntentResult parse_response(std::string_view text) {
    static const std::regex label_re(R"(^\s*[*_#]*\s*(label|task|class)\s*[*_]*\s*[:\-]\s*[*_]*\s*(.*)$)",
                                     std::regex::icase);
    static const std::regex numbered_re(R"(^\s*[*_]*\s*(\d{1,2})\s*[.)]\s*[*_]*\s*(.+)$)");
    static const std::regex guess_re(R"(^\s*[*_]*\s*guess\s*#?\s*(\d{1,2})\s*[*_]*\s*[:.)\-]\s*[*_]*\s*(.+)$)",
                                     std::regex::icase);
    static const std::regex tag_re(R"(^[\[(]\s*([A-Za-z]+)\s*[\])]\s*[:\-]?\s*(.*)$)");
    static const std::regex desc_re(R"(^\s*[*_]*\s*description\s*[*_]*\s*:\s*[*_]*\s*(.*)$)",
                                    std::regex::icase);

    const std::string raw(text);
    IntentResult result;
    std::optional<std::string> label_text;
    std::vector<std::string> guesses;
    std::vector<std::string> description;
    bool in_guess = false;
    bool seen_structure = false;

    std::istringstream in(raw);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (trim(line).empty()) {
            in_guess = false;
            continue;
        }
        if (std::regex_match(line, m, label_re)) {
            if (!label_text) label_text = trim(m[2].str());
            in_guess = false;
            seen_structure = true;
            continue;
        }
        if (std::regex_match(line, m, guess_re) || std::regex_match(line, m, numbered_re)) {
            guesses.push_back(trim(m[2].str()));
            in_guess = true;
            seen_structure = true;
            continue;
        }
        if (std::regex_match(line, m, desc_re)) {
            description.push_back(trim(m[1].str()));
            in_guess = false;
            continue;
        }
        if (in_guess) {
            guesses.back() += " " + trim(line);
        } else if (!seen_structure) {
            description.push_back(trim(line));
        }
    }

    if (!label_text) throw IntentParseError("response names no task label", raw);
    const std::string word = label_word(*label_text);
    const auto kind = parse_task_kind(word);
    if (!kind) throw IntentLabelError(word.empty() ? *label_text : word, raw);
    result.label = *kind;

    if (guesses.empty()) throw IntentParseError("response contains no numbered guesses", raw);
    if (guesses.size() > static_cast<std::size_t>(kMaxCandidates)) {
        result.warnings.push_back("kept the first " + std::to_string(kMaxCandidates) + " of " +
                                  std::to_string(guesses.size()) + " guesses");
        guesses.resize(kMaxCandidates);
    }
    for (std::size_t i = 0; i < guesses.size(); ++i) {
        std::string g = guesses[i];
        std::optional<TaskKind> tag;
        std::smatch m;
        if (std::regex_match(g, m, tag_re)) {
            tag = parse_task_kind(lower(m[1].str()));
            if (tag) g = trim(m[2].str());
        }
        auto words = split_words(g);
        if (words.size() > static_cast<std::size_t>(kMaxCandidateWords)) {
            result.truncated = true;
            result.warnings.push_back("guess " + std::to_string(i + 1) + " cut from " +
                                      std::to_string(words.size()) + " to " +
                                      std::to_string(kMaxCandidateWords) + " words");
            words.resize(kMaxCandidateWords);
        }
        std::string joined;
        for (std::size_t w = 0; w < words.size(); ++w) joined += (w ? " " : "") + words[w];
        result.candidates.push_back(std::move(joined));
        result.candidate_labels.push_back(tag);
    }
    for (const std::string& d : description) {
        if (d.empty()) continue;
        if (!result.description.empty()) result.description += " ";
        result.description += d;
    }
    return result;
}

std::string render_response(const IntentResult& r) {
    std::ostringstream out;
    out << "Label: " << to_string(r.label) << "\n";
    if (!r.description.empty()) out << "Description: " << r.description << "\n";
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        out << (i + 1) << ". ";
        if (i < r.candidate_labels.size() && r.candidate_labels[i]) {
            out << "[" << to_string(*r.candidate_labels[i]) << "] ";
        }
        out << r.candidates[i] << "\n";
    }
    return out.str();
}

std::string build_request_body(const IntentEndpoint& endpoint, const IntentRequest& request) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    for (const auto* png : {&request.original_png, &request.overlay_png}) {
        if (png->empty()) continue;
        content.push_back(
            {{"type", "image_url"},
             {"image_url", {{"url", "data:image/png;base64," + base64_encode(*png)}}}});
    }
    json body{{"model", endpoint.model},
              {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
    return body.dump();
}

std::string extract_completion_text(std::string_view body) {
    const std::string raw(body);
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw IntentParseError(std::string("response is not JSON: ") + e.what(), raw);
    }
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty() || !j["choices"][0].contains("message") ||
        !j["choices"][0]["message"].contains("content")) {
        throw IntentParseError("response lacks choices[0].message.content", raw);
    }
    const json& content = j["choices"][0]["message"]["content"];
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
        std::string text;
        for (const json& part : content) {
            if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
                part["text"].is_string()) {
                text += part["text"].get<std::string>();
            }
        }
        return text;
    }
    throw IntentParseError("message content is neither text nor a list of parts", raw);
}

IntentResult request_intent(const IntentEndpoint& endpoint, const IntentRequest& request) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw IntentConfigError("environment variable " + endpoint.api_key_env +
                                " is not set; no API key for the intent endpoint");
    }
    static const std::regex url_re(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint.url, m, url_re)) {
        throw IntentConfigError("unsupported endpoint URL '" + endpoint.url + "'");
    }
    const std::string origin = m[1].str() + "://" + m[2].str() + (m[3].matched ? ":" + m[3].str() : "");
    const std::string path = m[4].matched ? m[4].str() : "/";

    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
    const std::string body = build_request_body(endpoint, request);

    std::mt19937 rng(std::random_device{}());
    for (int attempt = 0;; ++attempt) {
        const bool last = attempt >= endpoint.retries;
        const auto started = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            const auto err = res.error();
            const auto elapsed = std::chrono::steady_clock::now() - started;
            const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                                   (err == httplib::Error::Read && elapsed >= endpoint.timeout * 9 / 10);
            if (!timed_out) {
                throw IntentNetworkError("intent request failed: " + httplib::to_string(err));
            }
            if (last) throw IntentTimeoutError("intent request timed out after retry");
        } else if (res->status >= 200 && res->status < 300) {
            return parse_response(extract_completion_text(res->body));
        } else if (res->status < 500 || last) {
            throw IntentHttpError(res->status, res->body);
        }
        const auto jitter = endpoint.retry_jitter.count() > 0
                                ? std::uniform_int_distribution<long long>(
                                      0, endpoint.retry_jitter.count())(rng)
                                : 0;
        std::this_thread::sleep_for(std::chrono::milliseconds(jitter));
    }
}

}  // namespace dragkit
