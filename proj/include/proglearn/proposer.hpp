#pragma once

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "proglearn/datasets.hpp"

namespace proglearn {

// Query text sent for every attempt of a run. Placeholders:
//   {sequence_dimension}   input length n
//   {guest_language_name}  language the candidate must be written in
//   {data_block}           one "input -> label" line per training pair
inline constexpr const char* kDefaultPromptTemplate =
    "Problem Statement:\n"
    "Given a sequence of input vectors (binary, length {sequence_dimension}) and their "
    "corresponding scalar binary outputs ('0' or '1'), find a concise {guest_language_name} "
    "function f(x) that accurately approximates the underlying relationship. The function "
    "should not be a trainable model, but a direct logical or mathematical representation "
    "of the target function.\n"
    "\n"
    "Data Examples:\n"
    "{data_block}\n"
    "\n"
    "You must output ONLY a single JSON object: {\"code\": \"<{guest_language_name} function>\"}";

struct PromptTemplate {
  std::string text = kDefaultPromptTemplate;
};

inline std::string replace_all(std::string text, const std::string& needle,
                               const std::string& value) {
  std::size_t at = 0;
  while ((at = text.find(needle, at)) != std::string::npos) {
    text.replace(at, needle.size(), value);
    at += value.size();
  }
  return text;
}

// Renders the template against the training set. Training pairs appear verbatim, one
// per line, in dataset order.
inline std::string build_prompt(const PromptTemplate& tmpl, const LabeledDataset& train,
                                const std::string& guest_language) {
  std::string block;
  for (const auto& s : train.samples) {
    block += s.input;
    block += " -> ";
    block += std::to_string(s.label);
    block += "\n";
  }
  if (!block.empty()) block.pop_back();
  std::string out = tmpl.text;
  out = replace_all(out, "{sequence_dimension}", std::to_string(train.n));
  out = replace_all(out, "{guest_language_name}", guest_language);
  out = replace_all(out, "{data_block}", block);
  return out;
}

struct ProposerConfig {
  std::string endpoint;                 // e.g. https://host:port/v1/complete
  std::string model_id;
  int max_output_tokens = 20000;
  int call_timeout_ms = 20 * 60 * 1000;
  int candidates_per_call = 1;          // b
  std::string effort_hint;              // opaque, forwarded when nonempty
  std::string auth_env_var = "PROGLEARN_API_TOKEN";
  int max_retries = 2;                  // transport errors only, within the call budget
};

struct RawResponse {
  enum class Status { success, timeout, transport_error };
  Status status = Status::transport_error;
  std::string body;     // output text on success
  double latency_ms = 0.0;
  std::string error;    // human-readable detail for failures
};

inline const char* raw_status_name(RawResponse::Status s) {
  switch (s) {
    case RawResponse::Status::success: return "success";
    case RawResponse::Status::timeout: return "timeout";
    case RawResponse::Status::transport_error: return "transport_error";
  }
  return "transport_error";
}

// One proposer turn: asked for up to b candidates, returns one raw response each.
class CandidateSource {
 public:
  virtual ~CandidateSource() = default;
  virtual std::vector<RawResponse> request(const std::string& prompt) = 0;
};

// Replays a fixed list of response bodies, b at a time. Exhaustion yields transport
// errors, so a script shorter than the run surfaces loudly in the record.
class ScriptedProposer : public CandidateSource {
 public:
  explicit ScriptedProposer(std::vector<std::string> bodies, int per_call = 1)
      : bodies_(std::move(bodies)), per_call_(per_call) {}

  std::vector<RawResponse> request(const std::string&) override {
    std::vector<RawResponse> out;
    for (int i = 0; i < per_call_; ++i) {
      RawResponse r;
      if (cursor_ < bodies_.size()) {
        r.status = RawResponse::Status::success;
        r.body = bodies_[cursor_++];
      } else {
        r.error = "script exhausted";
      }
      out.push_back(std::move(r));
    }
    return out;
  }

  std::size_t consumed() const { return cursor_; }

 private:
  std::vector<std::string> bodies_;
  int per_call_;
  std::size_t cursor_ = 0;
};

namespace detail {

struct EndpointParts {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline std::optional<EndpointParts> split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) return std::nullopt;
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return EndpointParts{endpoint, "/"};
  return EndpointParts{endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace detail

// Backend client. Wire format: POST JSON
//   {"model": ..., "input": ..., "max_output_tokens": ..., "effort": ...}
// expects 200 with {"output_text": "..."}. Auth token comes from the configured
// environment variable and is sent as a bearer header when present.
class HttpProposer : public CandidateSource {
 public:
  explicit HttpProposer(ProposerConfig cfg) : cfg_(std::move(cfg)) {}

  std::vector<RawResponse> request(const std::string& prompt) override {
    std::vector<RawResponse> out;
    for (int i = 0; i < cfg_.candidates_per_call; ++i) {
      RawResponse r = one_call(prompt);
      bool dead = r.status == RawResponse::Status::timeout;
      out.push_back(std::move(r));
      if (dead) break;  // the call budget is spent
    }
    return out;
  }

 private:
  RawResponse one_call(const std::string& prompt) {
    auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
      return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
    };
    RawResponse out;
    auto parts = detail::split_endpoint(cfg_.endpoint);
    if (!parts) {
      out.error = "bad endpoint: " + cfg_.endpoint;
      out.latency_ms = elapsed_ms();
      return out;
    }
    nlohmann::json body = {
        {"model", cfg_.model_id},
        {"input", prompt},
        {"max_output_tokens", cfg_.max_output_tokens},
    };
    if (!cfg_.effort_hint.empty()) body["effort"] = cfg_.effort_hint;
    const std::string payload = body.dump();

    for (int attempt = 0; ; ++attempt) {
      double remaining = cfg_.call_timeout_ms - elapsed_ms();
      if (remaining < 1.0) {
        out.status = RawResponse::Status::timeout;
        out.error = "call budget exhausted";
        break;
      }
      httplib::Client client(parts->base);
      client.set_follow_location(true);
      auto secs = static_cast<time_t>(remaining / 1000.0);
      auto usecs = static_cast<time_t>((remaining - static_cast<double>(secs) * 1000.0) * 1000.0);
      client.set_connection_timeout(secs, usecs);
      client.set_read_timeout(secs, usecs);
      client.set_write_timeout(secs, usecs);
      httplib::Headers headers;
      if (const char* token = std::getenv(cfg_.auth_env_var.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

      auto res = client.Post(parts->path, headers, payload, "application/json");
      if (res && res->status == 200) {
        try {
          auto parsed = nlohmann::json::parse(res->body);
          out.body = parsed.at("output_text").get<std::string>();
          out.status = RawResponse::Status::success;
        } catch (const std::exception& e) {
          out.error = std::string("bad response json: ") + e.what();
        }
        break;
      }
      if (res) {
        out.error = "http status " + std::to_string(res->status);
      } else {
        out.error = std::string("transport: ") + httplib::to_string(res.error());
      }
      if (elapsed_ms() >= cfg_.call_timeout_ms) {
        out.status = RawResponse::Status::timeout;
        break;
      }
      if (attempt >= cfg_.max_retries) break;
      double backoff = std::min(250.0 * (1 << attempt), cfg_.call_timeout_ms - elapsed_ms());
      if (backoff > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(backoff)));
    }
    out.latency_ms = elapsed_ms();
    return out;
  }

  ProposerConfig cfg_;
};

struct ParsedCandidate {
  bool ok = false;
  std::string code;
  std::string error;
};

namespace detail {

// First balanced {...} region, honoring JSON string quoting.
inline std::optional<std::string> first_json_object(const std::string& text) {
  auto start = text.find('{');
  while (start != std::string::npos) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (c == '\\') {
          ++i;
        } else if (c == '"') {
          in_string = false;
        }
      } else if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) return text.substr(start, i - start + 1);
      }
    }
    start = text.find('{', start + 1);
  }
  return std::nullopt;
}

}  // namespace detail

// Extracts the candidate program from a raw response body: strips at most one
// outermost code fence, finds the first balanced JSON object, and requires a string
// "code" field.
inline ParsedCandidate parse_candidate(const std::string& body) {
  ParsedCandidate out;
  std::string text = body;
  auto fence = text.find("```");
  if (fence != std::string::npos) {
    auto content_start = text.find('\n', fence);
    auto closing = content_start == std::string::npos
                       ? std::string::npos
                       : text.find("```", content_start);
    if (content_start != std::string::npos && closing != std::string::npos)
      text = text.substr(content_start + 1, closing - content_start - 1);
  }
  auto object_text = detail::first_json_object(text);
  if (!object_text) {
    out.error = "no JSON object in response";
    return out;
  }
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(*object_text);
  } catch (const std::exception& e) {
    out.error = std::string("candidate JSON did not parse: ") + e.what();
    return out;
  }
  if (!parsed.is_object() || !parsed.contains("code")) {
    out.error = "candidate JSON has no \"code\" field";
    return out;
  }
  if (!parsed["code"].is_string()) {
    out.error = "\"code\" field is not a string";
    return out;
  }
  out.ok = true;
  out.code = parsed["code"].get<std::string>();
  return out;
}

}  // namespace proglearn
