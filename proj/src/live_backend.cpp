#include <httplib.h>

#include <chrono>
#include <thread>

#include "specloop/error.hpp"
#include "specloop/llm_gateway.hpp"

namespace specloop {

using nlohmann::json;

GenerationResult parse_chat_completion(std::string_view body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorKind::protocol, "backend response is not a JSON object", std::string(body));
  }
  try {
    const auto& choices = doc.at("choices");
    if (!choices.is_array() || choices.empty()) {
      throw Error(ErrorKind::protocol, "backend response has no choices", std::string(body));
    }
    const auto& content = choices.at(0).at("message").at("content");
    if (!content.is_string()) throw Error(ErrorKind::protocol, "message content is not a string", std::string(body));
    GenerationResult r;
    r.output_text = content.get<std::string>();
    const auto& usage = doc.at("usage");
    r.prompt_tokens = usage.at("prompt_tokens").get<std::int64_t>();
    r.completion_tokens = usage.at("completion_tokens").get<std::int64_t>();
    if (r.prompt_tokens < 0 || r.completion_tokens < 0) {
      throw Error(ErrorKind::protocol, "negative token usage", std::string(body));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::protocol, std::string("malformed chat completion: ") + e.what(), std::string(body));
  }
}

LiveBackend::LiveBackend(LiveBackendConfig config) : config_(std::move(config)) {
  const auto& url = config_.endpoint_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::configuration, "endpoint URL needs a scheme: '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorKind::configuration, "unsupported endpoint scheme '" + scheme + "'");
  }
}

GenerationResult LiveBackend::generate(const GenerationRequest& request) {
  json body = {{"model", request.params.model_id},
               {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
               {"temperature", request.params.temperature},
               {"seed", request.params.seed},
               {"max_tokens", request.params.max_tokens},
               {"stream", false}};
  const std::string payload = body.dump();

  httplib::Client client(scheme_host_port_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.retry_backoff * attempt);
    auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorKind::protocol, "backend returned HTTP " + std::to_string(res->status), res->body);
    }
    auto result = parse_chat_completion(res->body);
    result.latency = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started);
    result.backend_id = id();
    return result;
  }
  throw Error(ErrorKind::transport, "backend unreachable after " + std::to_string(config_.max_retries + 1) +
                                        " attempts: " + last_error);
}

}  // namespace specloop
