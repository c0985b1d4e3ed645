#include <httplib.h>

#include "personasq/model_gateway.hpp"

namespace personasq {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

ParsedUrl split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) fail(ErrorCode::ConfigInvalid, "base_url lacks a scheme: " + url);
  const std::size_t path = url.find('/', scheme + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path);
  out.prefix = path == std::string::npos ? "" : url.substr(path);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

Json post_json(const HttpEndpoint& endpoint, const std::string& route, const Json& body) {
  const ParsedUrl url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(endpoint.timeout);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

  auto res = client.Post(url.prefix + route, headers, body.dump(), "application/json");
  if (!res) {
    fail(ErrorCode::BackendUnavailable, endpoint.base_url + route + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 429) fail(ErrorCode::RateLimited, endpoint.base_url + route + " returned 429");
  if (res->status < 200 || res->status >= 300) {
    fail(ErrorCode::BackendUnavailable,
         endpoint.base_url + route + " returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::BackendUnavailable, "malformed response body from " + endpoint.base_url + route);
  }
}

}  // namespace

OpenAiChatBackend::OpenAiChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

Json OpenAiChatBackend::request_body(const ChatRequest& request) const {
  Json body;
  body["model"] = endpoint_.model;
  body["messages"] = Json::array({Json{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  if (request.seed) body["seed"] = *request.seed;
  body["max_tokens"] = request.max_output_tokens;
  return body;
}

std::string OpenAiChatBackend::complete(const ChatRequest& request) {
  const Json reply = post_json(endpoint_, "/chat/completions", request_body(request));
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception&) {
    fail(ErrorCode::BackendUnavailable, "chat response lacks choices[0].message.content");
  }
}

OpenAiEmbeddingBackend::OpenAiEmbeddingBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<std::vector<double>> OpenAiEmbeddingBackend::embed(std::span<const std::string> texts) {
  Json body;
  body["model"] = endpoint_.model;
  body["input"] = Json::array();
  for (const auto& t : texts) body["input"].push_back(t);
  const Json reply = post_json(endpoint_, "/embeddings", body);

  std::vector<std::vector<double>> out(texts.size());
  try {
    const auto& data = reply.at("data");
    if (data.size() != texts.size()) fail(ErrorCode::BackendUnavailable, "embedding count does not match inputs");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
      if (slot >= out.size()) fail(ErrorCode::BackendUnavailable, "embedding index out of range");
      out[slot] = data[i].at("embedding").get<std::vector<double>>();
    }
  } catch (const Json::exception&) {
    fail(ErrorCode::BackendUnavailable, "embedding response lacks data[].embedding");
  }
  return out;
}

}  // namespace personasq
