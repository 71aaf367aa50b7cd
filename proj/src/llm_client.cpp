#include "bargein/llm_client.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>

namespace bargein {

using json = nlohmann::json;

namespace {
const char* env(const char* name) {
    const char* v = std::getenv(name);
    return (v != nullptr && *v != '\0') ? v : nullptr;
}
}  // namespace

void LlmConfig::apply_environment() {
    if (auto* v = env("BARGEIN_LLM_ENDPOINT")) endpoint = v;
    if (auto* v = env("BARGEIN_LLM_MODEL")) model = v;
    if (auto* v = env("BARGEIN_LLM_API_KEY")) api_key = v;
    if (auto* v = env("BARGEIN_LLM_TIMEOUT_S")) {
        char* end = nullptr;
        const double t = std::strtod(v, &end);
        if (end != v && t > 0.0) timeout_s = t;
    }
}

HttpChatClient::HttpChatClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.configured()) throw InvalidInput("LLM endpoint and model must be configured");
    const auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw InvalidInput("LLM endpoint must be an absolute URL: " + cfg_.endpoint);
    }
    const auto path_begin = cfg_.endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = cfg_.endpoint.substr(0, path_begin);
    path_ = path_begin == std::string::npos ? "/" : cfg_.endpoint.substr(path_begin);
}

Outcome<std::string> HttpChatClient::complete(const std::string& system_prompt,
                                              const std::string& user_prompt) {
    const json body = {
        {"model", cfg_.model},
        {"temperature", 0},
        {"messages",
         json::array({{{"role", "system"}, {"content", system_prompt}},
                      {{"role", "user"}, {"content", user_prompt}}})},
    };
    const std::string request_body = body.dump();

    httplib::Client client(scheme_host_port_);
    const auto whole = static_cast<time_t>(std::floor(cfg_.timeout_s));
    const auto micros = static_cast<time_t>((cfg_.timeout_s - std::floor(cfg_.timeout_s)) * 1e6);
    client.set_connection_timeout(whole, micros);
    client.set_read_timeout(whole, micros);
    client.set_write_timeout(whole, micros);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    auto res = client.Post(path_, headers, request_body, "application/json");
    {
        std::lock_guard lock(mu_);
        last_ = {request_body, res ? res->body : std::string{}};
    }
    if (!res) {
        return Failure{"llm", "transport error: " + httplib::to_string(res.error())};
    }
    if (res->status != 200) {
        return Failure{"llm", "HTTP status " + std::to_string(res->status)};
    }
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) return Failure{"llm", "response is not JSON"};
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) return Failure{"llm", "message content is not a string"};
        return content.get<std::string>();
    } catch (const json::exception& e) {
        return Failure{"llm", std::string("malformed completion: ") + e.what()};
    }
}

ChatExchange HttpChatClient::last_exchange() const {
    std::lock_guard lock(mu_);
    return last_;
}

}  // namespace bargein
