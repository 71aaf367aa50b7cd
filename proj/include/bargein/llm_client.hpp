#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "bargein/core_types.hpp"

namespace bargein {

/// Connection settings for an OpenAI-style chat-completion endpoint.
struct LlmConfig {
    std::string endpoint;  // full URL, e.g. http://127.0.0.1:8080/v1/chat/completions
    std::string model;
    std::string api_key;
    double timeout_s = 2.0;

    bool configured() const { return !endpoint.empty() && !model.empty(); }

    /// Overrides fields from BARGEIN_LLM_ENDPOINT, BARGEIN_LLM_MODEL,
    /// BARGEIN_LLM_API_KEY and BARGEIN_LLM_TIMEOUT_S when set.
    void apply_environment();
};

/// Raw request/response bodies of the most recent call, for trace logging.
struct ChatExchange {
    std::string request_body;
    std::string response_body;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;

    /// One system + user message round trip. Returns the assistant content,
    /// or a Failure on transport error, timeout, or malformed response.
    virtual Outcome<std::string> complete(const std::string& system_prompt,
                                          const std::string& user_prompt) = 0;

    virtual ChatExchange last_exchange() const { return {}; }
};

class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(LlmConfig cfg);

    Outcome<std::string> complete(const std::string& system_prompt,
                                  const std::string& user_prompt) override;
    ChatExchange last_exchange() const override;

private:
    LlmConfig cfg_;
    std::string scheme_host_port_;
    std::string path_;
    mutable std::mutex mu_;
    ChatExchange last_;
};

}  // namespace bargein
