#include "stylesim/translator.hpp"

#include <httplib.h>

#include <cstdlib>

namespace stylesim {

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace

HttpProviderConfig HttpProviderConfig::from_env() {
    HttpProviderConfig c;
    c.base_url = env_or("STYLESIM_PROVIDER_URL", "");
    c.model = env_or("STYLESIM_PROVIDER_MODEL", "");
    c.api_key = env_or("STYLESIM_PROVIDER_KEY", "");
    return c;
}

std::optional<std::string> HttpProvider::complete(const std::string& prompt) {
    if (config_.base_url.empty()) return std::nullopt;
    httplib::Client client(config_.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    const json body = {{"model", config_.model}, {"prompt", prompt}, {"temperature", 0}, {"max_tokens", 1024}};

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        auto res = client.Post(config_.path, headers, body.dump(), "application/json");
        if (!res || res->status != 200) continue;
        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) continue;
        const auto& choice = doc["choices"][0];
        if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
        if (choice.contains("message") && choice["message"].is_object() && choice["message"].contains("content") &&
            choice["message"]["content"].is_string()) {
            return choice["message"]["content"].get<std::string>();
        }
    }
    return std::nullopt;
}

}  // namespace stylesim
