#include "delayflow/llm_backend.hpp"

#include "delayflow/errors.hpp"

#include <json.hpp>

// cpp-httplib pulls in OpenSSL only when asked; plain HTTP is enough here.
#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace delayflow {

namespace {

using nlohmann::json;

/// Finds the first balanced {...} span that parses as JSON. Returns the
/// parsed object, or nullopt when no such span exists.
std::optional<json> first_json_object(const std::string& text) {
    for (std::size_t start = text.find('{'); start != std::string::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    const auto candidate = text.substr(start, i - start + 1);
                    json parsed = json::parse(candidate, nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;  // not valid JSON; resume scanning after this '{'
                }
            }
        }
    }
    return std::nullopt;
}

class MockBackend final : public Backend {
public:
    explicit MockBackend(BackendConfig config) : config_(std::move(config)) {}

    std::string id() const override { return "mock"; }
    int max_in_flight() const override { return std::max(1, config_.max_in_flight); }

    ForecastResult forecast(const RenderedPrompt& prompt) override {
        const auto t0 = std::chrono::steady_clock::now();
        const auto& faults = config_.mock_faults;
        if (!faults.fail_if_template_contains.empty() &&
            prompt.template_id.find(faults.fail_if_template_contains) != std::string::npos) {
            throw BackendUnavailableError("injected mock failure for template " + prompt.template_id);
        }
        if (!faults.fail_if_text_contains.empty() &&
            prompt.text.find(faults.fail_if_text_contains) != std::string::npos) {
            throw BackendUnavailableError("injected mock failure for prompt of task " + prompt.task.task_id);
        }

        // Re-parse the block from the rendered text so the mock exercises the
        // same machine-readable channel a remote model would see.
        const DataBlock block = parse_data_block(prompt.text);
        auto predictions = mock_forecast(block);

        if (faults.bias != 0 && (faults.bias_unless_text_contains.empty() ||
                                 prompt.text.find(faults.bias_unless_text_contains) == std::string::npos)) {
            for (auto& p : predictions) p = std::max<std::int64_t>(0, p + faults.bias);
        }

        const std::string raw = serialize_reply(block.task_id, predictions);
        const auto parsed = parse_reply(raw, block.u);
        const auto latency =
            std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0);
        return ForecastResult(block.task_id, parsed, block.u, prompt.template_id, id(), raw, latency);
    }

private:
    BackendConfig config_;
};

struct EndpointParts {
    std::string base;  // scheme://host:port
    std::string path;
};

EndpointParts split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint_url must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class RemoteChatBackend final : public Backend {
public:
    explicit RemoteChatBackend(BackendConfig config) : config_(std::move(config)) {
        const char* key = std::getenv(kApiKeyEnvVar);
        if (key == nullptr || *key == '\0') {
            throw ConfigError(std::string(kApiKeyEnvVar) + " is not set; required for the remote backend");
        }
        api_key_ = key;
        if (config_.endpoint_url.empty()) throw ConfigError("endpoint_url is required for the remote backend");
    }

    std::string id() const override { return "remote:" + config_.model_name; }
    int max_in_flight() const override { return std::max(1, config_.max_in_flight); }

    ForecastResult forecast(const RenderedPrompt& prompt) override {
        const auto t0 = std::chrono::steady_clock::now();
        const auto endpoint = split_endpoint(config_.endpoint_url);

        const json body{{"model", config_.model_name},
                        {"temperature", config_.temperature},
                        {"messages", json::array({json{{"role", "user"}, {"content", prompt.text}}})}};
        const std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(config_.retry.backoff_base * (1LL << (attempt - 1)));
            }
            httplib::Client client(endpoint.base);
            const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
            client.set_connection_timeout(std::max<long>(1, seconds.count()), 0);
            client.set_read_timeout(std::max<long>(1, seconds.count()), 0);
            client.set_bearer_token_auth(api_key_);

            auto res = client.Post(endpoint.path, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 408 || res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw BackendError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                   res->body);
            }
            return parse_response(prompt, res->body, t0);
        }
        throw BackendUnavailableError("backend unavailable after " + std::to_string(config_.retry.max_attempts) +
                                      " attempts (" + last_error + ")");
    }

private:
    ForecastResult parse_response(const RenderedPrompt& prompt, const std::string& body,
                                  std::chrono::steady_clock::time_point t0) const {
        std::string content;
        try {
            const json parsed = json::parse(body);
            content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw MalformedReplyError(std::string("chat completion body invalid: ") + e.what(), body);
        }
        const auto predictions = parse_reply(content, prompt.task.u);
        const auto latency =
            std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0);
        return ForecastResult(prompt.task.task_id, predictions, prompt.task.u, prompt.template_id, id(), content,
                              latency);
    }

    BackendConfig config_;
    std::string api_key_;
};

}  // namespace

ForecastResult::ForecastResult(std::string task_id, std::vector<std::int64_t> predictions, int expected_u,
                               std::string template_id, std::string backend_id, std::string raw_reply,
                               std::chrono::microseconds latency)
    : task_id_(std::move(task_id)),
      predictions_(std::move(predictions)),
      template_id_(std::move(template_id)),
      backend_id_(std::move(backend_id)),
      raw_reply_(std::move(raw_reply)),
      latency_(latency) {
    if (static_cast<int>(predictions_.size()) != expected_u) {
        throw ValidationError("forecast result for task '" + task_id_ + "' has " +
                              std::to_string(predictions_.size()) + " predictions, expected " +
                              std::to_string(expected_u));
    }
    for (const auto p : predictions_) {
        if (p < 0) {
            throw ValidationError("forecast result for task '" + task_id_ + "' carries a negative count");
        }
    }
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::DeterministicMock) return std::make_unique<MockBackend>(config);
    return std::make_unique<RemoteChatBackend>(config);
}

ForecastResult forecast(const RenderedPrompt& prompt, const BackendConfig& config) {
    return make_backend(config)->forecast(prompt);
}

std::vector<std::int64_t> parse_reply(const std::string& raw, int expected_u) {
    const auto object = first_json_object(raw);
    if (!object) throw ReplyNoJsonError("no JSON object in reply", raw);
    if (!object->contains("predictions") || !(*object)["predictions"].is_array()) {
        throw ReplyMissingFieldError("reply JSON lacks a \"predictions\" array", raw);
    }
    const auto& arr = (*object)["predictions"];
    if (static_cast<int>(arr.size()) != expected_u) {
        throw ReplyLengthError("expected " + std::to_string(expected_u) + " predictions, got " +
                               std::to_string(arr.size()),
                           raw);
    }
    std::vector<std::int64_t> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& v = arr[i];
        if (!v.is_number()) {
            throw ReplyNonNumericError("non-numeric prediction at index " + std::to_string(i), raw);
        }
        if (v.is_number_integer()) {
            const auto value = v.get<std::int64_t>();
            if (value < 0) throw ReplyNegativeError("negative prediction at index " + std::to_string(i), raw);
            out.push_back(value);
        } else {
            const double value = v.get<double>();
            if (value < 0.0) throw ReplyNegativeError("negative prediction at index " + std::to_string(i), raw);
            out.push_back(static_cast<std::int64_t>(std::floor(value + 0.5)));  // round half-up
        }
    }
    return out;
}

std::vector<std::int64_t> mock_forecast(const DataBlock& block) {
    if (block.d < 1 || block.u < 1 || static_cast<int>(block.history.size()) != block.d) {
        throw MalformedPromptError("data block inconsistent: d=" + std::to_string(block.d) + ", u=" +
                                   std::to_string(block.u) + ", history=" + std::to_string(block.history.size()));
    }
    std::vector<std::int64_t> out;
    out.reserve(block.u);
    for (int k = 1; k <= block.u; ++k) {
        const int target_bin = advance(block.anchor, k).bin_index;
        std::optional<std::int64_t> value;
        for (auto day = block.comparable_days.rbegin(); day != block.comparable_days.rend(); ++day) {
            for (const auto& [bin, count] : day->bins) {
                if (bin == target_bin) {
                    value = count;
                    break;
                }
            }
            if (value) break;
        }
        out.push_back(value.value_or(block.history.back()));
    }
    return out;
}

std::string serialize_reply(const std::string& task_id, const std::vector<std::int64_t>& predictions) {
    return json{{"task_id", task_id}, {"predictions", predictions}}.dump();
}

}  // namespace delayflow
