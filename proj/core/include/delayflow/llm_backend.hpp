#pragma once

#include "delayflow/prompt_engine.hpp"
#include "delayflow/task.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace delayflow {

/// A validated forecast. Construction enforces the horizon length and
/// non-negativity, so no result carrying a negative count can exist.
class ForecastResult {
public:
    ForecastResult(std::string task_id, std::vector<std::int64_t> predictions, int expected_u,
                   std::string template_id, std::string backend_id, std::string raw_reply,
                   std::chrono::microseconds latency);

    const std::string& task_id() const { return task_id_; }
    const std::vector<std::int64_t>& predictions() const { return predictions_; }
    const std::string& template_id() const { return template_id_; }
    const std::string& backend_id() const { return backend_id_; }
    const std::string& raw_reply() const { return raw_reply_; }
    std::chrono::microseconds latency() const { return latency_; }

private:
    std::string task_id_;
    std::vector<std::int64_t> predictions_;
    std::string template_id_;
    std::string backend_id_;
    std::string raw_reply_;
    std::chrono::microseconds latency_{};
};

enum class BackendKind { RemoteChat, DeterministicMock };

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{250};  // doubles per attempt
};

/// Fault injection knobs for the mock backend (test and calibration use).
struct MockFaults {
    /// Added to every prediction unless the prompt text contains the marker
    /// (empty marker = bias everything). Results are clamped at zero.
    std::int64_t bias = 0;
    std::string bias_unless_text_contains;
    /// Simulate a backend failure for templates whose id contains this.
    std::string fail_if_template_contains;
    /// Simulate a backend failure for prompts whose text contains this.
    std::string fail_if_text_contains;
};

struct BackendConfig {
    BackendKind kind = BackendKind::DeterministicMock;
    std::string endpoint_url;  // RemoteChat only, e.g. http://host:port/v1/chat/completions
    std::string model_name = "gpt-4";
    double temperature = 0.0;
    int max_in_flight = 4;
    RetryPolicy retry;
    std::chrono::milliseconds timeout{30000};
    MockFaults mock_faults;
};

/// API key environment variable for the remote backend. Keys are never read
/// from flags or config files.
inline constexpr const char* kApiKeyEnvVar = "DELAYFLOW_API_KEY";

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual int max_in_flight() const = 0;
    /// Dispatches one prompt and returns the validated result. Throws
    /// BackendUnavailableError after exhausted retries and
    /// MalformedReplyError (with the raw reply) for invalid replies.
    virtual ForecastResult forecast(const RenderedPrompt& prompt) = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

/// One-shot convenience wrapper over make_backend.
ForecastResult forecast(const RenderedPrompt& prompt, const BackendConfig& config);

/// Extracts the first well-formed JSON object from the reply (surrounding
/// prose tolerated) and validates its "predictions" array: exactly
/// expected_u entries, numeric, non-negative; fractional values are rounded
/// half-up. Each failure mode throws its own error type.
std::vector<std::int64_t> parse_reply(const std::string& raw, int expected_u);

/// Seasonal-naive rule on the prompt's embedded data: the prediction for bin
/// t+k is the value at the same bin index on the most recent comparable day
/// in the block, falling back to the last observed value.
std::vector<std::int64_t> mock_forecast(const DataBlock& block);

/// The reply text a well-behaved model would produce for these predictions.
std::string serialize_reply(const std::string& task_id, const std::vector<std::int64_t>& predictions);

}  // namespace delayflow
