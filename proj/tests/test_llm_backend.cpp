#include "delayflow/errors.hpp"
#include "delayflow/llm_backend.hpp"

#include "test_helpers.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

using namespace delayflow;
using namespace delayflow::testing;

namespace {

DataBlock block_with(std::vector<std::int64_t> history, std::vector<ComparableDay> days, int u,
                     int anchor_bin = 30) {
    DataBlock block;
    block.task_id = "task-x";
    block.station = "S";
    block.direction = Direction::Inflow;
    block.anchor = TimeBin{parse_date("2019-08-07"), anchor_bin};
    block.d = static_cast<int>(history.size());
    block.u = u;
    block.history = std::move(history);
    block.comparable_days = std::move(days);
    return block;
}

struct EnvGuard {
    explicit EnvGuard(const char* value) {
        const char* old = std::getenv(kApiKeyEnvVar);
        if (old) saved = old;
        if (value) {
            setenv(kApiKeyEnvVar, value, 1);
        } else {
            unsetenv(kApiKeyEnvVar);
        }
    }
    ~EnvGuard() {
        if (saved.empty()) {
            unsetenv(kApiKeyEnvVar);
        } else {
            setenv(kApiKeyEnvVar, saved.c_str(), 1);
        }
    }
    std::string saved;
};

}  // namespace

TEST_CASE("parse_reply accepts a bare JSON reply") {
    CHECK(parse_reply(R"({"predictions":[10,12,11]})", 3) == std::vector<std::int64_t>{10, 12, 11});
}

TEST_CASE("parse_reply tolerates prose around the JSON object") {
    CHECK(parse_reply(R"(Sure! Here is the forecast: {"predictions":[0,0]})", 2) ==
          std::vector<std::int64_t>{0, 0});
    CHECK(parse_reply("{{ not json }} then {\"predictions\":[7]} trailing", 1) ==
          std::vector<std::int64_t>{7});
}

TEST_CASE("parse_reply failure modes carry distinct error types") {
    CHECK_THROWS_AS(parse_reply("no structured content here", 2), ReplyNoJsonError);
    CHECK_THROWS_AS(parse_reply(R"({"forecast":[1,2]})", 2), ReplyMissingFieldError);
    CHECK_THROWS_AS(parse_reply(R"({"predictions":[1,2,3]})", 2), ReplyLengthError);
    CHECK_THROWS_AS(parse_reply(R"({"predictions":[5,-1]})", 2), ReplyNegativeError);
    CHECK_THROWS_AS(parse_reply(R"({"predictions":[5,-0.4]})", 2), ReplyNegativeError);
    CHECK_THROWS_AS(parse_reply(R"({"predictions":[1,"2"]})", 2), ReplyNonNumericError);

    try {
        parse_reply(R"({"predictions":[5,-1]})", 2);
        FAIL("expected ReplyNegativeError");
    } catch (const MalformedReplyError& e) {
        CHECK(e.raw_reply == R"({"predictions":[5,-1]})");
    }
}

TEST_CASE("fractional predictions round half-up") {
    CHECK(parse_reply(R"({"predictions":[2.5,2.4,0.0]})", 3) == std::vector<std::int64_t>{3, 2, 0});
}

TEST_CASE("parse_reply round-trips serialize_reply") {
    const std::vector<std::int64_t> predictions = {0, 3, 19, 4, 1000};
    CHECK(parse_reply(serialize_reply("t", predictions), 5) == predictions);
}

TEST_CASE("mock_forecast applies the seasonal-naive rule") {
    // yesterday's bins 31..33 hold [3,1,4]
    const ComparableDay day{parse_date("2019-08-06"), {{28, 9}, {31, 3}, {32, 1}, {33, 4}}};
    const auto block = block_with({5, 6, 7}, {day}, 3);
    CHECK(mock_forecast(block) == std::vector<std::int64_t>{3, 1, 4});
}

TEST_CASE("mock_forecast prefers the most recent comparable day") {
    const ComparableDay old_day{parse_date("2019-08-05"), {{31, 100}}};
    const ComparableDay recent{parse_date("2019-08-06"), {{31, 42}}};
    const auto block = block_with({5}, {old_day, recent}, 1);
    CHECK(mock_forecast(block) == std::vector<std::int64_t>{42});
}

TEST_CASE("mock_forecast repeats the last observed value when history is absent") {
    CHECK(mock_forecast(block_with({9}, {}, 3)) == std::vector<std::int64_t>{9, 9, 9});
    // a comparable day lacking the needed bin also falls back
    const ComparableDay day{parse_date("2019-08-06"), {{2, 5}}};
    CHECK(mock_forecast(block_with({7}, {day}, 1)) == std::vector<std::int64_t>{7});
}

TEST_CASE("mock_forecast rejects inconsistent blocks") {
    auto block = block_with({1, 2}, {}, 2);
    block.d = 5;  // history no longer matches
    CHECK_THROWS_AS(mock_forecast(block), MalformedPromptError);
}

TEST_CASE("no forecast result can carry a negative or miscounted prediction") {
    CHECK_THROWS_AS(ForecastResult("t", {1, -1}, 2, "tpl", "mock", "raw", {}), ValidationError);
    CHECK_THROWS_AS(ForecastResult("t", {1, 2, 3}, 2, "tpl", "mock", "raw", {}), ValidationError);
    const ForecastResult ok("t", {1, 2}, 2, "tpl", "mock", "raw", std::chrono::microseconds{5});
    CHECK(ok.predictions() == std::vector<std::int64_t>{1, 2});
    CHECK(ok.raw_reply() == "raw");
}

TEST_CASE("the mock backend is deterministic end to end") {
    const auto repo = repo_from_synth(small_synth(3));
    const auto task = make_task("S03", Direction::Outflow, parse_date("2019-08-12"), 50, 12, 6);
    const auto prompt = render(generate_template_library({}).at(1), repo, task);

    BackendConfig config;
    const auto a = forecast(prompt, config);
    const auto b = forecast(prompt, config);
    CHECK(a.predictions() == b.predictions());
    CHECK(a.raw_reply() == b.raw_reply());
    CHECK(a.backend_id() == "mock");
    CHECK(a.template_id() == prompt.template_id);
    CHECK(parse_reply(a.raw_reply(), task.u) == a.predictions());
}

TEST_CASE("the remote backend fails over to backend-unavailable after retries") {
    EnvGuard env("test-key");
    BackendConfig config;
    config.kind = BackendKind::RemoteChat;
    config.endpoint_url = "http://127.0.0.1:9";  // discard port; nothing listens
    config.retry.max_attempts = 2;
    config.retry.backoff_base = std::chrono::milliseconds(1);
    config.timeout = std::chrono::milliseconds(300);

    const auto repo = repo_from_synth(daily_repeat_synth());
    const auto prompt = render(generate_template_library({}).at(1), repo,
                               make_task("S01", Direction::Inflow, parse_date("2019-08-11"), 40, 6, 2));
    CHECK_THROWS_AS(forecast(prompt, config), BackendUnavailableError);
}

TEST_CASE("the remote backend requires the API key environment variable") {
    EnvGuard env(nullptr);
    BackendConfig config;
    config.kind = BackendKind::RemoteChat;
    config.endpoint_url = "http://127.0.0.1:9";
    CHECK_THROWS_AS(make_backend(config), ConfigError);
}

TEST_CASE("the remote backend speaks the chat-completions protocol") {
    EnvGuard env("test-key");

    httplib::Server server;
    std::string seen_auth;
    std::string seen_model;
    std::string seen_prompt;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        const auto body = nlohmann::json::parse(req.body);
        seen_model = body.at("model").get<std::string>();
        seen_prompt = body.at("messages").at(0).at("content").get<std::string>();
        const nlohmann::json reply{
            {"choices",
             nlohmann::json::array(
                 {{{"message", {{"role", "assistant"},
                                {"content", "Here you go: {\"task_id\": \"x\", \"predictions\": [4, 5]}"}}}}})}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig config;
    config.kind = BackendKind::RemoteChat;
    config.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    config.model_name = "test-model";

    const auto repo = repo_from_synth(daily_repeat_synth());
    const auto prompt = render(generate_template_library({}).at(1), repo,
                               make_task("S01", Direction::Inflow, parse_date("2019-08-11"), 40, 6, 2));
    const auto result = forecast(prompt, config);

    server.stop();
    server_thread.join();

    CHECK(result.predictions() == std::vector<std::int64_t>{4, 5});
    CHECK(result.raw_reply().find("Here you go") != std::string::npos);
    CHECK(result.backend_id() == "remote:test-model");
    CHECK(seen_auth == "Bearer test-key");
    CHECK(seen_model == "test-model");
    CHECK(seen_prompt == prompt.text);
}
