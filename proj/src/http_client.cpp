#include "subqrag/http_client.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "subqrag/errors.hpp"

namespace subqrag {

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
    if (retry < 1) retry = 1;
    const double factor = std::max(1.0, backoff_factor);
    const double ms = static_cast<double>(initial_delay.count()) * std::pow(factor, retry - 1);
    const double capped = std::min(ms, static_cast<double>(max_delay.count()));
    return std::chrono::milliseconds(static_cast<long long>(capped));
}

bool is_transient_status(int status) noexcept {
    return status == 0 || status == 408 || status == 429 || (status >= 500 && status <= 599);
}

HttpJsonClient::HttpJsonClient(std::string url, std::string api_key, RetryPolicy policy,
                               std::chrono::seconds timeout)
    : url_(std::move(url)), api_key_(std::move(api_key)), policy_(policy), timeout_(timeout),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    const auto scheme_end = url_.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url_);
    const auto path_start = url_.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = url_;
        path_ = "/";
    } else {
        origin_ = url_.substr(0, path_start);
        path_ = url_.substr(path_start);
    }
}

HttpResult HttpJsonClient::post(const std::string& json_body) const {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    HttpResult result;
    for (int attempt = 0;; ++attempt) {
        auto res = client.Post(path_, headers, json_body, "application/json");
        if (res) {
            result.status = res->status;
            result.body = res->body;
        } else {
            result.status = 0;
            result.body = httplib::to_string(res.error());
        }
        if (result.status >= 200 && result.status < 300) return result;
        if (!is_transient_status(result.status) || attempt >= policy_.max_retries) break;

        const auto delay = policy_.delay_for(attempt + 1);
        spdlog::warn("POST {} failed with status {}; retry {} in {} ms", url_, result.status,
                     attempt + 1, delay.count());
        result.delays.push_back(delay);
        ++result.retries;
        sleeper_(delay);
    }
    throw BackendError(result.status, result.body);
}

}  // namespace subqrag
