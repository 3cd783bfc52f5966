#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace subqrag {

// Exponential backoff for transient HTTP failures (429, 5xx, transport errors).
struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_delay{500};
    double backoff_factor = 2.0;
    std::chrono::milliseconds max_delay{8000};

    // Delay before retry number `retry` (1-based). Nondecreasing in `retry`.
    std::chrono::milliseconds delay_for(int retry) const;
};

bool is_transient_status(int status) noexcept;

struct HttpResult {
    int status = 0;  // 0 when the transport failed
    std::string body;
    int retries = 0;
    std::vector<std::chrono::milliseconds> delays;
};

// JSON-over-HTTP POST with bearer auth and retry. The URL is split into
// scheme://host[:port] and path; https requires OpenSSL support at build time.
class HttpJsonClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    HttpJsonClient(std::string url, std::string api_key, RetryPolicy policy,
                   std::chrono::seconds timeout = std::chrono::seconds(60));

    // Returns the final attempt's result. Throws BackendError when the last
    // attempt is still a failure.
    HttpResult post(const std::string& json_body) const;

    void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }
    const std::string& url() const noexcept { return url_; }

private:
    std::string url_;
    std::string origin_;
    std::string path_;
    std::string api_key_;
    RetryPolicy policy_;
    std::chrono::seconds timeout_;
    Sleeper sleeper_;
};

}  // namespace subqrag
