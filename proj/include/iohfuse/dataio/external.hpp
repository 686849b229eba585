#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "iohfuse/core/http.hpp"
#include "iohfuse/dataio/types.hpp"

namespace iohfuse::dataio {

/// Decodes a response body into samples. Throws ParseError on malformed input.
using PayloadAdapter = std::function<std::vector<TimedValue>(std::string_view body)>;

/// Default adapter: a JSON array of [time_s, value] pairs or of
/// {"time": t, "value": v} objects. Null values are skipped.
std::vector<TimedValue> parse_json_samples(std::string_view body);

/// Cache directory: $IOHFUSE_CACHE_DIR when set, else ".iohfuse_cache".
std::filesystem::path default_cache_dir();

struct ExternalClientConfig {
  /// {case_id} and {track} are substituted (percent-encoded).
  std::string url_template = "http://localhost:8080/cases/{case_id}/tracks/{track}";
  std::filesystem::path cache_dir = default_cache_dir();
};

/// Track fetcher with an on-disk cache keyed by (case_id, track). Sample
/// order in the result is by time. 404 -> NotFoundError, transport failure or
/// 5xx -> RetryableError, undecodable body -> ParseError. Failed responses
/// are never cached.
class ExternalClient {
 public:
  ExternalClient(ExternalClientConfig config, std::shared_ptr<HttpTransport> transport,
                 PayloadAdapter adapter = parse_json_samples);

  std::vector<TimedValue> fetch(const std::string& case_id, const std::string& track);

  std::size_t network_calls() const { return network_calls_; }
  std::filesystem::path cache_path(const std::string& case_id, const std::string& track) const;

 private:
  ExternalClientConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  PayloadAdapter adapter_;
  std::size_t network_calls_ = 0;
};

/// One-shot convenience: `endpoint` is a URL template as above.
std::vector<TimedValue> fetch_external_case(const std::string& endpoint, const std::string& case_id,
                                            const std::string& track_name);

}  // namespace iohfuse::dataio
