#pragma once

#include <memory>
#include <string>

namespace iohfuse {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal blocking HTTP interface so clients can be tested against fakes.
/// Implementations throw RetryableError when no response was received.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url) = 0;
  virtual HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type) = 0;
};

/// Plain-http transport backed by cpp-httplib. URLs look like
/// http://host[:port]/path.
std::shared_ptr<HttpTransport> make_http_transport(double timeout_s = 10.0);

}  // namespace iohfuse
