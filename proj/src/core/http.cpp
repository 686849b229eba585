#include "iohfuse/core/http.hpp"

#include <httplib.h>

#include "iohfuse/core/errors.hpp"

namespace iohfuse {

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("URL without scheme: " + url);
  if (url.compare(0, scheme_end, "http") != 0) {
    throw std::invalid_argument("only http:// URLs are supported: " + url);
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(double timeout_s) : timeout_s_(timeout_s) {}

  HttpResponse get(const std::string& url) override {
    const auto u = split_url(url);
    auto client = make_client(u.origin);
    auto res = client.Get(u.path);
    return unwrap(res, url);
  }

  HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type) override {
    const auto u = split_url(url);
    auto client = make_client(u.origin);
    auto res = client.Post(u.path, body, content_type);
    return unwrap(res, url);
  }

 private:
  httplib::Client make_client(const std::string& origin) const {
    httplib::Client c(origin);
    const auto sec = static_cast<time_t>(timeout_s_);
    const auto usec = static_cast<time_t>((timeout_s_ - static_cast<double>(sec)) * 1e6);
    c.set_connection_timeout(sec, usec);
    c.set_read_timeout(sec, usec);
    c.set_write_timeout(sec, usec);
    return c;
  }

  static HttpResponse unwrap(const httplib::Result& res, const std::string& url) {
    if (!res) throw RetryableError("request to " + url + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

  double timeout_s_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(double timeout_s) {
  return std::make_shared<HttplibTransport>(timeout_s);
}

}  // namespace iohfuse
