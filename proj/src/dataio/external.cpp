#include "iohfuse/dataio/external.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::dataio {

namespace {

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

std::string percent_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

std::string substitute(std::string tmpl, std::string_view key, std::string_view value) {
  const std::string k = "{" + std::string(key) + "}";
  for (auto pos = tmpl.find(k); pos != std::string::npos; pos = tmpl.find(k, pos + value.size())) {
    tmpl.replace(pos, k.size(), value);
  }
  return tmpl;
}

double number_or_throw(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string("sample ") + what + " is not a number");
  return j.get<double>();
}

}  // namespace

std::vector<TimedValue> parse_json_samples(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("track payload is not JSON: ") + e.what());
  }
  if (!j.is_array()) throw ParseError("track payload is not a JSON array");
  std::vector<TimedValue> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    const nlohmann::json* t = nullptr;
    const nlohmann::json* v = nullptr;
    if (e.is_array() && e.size() == 2) {
      t = &e[0];
      v = &e[1];
    } else if (e.is_object() && e.contains("time") && e.contains("value")) {
      t = &e.at("time");
      v = &e.at("value");
    } else {
      throw ParseError("track sample has neither [t, v] nor {time, value} form");
    }
    if (v->is_null()) continue;
    out.push_back({number_or_throw(*t, "time"), number_or_throw(*v, "value")});
  }
  return out;
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("IOHFUSE_CACHE_DIR"); env && *env) return env;
  return ".iohfuse_cache";
}

ExternalClient::ExternalClient(ExternalClientConfig config, std::shared_ptr<HttpTransport> transport,
                               PayloadAdapter adapter)
    : config_(std::move(config)), transport_(std::move(transport)), adapter_(std::move(adapter)) {
  if (!transport_) throw std::invalid_argument("ExternalClient requires a transport");
  if (!adapter_) throw std::invalid_argument("ExternalClient requires a payload adapter");
}

std::filesystem::path ExternalClient::cache_path(const std::string& case_id, const std::string& track) const {
  std::string key = case_id;
  key.push_back('\0');
  key += track;
  return config_.cache_dir / (sha256_hex(key) + ".json");
}

std::vector<TimedValue> ExternalClient::fetch(const std::string& case_id, const std::string& track) {
  const auto path = cache_path(case_id, track);
  std::string body;
  bool cached = false;
  {
    std::lock_guard lock(cache_mutex());
    if (std::filesystem::exists(path)) {
      body = read_text(path);
      cached = true;
    }
  }
  if (!cached) {
    std::string url = substitute(config_.url_template, "case_id", percent_encode(case_id));
    url = substitute(url, "track", percent_encode(track));
    ++network_calls_;
    const HttpResponse res = transport_->get(url);
    if (res.status == 404) throw NotFoundError("case '" + case_id + "' track '" + track + "' not found");
    if (res.status >= 500 || res.status == 429 || res.status == 408) {
      throw RetryableError("server returned " + std::to_string(res.status) + " for " + url);
    }
    if (res.status != 200) throw ParseError("unexpected status " + std::to_string(res.status) + " for " + url);
    body = res.body;
  }
  auto samples = adapter_(body);
  std::stable_sort(samples.begin(), samples.end(),
                   [](const TimedValue& a, const TimedValue& b) { return a.time_s < b.time_s; });
  if (!cached) {
    std::lock_guard lock(cache_mutex());
    write_text(path, body);
  }
  return samples;
}

std::vector<TimedValue> fetch_external_case(const std::string& endpoint, const std::string& case_id,
                                            const std::string& track_name) {
  ExternalClientConfig cfg;
  cfg.url_template = endpoint;
  ExternalClient client(cfg, make_http_transport());
  return client.fetch(case_id, track_name);
}

}  // namespace iohfuse::dataio
