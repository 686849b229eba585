#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "iohfuse/core/http.hpp"
#include "iohfuse/dataio/types.hpp"
#include "iohfuse/pcdg/rules.hpp"
#include "iohfuse/pcdg/vocab.hpp"

namespace iohfuse::pcdg {

struct ClinicalDescription {
  std::string patient_id;
  std::string text;
  std::string source = "rule";  // "rule" | "external"
  std::vector<std::size_t> token_ids;
  std::vector<std::uint8_t> valid_mask;

  friend bool operator==(const ClinicalDescription&, const ClinicalDescription&) = default;
};

struct LlmClientConfig {
  bool enabled = false;
  std::string url = "http://localhost:8081/generate";
  bool fallback = true;
  double timeout_s = 20.0;
  /// JSONL call log (prompt, response, outcome); empty disables logging.
  std::filesystem::path log_path;
};

/// Description generator with an optional external text model. A reply of
/// exactly five comma-separated fills is rendered through the template;
/// any other non-empty reply is used verbatim. Failures and empty replies
/// fall back to the rule engine when enabled, otherwise rethrow.
class Describer {
 public:
  Describer(RuleTable rules, LlmClientConfig cfg = {}, std::shared_ptr<HttpTransport> transport = nullptr);

  ClinicalDescription describe(const dataio::PatientStatic& p);

 private:
  void log(const nlohmann::json& row);

  RuleTable rules_;
  LlmClientConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  std::mutex log_mutex_;
};

/// Rule engine only.
ClinicalDescription rule_description(const dataio::PatientStatic& p, const RuleTable& rules);

void tokenize_into(ClinicalDescription& d, const Vocabulary& vocab, std::size_t eta);

/// Corpus JSONL rows: {"patient_id","text","source"}.
void write_corpus(const std::filesystem::path& path, std::span<const ClinicalDescription> ds);
std::vector<ClinicalDescription> read_corpus(const std::filesystem::path& path);

}  // namespace iohfuse::pcdg
