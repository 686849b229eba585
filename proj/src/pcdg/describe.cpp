#include "iohfuse/pcdg/describe.hpp"

#include <fstream>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::pcdg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string reply_to_text(const std::string& reply) {
  if (reply.find('.') == std::string::npos) {
    const auto parts = split(reply, ',');
    if (parts.size() == 5) {
      TemplateFills f{trim(parts[0]), trim(parts[1]), trim(parts[2]), trim(parts[3]), trim(parts[4])};
      const bool all = !f.age_group.empty() && !f.compliance.empty() && !f.hormone.empty() &&
                       !f.surgery_category.empty() && !f.blood_loss.empty();
      if (all) return render_template(f);
    }
  }
  return reply;
}

}  // namespace

ClinicalDescription rule_description(const dataio::PatientStatic& p, const RuleTable& rules) {
  ClinicalDescription d;
  d.patient_id = p.patient_id;
  d.text = generate_description(p, rules);
  d.source = "rule";
  return d;
}

Describer::Describer(RuleTable rules, LlmClientConfig cfg, std::shared_ptr<HttpTransport> transport)
    : rules_(std::move(rules)), cfg_(std::move(cfg)), transport_(std::move(transport)) {
  rules_.validate();
  if (cfg_.enabled && !transport_) transport_ = make_http_transport(cfg_.timeout_s);
}

void Describer::log(const nlohmann::json& row) {
  if (cfg_.log_path.empty()) return;
  std::lock_guard lock(log_mutex_);
  if (cfg_.log_path.has_parent_path()) std::filesystem::create_directories(cfg_.log_path.parent_path());
  std::ofstream out(cfg_.log_path, std::ios::app);
  out << row.dump() << '\n';
}

ClinicalDescription Describer::describe(const dataio::PatientStatic& p) {
  if (!cfg_.enabled) return rule_description(p, rules_);
  const std::string prompt = render_prompt(p);
  std::string error;
  try {
    const HttpResponse res = transport_->post(cfg_.url, prompt, "text/plain");
    const std::string reply = trim(res.body);
    if (res.status != 200) {
      error = "status " + std::to_string(res.status);
    } else if (reply.empty()) {
      error = "empty reply";
    } else {
      ClinicalDescription d;
      d.patient_id = p.patient_id;
      d.text = reply_to_text(reply);
      d.source = "external";
      log({{"patient_id", p.patient_id}, {"prompt", prompt}, {"response", res.body}, {"source", "external"}});
      return d;
    }
  } catch (const std::exception& e) {
    error = e.what();
  }
  log({{"patient_id", p.patient_id}, {"prompt", prompt}, {"error", error},
       {"source", cfg_.fallback ? "rule" : "none"}});
  if (!cfg_.fallback) throw RetryableError("external description failed for " + p.patient_id + ": " + error);
  return rule_description(p, rules_);
}

void tokenize_into(ClinicalDescription& d, const Vocabulary& vocab, std::size_t eta) {
  auto t = tokenize_description(d.text, vocab, eta);
  d.token_ids = std::move(t.ids);
  d.valid_mask = std::move(t.mask);
}

void write_corpus(const std::filesystem::path& path, std::span<const ClinicalDescription> ds) {
  std::vector<nlohmann::json> rows;
  rows.reserve(ds.size());
  for (const auto& d : ds) rows.push_back({{"patient_id", d.patient_id}, {"text", d.text}, {"source", d.source}});
  write_jsonl(path, rows);
}

std::vector<ClinicalDescription> read_corpus(const std::filesystem::path& path) {
  std::vector<ClinicalDescription> out;
  const auto rows = read_jsonl(path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!r.contains("patient_id") || !r.contains("text")) throw SchemaError("corpus row needs patient_id and text", i + 1);
    ClinicalDescription d;
    d.patient_id = r.at("patient_id").get<std::string>();
    d.text = r.at("text").get<std::string>();
    d.source = r.value("source", std::string("rule"));
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace iohfuse::pcdg
