#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "iohfuse/dataio/types.hpp"

namespace iohfuse::pcdg {

/// Inclusive age band.
struct AgeBand {
  int min_age = 0;
  int max_age = 0;
  std::string group;
  std::string compliance;
};

struct SurgeryRule {
  std::string category;
  std::string blood_loss;
};

/// Rule engine backing the description template. Must be total: age bands
/// cover [0, 130] without overlap and every requested surgery type has a row.
struct RuleTable {
  std::vector<AgeBand> age_bands;
  std::string male_hormone;
  std::string female_hormone;
  std::map<std::string, SurgeryRule> surgery;
  /// Extra atomic tokenizer terms beyond those implied by the table.
  std::vector<std::string> extra_terms;

  /// Throws ValidationError listing gaps, overlaps and empty fills.
  void validate() const;
  const AgeBand& band_for(int age) const;
  /// Multi-word and domain vocabulary implied by the table, in a fixed order.
  std::vector<std::string> domain_terms() const;
};

/// Bands: <18 pediatric, 18-65 adult, >65 elderly. Fill wording is a
/// placeholder for clinical review.
RuleTable default_rules();

nlohmann::json to_json(const RuleTable& r);
RuleTable rules_from_json(const nlohmann::json& j);
RuleTable load_rules(const std::filesystem::path& path);

struct TemplateFills {
  std::string age_group;
  std::string compliance;
  std::string hormone;
  std::string surgery_category;
  std::string blood_loss;
};

std::string render_template(const TemplateFills& f);

/// Throws std::invalid_argument naming an unknown surgery type.
TemplateFills lookup_fills(const dataio::PatientStatic& p, const RuleTable& rules);

std::string generate_description(const dataio::PatientStatic& p, const RuleTable& rules);

/// The external-model prompt with the patient's attributes substituted.
std::string render_prompt(const dataio::PatientStatic& p);

}  // namespace iohfuse::pcdg
