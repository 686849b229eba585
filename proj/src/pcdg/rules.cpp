#include "iohfuse/pcdg/rules.hpp"

#include <algorithm>
#include <stdexcept>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::pcdg {

void RuleTable::validate() const {
  std::vector<std::string> v;
  if (age_bands.empty()) v.emplace_back("rules: no age bands");
  auto bands = age_bands;
  std::sort(bands.begin(), bands.end(), [](const AgeBand& a, const AgeBand& b) { return a.min_age < b.min_age; });
  int next = 0;
  for (const auto& b : bands) {
    if (b.max_age < b.min_age) v.emplace_back("rules: band '" + b.group + "' has max_age < min_age");
    if (b.min_age > next) v.emplace_back("rules: ages " + std::to_string(next) + ".." + std::to_string(b.min_age - 1) + " uncovered");
    if (b.min_age < next) v.emplace_back("rules: band '" + b.group + "' overlaps the previous band");
    if (b.group.empty() || b.compliance.empty()) v.emplace_back("rules: band starting at " + std::to_string(b.min_age) + " has an empty fill");
    next = std::max(next, b.max_age + 1);
  }
  if (!bands.empty() && next <= 130) v.emplace_back("rules: ages " + std::to_string(next) + "..130 uncovered");
  if (male_hormone.empty() || female_hormone.empty()) v.emplace_back("rules: hormone fills must be non-empty");
  if (surgery.empty()) v.emplace_back("rules: no surgery rows");
  for (const auto& [type, row] : surgery) {
    if (type.empty() || row.category.empty() || row.blood_loss.empty()) {
      v.emplace_back("rules: surgery row '" + type + "' has an empty field");
    }
  }
  if (!v.empty()) throw ValidationError(std::move(v));
}

const AgeBand& RuleTable::band_for(int age) const {
  for (const auto& b : age_bands) {
    if (age >= b.min_age && age <= b.max_age) return b;
  }
  throw std::invalid_argument("no age band covers age " + std::to_string(age));
}

std::vector<std::string> RuleTable::domain_terms() const {
  std::vector<std::string> out{"vascular compliance", "cardiovascular compensatory capacity", "blood loss",
                               "blood vessels"};
  auto push = [&](const std::string& s) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  };
  push(male_hormone);
  push(female_hormone);
  for (const auto& [type, row] : surgery) {
    push(type);
    push(row.category);
  }
  for (const auto& e : extra_terms) push(e);
  return out;
}

RuleTable default_rules() {
  RuleTable r;
  r.age_bands = {{0, 17, "pediatric", "high"}, {18, 65, "adult", "moderate"}, {66, 130, "elderly", "reduced"}};
  r.male_hormone = "androgen";
  r.female_hormone = "estrogen";
  r.surgery = {{"cardiac", {"cardiac", "substantial"}},
               {"orthopedic", {"orthopedic", "moderate"}},
               {"laparoscopic cholecystectomy", {"minimally invasive abdominal", "minimal"}},
               {"neurosurgery", {"neurosurgical", "moderate"}},
               {"general", {"general abdominal", "moderate"}},
               {"thoracic", {"thoracic", "substantial"}},
               {"urologic", {"urologic", "mild"}},
               {"gynecologic", {"gynecologic", "moderate"}},
               {"vascular", {"major vascular", "substantial"}},
               {"transplant", {"transplant", "substantial"}}};
  r.extra_terms = {"catecholamine", "vasopressin", "sympathetic tone"};
  return r;
}

nlohmann::json to_json(const RuleTable& r) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : r.age_bands) {
    bands.push_back({{"min_age", b.min_age}, {"max_age", b.max_age}, {"group", b.group}, {"compliance", b.compliance}});
  }
  nlohmann::json surgery = nlohmann::json::object();
  for (const auto& [type, row] : r.surgery) surgery[type] = {{"category", row.category}, {"blood_loss", row.blood_loss}};
  return {{"age_bands", bands},
          {"hormone", {{"male", r.male_hormone}, {"female", r.female_hormone}}},
          {"surgery", surgery},
          {"extra_terms", r.extra_terms}};
}

RuleTable rules_from_json(const nlohmann::json& j) {
  RuleTable r;
  try {
    for (const auto& b : j.at("age_bands")) {
      r.age_bands.push_back({b.at("min_age").get<int>(), b.at("max_age").get<int>(), b.at("group").get<std::string>(),
                             b.at("compliance").get<std::string>()});
    }
    r.male_hormone = j.at("hormone").at("male").get<std::string>();
    r.female_hormone = j.at("hormone").at("female").get<std::string>();
    for (const auto& [type, row] : j.at("surgery").items()) {
      r.surgery[type] = {row.at("category").get<std::string>(), row.at("blood_loss").get<std::string>()};
    }
    r.extra_terms = j.value("extra_terms", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("rule file: ") + e.what());
  }
  r.validate();
  return r;
}

RuleTable load_rules(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("rule file " + path.string() + " is not JSON: " + e.what());
  }
  return rules_from_json(j);
}

std::string render_template(const TemplateFills& f) {
  return "The patient belongs to the " + f.age_group + " age group, whose vascular compliance and cardiovascular "
         "compensatory capacity are " + f.compliance + ". At this time, " + f.hormone +
         " hormones act on the blood vessels. This surgery is a " + f.surgery_category +
         " type of surgery, and the blood loss is usually " + f.blood_loss + ".";
}

TemplateFills lookup_fills(const dataio::PatientStatic& p, const RuleTable& rules) {
  auto it = rules.surgery.find(p.surgery_type);
  if (it == rules.surgery.end()) throw std::invalid_argument("surgery type '" + p.surgery_type + "' has no rule");
  const AgeBand& band = rules.band_for(p.age);
  return {band.group, band.compliance, p.gender == dataio::Gender::male ? rules.male_hormone : rules.female_hormone,
          it->second.category, it->second.blood_loss};
}

std::string generate_description(const dataio::PatientStatic& p, const RuleTable& rules) {
  return render_template(lookup_fills(p, rules));
}

std::string render_prompt(const dataio::PatientStatic& p) {
  return "The age of patient is " + std::to_string(p.age) + ", gender is " + std::string(dataio::to_string(p.gender)) +
         ", and the type of surgery is " + p.surgery_type +
         ". Please provide the answer directly, separated by commas, without any spaces in between, removing the "
         "parentheses when responding. Without any explanations or additional content. The patient belongs to the () "
         "age group, whose vascular compliance and cardiovascular compensatory capacity are (). At this time, () "
         "hormones act on the blood vessels. This surgery is a () type of surgery, and the blood loss is usually ().";
}

}  // namespace iohfuse::pcdg
