#include "iohfuse/cohort/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/hash.hpp"

namespace iohfuse::cohort {

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train:
      return "train";
    case Partition::val:
      return "val";
    case Partition::test:
      return "test";
  }
  return "train";
}

Partition parse_partition(std::string_view s) {
  if (s == "train") return Partition::train;
  if (s == "val") return Partition::val;
  if (s == "test") return Partition::test;
  throw ParseError("unknown partition '" + std::string(s) + "'");
}

Partition SplitAssignment::at(const std::string& patient_id) const {
  auto it = of.find(patient_id);
  if (it == of.end()) throw std::out_of_range("patient '" + patient_id + "' has no split assignment");
  return it->second;
}

std::array<std::size_t, 3> SplitAssignment::counts() const {
  std::array<std::size_t, 3> c{};
  for (const auto& [id, p] : of) ++c[static_cast<std::size_t>(p)];
  return c;
}

std::array<std::size_t, 3> ratio_counts(std::size_t n, const std::array<double, 3>& ratios) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (!(total > 0.0) || ratios[0] < 0.0 || ratios[1] < 0.0 || ratios[2] < 0.0) {
    throw std::invalid_argument("split ratios must be non-negative with a positive sum");
  }
  std::array<std::size_t, 3> c{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = static_cast<double>(n) * ratios[i] / total;
    c[i] = static_cast<std::size_t>(std::floor(quota + 1e-12));
    rem[i] = quota - static_cast<double>(c[i]);
    used += c[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++c[order[k % 3]];
  return c;
}

SplitAssignment split_by_surgery(std::span<const dataio::PatientStatic> patients, std::uint64_t seed,
                                 const SplitOptions& options) {
  if (patients.empty()) throw std::invalid_argument("split_by_surgery: no patients");
  std::map<std::string, std::vector<std::string>> groups;
  std::map<std::string, int> seen;
  for (const auto& p : patients) {
    if (seen[p.patient_id]++) throw std::invalid_argument("split_by_surgery: duplicate patient_id " + p.patient_id);
    groups[p.surgery_type].push_back(p.patient_id);
  }
  auto keyed_sort = [&](std::vector<std::string>& ids) {
    std::sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
      const auto ha = derive_seed(seed, a);
      const auto hb = derive_seed(seed, b);
      return ha != hb ? ha < hb : a < b;
    });
  };

  SplitAssignment out;
  if (!options.group_exclusive) {
    for (auto& [type, ids] : groups) {
      if (ids.size() < options.min_group_size) {
        for (const auto& id : ids) out.of[id] = Partition::train;
        continue;
      }
      keyed_sort(ids);
      const auto c = ratio_counts(ids.size(), options.ratios);
      std::size_t i = 0;
      for (std::size_t part = 0; part < 3; ++part) {
        for (std::size_t k = 0; k < c[part]; ++k) out.of[ids[i++]] = static_cast<Partition>(part);
      }
    }
    return out;
  }

  // Whole groups: visit groups in seed order and give each to the partition
  // furthest below its target share.
  std::vector<std::string> types;
  for (const auto& [type, ids] : groups) types.push_back(type);
  std::sort(types.begin(), types.end(), [&](const std::string& a, const std::string& b) {
    const auto ha = derive_seed(seed, "group:" + a);
    const auto hb = derive_seed(seed, "group:" + b);
    return ha != hb ? ha < hb : a < b;
  });
  const double total_ratio = options.ratios[0] + options.ratios[1] + options.ratios[2];
  std::array<double, 3> filled{};
  const double n = static_cast<double>(patients.size());
  for (const auto& type : types) {
    const auto& ids = groups[type];
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t part = 0; part < 3; ++part) {
      const double deficit = n * options.ratios[part] / total_ratio - filled[part];
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = part;
      }
    }
    for (const auto& id : ids) out.of[id] = static_cast<Partition>(best);
    filled[best] += static_cast<double>(ids.size());
  }
  return out;
}

nlohmann::json to_json(const SplitAssignment& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, p] : s.of) j[id] = std::string(to_string(p));
  return j;
}

SplitAssignment split_from_json(const nlohmann::json& j) {
  SplitAssignment s;
  for (const auto& [id, p] : j.items()) s.of[id] = parse_partition(p.get<std::string>());
  return s;
}

}  // namespace iohfuse::cohort
