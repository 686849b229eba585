#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "iohfuse/dataio/types.hpp"

namespace iohfuse::cohort {

enum class Partition { train, val, test };

std::string_view to_string(Partition p);
Partition parse_partition(std::string_view s);

struct SplitAssignment {
  std::map<std::string, Partition> of;

  Partition at(const std::string& patient_id) const;
  std::array<std::size_t, 3> counts() const;
};

struct SplitOptions {
  std::array<double, 3> ratios{3.0, 1.0, 1.0};
  /// Groups smaller than this go entirely to train.
  std::size_t min_group_size = 5;
  /// Assign whole surgery groups to single partitions instead of splitting
  /// each group by the ratios.
  bool group_exclusive = false;
};

/// Integer partition sizes for n by largest remainder over the ratios; ties
/// go to train, then val, then test.
std::array<std::size_t, 3> ratio_counts(std::size_t n, const std::array<double, 3>& ratios);

/// Patients are grouped by surgery type and ordered within a group by
/// (derive_seed(seed, patient_id), patient_id), so the result depends only on
/// the patient set and the seed. Throws on empty input or duplicate ids.
SplitAssignment split_by_surgery(std::span<const dataio::PatientStatic> patients, std::uint64_t seed,
                                 const SplitOptions& options = {});

nlohmann::json to_json(const SplitAssignment& s);
SplitAssignment split_from_json(const nlohmann::json& j);

}  // namespace iohfuse::cohort
