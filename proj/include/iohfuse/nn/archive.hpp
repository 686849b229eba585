#pragma once

// Versioned binary container for parameter arrays plus a JSON metadata blob.
//
// Layout (little-endian):
//   "IOHFARC\0" | u32 version | u32 len + kind | u64 len + meta json
//   | u64 count | count x (u32 len + name | u64 rows | u64 cols | f64[rows*cols])

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "iohfuse/nn/matrix.hpp"
#include "iohfuse/nn/param.hpp"

namespace iohfuse::nn {

inline constexpr std::uint32_t kArchiveVersion = 1;

struct Archive {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Appends every parameter value under `prefix + name`.
void append_params(Archive& archive, const ParamSet& params, const std::string& prefix = "");
/// Loads values for every parameter in `params` from `prefix + name`;
/// missing or mis-shaped arrays throw.
void load_params(const Archive& archive, ParamSet& params, const std::string& prefix = "");

}  // namespace iohfuse::nn
