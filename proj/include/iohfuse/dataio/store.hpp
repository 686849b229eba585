#pragma once

#include <filesystem>
#include <vector>

#include "iohfuse/dataio/types.hpp"

namespace iohfuse::dataio {

struct Cohort {
  std::vector<PatientStatic> patients;
  std::vector<MapSeries> series;
};

// On-disk layout under a directory:
//   static.jsonl  {"patient_id","age","gender","surgery_type",
//                  "sampling_interval_s","start_offset_s"} per line
//   series.csv    patient_id,index,value,missing   (missing: 0/1, value "nan" when missing)
// Column order in series.csv is free; every listed column is required.
// Every series needs a static row with the same patient_id.

inline constexpr const char* kStaticFile = "static.jsonl";
inline constexpr const char* kSeriesFile = "series.csv";

void store_cohort(const std::filesystem::path& dir, const Cohort& cohort);

/// Throws SchemaError (with 1-based line and the offending column or key)
/// on any malformed row.
Cohort load_cohort(const std::filesystem::path& dir);

}  // namespace iohfuse::dataio
