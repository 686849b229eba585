#include "iohfuse/dataio/store.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

#include "iohfuse/core/errors.hpp"
#include "iohfuse/core/textio.hpp"

namespace iohfuse::dataio {

namespace {

constexpr std::array<const char*, 4> kColumns{"patient_id", "index", "value", "missing"};

template <class T>
T required(const nlohmann::json& row, const char* key, std::size_t line) {
  if (!row.contains(key)) throw SchemaError(std::string("static row missing key '") + key + "'", line);
  try {
    return row.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(std::string("static key '") + key + "' has the wrong type", line);
  }
}

}  // namespace

void store_cohort(const std::filesystem::path& dir, const Cohort& cohort) {
  std::map<std::string, const MapSeries*> by_id;
  for (const auto& s : cohort.series) by_id[s.patient_id] = &s;

  std::vector<nlohmann::json> rows;
  rows.reserve(cohort.patients.size());
  for (const auto& p : cohort.patients) {
    nlohmann::json j{{"patient_id", p.patient_id},
                     {"age", p.age},
                     {"gender", std::string(to_string(p.gender))},
                     {"surgery_type", p.surgery_type}};
    if (auto it = by_id.find(p.patient_id); it != by_id.end()) {
      j["sampling_interval_s"] = it->second->sampling_interval_s;
      j["start_offset_s"] = it->second->start_offset_s;
    }
    rows.push_back(std::move(j));
  }
  write_jsonl(dir / kStaticFile, rows);

  std::string csv = "patient_id,index,value,missing\n";
  for (const auto& s : cohort.series) {
    if (s.patient_id.find_first_of(",\n\"") != std::string::npos) {
      throw std::invalid_argument("patient_id contains a CSV delimiter: " + s.patient_id);
    }
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const bool miss = i < s.missing_mask.size() && s.missing_mask[i] != 0;
      csv += s.patient_id;
      csv += ',';
      csv += std::to_string(i);
      csv += ',';
      csv += miss ? std::string("nan") : format_double(s.values[i]);
      csv += miss ? ",1\n" : ",0\n";
    }
  }
  write_text(dir / kSeriesFile, csv);
}

Cohort load_cohort(const std::filesystem::path& dir) {
  Cohort out;
  std::map<std::string, std::size_t> static_index;
  const auto rows = read_jsonl(dir / kStaticFile);
  for (std::size_t li = 0; li < rows.size(); ++li) {
    const auto& row = rows[li];
    const std::size_t line = li + 1;
    PatientStatic p;
    p.patient_id = required<std::string>(row, "patient_id", line);
    p.age = required<int>(row, "age", line);
    try {
      p.gender = parse_gender(required<std::string>(row, "gender", line));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(e.what(), line);
    }
    p.surgery_type = required<std::string>(row, "surgery_type", line);
    if (static_index.count(p.patient_id)) throw SchemaError("duplicate patient_id '" + p.patient_id + "'", line);
    static_index[p.patient_id] = li;
    out.patients.push_back(std::move(p));
  }

  const std::string text = read_text(dir / kSeriesFile);
  std::size_t pos = 0;
  std::size_t line = 0;
  std::array<std::size_t, 4> col{};
  std::size_t ncols = 0;
  std::map<std::string, std::size_t> series_index;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view ln(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line;
    if (!ln.empty() && ln.back() == '\r') ln.remove_suffix(1);
    if (line == 1) {
      const auto header = split(ln, ',');
      ncols = header.size();
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        auto it = std::find(header.begin(), header.end(), std::string_view(kColumns[c]));
        if (it == header.end()) throw SchemaError(std::string("series.csv missing column '") + kColumns[c] + "'", 1);
        col[c] = static_cast<std::size_t>(it - header.begin());
      }
      continue;
    }
    if (ln.empty()) continue;
    const auto f = split(ln, ',');
    if (f.size() != ncols) {
      throw SchemaError("expected " + std::to_string(ncols) + " fields, got " + std::to_string(f.size()), line);
    }
    const std::string pid(f[col[0]]);
    long long idx = 0;
    double value = 0.0;
    bool missing = false;
    try {
      idx = parse_int(f[col[1]]);
      const auto m = parse_int(f[col[3]]);
      if (m != 0 && m != 1) throw ParseError("missing flag must be 0 or 1");
      missing = m == 1;
      value = missing ? std::numeric_limits<double>::quiet_NaN() : parse_double(f[col[2]]);
    } catch (const ParseError& e) {
      throw SchemaError(e.what(), line);
    }
    auto [it, inserted] = series_index.try_emplace(pid, out.series.size());
    if (inserted) {
      auto st = static_index.find(pid);
      if (st == static_index.end()) throw SchemaError("series for unknown patient_id '" + pid + "'", line);
      MapSeries s;
      s.patient_id = pid;
      const auto& srow = rows[st->second];
      s.sampling_interval_s = srow.value("sampling_interval_s", 10.0);
      s.start_offset_s = srow.value("start_offset_s", 0.0);
      out.series.push_back(std::move(s));
    }
    MapSeries& s = out.series[it->second];
    if (idx != static_cast<long long>(s.values.size())) {
      throw SchemaError("non-consecutive index " + std::to_string(idx) + " for '" + pid + "'", line);
    }
    s.values.push_back(value);
    s.missing_mask.push_back(missing ? 1 : 0);
  }
  if (line == 0) throw SchemaError("series.csv is empty", 1);
  return out;
}

}  // namespace iohfuse::dataio
