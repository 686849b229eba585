#include "iohfuse/nn/archive.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace iohfuse::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic{'I', 'O', 'H', 'F', 'A', 'R', 'C', '\0'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated archive: " + path.string());
  return v;
}

std::string get_string(std::istream& is, std::size_t len, const std::filesystem::path& path) {
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("truncated archive: " + path.string());
  return s;
}

}  // namespace

const Matrix& Archive::array(const std::string& name) const {
  for (const auto& [n, m] : arrays) {
    if (n == name) return m;
  }
  throw std::out_of_range("archive has no array '" + name + "'");
}

bool Archive::has_array(const std::string& name) const {
  for (const auto& entry : arrays) {
    if (entry.first == name) return true;
  }
  return false;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kArchiveVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(archive.kind.size()));
  os.write(archive.kind.data(), static_cast<std::streamsize>(archive.kind.size()));
  const std::string meta = archive.meta.dump();
  put<std::uint64_t>(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(os, archive.arrays.size());
  for (const auto& [name, m] : archive.arrays) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(os, m.rows);
    put<std::uint64_t>(os, m.cols);
    os.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open archive: " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("not an iohfuse archive: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kArchiveVersion) {
    throw std::runtime_error("unsupported archive version " + std::to_string(version) + " in " + path.string());
  }
  Archive a;
  a.kind = get_string(is, get<std::uint32_t>(is, path), path);
  a.meta = nlohmann::json::parse(get_string(is, get<std::uint64_t>(is, path), path));
  const auto count = get<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(is, get<std::uint32_t>(is, path), path);
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    Matrix m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated archive: " + path.string());
    a.arrays.emplace_back(std::move(name), std::move(m));
  }
  return a;
}

void append_params(Archive& archive, const ParamSet& params, const std::string& prefix) {
  for (const Parameter* p : params.all()) archive.arrays.emplace_back(prefix + p->name, p->value);
}

void load_params(const Archive& archive, ParamSet& params, const std::string& prefix) {
  for (Parameter* p : params.all()) {
    const Matrix& m = archive.array(prefix + p->name);
    if (!m.same_shape(p->value)) {
      throw std::runtime_error("archive array '" + prefix + p->name + "' has shape " + m.shape_string() +
                               ", expected " + p->value.shape_string());
    }
    p->value = m;
  }
}

}  // namespace iohfuse::nn
