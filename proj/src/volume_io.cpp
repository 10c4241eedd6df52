#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include "json.hpp"
#include <vector>

#include "tbf/data_io.hpp"
#include "tbf/errors.hpp"

namespace tbf {
namespace {

constexpr const char* kDtype = "f32";
constexpr const char* kOrder = "x-fastest row-major";

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

VolumeFilePaths volume_file_paths(const std::filesystem::path& path) {
  std::filesystem::path base = path;
  if (base.extension() == ".json" || base.extension() == ".raw") base.replace_extension();
  std::filesystem::path header = base, raw = base;
  header += ".json";
  raw += ".raw";
  return {header, raw};
}

void save_volume(const std::filesystem::path& path, const Volume& v) {
  const auto files = volume_file_paths(path);
  std::vector<std::uint32_t> words(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto f = static_cast<float>(v[k]);
    if (!std::isfinite(f)) throw InvalidInputError("save_volume: value does not fit in 32-bit float");
    words[k] = to_little_endian(std::bit_cast<std::uint32_t>(f));
  }

  const nlohmann::json header = {
      {"dims", {v.dims().nx, v.dims().ny, v.dims().nz}}, {"dtype", kDtype}, {"order", kOrder}};
  std::ofstream hs(files.header);
  if (!hs) throw IoError("cannot open " + files.header.string() + " for writing");
  hs << header.dump(2) << "\n";

  std::ofstream rs(files.raw, std::ios::binary);
  if (!rs) throw IoError("cannot open " + files.raw.string() + " for writing");
  rs.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!rs) throw IoError("failed writing " + files.raw.string());
}

Volume load_volume(const std::filesystem::path& path) {
  const auto files = volume_file_paths(path);
  std::ifstream hs(files.header);
  if (!hs) throw IoError("cannot open volume header " + files.header.string());

  nlohmann::json header;
  try {
    hs >> header;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed volume header " + files.header.string() + ": " + e.what());
  }

  Dims dims;
  try {
    const auto& d = header.at("dims");
    if (!d.is_array() || d.size() != 3) throw IoError("volume header: dims must be a 3-element array");
    dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    if (header.at("dtype").get<std::string>() != kDtype) throw IoError("volume header: dtype must be \"f32\"");
    if (header.at("order").get<std::string>() != kOrder) {
      throw IoError(std::string("volume header: order must be \"") + kOrder + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed volume header " + files.header.string() + ": " + e.what());
  }
  validate_dims(dims);

  std::ifstream rs(files.raw, std::ios::binary | std::ios::ate);
  if (!rs) throw IoError("cannot open volume payload " + files.raw.string());
  const auto bytes = static_cast<std::size_t>(rs.tellg());
  if (bytes != 4 * dims.count()) {
    throw ShapeMismatchError("volume payload " + files.raw.string() + " has " + std::to_string(bytes) +
                             " bytes, header dims require " + std::to_string(4 * dims.count()));
  }
  rs.seekg(0);
  std::vector<std::uint32_t> words(dims.count());
  rs.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if (!rs) throw IoError("failed reading " + files.raw.string());

  std::vector<double> data(words.size());
  for (std::size_t k = 0; k < words.size(); ++k) {
    const float f = std::bit_cast<float>(to_little_endian(words[k]));
    if (!std::isfinite(f)) throw InvalidInputError("volume payload contains NaN or Inf at voxel " + std::to_string(k));
    data[k] = f;
  }
  return Volume::from_data(dims, std::move(data));
}

}  // namespace tbf
