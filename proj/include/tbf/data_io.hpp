#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "tbf/pipeline.hpp"
#include "tbf/volume.hpp"

namespace tbf {

// --- volume files ----------------------------------------------------------
//
// A volume is stored as <name>.json, a header of the form
//   {"dims": [nx, ny, nz], "dtype": "f32", "order": "x-fastest row-major"}
// next to <name>.raw holding nx*ny*nz little-endian IEEE-754 binary32 values.

struct VolumeFilePaths {
  std::filesystem::path header;
  std::filesystem::path raw;
};

// Accepts "<name>", "<name>.json" or "<name>.raw".
VolumeFilePaths volume_file_paths(const std::filesystem::path& path);

// Throws InvalidInputError if a value does not fit in binary32.
void save_volume(const std::filesystem::path& path, const Volume& v);

// Throws IoError for missing/unreadable files or a malformed header,
// DimensionError for non-positive dims, ShapeMismatchError when the raw size
// disagrees with the header, and InvalidInputError for NaN/Inf payloads.
Volume load_volume(const std::filesystem::path& path);

// --- pipeline parameters ---------------------------------------------------
//
// {"layers": [{"sigma_x": ..., "sigma_y": ..., "sigma_z": ..., "sigma_r": ...}, ...]}
// in layer order, with round-trip decimal precision.

void save_params(const std::filesystem::path& path, const FilterPipeline& fp);
FilterPipeline load_params(const std::filesystem::path& path);

// --- synthetic phantoms ----------------------------------------------------

enum class Shape { ellipsoid, box };

struct Primitive {
  Shape shape = Shape::ellipsoid;
  std::array<double, 3> center{};      // voxel coordinates
  std::array<double, 3> semi_axes{};   // voxel units, > 0
  double intensity = 1.0;              // in [0, 1]
};

struct PhantomSpec {
  Dims dims;
  std::vector<Primitive> primitives;
  double background = 0.0;
  std::uint64_t seed = 0;  // seed the primitive list was drawn with, if any
};

// Throws InvalidInputError for intensities outside [0, 1] or bad axes.
void validate(const PhantomSpec& spec);

// Rasterises primitives in order; later primitives overwrite earlier ones.
Volume generate_phantom(const PhantomSpec& spec);

/// Body ellipsoid filling most of the field of view, then `count` random
/// ellipsoids and boxes inside it. Background is 0 and the last primitive has
/// intensity 1, so for count >= 1 the phantom spans exactly [0, 1].
PhantomSpec random_phantom_spec(const Dims& dims, int count, std::uint64_t seed);

// --- noise -----------------------------------------------------------------

struct GaussianNoise {
  double sigma = 0.0;
};

// y = Poisson(photons * x) / photons, applied per voxel.
struct PoissonNoise {
  double photons = 1e4;
};

using NoiseModel = std::variant<GaussianNoise, PoissonNoise>;

/// Returns a noisy copy of `x`. Voxel k draws from its own counter-based
/// stream keyed by (seed, k), so the result depends only on the seed.
Volume add_noise(const Volume& x, const NoiseModel& model, std::uint64_t seed);

}  // namespace tbf
