#include <cmath>

#include "tbf/data_io.hpp"
#include "tbf/errors.hpp"
#include "tbf/rng.hpp"

namespace tbf {

void validate(const PhantomSpec& spec) {
  validate_dims(spec.dims);
  if (!(spec.background >= 0.0 && spec.background <= 1.0)) {
    throw InvalidInputError("phantom background intensity must lie in [0, 1]");
  }
  for (const auto& p : spec.primitives) {
    if (!(p.intensity >= 0.0 && p.intensity <= 1.0)) {
      throw InvalidInputError("phantom primitive intensity must lie in [0, 1]");
    }
    for (double a : p.semi_axes) {
      if (!(a > 0.0) || !std::isfinite(a)) throw InvalidInputError("phantom semi-axes must be finite and > 0");
    }
  }
}

Volume generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  Volume v = Volume::filled(spec.dims, spec.background);
  const Dims d = spec.dims;
  for (const auto& prim : spec.primitives) {
    for (int z = 0; z < d.nz; ++z) {
      for (int y = 0; y < d.ny; ++y) {
        for (int x = 0; x < d.nx; ++x) {
          const double u[3] = {(x - prim.center[0]) / prim.semi_axes[0], (y - prim.center[1]) / prim.semi_axes[1],
                               (z - prim.center[2]) / prim.semi_axes[2]};
          const bool inside = prim.shape == Shape::ellipsoid
                                  ? u[0] * u[0] + u[1] * u[1] + u[2] * u[2] <= 1.0
                                  : std::abs(u[0]) <= 1.0 && std::abs(u[1]) <= 1.0 && std::abs(u[2]) <= 1.0;
          if (inside) v.at({x, y, z}) = prim.intensity;
        }
      }
    }
  }
  return v;
}

PhantomSpec random_phantom_spec(const Dims& dims, int count, std::uint64_t seed) {
  validate_dims(dims);
  PhantomSpec spec{dims, {}, 0.0, seed};
  Rng rng(seed);
  const double n[3] = {static_cast<double>(dims.nx), static_cast<double>(dims.ny), static_cast<double>(dims.nz)};
  const double mid[3] = {0.5 * (n[0] - 1.0), 0.5 * (n[1] - 1.0), 0.5 * (n[2] - 1.0)};

  // Body spans every slice along z.
  spec.primitives.push_back(
      {Shape::ellipsoid, {mid[0], mid[1], mid[2]}, {0.46 * n[0], 0.40 * n[1], std::max(0.46 * n[2], n[2])}, 0.4});

  for (int i = 0; i < count; ++i) {
    Primitive p;
    p.shape = uniform_index(rng, 2) == 0 ? Shape::ellipsoid : Shape::box;
    for (int a = 0; a < 3; ++a) {
      const double lo = a == 2 ? 1.0 : 1.5;
      const double hi = std::max(lo, (a == 2 ? 0.5 : 0.14) * n[a]);
      p.semi_axes[a] = uniform_real(rng, lo, hi + 1e-12);
      // Keep centres inside the inner part of the body.
      const double spread = a == 2 ? 0.5 * n[a] : 0.22 * n[a];
      p.center[a] = mid[a] + uniform_real(rng, -spread, spread);
    }
    // Intensities on a coarse grid keep neighbouring structures distinct.
    p.intensity = i + 1 == count ? 1.0 : 0.1 * static_cast<double>(1 + uniform_index(rng, 9));
    spec.primitives.push_back(p);
  }
  return spec;
}

}  // namespace tbf
