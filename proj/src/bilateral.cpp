#include "tbf/bilateral.hpp"

#include <omp.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "tbf/errors.hpp"
#include "tbf/parallel.hpp"

namespace tbf {
namespace {

// 1D Gaussian weights exp(-d^2 / (2 sigma^2)) and their sigma-derivative
// factor d^2 / sigma^3, indexed by offset + radius.
struct AxisTable {
  int radius = 0;
  std::vector<double> gauss;
  std::vector<double> dgauss;

  AxisTable(double sigma, int r) : radius(r), gauss(2 * r + 1), dgauss(2 * r + 1) {
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    const double inv_cube = 1.0 / (sigma * sigma * sigma);
    for (int d = -r; d <= r; ++d) {
      const double d2 = static_cast<double>(d) * d;
      gauss[d + r] = std::exp(-d2 * inv_two_var);
      dgauss[d + r] = d2 * inv_cube;
    }
  }
};

struct SpatialTables {
  AxisTable x, y, z;

  explicit SpatialTables(const SigmaParams& p, const Radii& r)
      : x(p.sigma_x, r.rx), y(p.sigma_y, r.ry), z(p.sigma_z, r.rz) {}
};

void check_backward_args(const ForwardCache& cache, const Volume& x, const SigmaParams& params,
                         const Volume& grad_out) {
  require_same_dims(cache.output.dims(), x.dims(), "backward: cache vs input");
  require_same_dims(grad_out.dims(), x.dims(), "backward: grad_out vs input");
  if (!(cache.params == params)) {
    throw StaleCacheError("backward: filter parameters changed since the forward pass");
  }
  if (cache.input_fingerprint != fingerprint(x)) {
    throw StaleCacheError("backward: input volume differs from the one used in the forward pass");
  }
  require_finite(grad_out, "backward: grad_out");
}

}  // namespace

void validate(const SigmaParams& p) {
  const double v[4] = {p.sigma_x, p.sigma_y, p.sigma_z, p.sigma_r};
  const char* names[4] = {"sigma_x", "sigma_y", "sigma_z", "sigma_r"};
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(v[i]) || v[i] <= 0.0) {
      throw InvalidInputError(std::string(names[i]) + " must be finite and > 0, got " + std::to_string(v[i]));
    }
  }
}

Radii kernel_radii(const SigmaParams& p) {
  auto radius = [](double s) { return std::max(static_cast<int>(std::ceil(5.0 * s)), 2); };
  return {radius(p.sigma_x), radius(p.sigma_y), radius(p.sigma_z)};
}

std::uint64_t fingerprint(const Volume& v) {
  // FNV-1a over the 64-bit patterns, seeded with the dims.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t word) {
    h ^= word;
    h *= 1099511628211ULL;
  };
  mix(static_cast<std::uint64_t>(v.dims().nx));
  mix(static_cast<std::uint64_t>(v.dims().ny));
  mix(static_cast<std::uint64_t>(v.dims().nz));
  for (double d : v.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    mix(bits);
  }
  return h;
}

ForwardCache forward(const Volume& x, const SigmaParams& p) {
  validate(p);
  require_finite(x, "forward: input");

  const Dims dims = x.dims();
  const Radii radii = kernel_radii(p);
  const SpatialTables tab(p, radii);
  const double range_coef = -1.0 / (2.0 * p.sigma_r * p.sigma_r);
  const double inv_var_r = 1.0 / (p.sigma_r * p.sigma_r);

  ForwardCache cache{Volume::filled(dims, 0.0), Volume::filled(dims, 0.0), Volume::filled(dims, 0.0),
                     Volume::filled(dims, 0.0), Volume::filled(dims, 0.0), p, fingerprint(x)};

  const double* in = x.values().data();
  double* out = cache.output.values().data();
  double* w_out = cache.w.values().data();
  double* a_out = cache.alpha.values().data();
  double* sw_out = cache.s_w.values().data();
  double* sa_out = cache.s_a.values().data();
  const std::size_t nx = dims.nx;
  const std::size_t plane = nx * dims.ny;
  const int rows = dims.ny * dims.nz;

#pragma omp parallel for schedule(static) num_threads(num_workers())
  for (int row = 0; row < rows; ++row) {
    const int ky = row % dims.ny;
    const int kz = row / dims.ny;
    for (int kx = 0; kx < dims.nx; ++kx) {
      const Box box = window_box(dims, {kx, ky, kz}, radii);
      const std::size_t k = kx + nx * ky + plane * kz;
      const double xk = in[k];
      double w = 0.0, alpha = 0.0, diff_sum = 0.0, sa = 0.0;
      for (int nz = box.lo.iz; nz <= box.hi.iz; ++nz) {
        const double gz = tab.z.gauss[nz - kz + radii.rz];
        for (int ny = box.lo.iy; ny <= box.hi.iy; ++ny) {
          const double gyz = gz * tab.y.gauss[ny - ky + radii.ry];
          const double* line = in + nx * ny + plane * nz;
          const double* gx = tab.x.gauss.data() + radii.rx - kx;
          for (int nxi = box.lo.ix; nxi <= box.hi.ix; ++nxi) {
            const double xn = line[nxi];
            const double d = xn - xk;
            const double g = gyz * gx[nxi] * std::exp(d * d * range_coef);
            w += g;
            alpha += g * xn;
            diff_sum += g * d;
            sa += g * xn * d;
          }
        }
      }
      w_out[k] = w;
      a_out[k] = alpha;
      sw_out[k] = diff_sum * inv_var_r;
      sa_out[k] = sa * inv_var_r;
      // Same value as alpha / w, written relative to X_k so that a zero
      // neighbourhood difference reproduces the input exactly.
      out[k] = xk + diff_sum / w;
    }
  }
  return cache;
}

double filter_voxel(const Volume& x, const SigmaParams& p, const VoxelIndex& k) {
  const Box box = window_box(x.dims(), k, kernel_radii(p));
  const double xk = x.at(k);
  double w = 0.0, diff_sum = 0.0;
  for (const VoxelIndex& n : WindowRange(box)) {
    const double dx = n.ix - k.ix, dy = n.iy - k.iy, dz = n.iz - k.iz;
    const double d = x.at(n) - xk;
    const double g = std::exp(-(dx * dx / (2.0 * p.sigma_x * p.sigma_x) + dy * dy / (2.0 * p.sigma_y * p.sigma_y) +
                                dz * dz / (2.0 * p.sigma_z * p.sigma_z) + d * d / (2.0 * p.sigma_r * p.sigma_r)));
    w += g;
    diff_sum += g * d;
  }
  return xk + diff_sum / w;
}

BackwardResult backward(const ForwardCache& cache, const Volume& x, const SigmaParams& params,
                        const Volume& grad_out) {
  check_backward_args(cache, x, params, grad_out);

  const Dims dims = x.dims();
  const std::size_t n_vox = dims.count();
  const Radii radii = kernel_radii(params);
  const SpatialTables tab(params, radii);
  const double range_coef = -1.0 / (2.0 * params.sigma_r * params.sigma_r);
  const double inv_var_r = 1.0 / (params.sigma_r * params.sigma_r);
  const double inv_cube_r = inv_var_r / params.sigma_r;

  const double* in = x.values().data();
  const double* y = cache.output.values().data();
  const double* sw = cache.s_w.values().data();
  const double* sa = cache.s_a.values().data();

  // dL/dY_k / w_k, shared by every term that involves output k.
  std::vector<double> coef(n_vox);
  for (std::size_t k = 0; k < n_vox; ++k) coef[k] = grad_out[k] / cache.w[k];

  BackwardResult result{{}, Volume::filled(dims, 0.0)};
  double* grad_in = result.input.values().data();
  // Per-voxel sigma partials, reduced in a fixed order afterwards.
  std::vector<double> partial(4 * n_vox, 0.0);

  const std::size_t nx = dims.nx;
  const std::size_t plane = nx * dims.ny;
  const int rows = dims.ny * dims.nz;

#pragma omp parallel for schedule(static) num_threads(num_workers())
  for (int row = 0; row < rows; ++row) {
    const int iy = row % dims.ny;
    const int iz = row / dims.ny;
    for (int ix = 0; ix < dims.nx; ++ix) {
      const Box box = window_box(dims, {ix, iy, iz}, radii);
      const std::size_t i = ix + nx * iy + plane * iz;
      const double xi = in[i];
      double gi = 0.0, gsx = 0.0, gsy = 0.0, gsz = 0.0, gsr = 0.0;
      for (int kz = box.lo.iz; kz <= box.hi.iz; ++kz) {
        const double gz = tab.z.gauss[kz - iz + radii.rz];
        const double dgz = tab.z.dgauss[kz - iz + radii.rz];
        for (int ky = box.lo.iy; ky <= box.hi.iy; ++ky) {
          const double gyz = gz * tab.y.gauss[ky - iy + radii.ry];
          const double dgy = tab.y.dgauss[ky - iy + radii.ry];
          const std::size_t line = nx * ky + plane * kz;
          for (int kx = box.lo.ix; kx <= box.hi.ix; ++kx) {
            const std::size_t k = line + kx;
            if (k == i) {
              // Centre term: d Y_i / d X_i from the precomputed sums.
              gi += coef[k] * (1.0 + sa[k] - y[k] * sw[k]);
              continue;
            }
            const double d = xi - in[k];
            const double g = gyz * tab.x.gauss[kx - ix + radii.rx] * std::exp(d * d * range_coef);
            const double cg = coef[k] * g;
            const double resid = xi - y[k];
            // Off-centre term: only the n = i entry of output k's window depends on X_i.
            gi += cg * (1.0 - d * resid * inv_var_r);
            const double t = cg * resid;
            gsx += t * tab.x.dgauss[kx - ix + radii.rx];
            gsy += t * dgy;
            gsz += t * dgz;
            gsr += t * d * d * inv_cube_r;
          }
        }
      }
      grad_in[i] = gi;
      partial[4 * i + 0] = gsx;
      partial[4 * i + 1] = gsy;
      partial[4 * i + 2] = gsz;
      partial[4 * i + 3] = gsr;
    }
  }

  result.sigma.d_sigma_x = strided_pairwise_sum(partial, 0, 4, n_vox);
  result.sigma.d_sigma_y = strided_pairwise_sum(partial, 1, 4, n_vox);
  result.sigma.d_sigma_z = strided_pairwise_sum(partial, 2, 4, n_vox);
  result.sigma.d_sigma_r = strided_pairwise_sum(partial, 3, 4, n_vox);
  return result;
}

SigmaGrad backward_sigma(const ForwardCache& cache, const Volume& x, const SigmaParams& params,
                         const Volume& grad_out) {
  return backward(cache, x, params, grad_out).sigma;
}

Volume backward_input(const ForwardCache& cache, const Volume& x, const SigmaParams& params,
                      const Volume& grad_out) {
  return backward(cache, x, params, grad_out).input;
}

}  // namespace tbf
