#pragma once

#include <cstdint>

#include "tbf/volume.hpp"

namespace tbf {

// Lower bound applied to every kernel width after an optimiser update.
inline constexpr double kSigmaFloor = 1e-6;

/// Kernel widths of one bilateral filter layer. The spatial widths are in
/// voxel units, the range width in intensity units.
struct SigmaParams {
  double sigma_x = 0.5;
  double sigma_y = 0.5;
  double sigma_z = 0.5;
  double sigma_r = 0.01;

  bool operator==(const SigmaParams&) const = default;
};

// Throws InvalidInputError unless all four widths are finite and > 0.
void validate(const SigmaParams& p);

struct SigmaGrad {
  double d_sigma_x = 0.0;
  double d_sigma_y = 0.0;
  double d_sigma_z = 0.0;
  double d_sigma_r = 0.0;

  bool operator==(const SigmaGrad&) const = default;
};

/// Everything the backward pass needs from the forward pass, per voxel k:
///   w      normalisation factor, sum of G_s * G_r over the window (>= 1)
///   alpha  unnormalised sum of G_s * G_r * X_n
///   s_w    sum of G_s * G_r * (X_n - X_k) / sigma_r^2   (d w_k / d X_k)
///   s_a    sum of G_s * G_r * X_n * (X_n - X_k) / sigma_r^2 (d alpha_k / d X_k - 1)
/// plus the parameters and a fingerprint of the input the pass ran on.
struct ForwardCache {
  Volume output;
  Volume w;
  Volume alpha;
  Volume s_w;
  Volume s_a;
  SigmaParams params;
  std::uint64_t input_fingerprint = 0;
};

struct BackwardResult {
  SigmaGrad sigma;
  Volume input;  // dL/dX
};

// Window half-width per axis: max(ceil(5 * sigma), 2), i.e. at least 5 voxels wide.
Radii kernel_radii(const SigmaParams& p);

// Order-sensitive hash of the raw bits of a volume; used to detect a cache
// being replayed against a different input.
std::uint64_t fingerprint(const Volume& v);

/// Bilateral filter of `x`. Neighbourhoods are clipped at the volume border,
/// so the normalisation re-weights edge voxels and constant volumes are exact
/// fixed points. Throws InvalidInputError on non-finite input or parameters.
ForwardCache forward(const Volume& x, const SigmaParams& p);

// Filter output at a single voxel, evaluated directly from the definition.
// Used to re-evaluate only the outputs affected by a local perturbation.
double filter_voxel(const Volume& x, const SigmaParams& p, const VoxelIndex& k);

/// Analytic vector-Jacobian products of the filter for upstream gradient
/// `grad_out`, computed in one sweep over (k, n) pairs. For each input voxel i
/// the sweep gathers over the outputs k whose window contains i (windows are
/// symmetric, so these are exactly the voxels in i's own window).
///
/// `params` must equal the parameters stored in `cache` and `x` must be the
/// volume the cache was computed from, otherwise StaleCacheError is thrown.
BackwardResult backward(const ForwardCache& cache, const Volume& x, const SigmaParams& params,
                        const Volume& grad_out);

SigmaGrad backward_sigma(const ForwardCache& cache, const Volume& x, const SigmaParams& params,
                         const Volume& grad_out);

Volume backward_input(const ForwardCache& cache, const Volume& x, const SigmaParams& params, const Volume& grad_out);

// --- finite-difference verification -------------------------------------

// Entries whose analytic and numeric magnitudes both fall below this value are
// compared on an absolute rather than relative scale.
inline constexpr double kGradcheckAbsFloor = 1e-5;

// |analytic - numeric| / max(|analytic|, |numeric|, kGradcheckAbsFloor)
double gradient_rel_error(double analytic, double numeric);

struct GradcheckReport {
  double max_rel_err_sigma = 0.0;
  double max_rel_err_input = 0.0;
  bool pass = false;
};

/// Compares backward() against central differences of the probe loss
/// L = sum_k g_k * Y_k, where g is drawn uniformly from [-1, 1] with `seed`.
/// Each of the four widths and every input voxel is perturbed by +-eps.
GradcheckReport gradcheck(const Volume& x, const SigmaParams& p, double eps, double tol, std::uint64_t seed = 0);

}  // namespace tbf
