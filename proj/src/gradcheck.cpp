#include <algorithm>
#include <cmath>
#include <vector>

#include "tbf/bilateral.hpp"
#include "tbf/errors.hpp"
#include "tbf/parallel.hpp"
#include "tbf/rng.hpp"

namespace tbf {
namespace {

// Central difference of L = sum_k g_k Y_k, accumulated per voxel before the
// reduction so that cancellation happens on O(1) outputs rather than on L.
// `span` is the representable distance between the two evaluation points.
double probe_difference(const Volume& plus, const Volume& minus, const Volume& probe, double span) {
  std::vector<double> terms(probe.size());
  for (std::size_t k = 0; k < terms.size(); ++k) terms[k] = probe[k] * (plus[k] - minus[k]);
  return pairwise_sum(terms) / span;
}

double& sigma_field(SigmaParams& p, int which) {
  switch (which) {
    case 0: return p.sigma_x;
    case 1: return p.sigma_y;
    case 2: return p.sigma_z;
    default: return p.sigma_r;
  }
}

double sigma_grad_field(const SigmaGrad& g, int which) {
  switch (which) {
    case 0: return g.d_sigma_x;
    case 1: return g.d_sigma_y;
    case 2: return g.d_sigma_z;
    default: return g.d_sigma_r;
  }
}

}  // namespace

double gradient_rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradcheckAbsFloor});
  return std::abs(analytic - numeric) / scale;
}

GradcheckReport gradcheck(const Volume& x, const SigmaParams& p, double eps, double tol, std::uint64_t seed) {
  if (!(eps > 0.0)) throw InvalidInputError("gradcheck: eps must be > 0");

  Rng rng(seed);
  Volume probe = Volume::filled(x.dims(), 0.0);
  for (double& g : probe.values()) g = uniform_real(rng, -1.0, 1.0);

  const ForwardCache cache = forward(x, p);
  const BackwardResult analytic = backward(cache, x, p, probe);

  GradcheckReport report;
  for (int which = 0; which < 4; ++which) {
    SigmaParams hi = p, lo = p;
    sigma_field(hi, which) += eps;
    sigma_field(lo, which) -= eps;
    const double span = sigma_field(hi, which) - sigma_field(lo, which);
    const double numeric = probe_difference(forward(x, hi).output, forward(x, lo).output, probe, span);
    report.max_rel_err_sigma =
        std::max(report.max_rel_err_sigma, gradient_rel_error(sigma_grad_field(analytic.sigma, which), numeric));
  }

  // Perturbing X_i only changes the outputs whose window contains i.
  const Radii radii = kernel_radii(p);
  Volume shifted = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    const WindowRange affected(window_box(x.dims(), x.unflatten(i), radii));
    std::vector<double> plus, minus, weights;
    shifted[i] = orig + eps;
    for (const VoxelIndex& k : affected) plus.push_back(filter_voxel(shifted, p, k));
    shifted[i] = orig - eps;
    for (const VoxelIndex& k : affected) {
      minus.push_back(filter_voxel(shifted, p, k));
      weights.push_back(probe.at(k));
    }
    shifted[i] = orig;
    std::vector<double> terms(weights.size());
    for (std::size_t j = 0; j < terms.size(); ++j) terms[j] = weights[j] * (plus[j] - minus[j]);
    const double numeric = pairwise_sum(terms) / ((orig + eps) - (orig - eps));
    report.max_rel_err_input = std::max(report.max_rel_err_input, gradient_rel_error(analytic.input[i], numeric));
  }

  report.pass = report.max_rel_err_sigma < tol && report.max_rel_err_input < tol;
  return report;
}

}  // namespace tbf
