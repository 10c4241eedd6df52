#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <cmath>

#include "tbf/data_io.hpp"
#include "tbf/errors.hpp"
#include "tbf/parallel.hpp"
#include "tbf/rng.hpp"

namespace tbf {

Volume add_noise(const Volume& x, const NoiseModel& model, std::uint64_t seed) {
  Volume out = x;
  const auto n = static_cast<std::int64_t>(x.size());

  if (const auto* g = std::get_if<GaussianNoise>(&model)) {
    if (!(g->sigma >= 0.0) || !std::isfinite(g->sigma)) throw InvalidInputError("gaussian noise sigma must be >= 0");
    if (g->sigma == 0.0) return out;
#pragma omp parallel for schedule(static) num_threads(num_workers())
    for (std::int64_t k = 0; k < n; ++k) {
      CounterRng rng(seed, static_cast<std::uint64_t>(k));
      out[k] += boost::random::normal_distribution<double>(0.0, g->sigma)(rng);
    }
    return out;
  }

  const auto& p = std::get<PoissonNoise>(model);
  if (!(p.photons > 0.0) || !std::isfinite(p.photons)) throw InvalidInputError("poisson photon count must be > 0");
  if (x.min() < 0.0) throw InvalidInputError("poisson noise requires non-negative intensities");
#pragma omp parallel for schedule(static) num_threads(num_workers())
  for (std::int64_t k = 0; k < n; ++k) {
    const double mean = p.photons * x[k];
    if (mean <= 0.0) {
      out[k] = 0.0;
      continue;
    }
    CounterRng rng(seed, static_cast<std::uint64_t>(k));
    const auto counts = boost::random::poisson_distribution<std::int64_t, double>(mean)(rng);
    out[k] = static_cast<double>(counts) / p.photons;
  }
  return out;
}

}  // namespace tbf
