#include <algorithm>
#include <cmath>

#include "tbf/errors.hpp"
#include "tbf/training.hpp"

namespace tbf {

N2VSample n2v_perturb(const Volume& x, const TrainConfig& cfg, Rng& rng) {
  validate(cfg);
  const std::size_t n = x.size();
  // Guard against ratio * n landing a hair above an integer through rounding.
  const auto count = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(cfg.n2v_mask_ratio * static_cast<double>(n) - 1e-9)));
  const int half = cfg.n2v_window / 2;
  const Radii radii{half, half, half};
  if (window_box(x.dims(), {0, 0, 0}, radii).count() < 2) {
    throw InvalidInputError("n2v_perturb: volume too small to draw replacement neighbours");
  }

  // Floyd's algorithm: `count` distinct indices with one draw each.
  std::vector<char> chosen(n, 0);
  for (std::size_t j = n - count; j < n; ++j) {
    const auto t = static_cast<std::size_t>(uniform_index(rng, j + 1));
    chosen[chosen[t] ? j : t] = 1;
  }

  N2VSample sample{x, {}};
  sample.mask.reserve(count);
  for (std::size_t k = 0; k < n; ++k) {
    if (!chosen[k]) continue;
    sample.mask.push_back(k);
    const VoxelIndex c = x.unflatten(k);
    const Box box = window_box(x.dims(), c, radii);
    const std::size_t centre_rank = static_cast<std::size_t>(c.ix - box.lo.ix) +
                                    static_cast<std::size_t>(box.hi.ix - box.lo.ix + 1) *
                                        (static_cast<std::size_t>(c.iy - box.lo.iy) +
                                         static_cast<std::size_t>(box.hi.iy - box.lo.iy + 1) *
                                             static_cast<std::size_t>(c.iz - box.lo.iz));
    // Draw among the window minus the centre, then skip over the centre.
    auto pick = static_cast<std::size_t>(uniform_index(rng, box.count() - 1));
    if (pick >= centre_rank) ++pick;
    const std::size_t wx = box.hi.ix - box.lo.ix + 1;
    const std::size_t wy = box.hi.iy - box.lo.iy + 1;
    const VoxelIndex src{box.lo.ix + static_cast<int>(pick % wx), box.lo.iy + static_cast<int>((pick / wx) % wy),
                         box.lo.iz + static_cast<int>(pick / (wx * wy))};
    sample.perturbed[k] = x.at(src);
  }
  return sample;
}

}  // namespace tbf
