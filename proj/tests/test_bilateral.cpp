#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "support/oracles.hpp"
#include "tbf/bilateral.hpp"
#include "tbf/errors.hpp"
#include "tbf/parallel.hpp"

namespace tbf {
namespace {

using testing::central_difference;
using testing::naive_filter;
using testing::random_values;
using testing::random_volume;
using testing::rel_err;
using testing::to_vector;

// Finite-difference agreement as used throughout: relative error below
// `rel`, or absolute error below 1e-8 where the gradient is essentially zero.
::testing::AssertionResult fd_close(double analytic, double numeric, double rel) {
  if (rel_err(analytic, numeric) < rel || std::abs(analytic - numeric) < 1e-8) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << "analytic " << analytic << " vs numeric " << numeric << " (rel "
                                       << rel_err(analytic, numeric) << ")";
}

Volume three_voxel_spike() { return Volume::from_data({3, 1, 1}, {0.0, 1.0, 0.0}); }

TEST(KernelRadiiTest, FiveSigmaWithMinimumOfTwo) {
  EXPECT_EQ(kernel_radii({0.5, 0.5, 0.5, 1.0}), (Radii{3, 3, 3}));
  EXPECT_EQ(kernel_radii({0.1, 0.1, 0.1, 1.0}), (Radii{2, 2, 2}));
  EXPECT_EQ(kernel_radii({1.0, 1.0, 1.0, 1.0}), (Radii{5, 5, 5}));
  EXPECT_EQ(kernel_radii({0.1, 0.5, 1.0, 1.0}), (Radii{2, 3, 5}));
}

TEST(SigmaParamsTest, ValidateRejectsNonPositiveAndNonFinite) {
  EXPECT_NO_THROW(validate(SigmaParams{}));
  EXPECT_THROW(validate({0.0, 1.0, 1.0, 1.0}), InvalidInputError);
  EXPECT_THROW(validate({1.0, -1.0, 1.0, 1.0}), InvalidInputError);
  EXPECT_THROW(validate({1.0, 1.0, 1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidInputError);
  EXPECT_THROW(validate({1.0, 1.0, std::numeric_limits<double>::infinity(), 1.0}), InvalidInputError);
}

TEST(ForwardTest, ConstantVolumeIsExactFixedPoint) {
  for (const SigmaParams& p : {SigmaParams{0.5, 0.5, 0.5, 0.01}, SigmaParams{2.7, 0.1, 1.3, 5.0},
                               SigmaParams{0.3, 3.0, 0.2, 1e-3}}) {
    const Volume x = Volume::filled({7, 5, 4}, 7.0);
    const ForwardCache c = forward(x, p);
    for (double v : c.output.values()) ASSERT_EQ(v, 7.0);
  }
}

TEST(ForwardTest, TinyRangeWidthKeepsIsolatedSpike) {
  // Oracle values (40-digit arithmetic): the cross weights are ~1e-2173.
  const ForwardCache c = forward(three_voxel_spike(), {0.5, 0.5, 0.5, 0.01});
  EXPECT_NEAR(c.output[0], 0.0, 1e-300);
  EXPECT_EQ(c.output[1], 1.0);
  EXPECT_NEAR(c.output[2], 0.0, 1e-300);
}

TEST(ForwardTest, HugeRangeWidthIsGaussianBlur) {
  const ForwardCache c = forward(three_voxel_spike(), {0.5, 0.5, 0.5, 1e6});
  // Normalised Gaussian blur values from the high-precision oracle.
  EXPECT_NEAR(c.output[0], 0.11916771100195135351, 1e-6);
  EXPECT_NEAR(c.output[1], 0.78698604216168231848, 1e-6);
  EXPECT_NEAR(c.output[2], 0.11916771100195135351, 1e-6);

  const auto blur = naive_filter(to_vector(three_voxel_spike()), {3, 1, 1}, 0.5, 0.5, 0.5, 1.0, false);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(c.output[k], blur[k], 1e-6);
}

TEST(ForwardTest, MatchesNaiveDoubleLoop) {
  const Dims d{16, 16, 16};
  const Volume x = random_volume(d, 5);
  const SigmaParams p{0.6, 0.9, 0.4, 0.15};
  const auto expected = naive_filter(to_vector(x), d, p);
  const ForwardCache c = forward(x, p);
  for (std::size_t k = 0; k < x.size(); ++k) ASSERT_LE(rel_err(c.output[k], expected[k], 1e-300), 1e-12) << k;
}

TEST(ForwardTest, CacheInvariants) {
  const Dims d{6, 5, 4};
  const Volume x = random_volume(d, 9);
  const ForwardCache c = forward(x, {0.8, 0.5, 1.1, 0.2});
  EXPECT_EQ(c.w.dims(), d);
  EXPECT_EQ(c.alpha.dims(), d);
  EXPECT_EQ(c.s_w.dims(), d);
  EXPECT_EQ(c.s_a.dims(), d);
  EXPECT_EQ(c.params, (SigmaParams{0.8, 0.5, 1.1, 0.2}));
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_GE(c.w[k], 1.0);
    EXPECT_NEAR(c.output[k], c.alpha[k] / c.w[k], 1e-14);
  }
}

TEST(ForwardTest, OutputStaysWithinInputRange) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Volume x = random_volume({7, 6, 5}, seed, -2.0, 3.0);
    const ForwardCache c = forward(x, {1.2, 0.7, 0.9, 0.5});
    const double lo = x.min(), hi = x.max();
    for (double v : c.output.values()) {
      EXPECT_GE(v, lo - 1e-15);
      EXPECT_LE(v, hi + 1e-15);
    }
  }
}

TEST(ForwardTest, FlipEquivariance) {
  const Dims d{6, 5, 4};
  const Volume x = random_volume(d, 21);
  const SigmaParams p{0.9, 1.4, 0.6, 0.3};
  const Volume y = forward(x, p).output;

  for (int axis = 0; axis < 3; ++axis) {
    auto flip = [&](const Volume& v) {
      Volume out = v;
      for (int z = 0; z < d.nz; ++z)
        for (int yy = 0; yy < d.ny; ++yy)
          for (int xx = 0; xx < d.nx; ++xx) {
            VoxelIndex src{xx, yy, z};
            if (axis == 0) src.ix = d.nx - 1 - xx;
            if (axis == 1) src.iy = d.ny - 1 - yy;
            if (axis == 2) src.iz = d.nz - 1 - z;
            out.at({xx, yy, z}) = v.at(src);
          }
      return out;
    };
    const Volume a = forward(flip(x), p).output;
    const Volume b = flip(y);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-13);
  }
}

TEST(ForwardTest, IntensityShiftEquivariance) {
  const Dims d{8, 6, 5};
  const Volume x = random_volume(d, 4);
  const SigmaParams p{1.0, 0.7, 0.8, 0.1};
  const Volume y = forward(x, p).output;
  for (double c : {0.25, -3.0, 10.0}) {
    Volume shifted = x;
    for (double& v : shifted.values()) v += c;
    const Volume ys = forward(shifted, p).output;
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(ys[k], y[k] + c, 1e-12 * (1.0 + std::abs(c)));
  }
}

TEST(ForwardTest, IdentityLimitForTinyRangeWidth) {
  // Distinct values spaced 1/N apart; sigma_r orders of magnitude smaller.
  const Dims d{5, 4, 3};
  std::vector<double> vals(d.count());
  for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = static_cast<double>((k * 37) % vals.size()) / vals.size();
  const Volume x = Volume::from_data(d, vals);
  const ForwardCache c = forward(x, {1.5, 1.5, 1.5, 1e-4});
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(c.output[k], x[k], 1e-6);
}

TEST(ForwardTest, RejectsNonFiniteInput) {
  Volume x = Volume::filled({3, 3, 3}, 1.0);
  x[13] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward(x, SigmaParams{}), InvalidInputError);
  x[13] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward(x, SigmaParams{}), InvalidInputError);
  EXPECT_THROW(forward(Volume::filled({3, 3, 3}, 1.0), {0.5, 0.5, 0.5, 0.0}), InvalidInputError);
}

TEST(ForwardTest, SingleVoxelEvaluationMatchesForward) {
  const Dims d{7, 6, 3};
  const Volume x = random_volume(d, 17);
  const SigmaParams p{0.8, 1.3, 0.4, 0.25};
  const ForwardCache c = forward(x, p);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(filter_voxel(x, p, x.unflatten(k)), c.output[k], 1e-14);
}

TEST(BackwardSigmaTest, ConstantInputGivesZeroGradient) {
  const Volume x = Volume::filled({5, 4, 3}, 0.3);
  const SigmaParams p{0.7, 1.1, 0.5, 0.05};
  const SigmaGrad g = backward_sigma(forward(x, p), x, p, random_volume(x.dims(), 3, -1.0, 1.0));
  EXPECT_EQ(g, SigmaGrad{});
}

TEST(BackwardSigmaTest, ThreeVoxelSpikeMatchesOracle) {
  const Volume x = three_voxel_spike();
  const SigmaParams p{0.5, 0.5, 0.5, 0.25};
  const Volume ones = Volume::filled(x.dims(), 1.0);
  const SigmaGrad g = backward_sigma(forward(x, p), x, p, ones);

  // 40-digit derivative of the definition.
  EXPECT_LT(rel_err(g.d_sigma_x, -1.1515869495706175146e-6), 1e-9);
  EXPECT_LT(rel_err(g.d_sigma_r, -1.4208823173922916674e-6), 1e-9);
  EXPECT_EQ(g.d_sigma_y, 0.0);
  EXPECT_EQ(g.d_sigma_z, 0.0);

  const auto gv = to_vector(ones);
  const auto xv = to_vector(x);
  const double eps = 1e-6;
  EXPECT_TRUE(fd_close(g.d_sigma_x, central_difference([&](double s) { return naive_filter(xv, x.dims(), s, 0.5, 0.5, 0.25); }, 0.5, eps, gv), 1e-5));
  EXPECT_TRUE(fd_close(g.d_sigma_r, central_difference([&](double s) { return naive_filter(xv, x.dims(), 0.5, 0.5, 0.5, s); }, 0.25, eps, gv), 1e-5));
}

TEST(BackwardSigmaTest, RandomVolumeMatchesFiniteDifferences) {
  const Dims d{8, 8, 8};
  const Volume x = random_volume(d, 42);
  const Volume go = random_volume(d, 43, -1.0, 1.0);
  // Widths stay off multiples of 0.2, where the window radius jumps.
  const SigmaParams p{0.7, 0.9, 0.57, 0.3};
  const SigmaGrad g = backward_sigma(forward(x, p), x, p, go);

  const auto xv = to_vector(x), gv = to_vector(go);
  const double eps = 1e-6;
  const double fx = central_difference([&](double s) { return naive_filter(xv, d, s, p.sigma_y, p.sigma_z, p.sigma_r); }, p.sigma_x, eps, gv);
  const double fy = central_difference([&](double s) { return naive_filter(xv, d, p.sigma_x, s, p.sigma_z, p.sigma_r); }, p.sigma_y, eps, gv);
  const double fz = central_difference([&](double s) { return naive_filter(xv, d, p.sigma_x, p.sigma_y, s, p.sigma_r); }, p.sigma_z, eps, gv);
  const double fr = central_difference([&](double s) { return naive_filter(xv, d, p.sigma_x, p.sigma_y, p.sigma_z, s); }, p.sigma_r, eps, gv);
  for (double v : {g.d_sigma_x, g.d_sigma_y, g.d_sigma_z, g.d_sigma_r}) EXPECT_TRUE(std::isfinite(v));
  EXPECT_TRUE(fd_close(g.d_sigma_x, fx, 1e-5));
  EXPECT_TRUE(fd_close(g.d_sigma_y, fy, 1e-5));
  EXPECT_TRUE(fd_close(g.d_sigma_z, fz, 1e-5));
  EXPECT_TRUE(fd_close(g.d_sigma_r, fr, 1e-5));
}

TEST(BackwardInputTest, ThreeVoxelSpikeMatchesOracle) {
  const Volume x = three_voxel_spike();
  const SigmaParams p{0.5, 0.5, 0.5, 0.25};
  const Volume go = Volume::from_data(x.dims(), {1.0, 0.0, 0.0});
  const Volume g = backward_input(forward(x, p), x, p, go);

  const double oracle[3] = {1.0003453718134400677, -0.00068070672483055296328, 0.00033533491139048529356};
  for (int i = 0; i < 3; ++i) EXPECT_LT(rel_err(g[i], oracle[i]), 1e-9) << i;

  const auto xv = to_vector(x), gv = to_vector(go);
  for (int i = 0; i < 3; ++i) {
    const double fd = central_difference(
        [&](double t) {
          auto xx = xv;
          xx[i] = t;
          return naive_filter(xx, x.dims(), p);
        },
        xv[i], 1e-6, gv);
    EXPECT_TRUE(fd_close(g[i], fd, 1e-5)) << i;
  }
}

TEST(BackwardInputTest, RandomVolumeMatchesFiniteDifferencesElementwise) {
  const Dims d{6, 6, 3};
  const Volume x = random_volume(d, 7);
  const Volume go = random_volume(d, 8, -1.0, 1.0);
  const SigmaParams p{0.8, 0.6, 0.9, 0.2};
  const Volume g = backward_input(forward(x, p), x, p, go);

  const auto xv = to_vector(x), gv = to_vector(go);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double fd = central_difference(
        [&](double t) {
          auto xx = xv;
          xx[i] = t;
          return naive_filter(xx, d, p);
        },
        xv[i], 1e-6, gv);
    ASSERT_TRUE(fd_close(g[i], fd, 1e-5)) << "voxel " << i;
  }
}

TEST(BackwardInputTest, JacobianRowsSumToOneAtConstantInput) {
  const Dims d{5, 4, 3};
  const Volume x = Volume::filled(d, 0.4);
  const SigmaParams p{0.9, 0.6, 1.2, 0.05};
  const ForwardCache c = forward(x, p);
  for (std::size_t k : {std::size_t{0}, std::size_t{17}, d.count() - 1}) {
    Volume onehot = Volume::filled(d, 0.0);
    onehot[k] = 1.0;
    const Volume g = backward_input(c, x, p, onehot);
    double sum = 0.0;
    for (double v : g.values()) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-14) << k;
  }

  const Volume go = random_volume(d, 12, -1.0, 1.0);
  const Volume g = backward_input(c, x, p, go);
  double total_in = 0.0, total_out = 0.0;
  for (std::size_t k = 0; k < d.count(); ++k) {
    total_in += g[k];
    total_out += go[k];
  }
  EXPECT_NEAR(total_in, total_out, 1e-12);
}

TEST(BackwardTest, StaleCacheIsRejected) {
  const Volume x = random_volume({4, 4, 4}, 1);
  const SigmaParams p{0.5, 0.5, 0.5, 0.1};
  const ForwardCache c = forward(x, p);
  const Volume go = Volume::filled(x.dims(), 1.0);

  SigmaParams changed = p;
  changed.sigma_r = 0.2;
  EXPECT_THROW(backward(c, x, changed, go), StaleCacheError);

  Volume other = x;
  other[3] += 0.01;
  EXPECT_THROW(backward(c, other, p, go), StaleCacheError);

  EXPECT_THROW(backward(c, x, p, Volume::filled({4, 4, 3}, 1.0)), ShapeMismatchError);
  EXPECT_THROW(backward(c, Volume::filled({4, 4, 3}, 1.0), p, go), ShapeMismatchError);
}

TEST(BackwardTest, FusedSweepMatchesSeparateEntryPoints) {
  const Volume x = random_volume({5, 5, 5}, 77);
  const Volume go = random_volume({5, 5, 5}, 78, -1.0, 1.0);
  const SigmaParams p{1.1, 0.7, 0.5, 0.4};
  const ForwardCache c = forward(x, p);
  const BackwardResult r = backward(c, x, p, go);
  EXPECT_EQ(r.sigma, backward_sigma(c, x, p, go));
  EXPECT_EQ(r.input, backward_input(c, x, p, go));
}

TEST(BackwardTest, BitReproducibleAcrossRunsAndWorkerCounts) {
  const Volume x = random_volume({9, 7, 6}, 5);
  const Volume go = random_volume({9, 7, 6}, 6, -1.0, 1.0);
  const SigmaParams p{0.9, 1.3, 0.6, 0.2};
  const int saved = num_workers();

  set_num_workers(1);
  const ForwardCache c1 = forward(x, p);
  const BackwardResult r1 = backward(c1, x, p, go);
  set_num_workers(3);
  const ForwardCache c3 = forward(x, p);
  const BackwardResult r3 = backward(c3, x, p, go);
  const BackwardResult r3b = backward(c3, x, p, go);
  set_num_workers(saved);

  EXPECT_EQ(c1.output, c3.output);
  EXPECT_EQ(r1.sigma, r3.sigma);
  EXPECT_EQ(r1.input, r3.input);
  EXPECT_EQ(r3.sigma, r3b.sigma);
}

}  // namespace
}  // namespace tbf
