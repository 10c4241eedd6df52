#include "tbf/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include "tbf/errors.hpp"
#include "tbf/parallel.hpp"

namespace tbf {

void validate(const MetricConfig& cfg) {
  if (!(cfg.data_range > 0.0) || !std::isfinite(cfg.data_range)) {
    throw InvalidInputError("metric data_range must be finite and > 0");
  }
  if (cfg.ssim_window < 1 || cfg.ssim_window % 2 == 0) throw InvalidInputError("ssim_window must be odd and >= 1");
  if (!(cfg.ssim_sigma > 0.0)) throw InvalidInputError("ssim_sigma must be > 0");
}

double psnr(const Volume& pred, const Volume& target, const MetricConfig& cfg) {
  validate(cfg);
  require_same_dims(pred.dims(), target.dims(), "psnr");
  std::vector<double> sq(pred.size());
  for (std::size_t k = 0; k < sq.size(); ++k) {
    const double d = pred[k] - target[k];
    sq[k] = d * d;
  }
  const double mse = pairwise_sum(sq) / static_cast<double>(sq.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(cfg.data_range * cfg.data_range / mse);
}

namespace {

// Weighted local mean along one axis of an n-point line with the window
// clipped to [0, n) and the weights renormalised.
class ClippedSmoother {
 public:
  ClippedSmoother(int window, double sigma) : radius_(window / 2), weights_(window) {
    for (int d = -radius_; d <= radius_; ++d) weights_[d + radius_] = std::exp(-0.5 * d * d / (sigma * sigma));
  }

  // out[i] = sum_j w(j - i) in[j * stride] / sum_j w(j - i), j within bounds.
  void apply(const double* in, std::size_t stride, int n, double* out) const {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0, norm = 0.0;
      const int lo = std::max(i - radius_, 0);
      const int hi = std::min(i + radius_, n - 1);
      for (int j = lo; j <= hi; ++j) {
        const double w = weights_[j - i + radius_];
        acc += w * in[static_cast<std::size_t>(j) * stride];
        norm += w;
      }
      out[i] = acc / norm;
    }
  }

 private:
  int radius_;
  std::vector<double> weights_;
};

// Separable clipped Gaussian mean of an nx-by-ny image.
std::vector<double> local_mean(const std::vector<double>& img, int nx, int ny, const ClippedSmoother& s) {
  std::vector<double> tmp(img.size()), out(img.size()), line(std::max(nx, ny));
  for (int y = 0; y < ny; ++y) s.apply(img.data() + static_cast<std::size_t>(y) * nx, 1, nx, tmp.data() + static_cast<std::size_t>(y) * nx);
  for (int x = 0; x < nx; ++x) {
    s.apply(tmp.data() + x, nx, ny, line.data());
    for (int y = 0; y < ny; ++y) out[static_cast<std::size_t>(y) * nx + x] = line[y];
  }
  return out;
}

}  // namespace

double ssim(const Volume& pred, const Volume& target, const MetricConfig& cfg) {
  validate(cfg);
  require_same_dims(pred.dims(), target.dims(), "ssim");
  const Dims d = pred.dims();
  const std::size_t plane = static_cast<std::size_t>(d.nx) * d.ny;
  const double c1 = (cfg.k1 * cfg.data_range) * (cfg.k1 * cfg.data_range);
  const double c2 = (cfg.k2 * cfg.data_range) * (cfg.k2 * cfg.data_range);
  const ClippedSmoother smoother(cfg.ssim_window, cfg.ssim_sigma);

  std::vector<double> slice_means(d.nz);
  for (int z = 0; z < d.nz; ++z) {
    std::vector<double> a(plane), b(plane), aa(plane), bb(plane), ab(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      a[p] = pred[z * plane + p];
      b[p] = target[z * plane + p];
      aa[p] = a[p] * a[p];
      bb[p] = b[p] * b[p];
      ab[p] = a[p] * b[p];
    }
    const auto mu_a = local_mean(a, d.nx, d.ny, smoother);
    const auto mu_b = local_mean(b, d.nx, d.ny, smoother);
    const auto m_aa = local_mean(aa, d.nx, d.ny, smoother);
    const auto m_bb = local_mean(bb, d.nx, d.ny, smoother);
    const auto m_ab = local_mean(ab, d.nx, d.ny, smoother);

    std::vector<double> local(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      const double var_a = m_aa[p] - mu_a[p] * mu_a[p];
      const double var_b = m_bb[p] - mu_b[p] * mu_b[p];
      const double cov = m_ab[p] - mu_a[p] * mu_b[p];
      const double num = (2.0 * (mu_a[p] * mu_b[p]) + c1) * (2.0 * cov + c2);
      const double den = (mu_a[p] * mu_a[p] + mu_b[p] * mu_b[p] + c1) * (var_a + var_b + c2);
      local[p] = num / den;
    }
    slice_means[z] = pairwise_sum(local) / static_cast<double>(plane);
  }
  return pairwise_sum(slice_means) / static_cast<double>(d.nz);
}

void write_evaluation_csv(std::ostream& os, std::span<const EvaluationRow> rows) {
  auto mean_std = [&](auto field) {
    const double n = static_cast<double>(rows.size());
    double mean = 0.0;
    for (const auto& r : rows) mean += field(r);
    mean /= n;
    double ss = 0.0;
    for (const auto& r : rows) ss += (field(r) - mean) * (field(r) - mean);
    return std::make_pair(mean, rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
  };
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "id,ssim,psnr\n";
  for (const auto& r : rows) os << r.id << "," << r.ssim << "," << r.psnr << "\n";
  if (!rows.empty()) {
    const auto [ms, ss] = mean_std([](const EvaluationRow& r) { return r.ssim; });
    const auto [mp, sp] = mean_std([](const EvaluationRow& r) { return r.psnr; });
    os << std::setprecision(6) << "mean+-std," << ms << " +- " << ss << "," << mp << " +- " << sp << "\n";
  }
  os.precision(old_precision);
}

}  // namespace tbf
