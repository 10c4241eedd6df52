#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>

#include "tbf/volume.hpp"

namespace tbf {

struct MetricConfig {
  double data_range = 1.0;  // max - min of the intensity convention
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

void validate(const MetricConfig& cfg);

// Returned by psnr() for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 * log10(range^2 / MSE) in dB.
double psnr(const Volume& pred, const Volume& target, const MetricConfig& cfg = {});

/// Mean structural similarity. Each z-slice is treated as a 2D image with
/// Gaussian-weighted local statistics; windows are clipped at the image
/// border and renormalised. The per-slice means are averaged over z.
double ssim(const Volume& pred, const Volume& target, const MetricConfig& cfg = {});

struct EvaluationRow {
  std::string id;
  double ssim = 0.0;
  double psnr = 0.0;
};

// id,ssim,psnr rows followed by a "mean+-std" footer (sample std).
void write_evaluation_csv(std::ostream& os, std::span<const EvaluationRow> rows);

}  // namespace tbf
