#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tbf/pipeline.hpp"
#include "tbf/rng.hpp"
#include "tbf/volume.hpp"

namespace tbf {

enum class TrainMode { supervised, noise2void };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  double init_sigma_spatial = 0.5;
  double init_sigma_range = 0.01;
  double lr_spatial = 0.01;
  double lr_range = 0.005;
  int max_iters = 5000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::supervised;
  double n2v_mask_ratio = 0.01;
  int n2v_window = 5;  // edge length of the replacement neighbourhood
  // Stop once the best loss improved by less than this over the last
  // `convergence_window` iterations.
  double convergence_tol = 1e-10;
  int convergence_window = 50;
};

// Throws InvalidInputError on out-of-range settings.
void validate(const TrainConfig& cfg);

SigmaParams initial_params(const TrainConfig& cfg);

// Flat voxel indices, sorted and unique.
using Mask = std::vector<std::size_t>;

struct LossResult {
  double loss = 0.0;
  Volume grad;  // dL/dpred
};

/// Mean squared error over the voxels in `mask` (all voxels when empty
/// optional), with its gradient. Voxels outside the mask get zero gradient.
LossResult mse_loss(const Volume& pred, const Volume& target, const std::optional<Mask>& mask = std::nullopt);

/// First/second moment estimates for every trainable width, laid out as
/// [layer0.x, layer0.y, layer0.z, layer0.r, layer1.x, ...].
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  static AdamState for_pipeline(const FilterPipeline& fp);
};

/// One bias-corrected Adam update. Spatial widths use cfg.lr_spatial, range
/// widths cfg.lr_range; every width is clamped to kSigmaFloor afterwards.
/// Throws NumericError naming the layer and width on a non-finite gradient,
/// leaving params and state untouched.
void adam_step(AdamState& state, FilterPipeline& params, std::span<const SigmaGrad> grads, const TrainConfig& cfg);

struct LossReport {
  int iteration = 0;
  double loss = 0.0;
  std::vector<SigmaParams> layers;  // parameters the loss was evaluated with
};

struct TrainResult {
  FilterPipeline pipeline;  // parameters with the lowest observed loss
  std::vector<LossReport> history;
  double best_loss = 0.0;
  int best_iteration = 0;
};

TrainResult train_supervised(const Volume& noisy, const Volume& clean, int depth, const TrainConfig& cfg);

struct N2VSample {
  Volume perturbed;
  Mask mask;
};

/// Picks ceil(ratio * N) distinct voxels uniformly and replaces each by the
/// value of a uniformly drawn voxel from its clipped n2v_window^3
/// neighbourhood, never the voxel itself. Replacement values are read from
/// the unmodified input.
N2VSample n2v_perturb(const Volume& x, const TrainConfig& cfg, Rng& rng);

TrainResult train_n2v(const Volume& noisy, int depth, const TrainConfig& cfg);

// Dispatches on cfg.mode; `clean` is required for supervised training.
TrainResult train(const Volume& noisy, const Volume* clean, int depth, const TrainConfig& cfg);

// iteration,loss,<per-layer sigma columns>; full round-trip precision.
void write_history_csv(std::ostream& os, std::span<const LossReport> history);

}  // namespace tbf
