#include "tbf/training.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "tbf/errors.hpp"
#include "tbf/parallel.hpp"

namespace tbf {

std::string to_string(TrainMode mode) { return mode == TrainMode::supervised ? "supervised" : "noise2void"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "supervised") return TrainMode::supervised;
  if (s == "noise2void" || s == "n2v") return TrainMode::noise2void;
  throw InvalidInputError("unknown training mode '" + s + "' (expected supervised or noise2void)");
}

void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& what) { throw InvalidInputError("invalid training config: " + what); };
  if (!(cfg.init_sigma_spatial > 0.0) || !(cfg.init_sigma_range > 0.0)) fail("initial widths must be > 0");
  if (!(cfg.lr_spatial > 0.0) || !(cfg.lr_range > 0.0)) fail("learning rates must be > 0");
  if (cfg.max_iters < 1) fail("max_iters must be >= 1");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) || !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(cfg.adam_eps > 0.0)) fail("adam_eps must be > 0");
  if (!(cfg.n2v_mask_ratio > 0.0 && cfg.n2v_mask_ratio < 1.0)) fail("n2v_mask_ratio must lie in (0, 1)");
  if (cfg.n2v_window < 3 || cfg.n2v_window % 2 == 0) fail("n2v_window must be odd and >= 3");
  if (cfg.convergence_window < 1 || cfg.convergence_tol < 0.0) fail("convergence settings out of range");
}

SigmaParams initial_params(const TrainConfig& cfg) {
  return {cfg.init_sigma_spatial, cfg.init_sigma_spatial, cfg.init_sigma_spatial, cfg.init_sigma_range};
}

LossResult mse_loss(const Volume& pred, const Volume& target, const std::optional<Mask>& mask) {
  require_same_dims(pred.dims(), target.dims(), "mse_loss");
  LossResult r{0.0, Volume::filled(pred.dims(), 0.0)};
  if (!mask) {
    const double n = static_cast<double>(pred.size());
    std::vector<double> sq(pred.size());
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double d = pred[k] - target[k];
      sq[k] = d * d;
      r.grad[k] = 2.0 * d / n;
    }
    r.loss = pairwise_sum(sq) / n;
    return r;
  }
  if (mask->empty()) throw InvalidInputError("mse_loss: empty mask");
  const double n = static_cast<double>(mask->size());
  std::vector<double> sq(mask->size());
  for (std::size_t j = 0; j < mask->size(); ++j) {
    const std::size_t k = (*mask)[j];
    if (k >= pred.size()) throw IndexError("mse_loss: mask index " + std::to_string(k) + " out of range");
    const double d = pred[k] - target[k];
    sq[j] = d * d;
    r.grad[k] = 2.0 * d / n;
  }
  r.loss = pairwise_sum(sq) / n;
  return r;
}

AdamState AdamState::for_pipeline(const FilterPipeline& fp) {
  const auto n = static_cast<std::size_t>(fp.param_count());
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
}

namespace {

constexpr const char* kWidthNames[4] = {"sigma_x", "sigma_y", "sigma_z", "sigma_r"};

double* width_ptr(SigmaParams& p, int which) {
  switch (which) {
    case 0: return &p.sigma_x;
    case 1: return &p.sigma_y;
    case 2: return &p.sigma_z;
    default: return &p.sigma_r;
  }
}

double grad_value(const SigmaGrad& g, int which) {
  switch (which) {
    case 0: return g.d_sigma_x;
    case 1: return g.d_sigma_y;
    case 2: return g.d_sigma_z;
    default: return g.d_sigma_r;
  }
}

}  // namespace

void adam_step(AdamState& state, FilterPipeline& params, std::span<const SigmaGrad> grads, const TrainConfig& cfg) {
  const auto n = static_cast<std::size_t>(params.param_count());
  if (grads.size() != static_cast<std::size_t>(params.depth()) || state.m.size() != n || state.v.size() != n) {
    throw ShapeMismatchError("adam_step: optimizer state, gradients and pipeline depth disagree");
  }
  for (int layer = 0; layer < params.depth(); ++layer) {
    for (int which = 0; which < 4; ++which) {
      if (!std::isfinite(grad_value(grads[layer], which))) {
        std::ostringstream os;
        os << "adam_step: non-finite gradient for layer " << layer << " " << kWidthNames[which];
        throw NumericError(os.str());
      }
    }
  }

  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  for (int layer = 0; layer < params.depth(); ++layer) {
    SigmaParams& p = params.layer(layer);
    for (int which = 0; which < 4; ++which) {
      const std::size_t j = 4 * static_cast<std::size_t>(layer) + which;
      const double g = grad_value(grads[layer], which);
      state.m[j] = cfg.adam_beta1 * state.m[j] + (1.0 - cfg.adam_beta1) * g;
      state.v[j] = cfg.adam_beta2 * state.v[j] + (1.0 - cfg.adam_beta2) * g * g;
      const double m_hat = state.m[j] / bc1;
      const double v_hat = state.v[j] / bc2;
      const double lr = which == 3 ? cfg.lr_range : cfg.lr_spatial;
      double* w = width_ptr(p, which);
      *w = std::max(*w - lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps), kSigmaFloor);
    }
  }
}

namespace {

// Shared optimisation loop. `step` evaluates the loss for the current
// parameters and returns it together with the pipeline gradients.
template <typename StepFn>
TrainResult optimise(int depth, const TrainConfig& cfg, bool keep_best, StepFn&& step) {
  FilterPipeline fp = FilterPipeline::uniform(depth, initial_params(cfg));
  AdamState adam = AdamState::for_pipeline(fp);
  TrainResult result{fp, {}, std::numeric_limits<double>::infinity(), 0};
  std::vector<double> best_trace;
  best_trace.reserve(static_cast<std::size_t>(cfg.max_iters));

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    auto [loss, grads] = step(fp);
    result.history.push_back({iter, loss, fp.layers()});
    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.best_iteration = iter;
      if (keep_best) result.pipeline = fp;
    }
    best_trace.push_back(result.best_loss);
    if (keep_best && iter >= cfg.convergence_window &&
        best_trace[iter - cfg.convergence_window] - result.best_loss < cfg.convergence_tol) {
      break;
    }
    adam_step(adam, fp, grads, cfg);
  }
  if (!keep_best) result.pipeline = fp;
  return result;
}

}  // namespace

TrainResult train_supervised(const Volume& noisy, const Volume& clean, int depth, const TrainConfig& cfg) {
  validate(cfg);
  require_same_dims(noisy.dims(), clean.dims(), "train_supervised: noisy vs clean");
  require_finite(clean, "train_supervised: clean");
  if (depth < 1) throw InvalidInputError("train_supervised: depth must be >= 1");

  return optimise(depth, cfg, true, [&](const FilterPipeline& fp) {
    const PipelineTape tape = pipeline_forward(noisy, fp);
    LossResult l = mse_loss(tape.output(), clean);
    return std::make_pair(l.loss, pipeline_backward(tape, fp, l.grad).layers);
  });
}

TrainResult train_n2v(const Volume& noisy, int depth, const TrainConfig& cfg) {
  validate(cfg);
  if (depth < 1) throw InvalidInputError("train_n2v: depth must be >= 1");

  Rng rng(cfg.seed);
  // The masked loss is re-sampled every iteration, so its minimum is not a
  // meaningful selection criterion; the final iterate is returned instead.
  return optimise(depth, cfg, false, [&](const FilterPipeline& fp) {
    const N2VSample sample = n2v_perturb(noisy, cfg, rng);
    const PipelineTape tape = pipeline_forward(sample.perturbed, fp);
    LossResult l = mse_loss(tape.output(), noisy, sample.mask);
    return std::make_pair(l.loss, pipeline_backward(tape, fp, l.grad).layers);
  });
}

TrainResult train(const Volume& noisy, const Volume* clean, int depth, const TrainConfig& cfg) {
  if (cfg.mode == TrainMode::supervised) {
    if (clean == nullptr) throw InvalidInputError("supervised training requires a clean target");
    return train_supervised(noisy, *clean, depth, cfg);
  }
  return train_n2v(noisy, depth, cfg);
}

void write_history_csv(std::ostream& os, std::span<const LossReport> history) {
  const std::size_t depth = history.empty() ? 0 : history.front().layers.size();
  os << "iteration,loss";
  for (std::size_t j = 0; j < depth; ++j) {
    for (const char* name : kWidthNames) os << ",layer" << j << "_" << name;
  }
  os << "\n";
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : history) {
    os << r.iteration << "," << r.loss;
    for (const auto& p : r.layers) os << "," << p.sigma_x << "," << p.sigma_y << "," << p.sigma_z << "," << p.sigma_r;
    os << "\n";
  }
  os.precision(old_precision);
}

}  // namespace tbf
