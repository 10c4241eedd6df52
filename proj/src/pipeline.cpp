#include "tbf/pipeline.hpp"

#include <algorithm>
#include <vector>

#include "tbf/errors.hpp"
#include "tbf/parallel.hpp"
#include "tbf/rng.hpp"

namespace tbf {

FilterPipeline::FilterPipeline(std::vector<SigmaParams> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidInputError("pipeline depth must be >= 1");
  for (const auto& p : layers_) validate(p);
}

FilterPipeline FilterPipeline::uniform(int depth, const SigmaParams& init) {
  if (depth < 1) throw InvalidInputError("pipeline depth must be >= 1, got " + std::to_string(depth));
  return FilterPipeline(std::vector<SigmaParams>(static_cast<std::size_t>(depth), init));
}

PipelineTape pipeline_forward(const Volume& x, const FilterPipeline& fp) {
  PipelineTape tape{x, {}};
  tape.caches.reserve(fp.layers().size());
  for (const auto& p : fp.layers()) {
    const Volume& in = tape.caches.empty() ? tape.input : tape.caches.back().output;
    tape.caches.push_back(forward(in, p));
  }
  return tape;
}

Volume pipeline_apply(const Volume& x, const FilterPipeline& fp) {
  Volume current = x;
  for (const auto& p : fp.layers()) current = forward(current, p).output;
  return current;
}

PipelineGrad pipeline_backward(const PipelineTape& tape, const FilterPipeline& fp, const Volume& grad_out) {
  if (tape.caches.size() != fp.layers().size()) {
    throw StaleCacheError("pipeline_backward: tape depth does not match pipeline depth");
  }
  require_same_dims(grad_out.dims(), tape.output().dims(), "pipeline_backward: grad_out vs output");

  PipelineGrad grads{std::vector<SigmaGrad>(fp.layers().size()), grad_out};
  for (std::size_t j = fp.layers().size(); j-- > 0;) {
    BackwardResult r = backward(tape.caches[j], tape.layer_input(j), fp.layers()[j], grads.input);
    grads.layers[j] = r.sigma;
    grads.input = std::move(r.input);
  }
  return grads;
}

namespace {

double& width(FilterPipeline& fp, std::size_t param) {
  SigmaParams& p = fp.layer(static_cast<int>(param / 4));
  switch (param % 4) {
    case 0: return p.sigma_x;
    case 1: return p.sigma_y;
    case 2: return p.sigma_z;
    default: return p.sigma_r;
  }
}

double width_grad(const PipelineGrad& g, std::size_t param) {
  const SigmaGrad& s = g.layers[param / 4];
  switch (param % 4) {
    case 0: return s.d_sigma_x;
    case 1: return s.d_sigma_y;
    case 2: return s.d_sigma_z;
    default: return s.d_sigma_r;
  }
}

double probe_difference(const Volume& plus, const Volume& minus, const Volume& probe, double span) {
  std::vector<double> terms(probe.size());
  for (std::size_t k = 0; k < terms.size(); ++k) terms[k] = probe[k] * (plus[k] - minus[k]);
  return pairwise_sum(terms) / span;
}

}  // namespace

PipelineGradcheckReport pipeline_gradcheck(const Volume& x, const FilterPipeline& fp, double eps, double tol,
                                           std::uint64_t seed) {
  if (!(eps > 0.0)) throw InvalidInputError("pipeline_gradcheck: eps must be > 0");

  Rng rng(seed);
  Volume probe = Volume::filled(x.dims(), 0.0);
  for (double& g : probe.values()) g = uniform_real(rng, -1.0, 1.0);

  const PipelineGrad analytic = pipeline_backward(pipeline_forward(x, fp), fp, probe);

  PipelineGradcheckReport report;
  for (std::size_t param = 0; param < static_cast<std::size_t>(fp.param_count()); ++param) {
    FilterPipeline hi = fp, lo = fp;
    width(hi, param) += eps;
    width(lo, param) -= eps;
    const double numeric =
        probe_difference(pipeline_apply(x, hi), pipeline_apply(x, lo), probe, width(hi, param) - width(lo, param));
    report.max_rel_err_sigma = std::max(report.max_rel_err_sigma, gradient_rel_error(width_grad(analytic, param), numeric));
  }

  Volume shifted = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    shifted[i] = orig + eps;
    const Volume plus = pipeline_apply(shifted, fp);
    shifted[i] = orig - eps;
    const Volume minus = pipeline_apply(shifted, fp);
    shifted[i] = orig;
    const double numeric = probe_difference(plus, minus, probe, (orig + eps) - (orig - eps));
    report.max_rel_err_input = std::max(report.max_rel_err_input, gradient_rel_error(analytic.input[i], numeric));
  }

  report.pass = report.max_rel_err_sigma < tol && report.max_rel_err_input < tol;
  return report;
}

}  // namespace tbf
