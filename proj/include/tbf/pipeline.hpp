#pragma once

#include <cstdint>
#include <vector>

#include "tbf/bilateral.hpp"
#include "tbf/volume.hpp"

namespace tbf {

/// Ordered stack of independently parameterised bilateral filter layers.
class FilterPipeline {
 public:
  // Throws InvalidInputError for an empty list or an invalid layer.
  explicit FilterPipeline(std::vector<SigmaParams> layers);

  // `depth` copies of `init`.
  static FilterPipeline uniform(int depth, const SigmaParams& init);

  int depth() const { return static_cast<int>(layers_.size()); }
  // Four trainable widths per layer.
  int param_count() const { return 4 * depth(); }

  const std::vector<SigmaParams>& layers() const { return layers_; }
  const SigmaParams& layer(int i) const { return layers_.at(i); }
  SigmaParams& layer(int i) { return layers_.at(i); }

  bool operator==(const FilterPipeline&) const = default;

 private:
  std::vector<SigmaParams> layers_;
};

inline int param_count(const FilterPipeline& fp) { return fp.param_count(); }

/// Reverse-mode record of one pipeline evaluation. caches[j] holds layer j's
/// forward pass; its input is `input` for j == 0 and caches[j - 1].output
/// otherwise.
struct PipelineTape {
  Volume input;
  std::vector<ForwardCache> caches;

  const Volume& output() const { return caches.back().output; }
  const Volume& layer_input(std::size_t j) const { return j == 0 ? input : caches[j - 1].output; }
};

struct PipelineGrad {
  std::vector<SigmaGrad> layers;
  Volume input;
};

PipelineTape pipeline_forward(const Volume& x, const FilterPipeline& fp);

// Output only, without retaining the intermediate caches.
Volume pipeline_apply(const Volume& x, const FilterPipeline& fp);

/// Walks the layers in reverse, feeding each layer's input gradient upstream.
/// Throws StaleCacheError if `fp` no longer matches the parameters on the tape.
PipelineGrad pipeline_backward(const PipelineTape& tape, const FilterPipeline& fp, const Volume& grad_out);

struct PipelineGradcheckReport {
  double max_rel_err_sigma = 0.0;
  double max_rel_err_input = 0.0;
  bool pass = false;
};

// End-to-end finite-difference check of every width of every layer and of the
// pipeline input, using the same probe loss and error measure as gradcheck().
PipelineGradcheckReport pipeline_gradcheck(const Volume& x, const FilterPipeline& fp, double eps, double tol,
                                           std::uint64_t seed = 0);

}  // namespace tbf
