#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgc/model.hpp"

namespace kgc {

struct TensorGradientError {
  std::string name;
  // ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-6).
  double relative_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  double max_abs_error = 0.0;
  std::size_t parameters_checked = 0;
  std::vector<TensorGradientError> tensors;
};

// Central finite differences in double precision over every parameter of a
// tiny model (model_dim <= 16, layers <= 2) on a seeded 8-entity graph.
// Dropout is disabled for the check.
GradientCheckReport gradient_check(const EncoderConfig& enc, std::uint64_t seed, double step = 1e-4);

// Same comparison for an arbitrary double model and batch.
GradientCheckReport compare_gradients(const ModelParameters<double>& params, std::span<const InputSequence> batch,
                                      std::span<const EntityId> gold, double step);

}  // namespace kgc
