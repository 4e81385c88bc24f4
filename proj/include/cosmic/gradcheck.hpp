#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cosmic/dataset.hpp"
#include "cosmic/model.hpp"

namespace cosmic {

// Relative error used by every finite-difference comparison:
// |a − n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
// to roundoff from registering as large relative errors.
inline constexpr double kRelErrorFloor = 1e-6;
double relative_error(double analytic, double numeric);

struct GradCheckConfig {
  std::uint64_t seed = 7;
  ModelDims dims{.utterance = 12, .commonsense = 10, .hidden = 8, .classes = 3};
  std::size_t utterances = 3;
  std::size_t speakers = 2;
  double step = 1e-5;
  double tolerance = 1e-4;
  Mode mode = Mode::unidirectional;
  Ablation ablation;
};

struct TensorCheck {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  double seconds = 0.0;
  bool passed = false;
};

// Gaussian features, random speakers (every participant speaks at least once
// when utterances ≥ speakers) and uniform labels.
Conversation random_conversation(const ModelDims& dims, std::size_t utterances, std::size_t speakers,
                                 std::mt19937_64& rng);

// Compares backprop gradients of the summed cross-entropy against central
// differences for every parameter element. Passing means every relative
// error is strictly below `tolerance`.
GradCheckReport check_gradients(CosmicParams& params, const Conversation& conv, double step, double tolerance,
                                const Ablation& ablation = {});

GradCheckReport run_gradcheck(const GradCheckConfig& config);

}  // namespace cosmic
