#pragma once

#include <string>

#include "eyetrans/layers.hpp"

namespace eyetrans {

struct GradCheckSummary {
  nn::GradCheckReport classifier;
  nn::GradCheckReport seq2seq;
  double max_relative_error = 0;
  double threshold = 1e-3;
  double seconds = 0;
  bool pass = false;

  std::string text() const;
};

// Finite-difference check of both task models in 64-bit floats: width 8,
// two encoder (and decoder) layers, 6 tokens, 2 switches. With `mutate`
// the matmul backward rule is sign-flipped for the duration of the run.
GradCheckSummary run_gradcheck(bool mutate = false, double threshold = 1e-3, double eps = 3e-4,
                               std::size_t coords_per_param = 16);

}  // namespace eyetrans
