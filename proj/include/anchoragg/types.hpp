#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchoragg {

using ClassId = std::size_t;
using WordId = std::uint32_t;

/// Plain word sequence; the form predictors and perturbators operate on.
using WordSeq = std::vector<std::string>;

/// Bad input, configuration, or file content. Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while running (predictor endpoint down, malformed response).
/// Maps to CLI exit code 3.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace anchoragg
