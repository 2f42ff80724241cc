#pragma once

#include <stdexcept>
#include <string>

namespace cascade_recon {

// Malformed text input (edge lists, cascade files, mask specs, configs).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric value outside its admissible range (coupling not in [0,1], ...).
class RangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A dataset that cannot be used for fitting (hidden sources, horizon mismatch).
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A brute-force routine asked to enumerate more states than it allows.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cascade_recon
