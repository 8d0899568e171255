#pragma once

#include <stdexcept>
#include <string>

namespace hopchain {

// Error taxonomy mapped to CLI exit codes:
//   config_error            -> 1 (usage)
//   parse/integrity/io/not_found -> 2 (data)
//   contract/train          -> 3 (runtime)

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad JSON, bad schema); message carries the line number.
struct parse_error : error {
  using error::error;
};

/// Structurally valid input that violates cross-reference or range invariants.
struct integrity_error : error {
  using error::error;
};

/// Invalid configuration (sizes too small, nonsensical hyperparameters).
struct config_error : error {
  using error::error;
};

/// An API precondition was broken by the caller.
struct contract_error : error {
  using error::error;
};

struct not_found_error : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

/// Training aborted (divergence, non-finite loss).
struct train_error : error {
  using error::error;
};

/// Retrieval cannot proceed (empty candidate pool).
struct retrieval_error : error {
  using error::error;
};

}  // namespace hopchain
