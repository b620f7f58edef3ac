#pragma once

#include <stdexcept>
#include <string>

namespace fedbayes {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// invalid or inconsistent parameters (bad prior, bad shape, bad flag value)
struct param_error : error {
  using error::error;
};

// a value fell outside a mechanism's admissible range
struct range_error : error {
  using error::error;
};

// malformed dataset handed to an estimator (empty, mismatched lengths)
struct input_error : error {
  using error::error;
};

// Renyi order must exceed 1
struct order_error : error {
  using error::error;
};

// privacy curve is unbounded everywhere; no finite budget exists
struct no_budget_error : error {
  using error::error;
};

// file-format violation; message carries row/column context
struct parse_error : error {
  using error::error;
};

// iterative run produced NaN/Inf
struct divergence_error : error {
  using error::error;
};

struct unsupported_error : error {
  using error::error;
};

// harness configuration problem (maps to CLI exit code 2)
struct config_error : error {
  using error::error;
};

}  // namespace fedbayes
