#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fedbayes {

// Rectangular 0/1 outcome table: one row per unit, one column per round.
// Cells are stored row-major, so unit u's history is contiguous.
struct BinaryPanel {
  std::vector<std::string> ids;
  std::int64_t units = 0;
  std::int64_t rounds = 0;
  std::vector<double> cells;

  double at(std::int64_t unit, std::int64_t round) const {
    return cells[static_cast<std::size_t>(unit * rounds + round)];
  }
};

// Reads "id,r1,...,rk" header followed by one row per unit with 0/1 cells.
// Ragged rows and non-binary cells raise parse_error naming the row (and
// column) at fault; CRLF line endings and trailing blank lines are accepted.
BinaryPanel parse_binary_panel(std::istream& in);
BinaryPanel load_binary_panel(const std::string& path);

// Leave-one-round-out cross validation. For each held-out round the per-unit
// training rate is the mean of the remaining rounds; the personalized
// estimate shrinks that rate toward the leave-self-out population mean with
// the moment-matched weight. Errors are squared distances to the held-out
// bit, averaged over units, then over folds.
struct PanelCvResult {
  std::int64_t units = 0;
  std::int64_t rounds = 0;
  double local_mse = 0.0;
  double personalized_mse = 0.0;
  double gain_pct = 0.0;
  std::vector<double> fold_local;
  std::vector<double> fold_personalized;
  // training-side quantities per fold, exposed so isolation from the
  // held-out column is directly checkable
  std::vector<std::vector<double>> fold_rates;
  std::vector<std::vector<double>> fold_estimates;
};

PanelCvResult panel_cv(const BinaryPanel& panel);

}  // namespace fedbayes
