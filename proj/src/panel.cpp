#include "fedbayes/panel.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "fedbayes/bern_est.hpp"
#include "fedbayes/errors.hpp"

namespace fedbayes {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

BinaryPanel parse_binary_panel(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw parse_error("panel: empty input");
  const std::vector<std::string> header = split_csv_line(strip_cr(line));
  if (header.size() < 2 || header[0] != "id")
    throw parse_error("panel: header must be id,r1,...,rk");

  BinaryPanel panel;
  panel.rounds = static_cast<std::int64_t>(header.size()) - 1;

  std::int64_t row = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw parse_error("panel: row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    panel.ids.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string& cell = fields[c];
      if (cell == "0")
        panel.cells.push_back(0.0);
      else if (cell == "1")
        panel.cells.push_back(1.0);
      else
        throw parse_error("panel: non-binary cell \"" + cell + "\" at row " +
                          std::to_string(row) + ", column " + header[c]);
    }
  }
  panel.units = row;
  if (panel.units < 1) throw parse_error("panel: no data rows");
  return panel;
}

BinaryPanel load_binary_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("panel: cannot open " + path);
  return parse_binary_panel(in);
}

PanelCvResult panel_cv(const BinaryPanel& panel) {
  if (panel.units < 3) throw input_error("panel cv: needs at least 3 units");
  if (panel.rounds < 2) throw input_error("panel cv: needs at least 2 rounds");

  PanelCvResult out;
  out.units = panel.units;
  out.rounds = panel.rounds;

  const double inv_train = 1.0 / static_cast<double>(panel.rounds - 1);
  for (std::int64_t held = 0; held < panel.rounds; ++held) {
    std::vector<double> rates(static_cast<std::size_t>(panel.units));
    for (std::int64_t u = 0; u < panel.units; ++u) {
      double total = 0.0;
      for (std::int64_t r = 0; r < panel.rounds; ++r)
        if (r != held) total += panel.at(u, r);
      rates[static_cast<std::size_t>(u)] = total * inv_train;
    }

    std::vector<double> estimates(static_cast<std::size_t>(panel.units));
    double local_sum = 0.0;
    double pers_sum = 0.0;
    for (std::int64_t u = 0; u < panel.units; ++u) {
      const std::size_t s = static_cast<std::size_t>(u);
      const MomentEstimates mom = moment_weights(rates, panel.rounds - 1, u);
      estimates[s] = std::clamp(
          mom.a_hat_i * rates[s] + (1.0 - mom.a_hat_i) * mom.mu_hat_i, 0.0, 1.0);
      const double bit = panel.at(u, held);
      const double local_err = rates[s] - bit;
      const double pers_err = estimates[s] - bit;
      local_sum += local_err * local_err;
      pers_sum += pers_err * pers_err;
    }
    out.fold_local.push_back(local_sum / static_cast<double>(panel.units));
    out.fold_personalized.push_back(pers_sum / static_cast<double>(panel.units));
    out.fold_rates.push_back(std::move(rates));
    out.fold_estimates.push_back(std::move(estimates));
  }

  double local_total = 0.0;
  double pers_total = 0.0;
  for (std::int64_t r = 0; r < panel.rounds; ++r) {
    local_total += out.fold_local[static_cast<std::size_t>(r)];
    pers_total += out.fold_personalized[static_cast<std::size_t>(r)];
  }
  out.local_mse = local_total / static_cast<double>(panel.rounds);
  out.personalized_mse = pers_total / static_cast<double>(panel.rounds);
  if (out.local_mse > 0.0)
    out.gain_pct = 100.0 * (1.0 - out.personalized_mse / out.local_mse);
  return out;
}

}  // namespace fedbayes
