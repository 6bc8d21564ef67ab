#pragma once

// Regret-curve export: a CSV with one (mean, lo, hi) column group per policy,
// and a standalone SVG chart with shaded bootstrap bands.

#include "nlps/harness.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace nlps::plot {

struct NamedCurve {
  std::string label;
  harness::AggregateCurve curve;
};

// Header "step,<label>_mean,<label>_lo,<label>_hi,..." then one row per step
// t = 2..T. Values are printed with round-trip precision. LF line endings.
std::string to_csv(const std::vector<NamedCurve>& curves);
std::string to_svg(const std::vector<NamedCurve>& curves, const std::string& title);

// Writes <prefix>.csv and <prefix>.svg.
void write_plot(const std::filesystem::path& prefix, const std::vector<NamedCurve>& curves,
                const std::string& title);

}  // namespace nlps::plot
