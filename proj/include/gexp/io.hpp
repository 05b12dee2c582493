#pragma once

// CSV export: header row, comma separated, 12 significant digits.

#include <string>
#include <vector>

#include "gexp/dpp.hpp"
#include "gexp/gbsde.hpp"
#include "gexp/gheat.hpp"
#include "gexp/lattice.hpp"

namespace gexp {

/// printf("%.12g") of a double.
std::string format_number(double v);

void write_field_csv(const std::string& path, const ValueField& field);
void write_heat_csv(const std::string& path, const HeatField& field);
void write_paths_csv(const std::string& path, const PathBundle& bundle);
void write_bsde_csv(const std::string& path, const BsdeSolution& sol);

}  // namespace gexp
