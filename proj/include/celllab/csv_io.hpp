#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "celllab/cellmodel.hpp"
#include "celllab/eis.hpp"

namespace celllab::io {

// cycle,c_rate,charge_mAh,discharge_mAh,ce with six decimals
void write_cycling_csv(std::ostream& os, const cell::CyclingRecord& record);
cell::CyclingRecord read_cycling_csv(std::istream& is, const std::string& origin = "<stream>");

// freq_hz,re_z_ohm,im_z_ohm with six significant digits
void write_spectrum_csv(std::ostream& os, const eis::Spectrum& spectrum);
/// Throws ParseError on a bad header, a malformed row, no rows, or a
/// sweep that fails Spectrum::validate().
eis::Spectrum read_spectrum_csv(std::istream& is, const std::string& origin = "<stream>");

struct FitRow {
  int cell_id = -1;
  int trigger = 0;
  eis::FitResult fit;
};

// cell_id,trigger,r1,r2,c2,r3,c3,r4,c4,residual,converged
void write_fits_header(std::ostream& os);
void write_fit_row(std::ostream& os, const FitRow& row);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary name so readers never see half a file.
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace celllab::io
