#include "celllab/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "celllab/errors.hpp"

namespace celllab::io {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string chomp(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

double parse_double(const std::string& s, const std::string& origin, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(origin + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace

void write_cycling_csv(std::ostream& os, const cell::CyclingRecord& record) {
  os << "cycle,c_rate,charge_mAh,discharge_mAh,ce\n";
  for (const auto& r : record.rows) {
    os << r.cycle << ',' << fmt("%.6f", r.c_rate) << ',' << fmt("%.6f", r.charge_mah) << ','
       << fmt("%.6f", r.discharge_mah) << ',' << fmt("%.6f", r.ce) << '\n';
  }
}

cell::CyclingRecord read_cycling_csv(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line) || chomp(line) != "cycle,c_rate,charge_mAh,discharge_mAh,ce")
    throw ParseError(origin + ": missing cycling header");
  cell::CyclingRecord rec;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    line = chomp(line);
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 5) throw ParseError(origin + ":" + std::to_string(n) + ": expected 5 fields");
    cell::CycleRow row;
    row.cycle = static_cast<int>(parse_double(f[0], origin, n));
    row.c_rate = parse_double(f[1], origin, n);
    row.charge_mah = parse_double(f[2], origin, n);
    row.discharge_mah = parse_double(f[3], origin, n);
    row.ce = parse_double(f[4], origin, n);
    rec.rows.push_back(row);
  }
  return rec;
}

void write_spectrum_csv(std::ostream& os, const eis::Spectrum& spectrum) {
  os << "freq_hz,re_z_ohm,im_z_ohm\n";
  for (const auto& p : spectrum.points)
    os << fmt("%.6g", p.freq_hz) << ',' << fmt("%.6g", p.re_ohm) << ',' << fmt("%.6g", p.im_ohm) << '\n';
}

eis::Spectrum read_spectrum_csv(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(origin + ": empty file");
  if (chomp(line) != "freq_hz,re_z_ohm,im_z_ohm") throw ParseError(origin + ": missing spectrum header");
  eis::Spectrum s;
  int n = 1;
  while (std::getline(is, line)) {
    ++n;
    line = chomp(line);
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 3) throw ParseError(origin + ":" + std::to_string(n) + ": expected 3 fields");
    s.points.push_back({parse_double(f[0], origin, n), parse_double(f[1], origin, n),
                        parse_double(f[2], origin, n)});
  }
  if (s.points.empty()) throw ParseError(origin + ": no data rows");
  try {
    s.validate();
  } catch (const Error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  return s;
}

void write_fits_header(std::ostream& os) { os << "cell_id,trigger,r1,r2,c2,r3,c3,r4,c4,residual,converged\n"; }

void write_fit_row(std::ostream& os, const FitRow& row) {
  os << row.cell_id << ',' << row.trigger;
  for (double v : row.fit.params.to_array()) os << ',' << fmt("%.6g", v);
  os << ',' << fmt("%.6g", row.fit.residual_norm) << ',' << (row.fit.converged ? 1 : 0) << '\n';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace celllab::io
