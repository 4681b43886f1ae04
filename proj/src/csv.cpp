#include "spend/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spend/cube.hpp"

namespace spend {

namespace {

std::vector<double> parse_row(const std::string& line, const std::filesystem::path& path,
                              std::size_t lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    if (b == std::string::npos) throw Error(path.string() + ":" + std::to_string(lineno) + ": empty cell");
    cell = cell.substr(b, e - b + 1);
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

SpectraTable read_spectra_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  SpectraTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto row = parse_row(line, path, lineno);
    if (t.wavenumbers.empty()) {
      t.wavenumbers = std::move(row);
    } else {
      if (row.size() != t.wavenumbers.size()) {
        throw Error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.wavenumbers.size()) + " columns, got " +
                    std::to_string(row.size()));
      }
      t.rows.push_back(std::move(row));
    }
  }
  if (t.wavenumbers.empty()) throw Error(path.string() + ": missing wavenumber header row");
  return t;
}

void write_spectra_csv(const std::filesystem::path& path, const SpectraTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  auto emit = [&](const std::vector<double>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  };
  emit(table.wavenumbers);
  for (const auto& r : table.rows) emit(r);
  if (!out) throw Error("I/O failure writing " + path.string());
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
    out << '\n';
  }
  if (!out) throw Error("I/O failure writing " + path.string());
}

}  // namespace spend
