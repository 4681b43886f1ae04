#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace spend {

/// K spectra sharing one wavenumber header row.
struct SpectraTable {
  std::vector<double> wavenumbers;
  std::vector<std::vector<double>> rows;
};

SpectraTable read_spectra_csv(const std::filesystem::path& path);
void write_spectra_csv(const std::filesystem::path& path, const SpectraTable& table);

/// Plain numeric table with a named header.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace spend
