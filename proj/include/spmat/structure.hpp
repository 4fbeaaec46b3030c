#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace spmat {

using Vec3 = std::array<double, 3>;
/// Rows are the lattice vectors a, b, c in Angstrom.
using Mat3 = std::array<Vec3, 3>;

struct Site {
  Vec3 frac{};
  int z = 0;

  bool operator==(const Site &) const = default;
};

struct CrystalStructure {
  Mat3 lattice{};
  std::vector<Site> sites;
  std::string id;

  bool operator==(const CrystalStructure &) const = default;
};

/// Cell lengths in Angstrom, angles in degrees.
struct CellParameters {
  double a = 0, b = 0, c = 0;
  double alpha = 90, beta = 90, gamma = 90;
};

double determinant(const Mat3 &m);
double volume(const Mat3 &lattice);

/// Standard crystallographic setting: a along x, b in the x-y plane.
Mat3 lattice_from_parameters(const CellParameters &p);
CellParameters cell_parameters(const Mat3 &lattice);

/// Floor-based wrap into [0, 1).
double wrap_fraction(double f);

/// Throws InvalidStructure when any structure invariant is violated.
void validate(const CrystalStructure &s);

/// Parses the P1 CIF subset. `id` overrides the data block name when non-empty.
CrystalStructure parse_cif(std::string_view text, std::string id = {});
CrystalStructure read_cif(const std::filesystem::path &path);

/// Emits the CIF subset understood by parse_cif.
std::string write_cif(const CrystalStructure &s);
void write_cif_file(const std::filesystem::path &path, const CrystalStructure &s);

} // namespace spmat
