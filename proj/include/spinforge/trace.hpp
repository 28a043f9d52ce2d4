#pragma once

#include <string>
#include <vector>

namespace spinforge {

/// Gridded (x, intensity) samples with axis metadata.
struct SpectrumTrace {
  std::vector<double> x;
  std::vector<double> y;
  std::string x_label = "x";
  std::string x_unit;
  std::string y_label = "intensity";
  std::string y_unit = "arb";

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }

  /// Throws std::invalid_argument unless x is strictly increasing, sizes
  /// agree and every sample is finite.
  void validate() const;

  /// Trapezoidal integral of y over x.
  double integral() const;
};

/// n uniformly spaced points on [start, stop], both ends included.
std::vector<double> linspace(double start, double stop, int n);

}  // namespace spinforge
