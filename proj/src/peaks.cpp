#include <algorithm>
#include <cmath>

#include "spinforge/fitting.hpp"

namespace spinforge {

namespace {

// x where y crosses `level` walking from index `from` in direction `dir`.
std::optional<double> crossing(const SpectrumTrace& s, std::size_t from, int dir, double level) {
  std::size_t k = from;
  while (true) {
    if (dir < 0 && k == 0) return std::nullopt;
    const std::size_t next = dir < 0 ? k - 1 : k + 1;
    if (next >= s.size()) return std::nullopt;
    if (s.y[next] <= level) {
      const double t = (s.y[k] - level) / (s.y[k] - s.y[next]);
      return s.x[k] + t * (s.x[next] - s.x[k]);
    }
    k = next;
  }
}

double base_level(const SpectrumTrace& s, std::size_t peak, int dir) {
  double lowest = s.y[peak];
  std::size_t k = peak;
  while (true) {
    if (dir < 0 && k == 0) break;
    const std::size_t next = dir < 0 ? k - 1 : k + 1;
    if (next >= s.size() || s.y[next] > s.y[peak]) break;
    lowest = std::min(lowest, s.y[next]);
    k = next;
  }
  return lowest;
}

}  // namespace

std::vector<Peak> find_peaks(const SpectrumTrace& s, double min_prominence, double sweep) {
  std::vector<Peak> out;
  const std::size_t n = s.size();
  if (n < 3 || s.y.size() != n) return out;

  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(s.y[i] > s.y[i - 1])) continue;
    std::size_t j = i;
    while (j + 1 < n && s.y[j + 1] == s.y[i]) ++j;
    if (j + 1 >= n || !(s.y[j + 1] < s.y[i])) {
      i = j;
      continue;
    }
    const bool plateau = j > i;

    const double prominence = s.y[i] - std::max(base_level(s, i, -1), base_level(s, j, +1));
    if (prominence < min_prominence || prominence <= 0.0) {
      i = j;
      continue;
    }

    Peak p;
    p.sweep = sweep;
    p.position = s.x[i];
    p.height = s.y[i];
    p.prominence = prominence;
    const double step = 0.5 * (s.x[i + 1] - s.x[i - 1]);
    if (!plateau) {
      double a = s.y[i - 1], b = s.y[i], c = s.y[i + 1];
      const bool logscale = a > 0.0 && b > 0.0 && c > 0.0;
      if (logscale) {
        a = std::log(a);
        b = std::log(b);
        c = std::log(c);
      }
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) {
        const double delta = 0.5 * (a - c) / denom;
        p.position = s.x[i] + delta * step;
        const double top = b - 0.25 * (a - c) * delta;
        p.height = logscale ? std::exp(top) : top;
      }
    }

    const double half = p.height - 0.5 * prominence;
    const auto left = crossing(s, i, -1, half);
    const auto right = crossing(s, j, +1, half);
    if (left && right) p.width = *right - *left;
    else if (left) p.width = 2.0 * (p.position - *left);
    else if (right) p.width = 2.0 * (*right - p.position);
    else p.width = step;
    p.width = std::max(p.width, 1e-300);
    p.uncertainty = step / std::sqrt(12.0);
    out.push_back(p);
    i = j;
  }
  return out;
}

PeakSet extract_peaks(const SpectrumMap& map, double min_prominence) {
  PeakSet set;
  for (std::size_t k = 0; k < map.slices.size(); ++k) {
    const double coord = k < map.sweep.size() ? map.sweep[k] : static_cast<double>(k);
    auto found = find_peaks(map.slices[k], min_prominence, coord);
    set.peaks.insert(set.peaks.end(), found.begin(), found.end());
  }
  return set;
}

}  // namespace spinforge
