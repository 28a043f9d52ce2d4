#include <cmath>
#include <stdexcept>

#include "spinforge/trace.hpp"

namespace spinforge {

void SpectrumTrace::validate() const {
  if (x.size() != y.size()) throw std::invalid_argument("trace x and y sizes differ");
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k]) || !std::isfinite(y[k])) throw std::invalid_argument("trace holds non-finite samples");
    if (k > 0 && !(x[k] > x[k - 1])) throw std::invalid_argument("trace x must be strictly increasing");
  }
}

double SpectrumTrace::integral() const {
  double sum = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) sum += 0.5 * (y[k] + y[k - 1]) * (x[k] - x[k - 1]);
  return sum;
}

std::vector<double> linspace(double start, double stop, int n) {
  if (n < 1) throw std::invalid_argument("linspace needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = start;
    return out;
  }
  const double step = (stop - start) / (n - 1);
  for (int k = 0; k < n; ++k) out[k] = start + k * step;
  out.back() = stop;
  return out;
}

}  // namespace spinforge
