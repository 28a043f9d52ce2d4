#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spinforge/fitting.hpp"

namespace spinforge {

Vec3 esr_field_axis(double angle_from_c_deg, double azimuth_deg) {
  const double t = angle_from_c_deg * constants::pi / 180.0;
  const double ph = azimuth_deg * constants::pi / 180.0;
  return Vec3(std::sin(t) * std::cos(ph), std::sin(t) * std::sin(ph), std::cos(t));
}

std::vector<EsrResonance> esr_resonance_fields(const SpinParams& p, double f_mw_ghz, double angle_from_c_deg,
                                               double b_start, double b_stop, const EsrOptions& options) {
  if (!(f_mw_ghz > 0.0) || !std::isfinite(f_mw_ghz)) throw std::invalid_argument("microwave frequency must be positive");
  const double target = f_mw_ghz * 1e3;
  const double t = angle_from_c_deg * constants::pi / 180.0;
  const double ph = options.azimuth_deg * constants::pi / 180.0;
  const Vec3 axis = esr_field_axis(angle_from_c_deg, options.azimuth_deg);
  // B1 is perpendicular to B0 in a cavity; average the two transverse directions.
  const Vec3 e1(std::cos(t) * std::cos(ph), std::cos(t) * std::sin(ph), -std::sin(t));
  const Vec3 e2(-std::sin(ph), std::cos(ph), 0.0);

  const FieldSweep sweep = field_sweep(p, axis, b_start, b_stop, std::max(options.points, 3));
  const SpinOperators ops = product_operators(p);
  const auto V = dipole_operators(p, ops, options.include_nuclear_dipole);
  const int dim = sweep.tracks();
  const std::size_t n = sweep.fields.size();

  std::vector<EsrResonance> found;
  for (int ti = 0; ti < dim; ++ti) {
    for (int tj = ti + 1; tj < dim; ++tj) {
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double d0 = std::abs(sweep.energy(k, tj) - sweep.energy(k, ti)) - target;
        const double d1 = std::abs(sweep.energy(k + 1, tj) - sweep.energy(k + 1, ti)) - target;
        if ((d0 > 0.0) == (d1 > 0.0)) continue;

        double lo = sweep.fields[k];
        double hi = sweep.fields[k + 1];
        std::vector<Eigen::VectorXcd> refs{sweep.state(k, ti), sweep.state(k, tj)};
        const bool left_positive = d0 > 0.0;
        for (int iter = 0; iter < 80 && std::abs(hi - lo) > 1e-13; ++iter) {
          const double mid = 0.5 * (lo + hi);
          auto s = follow_states(p, ops, axis, mid, refs);
          const double d = std::abs(s[1].energy - s[0].energy) - target;
          if ((d > 0.0) == left_positive) {
            lo = mid;
            refs = {s[0].vector, s[1].vector};
          } else {
            hi = mid;
          }
        }
        const double root = 0.5 * (lo + hi);
        const auto s = follow_states(p, ops, axis, root, refs);
        std::complex<double> m1 = 0.0, m2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          const std::complex<double> element = s[0].vector.dot(V[a] * s[1].vector);
          m1 += e1(a) * element;
          m2 += e2(a) * element;
        }
        const double intensity = 0.5 * (std::norm(m1) + std::norm(m2));
        if (intensity < options.intensity_floor) continue;
        found.push_back({root, intensity, ti, tj});
      }
    }
  }

  std::sort(found.begin(), found.end(), [](const EsrResonance& a, const EsrResonance& b) {
    if (a.field != b.field) return a.field < b.field;
    if (a.track_i != b.track_i) return a.track_i < b.track_i;
    return a.track_j < b.track_j;
  });
  std::vector<EsrResonance> merged;
  for (const auto& r : found) {
    if (!merged.empty() && std::abs(r.field - merged.back().field) <= options.merge_tol) {
      merged.back().intensity += r.intensity;
      continue;
    }
    merged.push_back(r);
  }
  return merged;
}

}  // namespace spinforge
