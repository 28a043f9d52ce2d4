#include <cmath>
#include <stdexcept>

#include "spinforge/spin_core.hpp"

namespace spinforge {

namespace {

struct PairState {
  double frequency;
  double slope;
  Eigen::VectorXcd vi;
  Eigen::VectorXcd vj;
};

PairState evaluate_pair(const SpinParams& p, const SpinOperators& ops, const Vec3& axis, double b,
                        const Eigen::VectorXcd& ri, const Eigen::VectorXcd& rj) {
  auto s = follow_states(p, ops, axis, b, {ri, rj});
  const double diff = s[1].energy - s[0].energy;
  const double sign = diff < 0.0 ? -1.0 : 1.0;
  return {std::abs(diff), sign * (s[1].slope - s[0].slope), std::move(s[0].vector), std::move(s[1].vector)};
}

}  // namespace

std::vector<ClockTransition> clock_transitions(const SpinParams& p, const Vec3& axis, double b_start,
                                               double b_stop, const ClockOptions& options) {
  if (!std::isfinite(b_start) || !std::isfinite(b_stop)) throw std::invalid_argument("field range must be finite");
  if (b_start == b_stop) throw std::invalid_argument("field range is empty");
  const FieldSweep sweep = field_sweep(p, axis, b_start, b_stop, std::max(options.points, 3));
  const SpinOperators ops = product_operators(p);
  const CMatrix D = field_derivative(p, ops, sweep.axis);

  const std::size_t n = sweep.fields.size();
  const int dim = sweep.tracks();

  // slope[k][t] = dE/dB of track t at field k (Hellmann-Feynman)
  std::vector<std::vector<double>> slope(n, std::vector<double>(dim));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& es = sweep.systems[k];
    const Eigen::VectorXd diag = (es.states.adjoint() * D * es.states).diagonal().real();
    for (int t = 0; t < dim; ++t) slope[k][t] = diag(sweep.level_of[k][t]);
  }

  double scale = 1.0;
  for (std::size_t k = 0; k < n; ++k) scale = std::max(scale, sweep.systems[k].levels.cwiseAbs().maxCoeff());
  const double slope_noise = 1e-9 * constants::bohr_mhz_per_t;
  const double freq_floor = 1e-9 * scale;

  std::vector<ClockTransition> found;
  for (int ti = 0; ti < dim; ++ti) {
    for (int tj = ti + 1; tj < dim; ++tj) {
      if (options.pair) {
        const auto [a, b] = *options.pair;
        if (!((a == ti && b == tj) || (a == tj && b == ti))) continue;
      }
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double e0 = sweep.energy(k, tj) - sweep.energy(k, ti);
        const double e1 = sweep.energy(k + 1, tj) - sweep.energy(k + 1, ti);
        if (std::abs(e0) < freq_floor || std::abs(e1) < freq_floor) continue;
        if ((e0 < 0.0) != (e1 < 0.0)) continue;  // levels cross, f has a kink not an extremum
        const double sgn = e0 < 0.0 ? -1.0 : 1.0;
        const double d0 = sgn * (slope[k][tj] - slope[k][ti]);
        const double d1 = sgn * (slope[k + 1][tj] - slope[k + 1][ti]);
        if (std::abs(d0) < slope_noise || std::abs(d1) < slope_noise) continue;
        if ((d0 < 0.0) == (d1 < 0.0)) continue;

        double lo = sweep.fields[k];
        double hi = sweep.fields[k + 1];
        Eigen::VectorXcd ri = sweep.state(k, ti);
        Eigen::VectorXcd rj = sweep.state(k, tj);
        const bool left_negative = d0 < 0.0;
        for (int iter = 0; iter < 80 && std::abs(hi - lo) > 1e-13; ++iter) {
          const double mid = 0.5 * (lo + hi);
          PairState m = evaluate_pair(p, ops, sweep.axis, mid, ri, rj);
          if ((m.slope < 0.0) == left_negative) {
            lo = mid;
            ri = std::move(m.vi);
            rj = std::move(m.vj);
          } else {
            hi = mid;
          }
        }
        const double root = 0.5 * (lo + hi);
        const PairState at = evaluate_pair(p, ops, sweep.axis, root, ri, rj);
        if (std::abs(at.slope) >= options.slope_tol || at.frequency < freq_floor) continue;

        const double h = options.curvature_step;
        const PairState plus = evaluate_pair(p, ops, sweep.axis, root + h, at.vi, at.vj);
        const PairState minus = evaluate_pair(p, ops, sweep.axis, root - h, at.vi, at.vj);
        ClockTransition c;
        c.track_i = ti;
        c.track_j = tj;
        c.field = root;
        c.frequency = at.frequency;
        c.curvature = (plus.frequency - 2.0 * at.frequency + minus.frequency) / (h * h);
        found.push_back(c);
      }
    }
  }
  return found;
}

}  // namespace spinforge
