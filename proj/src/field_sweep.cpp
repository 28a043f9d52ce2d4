#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "spinforge/spin_core.hpp"

namespace spinforge {

namespace {

double degeneracy_tol(const Eigen::VectorXd& levels) {
  return 1e-8 * (1.0 + levels.cwiseAbs().maxCoeff());
}

// Greedy assignment on an overlap matrix: repeatedly take the largest
// remaining entry.  Returns col_of[row] and the smallest accepted overlap.
std::pair<std::vector<int>, double> greedy_match(const Eigen::MatrixXd& overlap) {
  const int rows = static_cast<int>(overlap.rows());
  const int cols = static_cast<int>(overlap.cols());
  std::vector<std::tuple<double, int, int>> entries;
  entries.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) entries.emplace_back(overlap(r, c), r, c);
  // descending overlap; ties broken by indices for determinism
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::vector<int> col_of(rows, -1);
  std::vector<bool> used(cols, false);
  double worst = 1.0;
  int assigned = 0;
  for (const auto& [value, r, c] : entries) {
    if (col_of[r] >= 0 || used[c]) continue;
    col_of[r] = c;
    used[c] = true;
    worst = std::min(worst, value);
    if (++assigned == std::min(rows, cols)) break;
  }
  return {col_of, worst};
}

}  // namespace

EigenSystem sweep_eigensystem(const SpinParams& p, const SpinOperators& ops, const Vec3& axis, double b) {
  const FieldPoint f = FieldPoint::along(axis, b);
  EigenSystem es = eigensystem(build_hamiltonian(p, ops, f), f);

  const double tol = degeneracy_tol(es.levels);
  const int n = static_cast<int>(es.size());
  CMatrix D;
  int begin = 0;
  for (int k = 1; k <= n; ++k) {
    if (k < n && es.levels(k) - es.levels(k - 1) <= tol) continue;
    const int width = k - begin;
    if (width > 1) {
      if (D.size() == 0) D = field_derivative(p, ops, axis);
      const CMatrix U = es.states.middleCols(begin, width);
      const CMatrix W = U.adjoint() * D * U;
      Eigen::SelfAdjointEigenSolver<CMatrix> sub(0.5 * (W + W.adjoint()));
      es.states.middleCols(begin, width) = U * sub.eigenvectors();
    }
    begin = k;
  }
  return es;
}

int FieldSweep::tracks() const { return level_of.empty() ? 0 : static_cast<int>(level_of.front().size()); }

double FieldSweep::energy(std::size_t k, int track) const { return systems[k].levels(level_of[k][track]); }

Eigen::VectorXcd FieldSweep::state(std::size_t k, int track) const {
  return systems[k].states.col(level_of[k][track]);
}

std::vector<int> FieldSweep::rank_of(std::size_t k) const {
  std::vector<int> rank(level_of[k].size());
  for (std::size_t t = 0; t < rank.size(); ++t) rank[t] = level_of[k][t];
  return rank;
}

double FieldSweep::min_overlap() const {
  return step_overlap.empty() ? 1.0 : *std::min_element(step_overlap.begin(), step_overlap.end());
}

FieldSweep field_sweep(const SpinParams& p, const Vec3& axis, double b_start, double b_stop, int n) {
  if (n < 2) throw std::invalid_argument("field sweep needs at least two points");
  if (!std::isfinite(b_start) || !std::isfinite(b_stop)) throw std::invalid_argument("field range must be finite");
  if (!(axis.norm() > 0.0)) throw std::invalid_argument("sweep axis must be nonzero");
  p.validate();

  const SpinOperators ops = product_operators(p);
  FieldSweep sweep;
  sweep.axis = axis.normalized();
  sweep.fields.resize(n);
  sweep.systems.reserve(n);
  sweep.level_of.reserve(n);

  const int dim = p.dimension();
  for (int k = 0; k < n; ++k) {
    const double b = b_start + (b_stop - b_start) * k / (n - 1);
    sweep.fields[k] = b;
    sweep.systems.push_back(sweep_eigensystem(p, ops, sweep.axis, b));
    if (k == 0) {
      std::vector<int> identity(dim);
      for (int t = 0; t < dim; ++t) identity[t] = t;
      sweep.level_of.push_back(identity);
      continue;
    }
    const auto& prev = sweep.systems[k - 1];
    const auto& cur = sweep.systems[k];
    CMatrix prev_tracks(dim, dim);
    for (int t = 0; t < dim; ++t) prev_tracks.col(t) = prev.states.col(sweep.level_of[k - 1][t]);
    const Eigen::MatrixXd overlap = (prev_tracks.adjoint() * cur.states).cwiseAbs2();
    auto [col_of, worst] = greedy_match(overlap);
    sweep.level_of.push_back(std::move(col_of));
    sweep.step_overlap.push_back(worst);
    if (worst < 0.5) sweep.coarse_grid = true;
  }
  return sweep;
}

std::vector<TrackedState> follow_states(const SpinParams& p, const SpinOperators& ops, const Vec3& axis,
                                        double b, const std::vector<Eigen::VectorXcd>& references) {
  const EigenSystem es = sweep_eigensystem(p, ops, axis, b);
  const CMatrix D = field_derivative(p, ops, axis);
  CMatrix refs(es.states.rows(), static_cast<Eigen::Index>(references.size()));
  for (std::size_t r = 0; r < references.size(); ++r) refs.col(r) = references[r];
  const Eigen::MatrixXd overlap = (refs.adjoint() * es.states).cwiseAbs2();
  const auto [col_of, worst] = greedy_match(overlap);
  (void)worst;

  std::vector<TrackedState> out(references.size());
  for (std::size_t r = 0; r < references.size(); ++r) {
    const int c = col_of[r];
    out[r].energy = es.levels(c);
    out[r].vector = es.states.col(c);
    out[r].slope = out[r].vector.dot(D * out[r].vector).real();
    out[r].overlap = overlap(static_cast<Eigen::Index>(r), c);
  }
  return out;
}

TransitionSlope transition_slope(const SpinParams& p, const Vec3& axis, double b, const Eigen::VectorXcd& ref_i,
                                 const Eigen::VectorXcd& ref_j) {
  const SpinOperators ops = product_operators(p);
  const auto s = follow_states(p, ops, axis.normalized(), b, {ref_i, ref_j});
  const double diff = s[1].energy - s[0].energy;
  const double sign = diff < 0.0 ? -1.0 : 1.0;
  return {std::abs(diff), sign * (s[1].slope - s[0].slope)};
}

}  // namespace spinforge
