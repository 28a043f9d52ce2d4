#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "spinforge/spin_core.hpp"

namespace spinforge {

namespace {

using constants::bohr_mhz_per_t;

// Indices [begin, end) of runs of levels closer than tol.
std::vector<std::pair<int, int>> degenerate_clusters(const Eigen::VectorXd& levels, double tol) {
  std::vector<std::pair<int, int>> out;
  const int n = static_cast<int>(levels.size());
  int begin = 0;
  for (int k = 1; k <= n; ++k) {
    if (k == n || levels(k) - levels(k - 1) > tol) {
      out.emplace_back(begin, k);
      begin = k;
    }
  }
  return out;
}

}  // namespace

CMatrix build_hamiltonian(const SpinParams& p, const SpinOperators& ops, const FieldPoint& f) {
  if (!f.b0.allFinite()) throw std::invalid_argument("field must be finite");
  const Mat3 g = p.g_tensor();
  const Mat3 A = p.A_tensor();
  const int dim = p.dimension();
  CMatrix H = CMatrix::Zero(dim, dim);

  // muB B.g.S: effective field seen by the electron spin
  const Vec3 bg = bohr_mhz_per_t * (f.b0.transpose() * g).transpose();
  for (int a = 0; a < 3; ++a) {
    if (bg(a) != 0.0) H += bg(a) * ops.S[a];
    if (f.b0(a) != 0.0) H -= p.gN_muN * f.b0(a) * ops.I[a];
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (A(a, b) != 0.0) H += A(a, b) * (ops.S[a] * ops.I[b]);
  return H;
}

CMatrix build_hamiltonian(const SpinParams& p, const FieldPoint& f) {
  p.validate();
  return build_hamiltonian(p, product_operators(p), f);
}

CMatrix field_derivative(const SpinParams& p, const SpinOperators& ops, const Vec3& axis) {
  const Vec3 u = axis.normalized();
  const Vec3 bg = bohr_mhz_per_t * (u.transpose() * p.g_tensor()).transpose();
  const int dim = p.dimension();
  CMatrix D = CMatrix::Zero(dim, dim);
  for (int a = 0; a < 3; ++a) D += bg(a) * ops.S[a] - p.gN_muN * u(a) * ops.I[a];
  return D;
}

EigenSystem eigensystem(const CMatrix& H, const FieldPoint& field) {
  if (H.rows() != H.cols()) throw std::invalid_argument("Hamiltonian must be square");
  if (!H.allFinite()) throw std::invalid_argument("Hamiltonian must be finite");
  const double scale = H.cwiseAbs().maxCoeff();
  const double asym = (H - H.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(scale, 1e-300) && asym > 0.0)
    throw std::invalid_argument("matrix is not Hermitian");

  Eigen::SelfAdjointEigenSolver<CMatrix> solver(H);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  return EigenSystem{solver.eigenvalues(), solver.eigenvectors(), field};
}

EigenSystem eigensystem(const SpinParams& p, const FieldPoint& field) {
  return eigensystem(build_hamiltonian(p, field), field);
}

std::array<CMatrix, 3> dipole_operators(const SpinParams& p, const SpinOperators& ops,
                                        bool include_nuclear) {
  const Mat3 g = p.g_tensor();
  std::array<CMatrix, 3> V;
  for (int a = 0; a < 3; ++a) {
    V[a] = CMatrix::Zero(p.dimension(), p.dimension());
    for (int b = 0; b < 3; ++b)
      if (g(a, b) != 0.0) V[a] += bohr_mhz_per_t * g(a, b) * ops.S[b];
    if (include_nuclear) V[a] -= p.gN_muN * ops.I[a];
  }
  return V;
}

double dipole_strength(const EigenSystem& es, const std::array<CMatrix, 3>& dipole, int i, int j,
                       const Vec3& b1) {
  const auto vi = es.states.col(i);
  const auto vj = es.states.col(j);
  std::complex<double> m = 0.0;
  for (int a = 0; a < 3; ++a)
    if (b1(a) != 0.0) m += b1(a) * vi.dot(dipole[a] * vj);
  return std::norm(m);
}

std::vector<Transition> transition_table(const EigenSystem& es, const SpinParams& p,
                                         const TransitionOptions& options) {
  const int n = static_cast<int>(es.size());
  if (n != p.dimension() || es.states.rows() != n)
    throw std::invalid_argument("eigensystem dimension does not match spin parameters");

  const SpinOperators ops = product_operators(p);
  const auto V = dipole_operators(p, ops, options.include_nuclear_dipole);
  std::array<CMatrix, 3> M;
  for (int a = 0; a < 3; ++a) M[a] = es.states.adjoint() * V[a] * es.states;

  std::vector<double> population(n, 1.0);
  if (options.temperature_k) {
    std::vector<double> rel(n);
    for (int k = 0; k < n; ++k) rel[k] = (es.levels(k) - es.levels(0)) * 1e-3;
    population = boltzmann_weights(rel, *options.temperature_k);
  }

  std::vector<Transition> table;
  table.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Transition t;
      t.i = i;
      t.j = j;
      t.freq = es.levels(j) - es.levels(i);
      t.intensity_parallel = std::norm(M[2](i, j));
      t.intensity_perp = 0.5 * (std::norm(M[0](i, j)) + std::norm(M[1](i, j)));
      t.thermal_weight = options.temperature_k ? population[i] - population[j] : 1.0;
      table.push_back(t);
    }
  }
  if (!options.merge_degenerate) return table;

  const auto clusters = degenerate_clusters(es.levels, options.degeneracy_tol_mhz);
  std::vector<int> cluster_of(n);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (int k = clusters[c].first; k < clusters[c].second; ++k) cluster_of[k] = static_cast<int>(c);

  std::vector<Transition> merged;
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    for (std::size_t cj = ci + 1; cj < clusters.size(); ++cj) {
      Transition t;
      t.i = clusters[ci].first;
      t.j = clusters[cj].first;
      t.intensity_parallel = 0.0;
      t.intensity_perp = 0.0;
      double wsum = 0.0;
      double fsum = 0.0;
      int count = 0;
      for (const Transition& x : table) {
        if (cluster_of[x.i] != static_cast<int>(ci) || cluster_of[x.j] != static_cast<int>(cj)) continue;
        t.intensity_parallel += x.intensity_parallel;
        t.intensity_perp += x.intensity_perp;
        wsum += x.thermal_weight;
        fsum += x.freq;
        ++count;
      }
      t.freq = fsum / count;
      t.thermal_weight = wsum / count;
      merged.push_back(t);
    }
  }
  return merged;
}

std::vector<double> boltzmann_weights(const std::vector<double>& splittings_ghz, double temperature_k) {
  if (!(temperature_k > 0.0) || !std::isfinite(temperature_k))
    throw std::invalid_argument("temperature must be positive");
  if (splittings_ghz.empty()) return {};
  const double kt = constants::boltzmann_ghz_per_k * temperature_k;
  const double lowest = *std::min_element(splittings_ghz.begin(), splittings_ghz.end());
  std::vector<double> p(splittings_ghz.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(-(splittings_ghz[k] - lowest) / kt);
  const double z = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= z;
  return p;
}

}  // namespace spinforge
