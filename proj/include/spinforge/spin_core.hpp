#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spinforge/constants.hpp"

namespace spinforge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using CMatrix = Eigen::MatrixXcd;

/// Cartesian angular-momentum matrices for one spin, basis ordered m = j, j-1, ..., -j.
struct SpinMatrices {
  CMatrix x;
  CMatrix y;
  CMatrix z;

  const CMatrix& operator[](int axis) const;
};

/// Throws std::invalid_argument unless 2j is a nonnegative integer.
SpinMatrices spin_matrices(double j);

/// Principal values rotated into the lab frame (z = c-axis).
///
/// The three angles are the tilts of the xx, yy and zz principal axes away
/// from their lab counterparts.  Tabulated tensors carry a single tilt, which
/// is applied as one rotation about the lab x-axis.  Several nonzero angles
/// must agree (a rotation about x tilts the y and z axes by the same amount);
/// anything else is ambiguous and rejected, supply an explicit rotation then.
Mat3 rotate_tensor(const std::array<double, 3>& principal, const std::array<double, 3>& angles_deg);

/// R * diag(principal) * R^T for an explicit proper rotation R.
Mat3 rotate_tensor(const std::array<double, 3>& principal, const Mat3& rotation);

/// Rotation about the lab x-axis.
Mat3 rotation_x(double angle_deg);

/// Full spin model for one orbital state.
struct SpinParams {
  double S = 0.5;
  double I = 3.5;
  std::array<double, 3> g_principal{0.0, 0.0, 2.0};
  std::array<double, 3> g_angles{0.0, 0.0, 0.0};      // degrees
  std::array<double, 3> A_principal{0.0, 0.0, 0.0};   // MHz
  std::array<double, 3> A_angles{0.0, 0.0, 0.0};      // degrees
  double gN_muN = constants::vanadium51_nuclear_mhz_per_t;  // MHz/T
  std::optional<Mat3> g_rotation;  // overrides g_angles when set
  std::optional<Mat3> A_rotation;  // overrides A_angles when set

  int electron_dim() const;
  int nuclear_dim() const;
  int dimension() const { return electron_dim() * nuclear_dim(); }

  Mat3 g_tensor() const;
  Mat3 A_tensor() const;

  /// Throws std::invalid_argument on non-half-integer spins, non-finite
  /// values, or angles outside [0, 180].
  void validate() const;
};

/// Static field in the lab frame, tesla.
struct FieldPoint {
  Vec3 b0 = Vec3::Zero();

  static FieldPoint along(const Vec3& axis, double tesla);
};

/// Electron and nuclear spin operators embedded in the product space S (x) I.
struct SpinOperators {
  std::array<CMatrix, 3> S;
  std::array<CMatrix, 3> I;
};

SpinOperators product_operators(const SpinParams& p);

/// H = muB B.g.S - muN gN B.I + S.A.I, in MHz.
CMatrix build_hamiltonian(const SpinParams& p, const FieldPoint& f);
CMatrix build_hamiltonian(const SpinParams& p, const SpinOperators& ops, const FieldPoint& f);

/// dH/dB along a unit axis: the magnetic-moment operator projected on it.
CMatrix field_derivative(const SpinParams& p, const SpinOperators& ops, const Vec3& axis);

struct EigenSystem {
  Eigen::VectorXd levels;  // ascending, MHz
  CMatrix states;          // columns are eigenvectors
  FieldPoint field;

  Eigen::Index size() const { return levels.size(); }
};

/// Diagonalizes a Hermitian matrix; rejects non-Hermitian input.
EigenSystem eigensystem(const CMatrix& H, const FieldPoint& field = {});
EigenSystem eigensystem(const SpinParams& p, const FieldPoint& field);

struct Transition {
  int i = 0;
  int j = 0;
  double freq = 0.0;                // MHz
  double intensity_parallel = 0.0;  // (MHz/T)^2, B1 along c
  double intensity_perp = 0.0;      // (MHz/T)^2, B1 in the basal plane
  double thermal_weight = 1.0;
};

struct TransitionOptions {
  std::optional<double> temperature_k;
  bool include_nuclear_dipole = true;
  /// Sum intensities over degenerate partner levels; one entry per pair of
  /// degenerate clusters.  Only these sums are basis independent.
  bool merge_degenerate = false;
  double degeneracy_tol_mhz = 1e-7;
};

/// Magnetic-dipole operator V = muB g.S - muN gN I, per lab axis, MHz/T.
std::array<CMatrix, 3> dipole_operators(const SpinParams& p, const SpinOperators& ops,
                                        bool include_nuclear = true);

/// |<i| V.b1 |j>|^2 for a real drive direction b1.
double dipole_strength(const EigenSystem& es, const std::array<CMatrix, 3>& dipole, int i, int j,
                       const Vec3& b1);

/// All pairs i < j.
std::vector<Transition> transition_table(const EigenSystem& es, const SpinParams& p,
                                         const TransitionOptions& options = {});

/// Normalized thermal populations of states with the given energies above the
/// lowest one.  Splittings in GHz.
std::vector<double> boltzmann_weights(const std::vector<double>& splittings_ghz, double temperature_k);

/// Levels tracked through a one-dimensional field sweep.
struct FieldSweep {
  Vec3 axis = Vec3::UnitZ();
  std::vector<double> fields;       // tesla along axis
  std::vector<EigenSystem> systems;
  /// level_of[k][t]: index into systems[k].levels of track t.
  std::vector<std::vector<int>> level_of;
  /// Smallest matched overlap |<prev|next>|^2 for each step (size n-1).
  std::vector<double> step_overlap;
  bool coarse_grid = false;  // some step matched with overlap < 0.5

  int tracks() const;
  double energy(std::size_t k, int track) const;
  Eigen::VectorXcd state(std::size_t k, int track) const;
  /// Energy-order index of each track at field k.
  std::vector<int> rank_of(std::size_t k) const;
  double min_overlap() const;
};

FieldSweep field_sweep(const SpinParams& p, const Vec3& axis, double b_start, double b_stop, int n);

/// Eigensystem whose degenerate clusters are resolved along dH/dB, so the
/// basis is the adiabatic continuation in the direction of the sweep.
EigenSystem sweep_eigensystem(const SpinParams& p, const SpinOperators& ops, const Vec3& axis,
                              double b);

/// Follows reference states to a nearby field.  Returns, for each reference,
/// the energy and slope dE/dB of its best-overlap eigenstate.
struct TrackedState {
  double energy = 0.0;
  double slope = 0.0;  // MHz/T
  double overlap = 0.0;
  Eigen::VectorXcd vector;
};
std::vector<TrackedState> follow_states(const SpinParams& p, const SpinOperators& ops,
                                        const Vec3& axis, double b,
                                        const std::vector<Eigen::VectorXcd>& references);

struct ClockTransition {
  int track_i = 0;
  int track_j = 0;
  double field = 0.0;      // T
  double frequency = 0.0;  // MHz
  double curvature = 0.0;  // MHz/T^2
};

struct ClockOptions {
  int points = 401;
  double slope_tol = 100.0;  // MHz/T (0.1 MHz/mT)
  std::optional<std::pair<int, int>> pair;  // tracks; all pairs when empty
  double curvature_step = 1e-5;  // T
};

std::vector<ClockTransition> clock_transitions(const SpinParams& p, const Vec3& axis,
                                               double b_start, double b_stop,
                                               const ClockOptions& options = {});

/// Transition frequency between two followed states and its field derivative.
struct TransitionSlope {
  double frequency = 0.0;
  double slope = 0.0;
};
TransitionSlope transition_slope(const SpinParams& p, const Vec3& axis, double b,
                                 const Eigen::VectorXcd& ref_i, const Eigen::VectorXcd& ref_j);

}  // namespace spinforge
