#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "spinforge/lineshape.hpp"

namespace spinforge {

namespace {

// All occupation vectors of n sites over k isotopes, lexicographic order.
void compositions(int n, int k, std::vector<int>& current, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == k - 1) {
    current.push_back(n);
    out.push_back(current);
    current.pop_back();
    return;
  }
  for (int c = 0; c <= n; ++c) {
    current.push_back(c);
    compositions(n - c, k, current, out);
    current.pop_back();
  }
}

struct ShellTerm {
  std::vector<int> occupation;
  int mass_units = 0;
  double probability = 0.0;
};

std::vector<ShellTerm> shell_terms(const IsotopeShell& shell) {
  std::vector<std::vector<int>> occ;
  std::vector<int> scratch;
  const int k = static_cast<int>(shell.isotopes.size());
  compositions(shell.n_sites, k, scratch, occ);

  std::vector<ShellTerm> terms;
  terms.reserve(occ.size());
  for (auto& o : occ) {
    double logp = std::lgamma(shell.n_sites + 1.0);
    bool impossible = false;
    int mass = 0;
    for (int i = 0; i < k; ++i) {
      logp -= std::lgamma(o[i] + 1.0);
      if (o[i] > 0) {
        if (shell.isotopes[i].abundance <= 0.0) impossible = true;
        else logp += o[i] * std::log(shell.isotopes[i].abundance);
      }
      mass += o[i] * shell.isotopes[i].mass_offset_u;
    }
    terms.push_back({std::move(o), mass, impossible ? 0.0 : std::exp(logp)});
  }
  return terms;
}

}  // namespace

void IsotopeShell::validate() const {
  if (n_sites < 0) throw std::invalid_argument("shell " + element + " has a negative site count");
  if (isotopes.empty()) throw std::invalid_argument("shell " + element + " lists no isotopes");
  double sum = 0.0;
  for (const auto& iso : isotopes) {
    if (!(iso.abundance >= 0.0 && iso.abundance <= 1.0))
      throw std::invalid_argument("abundance of " + iso.label + " outside [0, 1]");
    sum += iso.abundance;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("abundances of shell " + element + " sum to " + std::to_string(sum) + ", not 1");
  if (!std::isfinite(shift_per_u)) throw std::invalid_argument("shift per mass unit must be finite");
}

std::vector<IsotopeShell> sic_silicon_site_shells(double carbon_shift_per_u, double silicon_shift_per_u) {
  IsotopeShell carbon{"C", 4, {{"12C", 0, 1.0 - 0.0107}, {"13C", 1, 0.0107}}, carbon_shift_per_u};
  IsotopeShell silicon{"Si",
                       12,
                       {{"28Si", 0, 1.0 - 0.04685 - 0.03092}, {"29Si", 1, 0.04685}, {"30Si", 2, 0.03092}},
                       silicon_shift_per_u};
  return {carbon, silicon};
}

ConfigurationSet configuration_distribution(const std::vector<IsotopeShell>& shells, double prob_floor) {
  if (!(prob_floor >= 0.0 && prob_floor < 1.0)) throw std::invalid_argument("probability floor must lie in [0, 1)");
  for (const auto& s : shells) s.validate();

  std::vector<std::vector<ShellTerm>> per_shell;
  for (const auto& s : shells) per_shell.push_back(shell_terms(s));

  ConfigurationSet set;
  const std::size_t ns = shells.size();
  std::vector<std::size_t> idx(ns, 0);
  while (true) {
    IsotopeConfig c;
    c.probability = 1.0;
    for (std::size_t s = 0; s < ns; ++s) {
      const ShellTerm& t = per_shell[s][idx[s]];
      c.occupation.push_back(t.occupation);
      c.mass_units.push_back(t.mass_units);
      c.total_shift += shells[s].shift_per_u * t.mass_units;
      c.probability *= t.probability;
    }
    if (c.probability >= prob_floor && c.probability > 0.0) {
      set.retained_probability += c.probability;
      set.configs.push_back(std::move(c));
    } else {
      set.pruned_probability += c.probability;
    }
    // odometer, last shell fastest
    std::size_t s = ns;
    while (s > 0) {
      --s;
      if (++idx[s] < per_shell[s].size()) break;
      idx[s] = 0;
      if (s == 0) return set;
    }
    if (ns == 0) return set;
  }
}

double profile_value(Profile profile, double x, double fwhm, double voigt_eta) {
  const double gauss_sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double gamma = 0.5 * fwhm;
  const double g = std::exp(-0.5 * x * x / (gauss_sigma * gauss_sigma)) / (gauss_sigma * std::sqrt(2.0 * constants::pi));
  const double l = gamma / (constants::pi * (x * x + gamma * gamma));
  switch (profile) {
    case Profile::gaussian: return g;
    case Profile::lorentzian: return l;
    case Profile::pseudo_voigt: return voigt_eta * l + (1.0 - voigt_eta) * g;
  }
  return g;
}

std::vector<double> evaluate_lineshape(const ConfigurationSet& set, const std::vector<double>& shifts_per_u,
                                       double f0_ghz, double fwhm_ghz, const std::vector<double>& grid_ghz,
                                       const LineshapeOptions& options) {
  std::vector<double> y(grid_ghz.size(), 0.0);
  for (const auto& c : set.configs) {
    double shift = 0.0;
    for (std::size_t s = 0; s < c.mass_units.size(); ++s) shift += shifts_per_u[s] * c.mass_units[s];
    const double center = f0_ghz + shift;
    for (std::size_t k = 0; k < grid_ghz.size(); ++k)
      y[k] += c.probability * profile_value(options.profile, grid_ghz[k] - center, fwhm_ghz, options.voigt_eta);
  }
  return y;
}

SpectrumTrace isotope_lineshape(double f0_ghz, const std::vector<IsotopeShell>& shells, double intrinsic_fwhm_ghz,
                                const std::vector<double>& grid_ghz, const LineshapeOptions& options) {
  if (grid_ghz.empty()) throw std::invalid_argument("lineshape grid is empty");
  if (!(intrinsic_fwhm_ghz > 0.0)) throw std::invalid_argument("intrinsic FWHM must be positive");
  const ConfigurationSet set = configuration_distribution(shells, options.prob_floor);
  std::vector<double> shifts;
  for (const auto& s : shells) shifts.push_back(s.shift_per_u);

  SpectrumTrace trace;
  trace.x = grid_ghz;
  trace.y = evaluate_lineshape(set, shifts, f0_ghz, intrinsic_fwhm_ghz, grid_ghz, options);
  trace.x_label = "frequency";
  trace.x_unit = "GHz";
  trace.y_label = "intensity";
  trace.y_unit = "1/GHz";
  trace.validate();
  return trace;
}

FitResult fit_isotope_model(const SpectrumTrace& trace, const std::vector<IsotopeShell>& shells,
                            const IsotopeFitInit& init, const LineshapeOptions& options) {
  trace.validate();
  if (trace.size() < shells.size() + 3) throw std::invalid_argument("trace too short for the isotope model");
  const ConfigurationSet set = configuration_distribution(shells, options.prob_floor);
  const std::size_t ns = shells.size();

  std::vector<double> shifts0 = init.shifts_per_u;
  if (shifts0.empty())
    for (const auto& s : shells) shifts0.push_back(s.shift_per_u);
  if (shifts0.size() != ns) throw std::invalid_argument("need one initial shift per shell");

  // f0 is fitted as an offset from its initial value; absolute optical
  // frequencies are ~1e5 GHz and would swamp the finite-difference step.
  const double f_ref = init.f0_ghz;
  const double span = trace.x.back() - trace.x.front();

  FitProblem problem;
  problem.model = "isotope-lineshape";
  problem.parameters.push_back({"f0_GHz", 0.0, -span, span, false, 1.0});
  for (std::size_t s = 0; s < ns; ++s)
    problem.parameters.push_back({"shift_" + shells[s].element + "_GHz_per_u", shifts0[s], -1e3, 1e3, false, 1.0});
  problem.parameters.push_back({"fwhm_GHz", init.fwhm_ghz, 1e-6, span, false, 1.0});
  problem.parameters.push_back({"amplitude", init.amplitude, 0.0, std::numeric_limits<double>::infinity(), false,
                                std::max(std::abs(init.amplitude), 1e-12)});

  problem.residuals = [&](const Eigen::VectorXd& x) {
    std::vector<double> shifts(x.data() + 1, x.data() + 1 + ns);
    const auto model = evaluate_lineshape(set, shifts, f_ref + x(0), x(1 + ns), trace.x, options);
    Eigen::VectorXd r(static_cast<Eigen::Index>(trace.size()));
    for (std::size_t k = 0; k < trace.size(); ++k) r(k) = x(2 + ns) * model[k] - trace.y[k];
    return r;
  };

  FitResult result = least_squares(problem);
  result.estimates(0) += f_ref;
  return result;
}

}  // namespace spinforge
