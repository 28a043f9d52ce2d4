#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spinforge/commands.hpp"
#include "spinforge/dynamics.hpp"
#include "spinforge/fitting.hpp"
#include "spinforge/io.hpp"
#include "spinforge/lineshape.hpp"
#include "spinforge/sites.hpp"

#ifndef SPINFORGE_VERSION
#define SPINFORGE_VERSION "dev"
#endif

namespace spinforge::cli {

namespace {

using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands
// ---------------------------------------------------------------------------

struct SpinOpts {
  std::string site;
  std::string orbital = "GS1";
  std::string config;
  std::vector<std::string> sets;
  bool no_nuclear_dipole = false;
};

void add_spin_opts(CLI::App* app, SpinOpts& o) {
  app->add_option("--site", o.site, "Site from the database, e.g. 4H:beta");
  app->add_option("--orbital", o.orbital, "GS1, GS2 or ES1")->capture_default_str();
  app->add_option("--config", o.config, "JSON parameter file");
  app->add_option("--set", o.sets, "Spin parameter override key=value (repeatable)");
  app->add_flag("--no-nuclear-dipole", o.no_nuclear_dipole, "Drop the nuclear term from transition intensities");
}

struct NoiseOpts {
  double noise = 0.0;
  double rel_noise = 0.0;
  unsigned long long seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_noise_opts(CLI::App* app, NoiseOpts& o) {
  app->add_option("--noise", o.noise, "Additive Gaussian noise, std-dev in output units");
  app->add_option("--rel-noise", o.rel_noise, "Multiplicative Gaussian noise, fractional std-dev");
  o.seed_opt = app->add_option("--seed", o.seed, "RNG seed (required with noise)");
}

void apply_noise(const NoiseOpts& o, std::vector<double>& y) {
  if (o.noise < 0.0 || o.rel_noise < 0.0) throw UsageError("noise levels must be >= 0");
  if (o.noise == 0.0 && o.rel_noise == 0.0) return;
  if (!o.seed_opt || o.seed_opt->count() == 0) throw UsageError("--seed is required when noise is requested");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : y) {
    const double a = normal(rng);
    const double m = normal(rng);
    v = v * (1.0 + o.rel_noise * m) + o.noise * a;
  }
}

// ---------------------------------------------------------------------------
// Run context: output, metadata, warnings
// ---------------------------------------------------------------------------

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string command;
  std::string config_hash;
  std::vector<std::string> warnings;
  std::string out_path;

  void warn(const std::string& w) {
    warnings.push_back(w);
    err << "warning: " << w << "\n";
  }

  std::vector<std::string> header(const std::vector<std::string>& extra) const {
    std::vector<std::string> h{std::string("spinforge ") + SPINFORGE_VERSION, "command: " + command,
                               "config_hash: fnv1a64:" + config_hash};
    h.insert(h.end(), extra.begin(), extra.end());
    for (const auto& w : warnings) h.push_back("warning: " + w);
    return h;
  }

  void emit(const std::string& content) const {
    if (out_path.empty()) out << content;
    else write_file_atomic(out_path, content);
  }
};

std::string canonical_options(const CLI::App* app) {
  std::vector<std::pair<std::string, std::string>> items;
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_name();
    if (opt->count() == 0 || name == "--out" || name == "--help") continue;
    std::string v;
    for (const auto& r : opt->results()) v += r + "\x1f";
    items.emplace_back(name, v);
  }
  std::sort(items.begin(), items.end());
  std::string s = app->get_name() + "\x1e";
  for (const auto& [k, v] : items) s += k + "=" + v + "\x1e";
  for (const CLI::App* sub : app->get_subcommands()) s += canonical_options(sub);
  return s;
}

// ---------------------------------------------------------------------------
// Spin parameter resolution
// ---------------------------------------------------------------------------

void set_spin_key(SpinParams& p, std::array<double, 3>& signs, const std::string& key, double v) {
  static const std::map<std::string, int> axis{{"xx", 0}, {"yy", 1}, {"zz", 2}};
  auto suffix = [&](const std::string& prefix) -> int {
    if (key.rfind(prefix, 0) != 0) return -1;
    const auto it = axis.find(key.substr(prefix.size()));
    return it == axis.end() ? -1 : it->second;
  };
  if (key == "S") p.S = v;
  else if (key == "I") p.I = v;
  else if (key == "gN_muN") p.gN_muN = v;
  else if (key == "g_iso") p.g_principal = {v, v, v};
  else if (key == "g_perp") p.g_principal[0] = p.g_principal[1] = v;
  else if (key == "A_iso") p.A_principal = {v, v, v};
  else if (key == "A_perp") p.A_principal[0] = p.A_principal[1] = v;
  else if (int k = suffix("g_theta_"); k >= 0) p.g_angles[k] = v;
  else if (int k2 = suffix("A_theta_"); k2 >= 0) p.A_angles[k2] = v;
  else if (int k3 = suffix("A_sign_"); k3 >= 0) {
    if (v != 1.0 && v != -1.0) throw UsageError("A_sign_* must be +1 or -1");
    signs[k3] = v;
  } else if (int k4 = suffix("g_"); k4 >= 0) p.g_principal[k4] = v;
  else if (int k5 = suffix("A_"); k5 >= 0) p.A_principal[k5] = v;
  else throw UsageError("unknown spin parameter \"" + key + "\"");
}

Mat3 matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw UsageError(what + " must be a 3x3 array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw UsageError(what + " must be a 3x3 array");
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    return parse_quantity(text, "");
  } catch (const std::invalid_argument&) {
    throw UsageError("cannot read " + what + " from \"" + text + "\"");
  }
}

SpinParams resolve_spin(const SpinOpts& o, Context& ctx) {
  json cfg = json::object();
  if (!o.config.empty()) {
    try {
      cfg = json::parse(read_file(o.config));
    } catch (const json::exception& e) {
      throw UsageError(o.config + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError(o.config + ": expected a JSON object");
  }
  std::string site = o.site.empty() ? cfg.value("site", std::string()) : o.site;
  std::string orbital = o.orbital;
  if (cfg.contains("orbital") && o.orbital == "GS1") orbital = cfg.at("orbital").get<std::string>();

  SpinParams p;
  if (!site.empty()) {
    const SiteDatabase db = SiteDatabase::load();
    std::vector<std::string> warnings;
    p = to_spin_params(db.find(site), orbital, warnings);
    for (const auto& w : warnings) ctx.warn(w);
  }
  std::array<double, 3> signs{1.0, 1.0, 1.0};
  if (cfg.contains("spin")) {
    for (const auto& [key, value] : cfg.at("spin").items()) {
      if (key == "g_rotation") p.g_rotation = matrix_from_json(value, key);
      else if (key == "A_rotation") p.A_rotation = matrix_from_json(value, key);
      else if (value.is_number()) set_spin_key(p, signs, key, value.get<double>());
      else throw UsageError("spin." + key + " must be a number");
    }
  }
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got \"" + kv + "\"");
    set_spin_key(p, signs, kv.substr(0, eq), parse_double(kv.substr(eq + 1), kv.substr(0, eq)));
  }
  for (int k = 0; k < 3; ++k) p.A_principal[k] *= signs[k];
  p.validate();
  return p;
}

Vec3 parse_axis(const std::string& text) {
  if (text == "x") return Vec3::UnitX();
  if (text == "y") return Vec3::UnitY();
  if (text == "z" || text == "c") return Vec3::UnitZ();
  std::stringstream ss(text);
  std::string part;
  std::vector<double> v;
  while (std::getline(ss, part, ',')) v.push_back(parse_double(part, "axis component"));
  if (v.size() != 3) throw UsageError("axis must be x, y, z or three comma-separated components");
  Vec3 a(v[0], v[1], v[2]);
  if (!(a.norm() > 0.0)) throw UsageError("axis must be nonzero");
  return a.normalized();
}

Range range_arg(const std::string& text, const std::string& unit, const char* what, int min_points = 1) {
  Range r;
  try {
    r = parse_range(text, unit);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(what) + ": " + e.what());
  }
  if (r.n < min_points)
    throw UsageError(std::string(what) + " needs at least " + std::to_string(min_points) + " points");
  if (r.n > 1 && r.start == r.stop) throw UsageError(std::string(what) + " is degenerate (start equals stop)");
  return r;
}

double quantity_arg(const std::string& text, const std::string& unit, const char* what) {
  try {
    return parse_quantity(text, unit);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string(what) + ": " + e.what());
  }
}

std::string spin_summary(const SpinParams& p) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "spin: S=%g I=%g g=(%g,%g,%g) A=(%g,%g,%g) MHz A_angles=(%g,%g,%g) gN_muN=%g", p.S,
                p.I, p.g_principal[0], p.g_principal[1], p.g_principal[2], p.A_principal[0], p.A_principal[1],
                p.A_principal[2], p.A_angles[0], p.A_angles[1], p.A_angles[2], p.gN_muN);
  return buf;
}

std::string two_digits(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", k);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_sites_list(Context& ctx) {
  const SiteDatabase db = SiteDatabase::load();
  std::string text = "# site database: " + db.source + "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-6s %-14s %-10s %s\n", "site", "assign", "ES1-GS1 (nm)", "tau (ns)",
                "spin data");
  text += line;
  for (const auto& s : db.sites) {
    std::string orbitals;
    for (const auto& o : s.orbitals)
      if (o.available()) orbitals += (orbitals.empty() ? "" : ",") + o.name;
    std::snprintf(line, sizeof line, "%-10s %-6s %-14s %-10s %s\n", s.id().c_str(), s.assignment.c_str(),
                  s.es1_gs1_nm.raw.c_str(), s.lifetime_ns.raw.c_str(), orbitals.c_str());
    text += line;
  }
  ctx.emit(text);
  return kOk;
}

int cmd_sites_show(Context& ctx, const std::string& id) {
  const SiteDatabase db = SiteDatabase::load();
  ctx.emit(describe(db.find(id)));
  return kOk;
}

int cmd_levels(Context& ctx, const SpinOpts& so, const std::string& axis_text, const std::string& range_text) {
  const SpinParams p = resolve_spin(so, ctx);
  const Vec3 axis = parse_axis(axis_text);
  const Range r = range_arg(range_text, "T", "--b-range", 2);
  const FieldSweep sweep = field_sweep(p, axis, r.start, r.stop, r.n);
  if (sweep.coarse_grid) ctx.warn("field grid too coarse for reliable level tracking (overlap < 0.5)");

  const int dim = sweep.tracks();
  CsvTable t;
  t.columns.push_back("B_mT");
  for (int k = 0; k < dim; ++k) t.columns.push_back("level_" + two_digits(k));
  for (int k = 0; k < dim; ++k) t.columns.push_back("label_" + two_digits(k));
  t.columns.push_back("min_overlap");
  for (std::size_t k = 0; k < sweep.fields.size(); ++k) {
    std::vector<double> row{sweep.fields[k] * 1e3};
    for (int l = 0; l < dim; ++l) row.push_back(sweep.systems[k].levels(l));
    std::vector<int> label(dim, 0);
    for (int tr = 0; tr < dim; ++tr) label[sweep.level_of[k][tr]] = tr;
    for (int l = 0; l < dim; ++l) row.push_back(label[l]);
    row.push_back(k == 0 ? 1.0 : sweep.step_overlap[k - 1]);
    t.rows.push_back(std::move(row));
  }
  char axis_line[128];
  std::snprintf(axis_line, sizeof axis_line, "axis: %.17g,%.17g,%.17g", axis(0), axis(1), axis(2));
  t.comments = ctx.header({spin_summary(p), axis_line,
                           "units: B_mT=mT level_*=MHz; label_k = track occupying sorted level k; "
                           "min_overlap = smallest matched |<prev|next>|^2 into this field"});
  ctx.emit(to_csv(t));
  return kOk;
}

struct OdmrOpts {
  std::string axis = "z";
  std::string b_range;
  std::string f_range;
  std::string geometry = "par";
  double linewidth = 2.0;
  double temperature = 0.0;
};

int cmd_odmr(Context& ctx, const SpinOpts& so, const OdmrOpts& o) {
  const SpinParams p = resolve_spin(so, ctx);
  const Vec3 axis = parse_axis(o.axis);
  const Range br = range_arg(o.b_range, "T", "--b-range");
  const Range fr = range_arg(o.f_range, "MHz", "--f-range", 2);
  if (o.geometry != "par" && o.geometry != "perp") throw UsageError("--geometry must be par or perp");
  if (!(o.linewidth > 0.0)) throw UsageError("--linewidth must be positive");
  const bool perp = o.geometry == "perp";

  TransitionOptions topt;
  topt.include_nuclear_dipole = !so.no_nuclear_dipole;
  if (o.temperature > 0.0) topt.temperature_k = o.temperature;
  else if (o.temperature < 0.0) throw UsageError("--temperature must be positive");

  const SpinOperators ops = product_operators(p);
  const auto freqs = fr.values();
  const double gamma = 0.5 * o.linewidth;
  CsvTable t;
  t.columns = {"B_mT", "f_MHz", "intensity"};
  for (double b : br.values()) {
    const FieldPoint f = FieldPoint::along(axis, b);
    const EigenSystem es = eigensystem(build_hamiltonian(p, ops, f), f);
    const auto table = transition_table(es, p, topt);
    std::vector<double> y(freqs.size(), 0.0);
    for (const auto& tr : table) {
      const double w = std::abs(tr.thermal_weight) * (perp ? tr.intensity_perp : tr.intensity_parallel);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < freqs.size(); ++k) {
        const double d = freqs[k] - tr.freq;
        y[k] += w * gamma / (constants::pi * (d * d + gamma * gamma));
      }
    }
    for (std::size_t k = 0; k < freqs.size(); ++k) t.rows.push_back({b * 1e3, freqs[k], y[k]});
  }
  t.comments = ctx.header({spin_summary(p), "geometry: " + o.geometry,
                           "units: B_mT=mT f_MHz=MHz intensity=(MHz/T)^2/MHz, Lorentzian FWHM " +
                               format_number(o.linewidth) + " MHz"});
  ctx.emit(to_csv(t));
  return kOk;
}

struct EsrOpts {
  std::string f_mw = "9.7GHz";
  std::string angles = "0:90:19";
  std::string b_range = "0:1.2T:1201";
  double azimuth = 90.0;
};

int cmd_esr(Context& ctx, const SpinOpts& so, const EsrOpts& o) {
  const SpinParams p = resolve_spin(so, ctx);
  const double f_ghz = quantity_arg(o.f_mw, "GHz", "--f-mw");
  const Range ar = range_arg(o.angles, "deg", "--angles");
  const Range br = range_arg(o.b_range, "T", "--b-range", 3);
  EsrOptions eo;
  eo.points = br.n;
  eo.azimuth_deg = o.azimuth;
  eo.include_nuclear_dipole = !so.no_nuclear_dipole;

  CsvTable t;
  t.columns = {"angle_deg", "B_res_mT", "intensity", "track_i", "track_j"};
  for (double a : ar.values()) {
    for (const auto& r : esr_resonance_fields(p, f_ghz, a, br.start, br.stop, eo))
      t.rows.push_back({a, r.field * 1e3, r.intensity, static_cast<double>(r.track_i), static_cast<double>(r.track_j)});
  }
  t.comments = ctx.header({spin_summary(p), "f_mw_GHz: " + format_number(f_ghz),
                           "units: angle_deg=deg B_res_mT=mT intensity=(MHz/T)^2 for B1 perpendicular to B0"});
  ctx.emit(to_csv(t));
  return kOk;
}

struct ShellOpts {
  double shift_c = 22.0;
  double shift_si = 2.0;
  std::string shells;
  std::string profile = "gaussian";
  double eta = 0.5;
  double prob_floor = 1e-6;
};

void add_shell_opts(CLI::App* app, ShellOpts& o) {
  app->add_option("--shift-c", o.shift_c, "Carbon shell shift, GHz/u")->capture_default_str();
  app->add_option("--shift-si", o.shift_si, "Silicon shell shift, GHz/u")->capture_default_str();
  app->add_option("--shells", o.shells, "JSON shell definition replacing the default C/Si shells");
  app->add_option("--profile", o.profile, "gaussian, lorentzian or voigt")->capture_default_str();
  app->add_option("--eta", o.eta, "Lorentzian fraction of the pseudo-Voigt profile")->capture_default_str();
  app->add_option("--prob-floor", o.prob_floor, "Drop configurations below this probability")->capture_default_str();
}

std::vector<IsotopeShell> resolve_shells(const ShellOpts& o) {
  if (o.shells.empty()) return sic_silicon_site_shells(o.shift_c, o.shift_si);
  std::vector<IsotopeShell> shells;
  try {
    const json j = json::parse(read_file(o.shells));
    for (const auto& js : j.at("shells")) {
      IsotopeShell s;
      s.element = js.at("element").get<std::string>();
      s.n_sites = js.at("n_sites").get<int>();
      s.shift_per_u = js.at("shift_per_u").get<double>();
      for (const auto& ji : js.at("isotopes"))
        s.isotopes.push_back({ji.at("label").get<std::string>(), ji.at("mass_offset_u").get<int>(),
                              ji.at("abundance").get<double>()});
      s.validate();
      shells.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw UsageError(o.shells + ": " + e.what());
  }
  return shells;
}

LineshapeOptions lineshape_options(const ShellOpts& o) {
  LineshapeOptions lo;
  if (o.profile == "gaussian") lo.profile = Profile::gaussian;
  else if (o.profile == "lorentzian") lo.profile = Profile::lorentzian;
  else if (o.profile == "voigt") lo.profile = Profile::pseudo_voigt;
  else throw UsageError("--profile must be gaussian, lorentzian or voigt");
  if (!(o.eta >= 0.0 && o.eta <= 1.0)) throw UsageError("--eta must lie in [0, 1]");
  lo.voigt_eta = o.eta;
  lo.prob_floor = o.prob_floor;
  return lo;
}

struct LineshapeOpts {
  std::string f0;
  std::string site;
  double fwhm = 2.0;
  std::string grid = "-20:80GHz:2001";
};

int cmd_lineshape(Context& ctx, const LineshapeOpts& o, const ShellOpts& so, const NoiseOpts& no) {
  double f0 = 0.0;
  if (!o.f0.empty()) f0 = quantity_arg(o.f0, "GHz", "--f0");
  else if (!o.site.empty()) f0 = SiteDatabase::load().find(o.site).optical_frequency_ghz();
  else throw UsageError("lineshape needs --f0 or --site");
  const Range gr = range_arg(o.grid, "GHz", "--grid", 2);
  const auto shells = resolve_shells(so);
  const LineshapeOptions lo = lineshape_options(so);

  std::vector<double> grid;
  for (double d : gr.values()) grid.push_back(f0 + d);
  SpectrumTrace trace = isotope_lineshape(f0, shells, o.fwhm, grid, lo);
  const ConfigurationSet set = configuration_distribution(shells, lo.prob_floor);
  apply_noise(no, trace.y);

  CsvTable t;
  t.columns = {"frequency_GHz", "detuning_GHz", "intensity"};
  const auto det = gr.values();
  for (std::size_t k = 0; k < grid.size(); ++k) t.rows.push_back({grid[k], det[k], trace.y[k]});
  std::vector<std::string> extra{"f0_GHz: " + format_number(f0),
                                 "configurations: " + std::to_string(set.configs.size()) +
                                     " retained_probability: " + format_number(set.retained_probability),
                                 "units: frequency_GHz=GHz detuning_GHz=GHz intensity=1/GHz"};
  if (no.seed_opt && no.seed_opt->count()) extra.push_back("seed: " + std::to_string(no.seed));
  t.comments = ctx.header(extra);
  ctx.emit(to_csv(t));
  return kOk;
}

struct ClockOpts {
  std::string axis = "z";
  std::string b_range;
  std::string pair;
  double slope_tol = 0.1;  // MHz/mT
};

int cmd_clock(Context& ctx, const SpinOpts& so, const ClockOpts& o) {
  const SpinParams p = resolve_spin(so, ctx);
  const Vec3 axis = parse_axis(o.axis);
  const Range r = range_arg(o.b_range, "T", "--b-range", 3);
  ClockOptions co;
  co.points = r.n;
  co.slope_tol = o.slope_tol * 1e3;
  if (!o.pair.empty()) {
    const auto comma = o.pair.find(',');
    if (comma == std::string::npos) throw UsageError("--pair expects i,j");
    try {
      co.pair = std::make_pair(std::stoi(o.pair.substr(0, comma)), std::stoi(o.pair.substr(comma + 1)));
    } catch (const std::exception&) {
      throw UsageError("--pair expects two track indices i,j");
    }
  }
  CsvTable t;
  t.columns = {"track_i", "track_j", "B_mT", "f_MHz", "curvature_MHz_per_T2"};
  for (const auto& c : clock_transitions(p, axis, r.start, r.stop, co))
    t.rows.push_back({static_cast<double>(c.track_i), static_cast<double>(c.track_j), c.field * 1e3, c.frequency,
                      c.curvature});
  t.comments = ctx.header({spin_summary(p), "units: B_mT=mT f_MHz=MHz curvature=MHz/T^2; tracks as in levels"});
  ctx.emit(to_csv(t));
  return kOk;
}

struct RabiOpts {
  double omega = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  double detuning_sigma = 0.0;
  double drive_sigma = 0.0;
  std::string form = "printed";
};

void add_rabi_opts(CLI::App* app, RabiOpts& o, bool with_delta) {
  app->add_option("--omega", o.omega, "Rabi frequency, rad/us")->required();
  if (with_delta) app->add_option("--delta", o.delta, "Detuning, rad/us");
  app->add_option("--gamma", o.gamma, "Decay rate, 1/us");
  app->add_option("--detuning-sigma", o.detuning_sigma, "Gaussian detuning spread, rad/us");
  app->add_option("--drive-sigma", o.drive_sigma, "Gaussian fractional drive spread");
  app->add_option("--form", o.form, "printed or symmetric")->capture_default_str();
}

RabiParams rabi_params(const RabiOpts& o) {
  RabiParams p;
  p.omega_r = o.omega;
  p.delta = o.delta;
  p.gamma = o.gamma;
  if (o.detuning_sigma > 0.0 || o.drive_sigma > 0.0) p.inhomogeneity = RabiInhomogeneity{o.detuning_sigma, o.drive_sigma};
  if (o.form == "printed") p.form = RabiForm::printed;
  else if (o.form == "symmetric") p.form = RabiForm::symmetric;
  else throw UsageError("--form must be printed or symmetric");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return p;
}

double rabi_value(double t, const RabiParams& p) {
  if (!p.inhomogeneity) return rabi_signal(t, p);
  const auto q = rabi_inhomogeneous(t, p);
  if (!q.converged) throw NumericalError("inhomogeneous average did not converge");
  return q.value;
}

struct TraceOpts {
  std::string range;
};

int emit_trace(Context& ctx, const std::vector<std::string>& columns, const std::vector<double>& x,
               std::vector<double> y, const NoiseOpts& no, std::vector<std::string> extra) {
  apply_noise(no, y);
  CsvTable t;
  t.columns = columns;
  for (std::size_t k = 0; k < x.size(); ++k) t.rows.push_back({x[k], y[k]});
  if (no.seed_opt && no.seed_opt->count()) extra.push_back("seed: " + std::to_string(no.seed));
  t.comments = ctx.header(extra);
  ctx.emit(to_csv(t));
  return kOk;
}

struct G2Opts {
  double a = 1.0;
  double b = 0.1;
  std::string tau1 = "0.07us";
  std::string tau2 = "2us";
};

struct DecayOpts {
  double amplitude = 1.0;
  std::string tau;
  double baseline = 0.0;
  std::string site;
};

struct PodmrOpts {
  std::string f0;
  std::string t_pi;
};

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

json fit_json(const Context& ctx, const FitResult& r, const std::string& model, const std::string& data) {
  json j;
  j["tool"] = std::string("spinforge ") + SPINFORGE_VERSION;
  j["config_hash"] = "fnv1a64:" + ctx.config_hash;
  j["model"] = model;
  j["data"] = data;
  j["status"] = to_string(r.status);
  j["converged"] = r.converged();
  j["message"] = r.message;
  j["iterations"] = r.iterations;
  j["evaluations"] = r.evaluations;
  j["residual_count"] = r.residual_count;
  j["cost"] = r.cost;
  j["rms"] = r.rms;
  j["singular_ratio"] = r.singular_ratio;
  json params = json::array();
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    json p;
    p["name"] = r.names[k];
    p["estimate"] = r.estimates(static_cast<Eigen::Index>(k));
    const double ci = r.ci95(static_cast<Eigen::Index>(k));
    p["ci95"] = std::isfinite(ci) ? json(ci) : json(nullptr);
    p["at_bound"] = static_cast<bool>(r.at_bound[k]);
    params.push_back(p);
  }
  j["parameters"] = params;
  std::vector<std::string> warnings = ctx.warnings;
  warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
  j["warnings"] = warnings;
  return j;
}

int finish_fit(Context& ctx, const FitResult& r, const std::string& model, const std::string& data,
               json extra = json::object()) {
  json j = fit_json(ctx, r, model, data);
  for (auto& [k, v] : extra.items()) j[k] = v;
  ctx.emit(j.dump(2) + "\n");
  if (!r.converged()) {
    ctx.err << "error: fit did not converge (" << to_string(r.status) << "): " << r.message << "\n";
    return kNumerical;
  }
  return kOk;
}

SpectrumTrace trace_from(const CsvTable& t, const std::vector<std::string>& x_names, const std::string& y_name) {
  SpectrumTrace s;
  std::string used;
  for (const auto& n : x_names) {
    if (t.column(n) >= 0) {
      used = n;
      break;
    }
  }
  if (used.empty()) {
    std::string all;
    for (const auto& n : x_names) all += (all.empty() ? "" : " or ") + n;
    throw SchemaError("data needs a column " + all);
  }
  s.x = t.values(used);
  s.y = t.values(y_name);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("data column ") + used + ": " + e.what());
  }
  if (s.size() < 3) throw SchemaError("data has too few rows");
  return s;
}

struct FitCommon {
  std::string data;
};

struct FitDecayOpts {
  std::string tau;
};

struct FitIsotopeOpts {
  std::string f0;
  double fwhm = 2.0;
  double amplitude = 0.0;
};

struct FitSpinOpts {
  std::string free = "g_zz,A_xx,A_yy,A_zz";
  std::string geometry = "par";
  double min_prominence = 0.05;
  bool guess = false;
  std::string axis = "z";
};

PeakSet peaks_from(const CsvTable& t, double min_prominence) {
  const auto b = t.values("B_mT");
  const auto f = t.values("f_MHz");
  PeakSet set;
  if (t.column("intensity") < 0) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      Peak p;
      p.sweep = b[k];
      p.position = f[k];
      set.peaks.push_back(p);
    }
    return set;
  }
  const auto y = t.values("intensity");
  std::map<double, std::vector<std::pair<double, double>>> slices;
  double ymax = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    slices[b[k]].emplace_back(f[k], y[k]);
    ymax = std::max(ymax, y[k]);
  }
  SpectrumMap map;
  for (auto& [field, pts] : slices) {
    std::sort(pts.begin(), pts.end());
    SpectrumTrace s;
    for (const auto& [x, v] : pts) {
      s.x.push_back(x);
      s.y.push_back(v);
    }
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw SchemaError("slice at B_mT=" + format_number(field) + ": " + e.what());
    }
    map.sweep.push_back(field);
    map.slices.push_back(std::move(s));
  }
  return extract_peaks(map, min_prominence * ymax);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spin Hamiltonian, spectra, dynamics and fits for V4+ defects in SiC", "spinforge"};
  app.set_version_flag("--version", std::string("spinforge ") + SPINFORGE_VERSION);
  app.require_subcommand(1);

  std::string out_path;
  auto add_out = [&](CLI::App* a) { a->add_option("--out", out_path, "Output file (written atomically)"); };

  // sites
  auto* sites = app.add_subcommand("sites", "Site parameter database");
  sites->require_subcommand(1);
  auto* sites_list = sites->add_subcommand("list", "List database sites");
  add_out(sites_list);
  std::string site_id;
  auto* sites_show = sites->add_subcommand("show", "Show one site record");
  sites_show->add_option("site", site_id, "e.g. 4H:beta")->required();
  add_out(sites_show);

  // levels
  SpinOpts lv_spin;
  std::string lv_axis = "z", lv_range;
  auto* levels = app.add_subcommand("levels", "Tracked energy levels versus field");
  add_spin_opts(levels, lv_spin);
  levels->add_option("--b-axis", lv_axis, "x, y, z or ax,ay,az")->capture_default_str();
  levels->add_option("--b-range", lv_range, "Field range, e.g. 0:50mT:501")->required();
  add_out(levels);

  // odmr
  SpinOpts od_spin;
  OdmrOpts od;
  auto* odmr = app.add_subcommand("odmr", "ODMR map versus field and drive frequency");
  add_spin_opts(odmr, od_spin);
  odmr->add_option("--b-axis", od.axis, "Static field axis")->capture_default_str();
  odmr->add_option("--b-range", od.b_range, "Field range, e.g. 0:50mT:101")->required();
  odmr->add_option("--f-range", od.f_range, "Drive frequency range, e.g. 0:3000MHz:1501")->required();
  odmr->add_option("--geometry", od.geometry, "B1 par or perp to c")->capture_default_str();
  odmr->add_option("--linewidth", od.linewidth, "Lorentzian FWHM, MHz")->capture_default_str();
  odmr->add_option("--temperature", od.temperature, "Weight lines by thermal population difference, K");
  add_out(odmr);

  // esr
  SpinOpts es_spin;
  EsrOpts es;
  auto* esr = app.add_subcommand("esr", "ESR resonance fields versus angle from c");
  add_spin_opts(esr, es_spin);
  esr->add_option("--f-mw", es.f_mw, "Microwave frequency")->capture_default_str();
  esr->add_option("--angles", es.angles, "Polar angle range, degrees")->capture_default_str();
  esr->add_option("--b-range", es.b_range, "Field search range and grid")->capture_default_str();
  esr->add_option("--azimuth", es.azimuth, "Azimuth of the field plane, degrees")->capture_default_str();
  add_out(esr);

  // lineshape
  LineshapeOpts ls;
  ShellOpts ls_shell;
  NoiseOpts ls_noise;
  auto* lineshape = app.add_subcommand("lineshape", "Isotope-configuration optical lineshape");
  lineshape->add_option("--f0", ls.f0, "Majority-configuration line center, GHz");
  lineshape->add_option("--site", ls.site, "Take f0 from the site's ES1-GS1 wavelength");
  lineshape->add_option("--fwhm", ls.fwhm, "Intrinsic FWHM, GHz")->capture_default_str();
  lineshape->add_option("--grid", ls.grid, "Detuning grid relative to f0")->capture_default_str();
  add_shell_opts(lineshape, ls_shell);
  add_noise_opts(lineshape, ls_noise);
  add_out(lineshape);

  // clock
  SpinOpts cl_spin;
  ClockOpts cl;
  auto* clock = app.add_subcommand("clock", "Clock transitions (df/dB = 0)");
  add_spin_opts(clock, cl_spin);
  clock->add_option("--b-axis", cl.axis, "Static field axis")->capture_default_str();
  clock->add_option("--b-range", cl.b_range, "Field range and search grid")->required();
  clock->add_option("--pair", cl.pair, "Restrict to tracks i,j");
  clock->add_option("--slope-tol", cl.slope_tol, "Accepted |df/dB|, MHz/mT")->capture_default_str();
  add_out(clock);

  // dynamics
  auto* dynamics = app.add_subcommand("dynamics", "Time-domain signal models");
  dynamics->require_subcommand(1);
  RabiOpts rb;
  std::string rb_range = "0:2us:401";
  NoiseOpts rb_noise;
  auto* d_rabi = dynamics->add_subcommand("rabi", "Damped Rabi oscillation");
  add_rabi_opts(d_rabi, rb, true);
  d_rabi->add_option("--t-range", rb_range, "Time grid")->capture_default_str();
  add_noise_opts(d_rabi, rb_noise);
  add_out(d_rabi);

  G2Opts g2;
  std::string g2_range = "0:10us:501";
  NoiseOpts g2_noise;
  auto* d_g2 = dynamics->add_subcommand("g2", "Photon autocorrelation g2(tau)");
  d_g2->add_option("--a", g2.a, "Antibunching amplitude")->capture_default_str();
  d_g2->add_option("--b", g2.b, "Bunching amplitude")->capture_default_str();
  d_g2->add_option("--tau1", g2.tau1, "Antibunching time")->capture_default_str();
  d_g2->add_option("--tau2", g2.tau2, "Bunching time")->capture_default_str();
  d_g2->add_option("--tau-range", g2_range, "Delay grid")->capture_default_str();
  add_noise_opts(d_g2, g2_noise);
  add_out(d_g2);

  DecayOpts dc;
  std::string dc_range = "0:1000ns:501";
  NoiseOpts dc_noise;
  auto* d_decay = dynamics->add_subcommand("decay", "Exponential decay");
  d_decay->add_option("--amplitude", dc.amplitude, "Amplitude")->capture_default_str();
  d_decay->add_option("--tau", dc.tau, "Decay time, e.g. 167ns");
  d_decay->add_option("--site", dc.site, "Take tau from the site's optical lifetime");
  d_decay->add_option("--baseline", dc.baseline, "Baseline")->capture_default_str();
  d_decay->add_option("--t-range", dc_range, "Time grid")->capture_default_str();
  add_noise_opts(d_decay, dc_noise);
  add_out(d_decay);

  RabiOpts pr;
  PodmrOpts po;
  std::string po_range;
  NoiseOpts po_noise;
  auto* d_podmr = dynamics->add_subcommand("podmr", "Pulsed-ODMR spectrum after one pulse");
  add_rabi_opts(d_podmr, pr, false);
  d_podmr->add_option("--f0", po.f0, "Transition frequency, MHz")->required();
  d_podmr->add_option("--t-pi", po.t_pi, "Pulse length (default pi/omega), us");
  d_podmr->add_option("--f-range", po_range, "Drive frequency grid, MHz")->required();
  add_noise_opts(d_podmr, po_noise);
  add_out(d_podmr);

  // fit
  auto* fit = app.add_subcommand("fit", "Least-squares fits to CSV data, JSON result");
  fit->require_subcommand(1);
  FitCommon fc;
  auto add_data = [&](CLI::App* a) {
    a->add_option("--data", fc.data, "Input CSV")->required();
    add_out(a);
  };
  FitDecayOpts fd;
  auto* f_decay = fit->add_subcommand("decay", "Exponential decay; columns t_ns|t_us, intensity");
  f_decay->add_option("--tau", fd.tau, "Initial decay time (estimated when absent)");
  add_data(f_decay);

  G2Opts fg;
  fg.a = 1.0;
  fg.b = 0.1;
  fg.tau1 = "0.05us";
  fg.tau2 = "1us";
  double fg_bg = 0.0;
  auto* f_g2 = fit->add_subcommand("g2", "g2 model; columns tau_us, g2");
  f_g2->add_option("--a", fg.a, "Initial a")->capture_default_str();
  f_g2->add_option("--b", fg.b, "Initial b")->capture_default_str();
  f_g2->add_option("--tau1", fg.tau1, "Initial tau1")->capture_default_str();
  f_g2->add_option("--tau2", fg.tau2, "Initial tau2")->capture_default_str();
  f_g2->add_option("--background-fraction", fg_bg, "Uncorrelated background fraction to remove");
  add_data(f_g2);

  FitIsotopeOpts fi;
  ShellOpts fi_shell;
  auto* f_iso = fit->add_subcommand("isotope", "Isotope lineshape; columns frequency_GHz, intensity");
  f_iso->add_option("--f0", fi.f0, "Initial line center, GHz (default: data maximum)");
  f_iso->add_option("--fwhm", fi.fwhm, "Initial FWHM, GHz")->capture_default_str();
  f_iso->add_option("--amplitude", fi.amplitude, "Initial amplitude (default: data area)");
  add_shell_opts(f_iso, fi_shell);
  add_data(f_iso);

  RabiOpts fr;
  double fr_amp = 1.0, fr_off = 0.0;
  bool fr_delta = false;
  auto* f_rabi = fit->add_subcommand("rabi", "Damped Rabi; columns t_us, signal");
  add_rabi_opts(f_rabi, fr, true);
  f_rabi->add_option("--amplitude", fr_amp, "Initial amplitude")->capture_default_str();
  f_rabi->add_option("--offset", fr_off, "Initial offset")->capture_default_str();
  f_rabi->add_flag("--fit-delta", fr_delta, "Free the detuning");
  add_data(f_rabi);

  SpinOpts fs_spin;
  FitSpinOpts fs;
  auto* f_spin = fit->add_subcommand("spin", "Spin Hamiltonian from ODMR peaks; columns B_mT, f_MHz[, intensity]");
  add_spin_opts(f_spin, fs_spin);
  f_spin->add_option("--free", fs.free, "Free parameters")->capture_default_str();
  f_spin->add_option("--geometry", fs.geometry, "B1 par or perp to c")->capture_default_str();
  f_spin->add_option("--b-axis", fs.axis, "Static field axis")->capture_default_str();
  f_spin->add_option("--min-prominence", fs.min_prominence, "Peak prominence, fraction of the map maximum")
      ->capture_default_str();
  f_spin->add_flag("--guess", fs.guess, "Start g_zz and A_zz from the data heuristics");
  add_data(f_spin);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* leaf = &app;
  std::string path;
  while (!leaf->get_subcommands().empty()) {
    leaf = leaf->get_subcommands().front();
    path += (path.empty() ? "" : " ") + leaf->get_name();
  }

  Context ctx{out, err, path, {}, {}, out_path};
  std::string canon = canonical_options(&app);
  for (const SpinOpts* so : {&lv_spin, &od_spin, &es_spin, &cl_spin, &fs_spin})
    if (!so->config.empty()) {
      try {
        canon += read_file(so->config);
      } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
      }
    }
  if (!fc.data.empty()) {
    try {
      canon += read_file(fc.data);
    } catch (const IoError&) {
    }
  }
  ctx.config_hash = hex64(fnv1a64(canon));

  try {
    if (sites_list->parsed()) return cmd_sites_list(ctx);
    if (sites_show->parsed()) return cmd_sites_show(ctx, site_id);
    if (levels->parsed()) return cmd_levels(ctx, lv_spin, lv_axis, lv_range);
    if (odmr->parsed()) return cmd_odmr(ctx, od_spin, od);
    if (esr->parsed()) return cmd_esr(ctx, es_spin, es);
    if (lineshape->parsed()) return cmd_lineshape(ctx, ls, ls_shell, ls_noise);
    if (clock->parsed()) return cmd_clock(ctx, cl_spin, cl);

    if (d_rabi->parsed()) {
      const RabiParams p = rabi_params(rb);
      const auto t = range_arg(rb_range, "us", "--t-range").values();
      std::vector<double> y;
      for (double v : t) y.push_back(rabi_value(v, p));
      return emit_trace(ctx, {"t_us", "signal"}, t, y, rb_noise,
                        {"units: t_us=us signal=population transfer; omega, delta rad/us, gamma 1/us"});
    }
    if (d_g2->parsed()) {
      G2Params p{g2.a, g2.b, quantity_arg(g2.tau1, "us", "--tau1"), quantity_arg(g2.tau2, "us", "--tau2")};
      try {
        p.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto t = range_arg(g2_range, "us", "--tau-range").values();
      std::vector<double> y;
      for (double v : t) y.push_back(g2_model(v, p));
      return emit_trace(ctx, {"tau_us", "g2"}, t, y, g2_noise, {"units: tau_us=us g2=1"});
    }
    if (d_decay->parsed()) {
      DecayParams p{dc.amplitude, 0.0, dc.baseline};
      if (!dc.tau.empty()) p.tau = quantity_arg(dc.tau, "ns", "--tau");
      else if (!dc.site.empty()) p.tau = *SiteDatabase::load().find(dc.site).lifetime_ns.entries.at(0).value;
      else throw UsageError("decay needs --tau or --site");
      try {
        p.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const auto t = range_arg(dc_range, "ns", "--t-range").values();
      std::vector<double> y;
      for (double v : t) y.push_back(exp_decay(v, p));
      return emit_trace(ctx, {"t_ns", "intensity"}, t, y, dc_noise,
                        {"tau_ns: " + format_number(p.tau), "units: t_ns=ns intensity=arb"});
    }
    if (d_podmr->parsed()) {
      RabiParams p = rabi_params(pr);
      const double f0 = quantity_arg(po.f0, "MHz", "--f0");
      const double t_pi = po.t_pi.empty() ? (p.omega_r > 0.0 ? constants::pi / p.omega_r : 0.0)
                                          : quantity_arg(po.t_pi, "us", "--t-pi");
      if (!(t_pi > 0.0)) throw UsageError("pulse length must be positive (set --t-pi or a nonzero --omega)");
      const auto f = range_arg(po_range, "MHz", "--f-range", 2).values();
      const SpectrumTrace s = pulsed_odmr_spectrum(f, f0, p, t_pi);
      return emit_trace(ctx, {"f_MHz", "signal"}, f, s.y, po_noise,
                        {"t_pi_us: " + format_number(t_pi), "units: f_MHz=MHz signal=population transfer"});
    }

    if (f_decay->parsed()) {
      const CsvTable t = read_csv(fc.data);
      const SpectrumTrace s = trace_from(t, {"t_ns", "t_us"}, "intensity");
      std::optional<DecayParams> init;
      if (!fd.tau.empty()) {
        const std::string unit = t.column("t_ns") >= 0 ? "ns" : "us";
        const std::size_t tail = std::max<std::size_t>(1, s.size() / 10);
        double base = 0.0;
        for (std::size_t k = s.size() - tail; k < s.size(); ++k) base += s.y[k];
        base /= static_cast<double>(tail);
        init = DecayParams{s.y.front() - base, quantity_arg(fd.tau, unit, "--tau"), base};
      }
      const FitResult r = fit_exp_decay(s, init);
      return finish_fit(ctx, r, "exp-decay", fc.data,
                        {{"time_unit", t.column("t_ns") >= 0 ? "ns" : "us"}});
    }
    if (f_g2->parsed()) {
      const CsvTable t = read_csv(fc.data);
      SpectrumTrace s = trace_from(t, {"tau_us"}, "g2");
      if (fg_bg != 0.0) {
        try {
          s = correct_g2_background(s, fg_bg);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
      const G2Params init{fg.a, fg.b, quantity_arg(fg.tau1, "us", "--tau1"), quantity_arg(fg.tau2, "us", "--tau2")};
      const FitResult r = fit_g2(s, init);
      return finish_fit(ctx, r, "g2", fc.data, {{"background_fraction", fg_bg}});
    }
    if (f_iso->parsed()) {
      const CsvTable t = read_csv(fc.data);
      const SpectrumTrace s = trace_from(t, {"frequency_GHz"}, "intensity");
      IsotopeFitInit init;
      if (!fi.f0.empty()) {
        init.f0_ghz = quantity_arg(fi.f0, "GHz", "--f0");
      } else {
        init.f0_ghz = s.x[static_cast<std::size_t>(std::max_element(s.y.begin(), s.y.end()) - s.y.begin())];
      }
      init.fwhm_ghz = fi.fwhm;
      init.amplitude = fi.amplitude > 0.0 ? fi.amplitude : s.integral();
      const auto shells = resolve_shells(fi_shell);
      for (const auto& sh : shells) init.shifts_per_u.push_back(sh.shift_per_u);
      const FitResult r = fit_isotope_model(s, shells, init, lineshape_options(fi_shell));
      return finish_fit(ctx, r, "isotope-lineshape", fc.data);
    }
    if (f_rabi->parsed()) {
      const CsvTable t = read_csv(fc.data);
      const SpectrumTrace s = trace_from(t, {"t_us"}, "signal");
      RabiFitInit init;
      init.params = rabi_params(fr);
      init.amplitude = fr_amp;
      init.offset = fr_off;
      init.fit_delta = fr_delta;
      const FitResult r = fit_rabi(s, init);
      return finish_fit(ctx, r, "rabi", fc.data);
    }
    if (f_spin->parsed()) {
      const CsvTable t = read_csv(fc.data);
      const PeakSet peaks = peaks_from(t, fs.min_prominence);
      if (peaks.empty()) throw SchemaError("no peaks found in " + fc.data);
      SpinParams init = resolve_spin(fs_spin, ctx);
      SpinFitOptions opt;
      opt.axis = parse_axis(fs.axis);
      opt.field_unit = 1e-3;
      opt.include_nuclear_dipole = !fs_spin.no_nuclear_dipole;
      if (fs.geometry == "par") opt.geometry = DriveGeometry::parallel;
      else if (fs.geometry == "perp") opt.geometry = DriveGeometry::perpendicular;
      else throw UsageError("--geometry must be par or perp");
      if (fs.guess) init = initial_spin_guess(peaks, init, opt);

      SpinFitMask mask{false, false, false, false, false, false, false};
      std::stringstream ss(fs.free);
      std::string name;
      while (std::getline(ss, name, ',')) {
        if (name == "g_xx") mask.g_xx = true;
        else if (name == "g_yy") mask.g_yy = true;
        else if (name == "g_zz") mask.g_zz = true;
        else if (name == "A_xx") mask.A_xx = true;
        else if (name == "A_yy") mask.A_yy = true;
        else if (name == "A_zz") mask.A_zz = true;
        else if (name == "A_tilt") mask.A_tilt = true;
        else throw UsageError("unknown free parameter \"" + name + "\"");
      }
      const SpinFitResult r = fit_spin_params(peaks, init, mask, opt);
      for (const auto& w : r.warnings)
        if (std::find(r.fit.warnings.begin(), r.fit.warnings.end(), w) == r.fit.warnings.end()) ctx.warn(w);
      return finish_fit(ctx, r.fit, "spin-hamiltonian", fc.data,
                        {{"peaks", peaks.size()}, {"initial", spin_summary(init)}, {"fitted", spin_summary(r.params)}});
    }
  } catch (const SiteLookupError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SchemaError& e) {
    err << "error: " << json{{"error", "schema"}, {"message", e.what()}}.dump() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
  err << "error: no command\n";
  return kUsage;
}

}  // namespace spinforge::cli
