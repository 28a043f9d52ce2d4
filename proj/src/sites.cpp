#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spinforge/sites.hpp"

namespace spinforge {

namespace {

const char* const kEmbedded =
#include "spinforge/sites_data.inc"
    ;

const std::string kLessEqual = "\xE2\x89\xA4";  // U+2264

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& cell) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw std::invalid_argument("cannot read \"" + cell + "\" as a table value");
  return v;
}

TableEntry parse_entry(std::string s, const std::string& cell) {
  TableEntry e;
  s = trim(s);
  if (s == "-") {
    e.provenance = Provenance::unresolved;
    return e;
  }
  if (s.rfind(kLessEqual, 0) == 0) {
    e.provenance = Provenance::upper_bound;
    e.value = parse_number(trim(s.substr(kLessEqual.size())), cell);
    e.upper = *e.value;
    return e;
  }
  if (const auto first = s.find('<'); first != std::string::npos) {
    const auto second = s.find('<', first + 1);
    if (second == std::string::npos) throw std::invalid_argument("malformed bound in \"" + cell + "\"");
    e.provenance = Provenance::bounded;
    e.lower = parse_number(trim(s.substr(0, first)), cell);
    e.upper = parse_number(trim(s.substr(second + 1)), cell);
    if (!(e.lower < e.upper)) throw std::invalid_argument("empty bound in \"" + cell + "\"");
    return e;
  }
  std::size_t stars = 0;
  while (!s.empty() && s.back() == '*') {
    s.pop_back();
    ++stars;
  }
  if (stars == 1) e.provenance = Provenance::literature;
  else if (stars == 2) e.provenance = Provenance::partial;
  else if (stars > 2) throw std::invalid_argument("unknown marker in \"" + cell + "\"");
  s = trim(s);

  std::string number = s;
  if (const auto open = s.find('('); open != std::string::npos) {
    const auto close = s.find(')', open);
    if (close != s.size() - 1) throw std::invalid_argument("malformed uncertainty in \"" + cell + "\"");
    number = s.substr(0, open);
    const std::string digits = s.substr(open + 1, close - open - 1);
    const double u = parse_number(digits, cell);
    const auto dot = number.find('.');
    const int decimals = dot == std::string::npos ? 0 : static_cast<int>(number.size() - dot - 1);
    e.uncertainty = u * std::pow(10.0, -decimals);
  }
  e.value = parse_number(number, cell);
  return e;
}

std::string normalize_label(std::string s) {
  static const std::pair<const char*, const char*> greek[] = {
      {"\xCE\xB1", "alpha"}, {"\xCE\xB2", "beta"}, {"\xCE\xB3", "gamma"}};
  for (const auto& [from, to] : greek) {
    const std::string f = from;
    for (auto pos = s.find(f); pos != std::string::npos; pos = s.find(f)) s.replace(pos, f.size(), to);
  }
  std::string out;
  for (char c : s) {
    if (c == ':' || c == '-' || c == '_' || c == ' ' || c == '/') {
      out.push_back(':');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  // "4hsic:beta" -> "4h:beta"
  for (auto pos = out.find("sic"); pos != std::string::npos; pos = out.find("sic")) out.erase(pos, 3);
  while (out.find("::") != std::string::npos) out.erase(out.find("::"), 1);
  return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

TableField field_from(const nlohmann::json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_string())
    throw std::invalid_argument(std::string("site record lacks text field \"") + key + "\"");
  return parse_table_field(obj.at(key).get<std::string>());
}

double first_value(const TableField& f) {
  if (f.entries.size() != 1 || !f.entries[0].value) return std::nan("");
  return *f.entries[0].value;
}

void validate_site(const SiteRecord& s) {
  if (s.polytype != "4H" && s.polytype != "6H") throw std::invalid_argument(s.id() + ": unknown polytype");
  const double nm = first_value(s.es1_gs1_nm);
  if (!(nm >= 1200.0 && nm <= 1500.0)) throw std::invalid_argument(s.id() + ": wavelength outside [1200, 1500] nm");
  const double tau = first_value(s.lifetime_ns);
  if (!(tau > 0.0)) throw std::invalid_argument(s.id() + ": lifetime must be positive");
}

std::string flags_of(const TableField& f) {
  std::string out;
  bool any = false;
  for (const auto& e : f.entries) any |= e.provenance != Provenance::measured;
  if (!any) return out;
  out = "  [";
  for (std::size_t k = 0; k < f.entries.size(); ++k) {
    if (k) out += ", ";
    out += to_string(f.entries[k].provenance);
  }
  out += "]";
  return out;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string greek_of(const std::string& label) {
  if (label == "alpha") return "\xCE\xB1";
  if (label == "beta") return "\xCE\xB2";
  if (label == "gamma") return "\xCE\xB3";
  return label;
}

}  // namespace

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::measured: return "measured";
    case Provenance::literature: return "literature";
    case Provenance::partial: return "partial";
    case Provenance::unresolved: return "unresolved";
    case Provenance::bounded: return "bounded";
    case Provenance::upper_bound: return "upper-bound";
  }
  return "?";
}

bool TableField::resolved() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const TableEntry& e) { return e.provenance != Provenance::unresolved; });
}

TableField parse_table_field(const std::string& raw) {
  TableField f;
  f.raw = raw;
  std::stringstream ss(raw);
  std::string part;
  while (std::getline(ss, part, ',')) f.entries.push_back(parse_entry(part, raw));
  if (f.entries.empty()) throw std::invalid_argument("empty table cell");
  return f;
}

const OrbitalRecord* SiteRecord::orbital(const std::string& name) const {
  for (const auto& o : orbitals)
    if (o.name == name) return &o;
  return nullptr;
}

double SiteRecord::optical_frequency_ghz() const { return constants::wavelength_nm_to_ghz(first_value(es1_gs1_nm)); }

namespace {
std::vector<SiteRecord> parse_sites(const nlohmann::json& list);
}

SiteDatabase SiteDatabase::from_json(const std::string& text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "spinforge-sites" || !doc.contains("sites"))
    throw std::invalid_argument(source + ": not a spinforge site database");

  SiteDatabase db;
  db.source = source;
  try {
    db.sites = parse_sites(doc.at("sites"));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
  return db;
}

namespace {

std::vector<SiteRecord> parse_sites(const nlohmann::json& list) {
  std::vector<SiteRecord> sites;
  for (const auto& js : list) {
    SiteRecord s;
    s.polytype = js.at("polytype").get<std::string>();
    s.label = js.at("label").get<std::string>();
    s.assignment = js.at("assignment").get<std::string>();
    s.es1_gs1_nm = field_from(js, "es1_gs1_nm");
    s.gs2_gs1_ghz = field_from(js, "gs2_gs1_ghz");
    s.es2_es1_ghz = field_from(js, "es2_es1_ghz");
    s.es3_es2_ghz = field_from(js, "es3_es2_ghz");
    s.dw_percent = field_from(js, "dw_percent");
    s.lifetime_ns = field_from(js, "lifetime_ns");
    for (const char* name : {"GS1", "GS2", "ES1"}) {
      if (!js.contains("orbitals") || !js.at("orbitals").contains(name)) continue;
      const auto& jo = js.at("orbitals").at(name);
      OrbitalRecord o;
      o.name = name;
      o.g = field_from(jo, "g");
      o.A = field_from(jo, "A");
      o.angles = field_from(jo, "angles");
      s.orbitals.push_back(std::move(o));
    }
    validate_site(s);
    sites.push_back(std::move(s));
  }
  return sites;
}

}  // namespace

SiteDatabase SiteDatabase::builtin() { return from_json(kEmbedded, "built-in"); }

SiteDatabase SiteDatabase::load() {
  const char* path = std::getenv(kSitesDbEnv);
  if (!path || !*path) return builtin();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(std::string("cannot read site database ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path);
}

const SiteRecord& SiteDatabase::find(const std::string& id) const {
  const std::string want = normalize_label(id);
  for (const auto& s : sites)
    if (normalize_label(s.id()) == want) return s;

  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& s : sites) ranked.emplace_back(edit_distance(want, normalize_label(s.id())), s.id());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> suggestions;
  for (std::size_t k = 0; k < ranked.size() && k < 3; ++k) suggestions.push_back(ranked[k].second);
  std::string msg = "unknown site \"" + id + "\"";
  if (!suggestions.empty()) {
    msg += "; did you mean";
    for (std::size_t k = 0; k < suggestions.size(); ++k) msg += (k ? ", " : " ") + suggestions[k];
    msg += "?";
  }
  throw SiteLookupError(msg, suggestions);
}

SpinParams to_spin_params(const SiteRecord& site, const std::string& orbital, std::vector<std::string>& warnings) {
  const OrbitalRecord* o = site.orbital(orbital);
  if (!o || !o->available()) throw std::invalid_argument(site.id() + " " + orbital + " has no resolved spin parameters");
  const std::string where = site.id() + " " + orbital;
  SpinParams p;

  // g: "g_perp, g_zz"
  if (o->g.entries.size() != 2) throw std::invalid_argument(where + ": g cell must hold g_perp and g_zz");
  const TableEntry& gp = o->g.entries[0];
  const TableEntry& gz = o->g.entries[1];
  if (!gz.value) throw std::invalid_argument(where + ": g_zz unresolved");
  double g_perp = 0.0;
  switch (gp.provenance) {
    case Provenance::bounded:
      g_perp = 0.5 * (gp.lower + gp.upper);
      warnings.push_back(where + ": g_perp given as \"" + o->g.raw + "\", using " + short_number(g_perp));
      break;
    case Provenance::unresolved:
      g_perp = *gz.value;
      warnings.push_back(where + ": g_perp unresolved, using g_zz = " + short_number(g_perp));
      break;
    default:
      g_perp = *gp.value;
      break;
  }
  for (const auto* e : {&gp, &gz}) {
    if (e->provenance == Provenance::literature) warnings.push_back(where + ": g value taken from literature");
    if (e->provenance == Provenance::partial) warnings.push_back(where + ": g value only partially resolved");
  }
  p.g_principal = {g_perp, g_perp, *gz.value};

  // A: "xx, yy, zz" or "xx=yy, zz"
  std::vector<double> a;
  for (const auto& e : o->A.entries) {
    if (!e.value) throw std::invalid_argument(where + ": hyperfine component unresolved");
    a.push_back(*e.value);
    if (e.provenance == Provenance::partial) warnings.push_back(where + ": hyperfine value only partially resolved");
    if (e.provenance == Provenance::literature) warnings.push_back(where + ": hyperfine value taken from literature");
  }
  if (a.size() == 3) p.A_principal = {a[0], a[1], a[2]};
  else if (a.size() == 2) p.A_principal = {a[0], a[0], a[1]};
  else throw std::invalid_argument(where + ": hyperfine cell must hold 2 or 3 values");

  if (o->angles.resolved()) {
    if (o->angles.entries.size() != 3) throw std::invalid_argument(where + ": angle cell must hold 3 values");
    for (int k = 0; k < 3; ++k) p.A_angles[k] = o->angles.entries[k].value.value_or(0.0);
  }
  p.validate();
  return p;
}

std::string describe(const SiteRecord& s) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%s-SiC %s (%s), site %s\n", s.polytype.c_str(), s.label.c_str(),
                greek_of(s.label).c_str(), s.assignment.c_str());
  out += line;
  auto row = [&](const char* name, const TableField& f, const char* unit) {
    std::snprintf(line, sizeof line, "  %-22s %-24s %s%s\n", name, f.raw.c_str(), unit, flags_of(f).c_str());
    out += line;
  };
  row("ES1 - GS1", s.es1_gs1_nm, "nm");
  std::snprintf(line, sizeof line, "  %-22s %.3f GHz\n", "ES1 - GS1 frequency", s.optical_frequency_ghz());
  out += line;
  row("GS2 - GS1", s.gs2_gs1_ghz, "GHz");
  row("ES2 - ES1", s.es2_es1_ghz, "GHz");
  row("ES3 - ES2", s.es3_es2_ghz, "GHz");
  row("Debye-Waller", s.dw_percent, "%");
  row("lifetime", s.lifetime_ns, "ns");
  for (const auto& o : s.orbitals) {
    const std::string g = o.name + " g (xx,yy; zz)";
    const std::string a = o.name + " A";
    const std::string t = o.name + " angles";
    row(g.c_str(), o.g, "");
    row(a.c_str(), o.A, "MHz");
    if (o.angles.resolved()) row(t.c_str(), o.angles, "deg");
  }
  return out;
}

}  // namespace spinforge
