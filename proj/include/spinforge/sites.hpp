#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinforge/spin_core.hpp"

namespace spinforge {

/// How a tabulated entry was obtained.
enum class Provenance {
  measured,
  literature,   // "*"
  partial,      // "**", resolved by comparison with other sites
  unresolved,   // "-"
  bounded,      // "0 < g < 1"
  upper_bound,  // "≤ 25"
};

const char* to_string(Provenance p);

struct TableEntry {
  std::optional<double> value;
  std::optional<double> uncertainty;  // as printed, in units of the value
  Provenance provenance = Provenance::measured;
  double lower = 0.0;  // bounded entries only
  double upper = 0.0;
};

/// One table cell: the printed text plus its comma-separated components.
struct TableField {
  std::string raw;
  std::vector<TableEntry> entries;

  bool resolved() const;  // false for a bare "-"
};

/// Parses printed cells such as "1.870(5)", "0*", "0 < g < 1", "≤ 25" or "-".
/// Throws std::invalid_argument on anything else.
TableField parse_table_field(const std::string& raw);

struct OrbitalRecord {
  std::string name;  // GS1, GS2, ES1
  TableField g;       // g_xx,yy ; g_zz
  TableField A;       // A_xx, A_yy, A_zz or A_xx,yy ; A_zz
  TableField angles;  // theta_xx, theta_yy, theta_zz

  bool available() const { return A.resolved() || g.resolved(); }
};

struct SiteRecord {
  std::string polytype;    // 4H, 6H
  std::string label;       // alpha, beta, gamma
  std::string assignment;  // h, k, k1, k2
  TableField es1_gs1_nm;
  TableField gs2_gs1_ghz;
  TableField es2_es1_ghz;
  TableField es3_es2_ghz;
  TableField dw_percent;
  TableField lifetime_ns;
  std::vector<OrbitalRecord> orbitals;

  std::string id() const { return polytype + ":" + label; }
  const OrbitalRecord* orbital(const std::string& name) const;
  /// ES1-GS1 optical frequency from the vacuum wavelength, GHz.
  double optical_frequency_ghz() const;
};

class SiteLookupError : public std::invalid_argument {
 public:
  SiteLookupError(const std::string& what, std::vector<std::string> suggestions)
      : std::invalid_argument(what), suggestions_(std::move(suggestions)) {}
  const std::vector<std::string>& suggestions() const { return suggestions_; }

 private:
  std::vector<std::string> suggestions_;
};

struct SiteDatabase {
  std::vector<SiteRecord> sites;
  std::string source;

  /// Parses and validates the JSON database.  Throws std::invalid_argument.
  static SiteDatabase from_json(const std::string& text, const std::string& source);
  /// Built-in table, or the file named by SPINFORGE_SITES_DB when set.
  static SiteDatabase load();
  static SiteDatabase builtin();

  /// Accepts "4H:beta", "4H-beta", "4h:β" and similar.  Throws SiteLookupError.
  const SiteRecord& find(const std::string& id) const;
};

/// Environment variable that points at a replacement database file.
inline constexpr const char* kSitesDbEnv = "SPINFORGE_SITES_DB";

/// Spin model for one orbital of a site.  Partially resolved entries are
/// defaulted here, each default recorded in `warnings`: "0 < g < 1" becomes
/// 0.5 and an unresolved g_perp takes the orbital's g_zz.  Throws
/// std::invalid_argument when the orbital has no spin data.
SpinParams to_spin_params(const SiteRecord& site, const std::string& orbital, std::vector<std::string>& warnings);

/// Human-readable dump of one record with provenance flags.
std::string describe(const SiteRecord& site);

}  // namespace spinforge
