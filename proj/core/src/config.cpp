#include "masersim/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "masersim/csv.hpp"
#include "masersim/errors.hpp"

namespace masersim {

namespace {

struct TomlValue {
  enum class Kind { string, number, boolean, number_array };
  Kind kind = Kind::number;
  std::string text;  // string payload, or the raw numeric token
  double number = 0.0;
  bool boolean = false;
  std::vector<double> array;
  std::size_t line = 0;
  mutable bool used = false;
};

// Keys are fully qualified as "section.key"; std::map keeps unknown-key
// reporting deterministic.
using TomlTable = std::map<std::string, TomlValue>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"')
      in_string = !in_string;
    else if (line[i] == '#' && !in_string)
      return line.substr(0, i);
  }
  return line;
}

bool bare_key_ok(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

bool parse_double_token(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

TomlValue parse_value(const std::filesystem::path& path, std::string_view raw,
                      std::size_t line_no) {
  TomlValue v;
  v.line = line_no;
  if (raw.size() >= 2 && raw.front() == '"') {
    if (raw.back() != '"' ||
        raw.find('"', 1) != raw.size() - 1)
      throw ParseError(path.string() + ": unterminated or malformed string",
                       line_no);
    v.kind = TomlValue::Kind::string;
    v.text = std::string(raw.substr(1, raw.size() - 2));
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.boolean = (raw == "true");
    return v;
  }
  if (!raw.empty() && raw.front() == '[') {
    if (raw.back() != ']')
      throw ParseError(path.string() + ": array must close on the same line",
                       line_no);
    v.kind = TomlValue::Kind::number_array;
    std::string_view inner = trim(raw.substr(1, raw.size() - 2));
    if (!inner.empty()) {
      std::size_t start = 0;
      while (true) {
        const std::size_t comma = inner.find(',', start);
        const std::string_view tok = trim(
            inner.substr(start, comma == std::string_view::npos
                                    ? std::string_view::npos
                                    : comma - start));
        double x = 0.0;
        if (!parse_double_token(tok, x))
          throw ParseError(path.string() + ": array element is not a number",
                           line_no);
        v.array.push_back(x);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
    }
    return v;
  }
  double x = 0.0;
  if (!parse_double_token(raw, x))
    throw ParseError(path.string() + ": cannot parse value '" +
                         std::string(raw) + "'",
                     line_no);
  v.kind = TomlValue::Kind::number;
  v.number = x;
  v.text = std::string(raw);
  return v;
}

TomlTable parse_toml(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  TomlTable table;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError(path.string() + ": unterminated section header",
                         line_no);
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!bare_key_ok(name))
        throw ParseError(path.string() + ": invalid section name", line_no);
      section = std::string(name);
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(path.string() + ": expected key = value", line_no);
    const std::string_view key = trim(line.substr(0, eq));
    if (!bare_key_ok(key))
      throw ParseError(path.string() + ": invalid key '" + std::string(key) +
                           "'",
                       line_no);
    if (section.empty())
      throw ParseError(path.string() + ": key '" + std::string(key) +
                           "' appears outside any [section]",
                       line_no);
    std::string full = section + "." + std::string(key);
    TomlValue value = parse_value(path, trim(line.substr(eq + 1)), line_no);
    auto [it, inserted] = table.emplace(std::move(full), std::move(value));
    if (!inserted)
      throw ParseError(path.string() + ": duplicate key '" + it->first + "'",
                       line_no);
  }
  return table;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Typed accessors over the parsed table. Every problem becomes a
// ValidationIssue with the full field path; nothing throws until the caller
// has collected the complete list.
class Reader {
 public:
  Reader(const TomlTable& table, std::vector<ValidationIssue>& issues)
      : table_(table), issues_(issues) {}

  void issue(const std::string& field, std::string message) const {
    issues_.push_back({field, std::move(message)});
  }

  bool has_section(const std::string& name) const {
    const std::string prefix = name + ".";
    auto it = table_.lower_bound(prefix);
    return it != table_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
  }

  const TomlValue* find(const std::string& key) const {
    auto it = table_.find(key);
    if (it == table_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  std::optional<double> number_opt(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::number) {
      issue(key, "expected a number");
      return std::nullopt;
    }
    return v->number;
  }

  double finite_or(const std::string& key, double fallback) const {
    auto v = number_opt(key);
    return v.value_or(fallback);  // parser only yields finite numbers
  }

  double positive_req(const std::string& key) const {
    if (table_.find(key) == table_.end()) {
      issue(key, "missing (required)");
      return kNaN;
    }
    auto v = number_opt(key);
    if (v && !(*v > 0.0)) {
      issue(key, "must be > 0");
      return kNaN;
    }
    return v.value_or(kNaN);
  }

  double positive_or(const std::string& key, double fallback) const {
    auto v = number_opt(key);
    if (!v) return fallback;
    if (!(*v > 0.0)) {
      issue(key, "must be > 0");
      return fallback;
    }
    return *v;
  }

  std::optional<double> positive_opt(const std::string& key) const {
    auto v = number_opt(key);
    if (v && !(*v > 0.0)) {
      issue(key, "must be > 0");
      return std::nullopt;
    }
    return v;
  }

  double nonneg_req(const std::string& key) const {
    if (table_.find(key) == table_.end()) {
      issue(key, "missing (required)");
      return kNaN;
    }
    auto v = number_opt(key);
    if (v && !(*v >= 0.0)) {
      issue(key, "must be >= 0");
      return kNaN;
    }
    return v.value_or(kNaN);
  }

  double nonneg_or(const std::string& key, double fallback) const {
    auto v = number_opt(key);
    if (!v) return fallback;
    if (!(*v >= 0.0)) {
      issue(key, "must be >= 0");
      return fallback;
    }
    return *v;
  }

  std::size_t count_or(const std::string& key, std::size_t fallback,
                       std::size_t minimum) const {
    auto v = number_opt(key);
    if (!v) return fallback;
    if (*v != std::floor(*v) || *v < static_cast<double>(minimum) ||
        *v > 1e9) {
      issue(key, "must be an integer in [" + std::to_string(minimum) +
                     ", 1e9]");
      return fallback;
    }
    return static_cast<std::size_t>(*v);
  }

  std::uint64_t u64_or(const std::string& key, std::uint64_t fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->kind == TomlValue::Kind::number) {
      std::uint64_t out = 0;
      const char* end = v->text.data() + v->text.size();
      auto [ptr, ec] = std::from_chars(v->text.data(), end, out);
      if (ec == std::errc{} && ptr == end) return out;
    }
    issue(key, "must be a non-negative integer");
    return fallback;
  }

  std::string string_or(const std::string& key, std::string fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::string) {
      issue(key, "expected a quoted string");
      return fallback;
    }
    return v->text;
  }

  std::optional<std::vector<double>> array_opt(const std::string& key) const {
    const TomlValue* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::number_array) {
      issue(key, "expected an array of numbers");
      return std::nullopt;
    }
    return v->array;
  }

  // Integration tolerances share one admissible range.
  double tolerance_or(const std::string& key, double fallback) const {
    auto v = number_opt(key);
    if (!v) return fallback;
    if (!(*v > 0.0 && *v <= 1e-2)) {
      issue(key, "must lie in (0, 1e-2]");
      return fallback;
    }
    return *v;
  }

  void report_unknown_keys() const {
    for (const auto& [key, value] : table_)
      if (!value.used) issue(key, "unknown key");
  }

 private:
  const TomlTable& table_;
  std::vector<ValidationIssue>& issues_;
};

}  // namespace

RunConfig parse_config(const std::filesystem::path& path) {
  const TomlTable table = parse_toml(path);
  std::vector<ValidationIssue> issues;
  const Reader r(table, issues);
  RunConfig cfg;

  cfg.rates.einstein_B = r.positive_req("rates.einstein_B_per_s");
  cfg.rates.gamma_s = r.positive_req("rates.gamma_s_per_s");
  cfg.rates.kappa_c = r.positive_req("rates.kappa_c_per_s");

  const double center = r.finite_or("lineshape.center_MHz", 0.0);
  const double fwhm = r.positive_or("lineshape.fwhm_MHz", 4.0);
  const double n_below = r.nonneg_or("lineshape.n_max_below", 2e11);
  const double n_above = r.nonneg_or("lineshape.n_max_above", 6e12);
  cfg.lineshape.below = {n_below, center, fwhm};
  cfg.lineshape.above = {n_above, center, fwhm};
  cfg.lineshape.grid_half_span_MHz =
      r.positive_or("lineshape.grid_half_span_MHz", 8.0);
  cfg.lineshape.grid_points = r.count_or("lineshape.grid_points", 1601, 3);

  // Cross-section check: the steady-state map has a pole at kappa_c/(3B),
  // so simulated peaks must stay below it. Only meaningful once the rates
  // themselves passed.
  if (cfg.rates.einstein_B > 0 && cfg.rates.kappa_c > 0) {
    const double n_th = cfg.rates.kappa_c / (3.0 * cfg.rates.einstein_B);
    const double limit = n_th * (1.0 - 1e-9);
    if (n_below >= limit)
      r.issue("lineshape.n_max_below",
              "must lie below the masing threshold kappa_c/(3*einstein_B)");
    if (n_above >= limit)
      r.issue("lineshape.n_max_above",
              "must lie below the masing threshold kappa_c/(3*einstein_B)");
  }

  if (r.has_section("hfi")) {
    HfiConfig h;
    auto rho = r.array_opt("hfi.rho");
    if (!rho) {
      r.issue("hfi.rho",
              "proton densities are mandatory for the hfi subcommand");
    } else {
      h.protons.rho = *rho;
    }
    if (const TomlValue* azz = r.find("hfi.a_zz_MHz")) {
      if (azz->kind == TomlValue::Kind::number) {
        h.protons.a_zz_MHz.assign(h.protons.rho.size(), azz->number);
      } else if (azz->kind == TomlValue::Kind::number_array) {
        h.protons.a_zz_MHz = azz->array;
      } else {
        r.issue("hfi.a_zz_MHz", "expected a number or an array of numbers");
      }
    } else {
      h.protons.a_zz_MHz.assign(h.protons.rho.size(), -61.0);
    }
    h.protons.e_x_minus_e_y_MHz =
        r.positive_or("hfi.e_x_minus_e_y_MHz", 107.5);
    h.kde_bandwidth_MHz = r.positive_opt("hfi.kde_bandwidth_MHz");
    h.kde_points = r.count_or("hfi.kde_points", 1001, 2);
    h.histogram_bins = r.count_or("hfi.histogram_bins", 1000, 2);
    if (rho) {
      try {
        h.protons.validate();
      } catch (const std::invalid_argument& e) {
        r.issue("hfi", e.what());
      }
    }
    cfg.hfi = std::move(h);
  }

  if (r.has_section("dynamics")) {
    DynamicsConfig d;
    d.initial.inverted_spins = r.nonneg_req("dynamics.initial_inverted_spins");
    d.initial.photons = r.nonneg_req("dynamics.initial_photons");
    d.t_end_s = r.positive_req("dynamics.t_end_s");
    d.rel_tol = r.tolerance_or("dynamics.rel_tol", 1e-8);
    d.abs_tol = r.tolerance_or("dynamics.abs_tol", 1e-3);
    cfg.dynamics = d;
  }

  cfg.fit.model_variant = r.string_or("fit.model_variant", "sum");
  if (cfg.fit.model_variant != "sum" && cfg.fit.model_variant != "split")
    r.issue("fit.model_variant", "must be \"sum\" or \"split\"");
  cfg.fit.options.max_iterations =
      static_cast<int>(r.count_or("fit.max_iterations", 500, 1));
  cfg.fit.options.rss_rel_tol = r.positive_or("fit.rss_rel_tol", 1e-10);
  cfg.fit.options.gradient_tol = r.positive_or("fit.gradient_tol", 1e-8);
  cfg.fit.options.lambda_init = r.positive_or("fit.lambda_init", 1e-3);
  cfg.fit.seed = r.u64_or("fit.seed", 0);

  cfg.detector.volts_per_dB = r.positive_or("detector.volts_per_dB", 0.022);
  cfg.detector.external_attenuation_dB =
      r.finite_or("detector.external_attenuation_dB", 0.0);

  {
    auto t_min = r.number_opt("magnetometry.noise_window_t_min_s");
    auto t_max = r.number_opt("magnetometry.noise_window_t_max_s");
    if (t_min.has_value() != t_max.has_value()) {
      r.issue(t_min ? "magnetometry.noise_window_t_max_s"
                    : "magnetometry.noise_window_t_min_s",
              "both window bounds must be given together");
    } else if (t_min && !(*t_min < *t_max)) {
      r.issue("magnetometry.noise_window_t_max_s",
              "must exceed noise_window_t_min_s");
    } else if (t_min) {
      cfg.magnetometry.noise_window = TimeWindow{*t_min, *t_max};
    }
    cfg.magnetometry.delta_f_Hz = r.positive_opt("magnetometry.delta_f_Hz");
    cfg.magnetometry.b0_T = r.number_opt("magnetometry.b0_T");
  }

  cfg.output_dir = r.string_or("output.dir", "out");
  if (cfg.output_dir.empty()) r.issue("output.dir", "must be non-empty");

  r.report_unknown_keys();
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

const ManifestEntry* DatasetManifest::find(std::string_view role) const {
  for (const auto& e : entries)
    if (e.role == role) return &e;
  return nullptr;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const TomlTable table = parse_toml(path);
  std::vector<ValidationIssue> issues;
  DatasetManifest manifest;
  const std::filesystem::path base = path.parent_path();

  for (const auto& [key, value] : table) {
    constexpr std::string_view prefix = "inputs.";
    if (key.compare(0, prefix.size(), prefix) != 0) {
      issues.push_back({key, "manifests hold a single [inputs] section"});
      continue;
    }
    const std::string role = key.substr(prefix.size());
    if (role != "spectrum" && role != "background" && role != "trace" &&
        role != "field_response") {
      issues.push_back(
          {key,
           "unknown role (expected spectrum, background, trace, or "
           "field_response)"});
      continue;
    }
    if (value.kind != TomlValue::Kind::string) {
      issues.push_back({key, "expected a quoted file path"});
      continue;
    }
    std::filesystem::path file = value.text;
    if (file.is_relative()) file = base / file;
    manifest.entries.push_back({role, std::move(file), 0});
  }
  if (manifest.entries.empty() && issues.empty())
    issues.push_back({"inputs", "no inputs declared"});
  if (!issues.empty()) throw ValidationError(std::move(issues));

  for (auto& entry : manifest.entries) {
    if (!std::filesystem::exists(entry.path))
      throw IoError("manifest input '" + entry.role + "' not found: " +
                    entry.path.string());
    entry.checksum = checksum_file(entry.path);
  }
  return manifest;
}

}  // namespace masersim
