#include "gridflow/quantities.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

#include "gridflow/error.hpp"
#include "gridflow/hash.hpp"

namespace gridflow {

namespace {

//                    L  M  T  I  Th N  J
constexpr Dimension kNone{0, 0, 0, 0, 0, 0, 0};
constexpr Dimension kLength{1, 0, 0, 0, 0, 0, 0};
constexpr Dimension kArea{2, 0, 0, 0, 0, 0, 0};
constexpr Dimension kTime{0, 0, 1, 0, 0, 0, 0};
constexpr Dimension kTemperature{0, 0, 0, 0, 1, 0, 0};
constexpr Dimension kMass{0, 1, 0, 0, 0, 0, 0};
constexpr Dimension kAmount{0, 0, 0, 0, 0, 1, 0};
constexpr Dimension kEnergy{2, 1, -2, 0, 0, 0, 0};
constexpr Dimension kMolarEnergy{2, 1, -2, 0, 0, -1, 0};
constexpr Dimension kPressure{-1, 1, -2, 0, 0, 0, 0};
constexpr Dimension kDiffusivity{2, 0, -1, 0, 0, 0, 0};
constexpr Dimension kLoading{0, -1, 0, 0, 0, 1, 0};

const std::vector<Unit>& registry() {
  static const std::vector<Unit> table = {
      {"dimensionless", kNone, 1.0},
      {"m", kLength, 1.0},
      {"nm", kLength, 1e-9},
      {"Å", kLength, 1e-10},
      {"m²", kArea, 1.0},
      {"nm²", kArea, 1e-18},
      {"Å²", kArea, 1e-20},
      {"s", kTime, 1.0},
      {"ns", kTime, 1e-9},
      {"ps", kTime, 1e-12},
      {"fs", kTime, 1e-15},
      {"K", kTemperature, 1.0},
      {"kg", kMass, 1.0},
      {"g", kMass, 1e-3},
      {"amu", kMass, 1.66053906660e-27},
      {"mol", kAmount, 1.0},
      {"J", kEnergy, 1.0},
      {"eV", kEnergy, 1.602176634e-19},
      {"J/mol", kMolarEnergy, 1.0},
      {"kJ/mol", kMolarEnergy, 1e3},
      {"kcal/mol", kMolarEnergy, 4184.0},
      {"Pa", kPressure, 1.0},
      {"bar", kPressure, 1e5},
      {"atm", kPressure, 101325.0},
      {"m²/s", kDiffusivity, 1.0},
      {"cm²/s", kDiffusivity, 1e-4},
      {"nm²/ps", kDiffusivity, 1e-6},
      {"Å²/ps", kDiffusivity, 1e-8},
      {"mol/kg", kLoading, 1.0},
  };
  return table;
}

const std::unordered_map<std::string, std::string>& aliases() {
  static const std::unordered_map<std::string, std::string> table = {
      {"1", "dimensionless"},      {"angstrom", "Å"},        {"A", "Å"},
      {"m^2", "m²"},               {"nm^2", "nm²"},          {"A^2", "Å²"},
      {"m^2/s", "m²/s"},           {"cm^2/s", "cm²/s"},      {"nm^2/ps", "nm²/ps"},
      {"A^2/ps", "Å²/ps"},         {"angstrom^2/ps", "Å²/ps"},
  };
  return table;
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidValue, what); }

}  // namespace

namespace units {

const Unit& get(std::string_view name) {
  std::string key(name);
  if (auto it = aliases().find(key); it != aliases().end()) key = it->second;
  for (const auto& u : registry())
    if (u.name == key) return u;
  throw Error(ErrorCode::UnknownUnit, "unknown unit '" + std::string(name) + "'");
}

std::span<const Unit> all() { return registry(); }

const Unit& dimensionless() { return registry().front(); }

}  // namespace units

std::string_view kind_name(ObservableKind kind) noexcept {
  switch (kind) {
    case ObservableKind::Scalar: return "scalar";
    case ObservableKind::Vector3: return "vector3";
    case ObservableKind::Series: return "series";
    case ObservableKind::Table: return "table";
  }
  return "?";
}

std::optional<ObservableKind> parse_kind(std::string_view text) noexcept {
  if (text == "scalar") return ObservableKind::Scalar;
  if (text == "vector3") return ObservableKind::Vector3;
  if (text == "series") return ObservableKind::Series;
  if (text == "table") return ObservableKind::Table;
  return std::nullopt;
}

bool is_identifier(std::string_view s) noexcept {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s[0])) return false;
  for (char c : s)
    if (!alpha(c) && !(c >= '0' && c <= '9') && c != '.' && c != '-') return false;
  return true;
}

// ---------------------------------------------------------------------------
// Observable

Observable Observable::scalar(std::string name, Unit unit, double value) {
  Observable o;
  o.name_ = std::move(name);
  o.kind_ = ObservableKind::Scalar;
  o.unit_ = std::move(unit);
  o.values_ = {value};
  o.validate();
  return o;
}

Observable Observable::vector3(std::string name, Unit unit, std::array<double, 3> v) {
  Observable o;
  o.name_ = std::move(name);
  o.kind_ = ObservableKind::Vector3;
  o.unit_ = std::move(unit);
  o.values_.assign(v.begin(), v.end());
  o.validate();
  return o;
}

Observable Observable::series(std::string name, Unit unit, std::vector<double> indices,
                              std::vector<double> values) {
  Observable o;
  o.name_ = std::move(name);
  o.kind_ = ObservableKind::Series;
  o.unit_ = std::move(unit);
  o.indices_ = std::move(indices);
  o.values_ = std::move(values);
  o.validate();
  return o;
}

Observable Observable::table(std::string name, Unit unit, std::vector<std::string> columns,
                             std::vector<double> values) {
  Observable o;
  o.name_ = std::move(name);
  o.kind_ = ObservableKind::Table;
  o.unit_ = std::move(unit);
  o.columns_ = std::move(columns);
  o.values_ = std::move(values);
  o.validate();
  return o;
}

void Observable::validate() const {
  if (!is_identifier(name_)) invalid("observable name '" + name_ + "' is not an identifier");
  for (double v : values_)
    if (!std::isfinite(v)) invalid("observable '" + name_ + "' has a non-finite value");
  switch (kind_) {
    case ObservableKind::Scalar:
      if (values_.size() != 1) invalid("scalar '" + name_ + "' needs exactly one value");
      break;
    case ObservableKind::Vector3:
      if (values_.size() != 3) invalid("vector3 '" + name_ + "' needs exactly three values");
      break;
    case ObservableKind::Series:
      if (indices_.size() != values_.size())
        invalid("series '" + name_ + "' index/value counts differ");
      for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (!std::isfinite(indices_[i])) invalid("series '" + name_ + "' has a non-finite index");
        if (i > 0 && !(indices_[i] > indices_[i - 1]))
          invalid("series '" + name_ + "' indices must be strictly increasing");
      }
      break;
    case ObservableKind::Table: {
      if (columns_.empty()) invalid("table '" + name_ + "' has no columns");
      std::set<std::string_view> seen;
      for (const auto& c : columns_) {
        if (!is_identifier(c)) invalid("table '" + name_ + "' column '" + c + "' is not an identifier");
        if (!seen.insert(c).second) invalid("table '" + name_ + "' repeats column '" + c + "'");
      }
      if (values_.size() % columns_.size() != 0)
        invalid("table '" + name_ + "' value count is not a multiple of its column count");
      break;
    }
  }
}

double Observable::as_scalar() const {
  if (kind_ != ObservableKind::Scalar) invalid("observable '" + name_ + "' is not a scalar");
  return values_.front();
}

std::size_t Observable::rows() const noexcept {
  switch (kind_) {
    case ObservableKind::Table: return values_.size() / columns_.size();
    case ObservableKind::Series: return values_.size();
    default: return 1;
  }
}

std::size_t Observable::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == column) return i;
  throw Error(ErrorCode::MissingObservable, name_ + "." + std::string(column));
}

Observable Observable::with_unit(const Unit& target) const {
  Observable o = *this;
  const double factor = unit_.scale / target.scale;
  for (double& v : o.values_) v *= factor;
  o.unit_ = target;
  return o;
}

// ---------------------------------------------------------------------------
// Dataset

void Dataset::set_meta(std::string key, std::string value) {
  if (key.empty() || key.find_first_of(" \t\r\n") != std::string::npos)
    invalid("meta key '" + key + "' must be nonempty without whitespace");
  for (auto& [k, v] : meta_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  meta_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> Dataset::meta(std::string_view key) const {
  for (const auto& [k, v] : meta_)
    if (k == key) return v;
  return std::nullopt;
}

void Dataset::add(Observable obs) {
  std::string name = obs.name();
  if (!observables_.emplace(name, std::move(obs)).second)
    invalid("duplicate observable '" + name + "'");
}

void Dataset::put(Observable obs) {
  std::string name = obs.name();
  observables_.insert_or_assign(std::move(name), std::move(obs));
}

const Observable* Dataset::find(std::string_view name) const {
  auto it = observables_.find(name);
  return it == observables_.end() ? nullptr : &it->second;
}

const Observable& Dataset::at(std::string_view name) const {
  if (const auto* o = find(name)) return *o;
  throw Error(ErrorCode::MissingObservable, std::string(name));
}

ExtractionSpec::ExtractionSpec(std::vector<std::pair<std::string, Unit>> items)
    : wanted(std::move(items)) {
  std::set<std::string_view> seen;
  for (const auto& [name, unit] : wanted)
    if (!seen.insert(name).second) invalid("extraction spec names '" + name + "' twice");
}

// ---------------------------------------------------------------------------
// Conversion and projection

Observable convert(const Observable& q, const Unit& target) {
  if (!q.unit().convertible_to(target))
    throw Error(ErrorCode::DimensionMismatch,
                q.name() + ": cannot convert " + q.unit().name + " to " + target.name);
  return q.with_unit(target);
}

Dataset project(const Dataset& ds, const ExtractionSpec& spec) {
  Dataset out;
  out.set_meta("derived-from", content_hash(ds));
  for (const auto& [name, unit] : spec.wanted) {
    const Observable* q = ds.find(name);
    if (!q) throw Error(ErrorCode::MissingObservable, name);
    if (!q->unit().convertible_to(unit))
      throw Error(ErrorCode::DimensionMismatch,
                  name + ": cannot convert " + q->unit().name + " to " + unit.name);
    out.add(q->with_unit(unit));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical text format

std::string format_real(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

namespace {

void append_real(std::string& out, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
  out.push_back(' ');
  out.append(buf, res.ptr);
}

std::string escape_meta(std::string_view v) {
  std::string out;
  for (char c : v) {
    if (c == '%') out += "%25";
    else if (c == '\n') out += "%0A";
    else if (c == '\r') out += "%0D";
    else out.push_back(c);
  }
  return out;
}

std::string unescape_meta(std::string_view v, std::size_t line) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != '%') {
      out.push_back(v[i]);
      continue;
    }
    auto code = v.substr(i + 1, 2);
    if (code == "25") out.push_back('%');
    else if (code == "0A") out.push_back('\n');
    else if (code == "0D") out.push_back('\r');
    else throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": bad escape in meta value");
    i += 2;
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& reason) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + reason);
}

class LineReader {
 public:
  LineReader(std::string_view line, std::size_t number) : rest_(line), number_(number) {}

  std::string_view word() {
    if (rest_.empty()) parse_fail(number_, "unexpected end of line");
    auto pos = rest_.find(' ');
    auto w = rest_.substr(0, pos);
    rest_ = pos == std::string_view::npos ? std::string_view{} : rest_.substr(pos + 1);
    if (w.empty()) parse_fail(number_, "empty field");
    return w;
  }
  double real() {
    auto w = word();
    double v = 0;
    auto res = std::from_chars(w.data(), w.data() + w.size(), v);
    if (res.ec != std::errc{} || res.ptr != w.data() + w.size())
      parse_fail(number_, "bad number '" + std::string(w) + "'");
    return v;
  }
  std::size_t count() {
    auto w = word();
    std::size_t v = 0;
    auto res = std::from_chars(w.data(), w.data() + w.size(), v);
    if (res.ec != std::errc{} || res.ptr != w.data() + w.size())
      parse_fail(number_, "bad count '" + std::string(w) + "'");
    return v;
  }
  std::string_view rest() const { return rest_; }
  void expect_end() const {
    if (!rest_.empty()) parse_fail(number_, "trailing fields");
  }

 private:
  std::string_view rest_;
  std::size_t number_;
};

}  // namespace

std::string canonical_serialize(const Dataset& ds) {
  std::string out = "dataset-v1\nsizes " + std::to_string(ds.meta_entries().size()) + " " +
                    std::to_string(ds.observables().size()) + "\n";
  for (const auto& [k, v] : ds.meta_entries()) out += "meta " + k + " " + escape_meta(v) + "\n";
  for (const auto& [name, o] : ds.observables()) {
    out += "obs " + name + " " + std::string(kind_name(o.kind())) + " " + o.unit().name;
    switch (o.kind()) {
      case ObservableKind::Scalar:
      case ObservableKind::Vector3:
        for (double v : o.values()) append_real(out, v);
        break;
      case ObservableKind::Series:
        out += " " + std::to_string(o.values().size());
        for (std::size_t i = 0; i < o.values().size(); ++i) {
          append_real(out, o.indices()[i]);
          append_real(out, o.values()[i]);
        }
        break;
      case ObservableKind::Table:
        out += " " + std::to_string(o.rows()) + " " + std::to_string(o.columns().size());
        for (const auto& c : o.columns()) out += " " + c;
        for (double v : o.values()) append_real(out, v);
        break;
    }
    out.push_back('\n');
  }
  return out;
}

Dataset canonical_deserialize(std::string_view bytes) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start < bytes.size()) {
      auto nl = bytes.find('\n', start);
      if (nl == std::string_view::npos) parse_fail(lines.size() + 1, "missing final newline");
      lines.push_back(bytes.substr(start, nl - start));
      start = nl + 1;
    }
  }
  if (lines.empty() || lines[0] != "dataset-v1") parse_fail(1, "expected header 'dataset-v1'");
  if (lines.size() < 2) parse_fail(2, "expected 'sizes' line");
  LineReader sizes(lines[1], 2);
  if (sizes.word() != "sizes") parse_fail(2, "expected 'sizes' line");
  const std::size_t n_meta = sizes.count();
  const std::size_t n_obs = sizes.count();
  sizes.expect_end();
  if (lines.size() != 2 + n_meta + n_obs)
    parse_fail(lines.size() + 1, "line count does not match sizes header");

  Dataset ds;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    LineReader r(lines[i], ln);
    auto tag = r.word();
    try {
      if (i < 2 + n_meta) {
        if (tag != "meta") parse_fail(ln, "expected 'meta'");
        auto key = r.word();
        if (ds.meta(key)) parse_fail(ln, "duplicate meta key");
        ds.set_meta(std::string(key), unescape_meta(r.rest(), ln));
        continue;
      }
      if (tag != "obs") parse_fail(ln, "expected 'obs'");
      std::string name(r.word());
      auto kind = parse_kind(r.word());
      if (!kind) parse_fail(ln, "unknown observable kind");
      const Unit unit = units::get(r.word());
      switch (*kind) {
        case ObservableKind::Scalar:
          ds.add(Observable::scalar(name, unit, r.real()));
          break;
        case ObservableKind::Vector3: {
          std::array<double, 3> v{r.real(), r.real(), r.real()};
          ds.add(Observable::vector3(name, unit, v));
          break;
        }
        case ObservableKind::Series: {
          const std::size_t n = r.count();
          std::vector<double> idx, val;
          idx.reserve(n);
          val.reserve(n);
          for (std::size_t k = 0; k < n; ++k) {
            idx.push_back(r.real());
            val.push_back(r.real());
          }
          ds.add(Observable::series(name, unit, std::move(idx), std::move(val)));
          break;
        }
        case ObservableKind::Table: {
          const std::size_t rows = r.count();
          const std::size_t cols = r.count();
          std::vector<std::string> columns;
          for (std::size_t c = 0; c < cols; ++c) columns.emplace_back(r.word());
          std::vector<double> val;
          val.reserve(rows * cols);
          for (std::size_t k = 0; k < rows * cols; ++k) val.push_back(r.real());
          ds.add(Observable::table(name, unit, std::move(columns), std::move(val)));
          break;
        }
      }
      r.expect_end();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseError) throw;
      parse_fail(ln, e.detail());
    }
  }

  // Exactly one byte encoding per dataset: anything that parses but does not
  // re-serialize identically is rejected.
  const std::string canonical = canonical_serialize(ds);
  if (canonical != bytes) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(canonical.size(), bytes.size()); ++i) {
      if (canonical[i] != bytes[i]) break;
      if (bytes[i] == '\n') ++line;
    }
    parse_fail(line, "non-canonical encoding");
  }
  return ds;
}

std::string content_hash(const Dataset& ds) { return sha256_hex(canonical_serialize(ds)); }

}  // namespace gridflow
