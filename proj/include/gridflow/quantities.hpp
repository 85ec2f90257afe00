#pragma once

// Unit-tagged physical observables: the intermediate format every service
// reads and writes. Datasets serialize to a canonical line-oriented text
// document whose SHA-256 is the dataset's content id.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gridflow {

// Exponents over (length, mass, time, current, temperature, amount,
// luminosity).
using Dimension = std::array<int, 7>;

struct Unit {
  std::string name;
  Dimension dimension{};
  double scale = 1.0;  // factor to the SI-coherent unit

  bool convertible_to(const Unit& other) const noexcept {
    return dimension == other.dimension;
  }
  friend bool operator==(const Unit& a, const Unit& b) noexcept {
    return a.name == b.name;
  }
};

namespace units {
// Throws UnknownUnit. Accepts the registry name or an ASCII alias
// ("angstrom", "A^2/ps", ...).
const Unit& get(std::string_view name);
std::span<const Unit> all();
const Unit& dimensionless();
}  // namespace units

enum class ObservableKind { Scalar, Vector3, Series, Table };

std::string_view kind_name(ObservableKind kind) noexcept;
std::optional<ObservableKind> parse_kind(std::string_view text) noexcept;

class Observable {
 public:
  static Observable scalar(std::string name, Unit unit, double value);
  static Observable vector3(std::string name, Unit unit, std::array<double, 3> v);
  static Observable series(std::string name, Unit unit, std::vector<double> indices,
                           std::vector<double> values);
  // Row-major values, rows x columns.size().
  static Observable table(std::string name, Unit unit, std::vector<std::string> columns,
                          std::vector<double> values);

  const std::string& name() const noexcept { return name_; }
  ObservableKind kind() const noexcept { return kind_; }
  const Unit& unit() const noexcept { return unit_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& indices() const noexcept { return indices_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }

  double as_scalar() const;
  std::size_t rows() const noexcept;
  std::size_t column_index(std::string_view column) const;
  double at(std::size_t row, std::size_t col) const { return values_[row * columns_.size() + col]; }

  // Same shape, values rescaled to `target`.
  Observable with_unit(const Unit& target) const;

  friend bool operator==(const Observable&, const Observable&) = default;

 private:
  Observable() = default;
  void validate() const;

  std::string name_;
  ObservableKind kind_ = ObservableKind::Scalar;
  Unit unit_;
  std::vector<double> values_;
  std::vector<double> indices_;       // series only
  std::vector<std::string> columns_;  // table only
};

class Dataset {
 public:
  using Meta = std::vector<std::pair<std::string, std::string>>;

  // Replaces an existing key in place, otherwise appends.
  void set_meta(std::string key, std::string value);
  std::optional<std::string> meta(std::string_view key) const;
  const Meta& meta_entries() const noexcept { return meta_; }

  // Throws InvalidValue on a duplicate name.
  void add(Observable obs);
  // Inserts or replaces.
  void put(Observable obs);
  const Observable* find(std::string_view name) const;
  const Observable& at(std::string_view name) const;  // MissingObservable
  const std::map<std::string, Observable, std::less<>>& observables() const noexcept {
    return observables_;
  }
  bool empty() const noexcept { return observables_.empty() && meta_.empty(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  Meta meta_;
  std::map<std::string, Observable, std::less<>> observables_;
};

struct ExtractionSpec {
  std::vector<std::pair<std::string, Unit>> wanted;

  ExtractionSpec() = default;
  explicit ExtractionSpec(std::vector<std::pair<std::string, Unit>> items);
  bool empty() const noexcept { return wanted.empty(); }
  friend bool operator==(const ExtractionSpec&, const ExtractionSpec&) = default;
};

Observable convert(const Observable& q, const Unit& target);
Dataset project(const Dataset& ds, const ExtractionSpec& spec);

std::string canonical_serialize(const Dataset& ds);
Dataset canonical_deserialize(std::string_view bytes);
std::string content_hash(const Dataset& ds);

// Shared with other line formats: 17 significant digits, scientific.
std::string format_real(double v);
bool is_identifier(std::string_view s) noexcept;

}  // namespace gridflow
