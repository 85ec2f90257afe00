#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "gridflow/error.hpp"
#include "gridflow/hash.hpp"
#include "gridflow/quantities.hpp"

using namespace gridflow;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Dataset sample() {
  Dataset ds;
  ds.set_meta("program", "gulp 4.0");
  ds.set_meta("note", "two\nlines 100% sure");
  ds.add(Observable::scalar("T", units::get("K"), 300.0));
  ds.add(Observable::vector3("cell", units::get("Å"), {24.555, 24.555, 24.555}));
  ds.add(Observable::series("msd", units::get("Å²"), {0, 1, 2.5}, {0.0, 1.0 / 3.0, 2.0e-7}));
  ds.add(Observable::table("sites", units::get("nm"), {"x", "y"}, {0.1, 0.2, -0.3, 1e300}));
  return ds;
}

}  // namespace

TEST_SUITE("quantities") {
  TEST_CASE("registry covers the case-study units") {
    CHECK(units::all().size() >= 20);
    for (const char* name : {"Å", "nm", "m", "fs", "ps", "s", "K", "amu", "kg", "mol", "eV", "kJ/mol", "kcal/mol",
                             "bar", "Pa", "dimensionless", "m²/s", "Å²/ps"})
      CHECK_NOTHROW(units::get(name));
    CHECK(units::get("angstrom") == units::get("Å"));
    CHECK(units::get("A^2/ps") == units::get("Å²/ps"));
    CHECK(code_of([] { units::get("furlong"); }) == ErrorCode::UnknownUnit);
    std::vector<std::string> names;
    for (const auto& u : units::all()) {
      CHECK(u.scale > 0);
      names.push_back(u.name);
    }
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
  }

  TEST_CASE("molar energy is its own dimension") {
    CHECK_FALSE(units::get("kJ/mol").convertible_to(units::get("eV")));
    CHECK(units::get("kJ/mol").convertible_to(units::get("kcal/mol")));
  }

  TEST_CASE("convert examples") {
    auto q = convert(Observable::scalar("L", units::get("Å"), 5.0), units::get("nm"));
    CHECK(q.as_scalar() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(q.name() == "L");
    CHECK(q.kind() == ObservableKind::Scalar);
    auto e = convert(Observable::scalar("E", units::get("kcal/mol"), 1.0), units::get("kJ/mol"));
    CHECK(e.as_scalar() == doctest::Approx(4.184).epsilon(1e-15));
    CHECK(code_of([] { convert(Observable::scalar("t", units::get("s"), 3.0), units::get("m")); }) ==
          ErrorCode::DimensionMismatch);
  }

  TEST_CASE("conversion round trip and composition across the registry") {
    const double v = 1.2345678901234567;
    for (const auto& u1 : units::all())
      for (const auto& u2 : units::all()) {
        if (!u1.convertible_to(u2)) continue;
        auto q = Observable::scalar("q", u1, v);
        auto back = convert(convert(q, u2), u1);
        CHECK(rel(back.as_scalar(), v) <= 1e-12);
        for (const auto& u3 : units::all()) {
          if (!u3.convertible_to(u1)) continue;
          CHECK(rel(convert(convert(q, u2), u3).as_scalar(), convert(q, u3).as_scalar()) <= 1e-12);
        }
      }
  }

  TEST_CASE("observable validation") {
    const Unit k = units::get("K");
    CHECK(code_of([&] { Observable::scalar("", k, 1); }) == ErrorCode::InvalidValue);
    CHECK(code_of([&] { Observable::scalar("x", k, NAN); }) == ErrorCode::InvalidValue);
    CHECK(code_of([&] { Observable::scalar("x", k, INFINITY); }) == ErrorCode::InvalidValue);
    CHECK(code_of([&] { Observable::series("s", k, {0, 2, 1}, {1, 2, 3}); }) == ErrorCode::InvalidValue);
    CHECK(code_of([&] { Observable::series("s", k, {0, 0}, {1, 2}); }) == ErrorCode::InvalidValue);
    CHECK(code_of([&] { Observable::table("t", k, {"a", "a"}, {1, 2}); }) == ErrorCode::InvalidValue);
    CHECK(code_of([&] { Observable::table("t", k, {"a", "b"}, {1, 2, 3}); }) == ErrorCode::InvalidValue);
    Dataset ds;
    ds.add(Observable::scalar("x", k, 1));
    CHECK(code_of([&] { ds.add(Observable::scalar("x", k, 2)); }) == ErrorCode::InvalidValue);
    CHECK(code_of([] { ExtractionSpec({{"a", units::get("K")}, {"a", units::get("K")}}); }) ==
          ErrorCode::InvalidValue);
  }

  TEST_CASE("project examples") {
    Dataset ds;
    ds.add(Observable::scalar("T", units::get("K"), 300));
    ds.add(Observable::scalar("P", units::get("bar"), 1));
    auto p = project(ds, ExtractionSpec({{"T", units::get("K")}}));
    CHECK(p.observables().size() == 1);
    CHECK(p.at("T").as_scalar() == 300);
    CHECK(p.meta("derived-from") == content_hash(ds));

    Dataset l;
    l.add(Observable::scalar("L", units::get("Å"), 10));
    CHECK(project(l, ExtractionSpec({{"L", units::get("nm")}})).at("L").as_scalar() ==
          doctest::Approx(1.0).epsilon(1e-15));

    CHECK(code_of([&] { project(ds, ExtractionSpec({{"rho", units::get("K")}})); }) ==
          ErrorCode::MissingObservable);
    CHECK(code_of([&] { project(ds, ExtractionSpec({{"T", units::get("bar")}})); }) ==
          ErrorCode::DimensionMismatch);
  }

  TEST_CASE("empty dataset is a fixed two-line document") {
    Dataset ds;
    const auto bytes = canonical_serialize(ds);
    CHECK(bytes == "dataset-v1\nsizes 0 0\n");
    CHECK(canonical_deserialize(bytes) == ds);
  }

  TEST_CASE("round trip keeps every kind and meta escapes") {
    Dataset ds = sample();
    const auto bytes = canonical_serialize(ds);
    CHECK(canonical_deserialize(bytes) == ds);
    CHECK(canonical_deserialize(bytes).meta("note") == "two\nlines 100% sure");
  }

  TEST_CASE("numbers use 17 significant digits") {
    CHECK(format_real(0.1) == "1.0000000000000001e-01");
    CHECK(format_real(-3.0) == "-3.0000000000000000e+00");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
      Dataset ds;
      double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
      ds.add(Observable::scalar("x", units::get("m"), v));
      CHECK(canonical_deserialize(canonical_serialize(ds)).at("x").as_scalar() == v);
    }
  }

  TEST_CASE("serialization is independent of insertion order") {
    std::vector<Observable> obs = {Observable::scalar("a", units::get("K"), 1),
                                   Observable::scalar("b", units::get("K"), 2),
                                   Observable::vector3("c", units::get("m"), {1, 2, 3})};
    std::vector<int> order = {0, 1, 2};
    std::set<std::string> digests;
    do {
      Dataset ds;
      for (int i : order) ds.add(obs[i]);
      digests.insert(sha256_hex(canonical_serialize(ds)));
    } while (std::next_permutation(order.begin(), order.end()));
    CHECK(digests.size() == 1);
  }

  TEST_CASE("meta keeps insertion order") {
    Dataset a, b;
    a.set_meta("x", "1");
    a.set_meta("y", "2");
    b.set_meta("y", "2");
    b.set_meta("x", "1");
    CHECK(canonical_serialize(a) != canonical_serialize(b));
  }

  TEST_CASE("single-byte mutation changes the id or fails to parse") {
    const Dataset ds = sample();
    const std::string bytes = canonical_serialize(ds);
    const std::string id = content_hash(ds);
    std::size_t rejected = 0, rehashed = 0;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      for (int delta : {1, -1, 0x20}) {
        std::string m = bytes;
        m[i] = static_cast<char>(m[i] ^ delta);
        if (m == bytes) continue;
        try {
          Dataset d = canonical_deserialize(m);
          CHECK(content_hash(d) != id);
          ++rehashed;
        } catch (const Error& e) {
          CHECK(e.code() == ErrorCode::ParseError);
          ++rejected;
        }
      }
    }
    CHECK(rejected + rehashed > 0);
  }

  TEST_CASE("malformed documents raise ParseError") {
    for (const char* bad : {"", "dataset-v2\nsizes 0 0\n", "dataset-v1\nsizes 0 0", "dataset-v1\nsizes 1 0\n",
                            "dataset-v1\nsizes 0 1\nobs x scalar K nope\n",
                            "dataset-v1\nsizes 0 1\nobs x scalar K 1.0e+00\n"})
      CHECK(code_of([&] { canonical_deserialize(bad); }) == ErrorCode::ParseError);
  }

  TEST_CASE("content hash is sha-256 of the canonical bytes") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    Dataset ds = sample();
    CHECK(content_hash(ds) == sha256_hex(canonical_serialize(ds)));
  }
}
