#include "gridflow/simgrid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gridflow/dsl.hpp"
#include "gridflow/error.hpp"

namespace gridflow::simgrid {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::BadParams, msg); }

std::string num(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(ErrorCode::ParseError, std::string(what) + ": bad number '" + std::string(s) + "'");
  return v;
}

long parse_long(std::string_view s, std::string_view what) {
  s = trim(s);
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorCode::ParseError, std::string(what) + ": bad integer '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    auto nl = text.find('\n');
    out.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  for (auto w : split(s, ' '))
    if (!trim(w).empty()) out.push_back(trim(w));
  return out;
}

double real_param(const ParamMap& p, const std::string& key, std::optional<double> fallback = std::nullopt) {
  auto it = p.find(key);
  if (it == p.end()) {
    if (fallback) return *fallback;
    bad("missing parameter '" + key + "'");
  }
  try {
    return parse_real(it->second, key);
  } catch (const Error&) {
    bad("parameter '" + key + "' is not a number: '" + it->second + "'");
  }
}

long int_param(const ParamMap& p, const std::string& key, std::optional<long> fallback = std::nullopt) {
  const double v = real_param(p, key, fallback ? std::optional<double>(static_cast<double>(*fallback)) : std::nullopt);
  if (v != std::floor(v) || std::abs(v) > 1e15) bad("parameter '" + key + "' must be an integer");
  return static_cast<long>(v);
}

std::uint64_t seed_param(const ParamMap& p) {
  auto it = p.find("seed");
  if (it == p.end()) return 0;
  std::uint64_t v = 0;
  auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (res.ec != std::errc() || res.ptr != it->second.data() + it->second.size())
    bad("parameter 'seed' must be an unsigned integer");
  return v;
}

const Unit& U(std::string_view name) { return units::get(name); }

std::vector<int> occupancy_of(const Dataset& ds) {
  const Observable& occ = ds.at("occupancy");
  if (occ.kind() != ObservableKind::Table) bad("occupancy must be a table");
  const std::size_t col = occ.column_index("occupied");
  std::vector<int> out(occ.rows());
  for (std::size_t r = 0; r < occ.rows(); ++r) out[r] = occ.at(r, col) != 0.0 ? 1 : 0;
  return out;
}

double scalar_in(const Dataset& ds, std::string_view name, std::string_view unit) {
  return ds.at(name).with_unit(U(unit)).as_scalar();
}

}  // namespace

// ---------------------------------------------------------------------------
// lattice: format A
//
//   ZEODB-EXPORT,1D,<L>,<spacing Å>
//   site,x_A
//   0,0
//   ...

std::string lattice_native(const ParamMap& params) {
  const long L = int_param(params, "L");
  const double spacing = real_param(params, "spacing", 1.0);
  if (L < 2) bad("lattice size L must be >= 2, got " + std::to_string(L));
  if (!(spacing > 0)) bad("lattice spacing must be positive");
  std::string out = "ZEODB-EXPORT,1D," + std::to_string(L) + "," + num(spacing) + "\nsite,x_A\n";
  for (long i = 0; i < L; ++i) out += std::to_string(i) + "," + num(static_cast<double>(i) * spacing) + "\n";
  return out;
}

Dataset parse_lattice_native(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.size() < 2) throw Error(ErrorCode::ParseError, "lattice: truncated");
  auto head = split(lines[0], ',');
  if (head.size() != 4 || head[0] != "ZEODB-EXPORT" || head[1] != "1D")
    throw Error(ErrorCode::ParseError, "lattice: bad header");
  const long L = parse_long(head[2], "lattice size");
  const double spacing = parse_real(head[3], "lattice spacing");
  if (trim(lines[1]) != "site,x_A") throw Error(ErrorCode::ParseError, "lattice: bad column header");
  if (L < 2 || lines.size() < static_cast<std::size_t>(L) + 2)
    throw Error(ErrorCode::ParseError, "lattice: row count does not match header");
  std::vector<double> xs;
  for (long i = 0; i < L; ++i) {
    auto cells = split(lines[static_cast<std::size_t>(i) + 2], ',');
    if (cells.size() != 2 || parse_long(cells[0], "site index") != i)
      throw Error(ErrorCode::ParseError, "lattice: bad row " + std::to_string(i));
    xs.push_back(parse_real(cells[1], "site coordinate"));
  }
  for (std::size_t i = static_cast<std::size_t>(L) + 2; i < lines.size(); ++i)
    if (!trim(lines[i]).empty()) throw Error(ErrorCode::ParseError, "lattice: trailing data");
  Dataset ds;
  ds.add(Observable::table("sites", U("Å"), {"x"}, std::move(xs)));
  ds.add(Observable::scalar("cell_length", U("Å"), static_cast<double>(L) * spacing));
  return ds;
}

Dataset mock_lattice(const ParamMap& params) { return parse_lattice_native(lattice_native(params)); }

// ---------------------------------------------------------------------------
// cbmc: format B, `key = value` lines, `#` comments.

std::string cbmc_native(const Dataset& lattice, const ParamMap& params) {
  const Observable& sites = lattice.at("sites");
  if (sites.kind() != ObservableKind::Table) bad("sites must be a table");
  const std::size_t L = sites.rows();
  const double theta = real_param(params, "theta");
  if (!(theta >= 0.0 && theta <= 1.0)) bad("theta must lie in [0, 1], got " + num(theta));
  const double cell = scalar_in(lattice, "cell_length", "Å");

  // Tolerance keeps e.g. 0.29 * 100 from flooring to 28.
  const auto k = static_cast<std::size_t>(std::floor(theta * static_cast<double>(L) + 1e-9));
  std::vector<std::size_t> idx(L);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed_param(params));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(k, L));
  std::sort(idx.begin(), idx.end());

  std::string out = "# BIGMAC adsorbate occupancy\nsites = " + std::to_string(L) + "\ntheta = " + num(theta) +
                    "\ncell_length_A = " + num(cell) + "\noccupied =";
  for (auto i : idx) out += " " + std::to_string(i);
  out += "\n";
  return out;
}

Dataset parse_cbmc_native(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : lines_of(text)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, "cbmc: expected key = value");
    kv[std::string(trim(t.substr(0, eq)))] = std::string(trim(t.substr(eq + 1)));
  }
  for (const char* key : {"sites", "theta", "cell_length_A", "occupied"})
    if (!kv.contains(key)) throw Error(ErrorCode::ParseError, std::string("cbmc: missing key ") + key);
  const long L = parse_long(kv["sites"], "sites");
  if (L < 1) throw Error(ErrorCode::ParseError, "cbmc: sites must be positive");
  std::vector<double> occ(static_cast<std::size_t>(L), 0.0);
  for (auto w : words(kv["occupied"])) {
    const long i = parse_long(w, "occupied site");
    if (i < 0 || i >= L || occ[static_cast<std::size_t>(i)] != 0.0)
      throw Error(ErrorCode::ParseError, "cbmc: bad occupied site " + std::string(w));
    occ[static_cast<std::size_t>(i)] = 1.0;
  }
  Dataset ds;
  ds.add(Observable::table("occupancy", units::dimensionless(), {"occupied"}, std::move(occ)));
  ds.add(Observable::scalar("cell_length", U("Å"), parse_real(kv["cell_length_A"], "cell length")));
  ds.add(Observable::scalar("theta", units::dimensionless(), parse_real(kv["theta"], "theta")));
  return ds;
}

Dataset mock_cbmc(const Dataset& lattice, const ParamMap& params) {
  return parse_cbmc_native(cbmc_native(lattice, params));
}

// ---------------------------------------------------------------------------
// gcmc: keyword blocks
//
//   #GULP-GCMC
//   species He
//   count <n>
//   positions
//     <site>
//   end

std::string gcmc_native(const Dataset& occupancy, const ParamMap& params) {
  const long n = int_param(params, "n_helium");
  if (n < 1) bad("n_helium must be >= 1");
  const auto occ = occupancy_of(occupancy);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < occ.size(); ++i)
    if (!occ[i]) free.push_back(i);
  if (free.empty()) throw Error(ErrorCode::NoFreeSites, "every lattice site is occupied by the adsorbate");
  std::mt19937_64 rng(seed_param(params));
  std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
  std::string out = "#GULP-GCMC\nspecies He\ncount " + std::to_string(n) + "\npositions\n";
  for (long i = 0; i < n; ++i) out += "  " + std::to_string(free[pick(rng)]) + "\n";
  out += "end\n";
  return out;
}

Dataset parse_gcmc_native(std::string_view text) {
  auto lines = lines_of(text);
  std::size_t i = 0;
  auto next = [&]() -> std::string_view {
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
    if (i == lines.size()) throw Error(ErrorCode::ParseError, "gcmc: truncated");
    return trim(lines[i++]);
  };
  if (next() != "#GULP-GCMC") throw Error(ErrorCode::ParseError, "gcmc: bad header");
  if (next() != "species He") throw Error(ErrorCode::ParseError, "gcmc: expected 'species He'");
  auto count = words(next());
  if (count.size() != 2 || count[0] != "count") throw Error(ErrorCode::ParseError, "gcmc: expected count");
  const long n = parse_long(count[1], "count");
  if (next() != "positions") throw Error(ErrorCode::ParseError, "gcmc: expected positions");
  std::vector<double> pos;
  for (long k = 0; k < n; ++k) pos.push_back(static_cast<double>(parse_long(next(), "position")));
  if (next() != "end") throw Error(ErrorCode::ParseError, "gcmc: expected end");
  if (pos.empty()) throw Error(ErrorCode::ParseError, "gcmc: no positions");
  Dataset ds;
  ds.add(Observable::table("helium_positions", units::dimensionless(), {"site"}, std::move(pos)));
  return ds;
}

Dataset mock_gcmc(const Dataset& occupancy, const ParamMap& params) {
  return parse_gcmc_native(gcmc_native(occupancy, params));
}

// ---------------------------------------------------------------------------
// md: format C, fixed width
//
//   line 1: "HISTORY" padded to 10
//   line 2: W (10) T (10) timestep fs (20) spacing Å (20) theta (20)
//   then T+1 rows: step (10), one position per walker (8 each)

namespace {

constexpr int kStepWidth = 10;
constexpr int kPosWidth = 8;

void pad_left(std::string& out, const std::string& field, int width) {
  if (static_cast<int>(field.size()) >= width) bad("value '" + field + "' exceeds its fixed-width field");
  out.append(static_cast<std::size_t>(width) - field.size(), ' ');
  out += field;
}

}  // namespace

std::string md_native(const Dataset& config, const ParamMap& params) {
  const long T = int_param(params, "T");
  if (T < 1) bad("T must be >= 1");
  const double p_block = real_param(params, "block_probability", 1.0);
  if (!(p_block >= 0.0 && p_block <= 1.0)) bad("block_probability must lie in [0, 1]");
  const double timestep = real_param(params, "timestep", 1000.0);
  if (!(timestep > 0)) bad("timestep must be positive");
  const auto occ = occupancy_of(config);
  const auto L = static_cast<long>(occ.size());
  const double spacing = scalar_in(config, "cell_length", "Å") / static_cast<double>(L);
  const Observable& he = config.at("helium_positions");
  const std::size_t col = he.column_index("site");
  std::vector<long> x(he.rows());
  for (std::size_t w = 0; w < x.size(); ++w) {
    x[w] = static_cast<long>(he.at(w, col));
    if (x[w] < 0 || x[w] >= L) bad("helium position outside the lattice");
  }
  if (x.empty()) bad("no walkers");
  double theta = 0;
  for (int o : occ) theta += o;
  theta /= static_cast<double>(L);

  std::string out = "HISTORY   \n";
  pad_left(out, std::to_string(x.size()), kStepWidth);
  pad_left(out, std::to_string(T), kStepWidth);
  pad_left(out, num(timestep), 20);
  pad_left(out, num(spacing), 20);
  pad_left(out, num(theta), 20);
  out += "\n";

  std::mt19937_64 rng(seed_param(params));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto row = [&](long step) {
    pad_left(out, std::to_string(step), kStepWidth);
    for (long v : x) pad_left(out, std::to_string(v), kPosWidth);
    out += "\n";
  };
  row(0);
  for (long t = 1; t <= T; ++t) {
    for (auto& v : x) {
      const long target = v + ((rng() & 1u) ? 1 : -1);
      const auto site = static_cast<std::size_t>(((target % L) + L) % L);
      bool blocked = false;
      if (occ[site]) blocked = p_block >= 1.0 || (p_block > 0.0 && unit(rng) < p_block);
      if (!blocked) v = target;
    }
    row(t);
  }
  return out;
}

Dataset parse_md_native(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.size() < 3 || trim(lines[0]) != "HISTORY") throw Error(ErrorCode::ParseError, "md: bad header");
  std::string_view h = lines[1];
  if (h.size() != 80) throw Error(ErrorCode::ParseError, "md: bad parameter line width");
  const long W = parse_long(h.substr(0, 10), "walkers");
  const long T = parse_long(h.substr(10, 10), "steps");
  const double timestep = parse_real(h.substr(20, 20), "timestep");
  const double spacing = parse_real(h.substr(40, 20), "spacing");
  const double theta = parse_real(h.substr(60, 20), "theta");
  if (W < 1 || T < 1) throw Error(ErrorCode::ParseError, "md: empty trajectory");
  if (lines.size() < static_cast<std::size_t>(T) + 3) throw Error(ErrorCode::ParseError, "md: truncated");
  const std::size_t width = kStepWidth + static_cast<std::size_t>(W) * kPosWidth;
  Trajectory traj;
  traj.spacing_angstrom = spacing;
  traj.timestep_fs = timestep;
  traj.theta = theta;
  for (long t = 0; t <= T; ++t) {
    std::string_view r = lines[static_cast<std::size_t>(t) + 2];
    if (r.size() != width) throw Error(ErrorCode::ParseError, "md: row " + std::to_string(t) + " has wrong width");
    if (parse_long(r.substr(0, kStepWidth), "step") != t) throw Error(ErrorCode::ParseError, "md: step out of order");
    std::vector<long> xs(static_cast<std::size_t>(W));
    for (long w = 0; w < W; ++w)
      xs[static_cast<std::size_t>(w)] = parse_long(r.substr(kStepWidth + static_cast<std::size_t>(w) * kPosWidth, kPosWidth), "position");
    traj.x.push_back(std::move(xs));
  }
  Dataset ds;
  ds.add(trajectory_observable(traj));
  ds.add(Observable::scalar("timestep", U("fs"), timestep));
  ds.add(Observable::scalar("spacing", U("Å"), spacing));
  ds.add(Observable::scalar("theta", units::dimensionless(), theta));
  return ds;
}

Dataset mock_md(const Dataset& config, const ParamMap& params) { return parse_md_native(md_native(config, params)); }

Observable trajectory_observable(const Trajectory& t) {
  std::vector<std::string> cols;
  for (std::size_t w = 0; w < t.walkers(); ++w) cols.push_back("w" + std::to_string(w));
  std::vector<double> values;
  values.reserve(t.x.size() * t.walkers());
  for (const auto& row : t.x)
    for (long v : row) values.push_back(static_cast<double>(v) * t.spacing_angstrom);
  return Observable::table("trajectory", U("Å"), std::move(cols), std::move(values));
}

Trajectory trajectory_from(const Dataset& ds) {
  Trajectory t;
  t.spacing_angstrom = ds.find("spacing") ? scalar_in(ds, "spacing", "Å") : 1.0;
  t.timestep_fs = ds.find("timestep") ? scalar_in(ds, "timestep", "fs") : 1000.0;
  t.theta = ds.find("theta") ? ds.at("theta").as_scalar() : 0.0;
  if (!(t.spacing_angstrom > 0)) bad("spacing must be positive");
  const Observable traj = ds.at("trajectory").with_unit(U("Å"));
  if (traj.kind() != ObservableKind::Table) bad("trajectory must be a table");
  const std::size_t W = traj.columns().size();
  for (std::size_t r = 0; r < traj.rows(); ++r) {
    std::vector<long> row(W);
    for (std::size_t w = 0; w < W; ++w) row[w] = std::lround(traj.at(r, w) / t.spacing_angstrom);
    t.x.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// analysis

namespace {

std::vector<double> msd_values(const Trajectory& t, std::size_t first, std::size_t last) {
  std::vector<double> out(t.x.size(), 0.0);
  const double a2 = t.spacing_angstrom * t.spacing_angstrom;
  for (std::size_t s = 0; s < t.x.size(); ++s) {
    double sum = 0;
    for (std::size_t w = first; w < last; ++w) {
      const double d = static_cast<double>(t.x[s][w] - t.x[0][w]);
      sum += d * d;
    }
    out[s] = sum / static_cast<double>(last - first) * a2;
  }
  return out;
}

double lsq_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx == 0 ? 0.0 : sxy / sxx;
}

}  // namespace

Observable msd(const Trajectory& t) {
  if (t.walkers() < 2) bad("msd needs at least 2 walkers");
  std::vector<double> idx(t.x.size());
  std::iota(idx.begin(), idx.end(), 0.0);
  return Observable::series("msd", U("Å²"), std::move(idx), msd_values(t, 0, t.walkers()));
}

DiffusivityFit diffusivity(const Observable& msd_series, int dimensionality) {
  if (dimensionality < 1 || dimensionality > 3) bad("dimensionality must be 1, 2 or 3");
  const Observable s = msd_series.with_unit(U("Å²"));
  if (s.kind() != ObservableKind::Series) bad("msd must be a series");
  const auto& t = s.indices();
  const auto& y = s.values();
  if (t.size() < 10) bad("msd series needs at least 10 points for the fit");
  const std::size_t from = t.size() / 2;
  std::vector<double> xs(t.begin() + static_cast<long>(from), t.end());
  std::vector<double> ys(y.begin() + static_cast<long>(from), y.end());
  DiffusivityFit fit;
  fit.slope = lsq_slope(xs, ys);
  fit.d = fit.slope / (2.0 * dimensionality);
  // Exponent of MSD ~ t^alpha; undefined (reported as 0, no warning) when
  // the window has fewer than two positive points.
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] > 0 && ys[i] > 0) {
      lx.push_back(std::log(xs[i]));
      ly.push_back(std::log(ys[i]));
    }
  if (lx.size() >= 2) {
    fit.exponent = lsq_slope(lx, ly);
    fit.warning = std::abs(fit.exponent - 1.0) > 0.3;
  } else {
    fit.exponent = 0.0;
  }
  return fit;
}

Dataset analyse(const Trajectory& t, int dimensionality) {
  const Observable series = msd(t);
  const DiffusivityFit fit = diffusivity(series, dimensionality);
  const double ps = t.timestep_fs / 1000.0;

  // Standard error from equal walker blocks.
  const std::size_t W = t.walkers();
  const std::size_t blocks = std::min<std::size_t>(10, W);
  std::vector<double> ds;
  for (std::size_t b = 0; b < blocks && blocks >= 2; ++b) {
    const std::size_t lo = b * W / blocks, hi = (b + 1) * W / blocks;
    std::vector<double> idx(t.x.size());
    std::iota(idx.begin(), idx.end(), 0.0);
    auto part = Observable::series("msd", U("Å²"), std::move(idx), msd_values(t, lo, hi));
    ds.push_back(diffusivity(part, dimensionality).d);
  }
  double stderr_ = 0;
  if (ds.size() >= 2) {
    const double m = std::accumulate(ds.begin(), ds.end(), 0.0) / static_cast<double>(ds.size());
    double ss = 0;
    for (double v : ds) ss += (v - m) * (v - m);
    stderr_ = std::sqrt(ss / static_cast<double>(ds.size() - 1)) / std::sqrt(static_cast<double>(ds.size()));
  }

  Dataset out;
  out.add(series);
  out.add(Observable::scalar("D", U("Å²/ps"), fit.d / ps));
  out.add(Observable::scalar("D_stderr", U("Å²/ps"), stderr_ / ps));
  out.add(Observable::scalar("fit_exponent", units::dimensionless(), fit.exponent));
  out.add(Observable::scalar("fit_warning", units::dimensionless(), fit.warning ? 1.0 : 0.0));
  out.add(Observable::scalar("theta", units::dimensionless(), t.theta));
  return out;
}

// Line report:
//   MSDTOOL-REPORT
//   <key> <value>     D, D_stderr (Å²/ps), fit_exponent, fit_warning, theta
//   msd <step> <Å²>

std::string analysis_native(const Dataset& input, const ParamMap& params) {
  const long dim = int_param(params, "dimensionality", 1);
  if (auto it = params.find("fit_window"); it != params.end() && it->second != "second-half")
    bad("unsupported fit_window '" + it->second + "' (only second-half)");
  const Dataset a = analyse(trajectory_from(input), static_cast<int>(dim));
  std::string out = "MSDTOOL-REPORT\n";
  for (const char* key : {"D", "D_stderr", "fit_exponent", "fit_warning", "theta"})
    out += std::string(key) + " " + num(a.at(key).as_scalar()) + "\n";
  const Observable& m = a.at("msd");
  for (std::size_t i = 0; i < m.values().size(); ++i)
    out += "msd " + num(m.indices()[i]) + " " + num(m.values()[i]) + "\n";
  return out;
}

Dataset parse_analysis_native(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "MSDTOOL-REPORT") throw Error(ErrorCode::ParseError, "analysis: bad header");
  std::map<std::string, double, std::less<>> scalars;
  std::vector<double> idx, val;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto w = words(lines[i]);
    if (w.empty()) continue;
    if (w[0] == "msd" && w.size() == 3) {
      idx.push_back(parse_real(w[1], "msd index"));
      val.push_back(parse_real(w[2], "msd value"));
    } else if (w.size() == 2) {
      scalars[std::string(w[0])] = parse_real(w[1], w[0]);
    } else {
      throw Error(ErrorCode::ParseError, "analysis: bad line " + std::to_string(i + 1));
    }
  }
  Dataset ds;
  ds.add(Observable::series("msd", U("Å²"), std::move(idx), std::move(val)));
  for (const char* key : {"D", "D_stderr", "fit_exponent", "fit_warning", "theta"}) {
    auto it = scalars.find(key);
    if (it == scalars.end()) throw Error(ErrorCode::ParseError, std::string("analysis: missing ") + key);
    const bool rate = std::string_view(key).starts_with("D");
    ds.add(Observable::scalar(key, rate ? U("Å²/ps") : units::dimensionless(), it->second));
  }
  return ds;
}

// ---------------------------------------------------------------------------

const MockApp& mock_app(std::string_view name) {
  static const std::vector<MockApp> apps = {
      {"lattice", [](const Dataset&, const ParamMap& p) { return lattice_native(p); }, parse_lattice_native},
      {"cbmc", cbmc_native, parse_cbmc_native},
      {"gcmc", gcmc_native, parse_gcmc_native},
      {"md", md_native, parse_md_native},
      {"analysis", analysis_native, parse_analysis_native},
  };
  for (const auto& a : apps)
    if (a.name == name) return a;
  bad("unknown mock '" + std::string(name) + "' (lattice, cbmc, gcmc, md, analysis)");
}

std::vector<std::string> mock_names() { return {"lattice", "cbmc", "gcmc", "md", "analysis"}; }

const std::map<std::string, std::string>& program_mocks() {
  static const std::map<std::string, std::string> m = {
      {"zeodb", "lattice"}, {"bigmac", "cbmc"}, {"gulp", "gcmc"},
      {"dlpoly", "md"},     {"lammps", "md"},   {"msdtool", "analysis"},
  };
  return m;
}

FaultPoint parse_fault_point(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) bad("fault point must be ACTIVITY:N, got '" + std::string(text) + "'");
  FaultPoint f;
  f.activity = std::string(text.substr(0, colon));
  auto n = text.substr(colon + 1);
  auto res = std::from_chars(n.data(), n.data() + n.size(), f.occurrence);
  if (res.ec != std::errc() || res.ptr != n.data() + n.size() || f.occurrence < 1)
    bad("fault occurrence must be a positive integer, got '" + std::string(n) + "'");
  return f;
}

// ---------------------------------------------------------------------------

SimulatedExecutor::SimulatedExecutor(Storage& storage, std::uint64_t seed, std::vector<FaultPoint> faults)
    : storage_(storage), faults_(std::move(faults)), rng_(seed) {
  for (const auto& [program, mock] : program_mocks()) apps_[program] = mock_app(mock);
}

void SimulatedExecutor::set_latency(const std::string& resource_id, std::uint64_t ticks) {
  std::lock_guard lock(mutex_);
  latency_[resource_id] = std::max<std::uint64_t>(ticks, 1);
}

void SimulatedExecutor::register_app(const std::string& program, MockApp app) {
  std::lock_guard lock(mutex_);
  apps_[program] = std::move(app);
}

void SimulatedExecutor::launch(std::uint64_t job, const ResourceDescriptor& resource, const JobRequest& req,
                               const LaunchPlan&) {
  std::lock_guard lock(mutex_);
  const std::uint64_t n = ++launches_[req.activity_id];
  Pending p;
  auto lat = latency_.find(resource.id);
  p.started = clock_;
  p.finish = clock_ + (lat == latency_.end() ? 1 : lat->second);
  p.priority = rng_();
  p.job = job;
  p.fault = std::any_of(faults_.begin(), faults_.end(),
                        [&](const FaultPoint& f) { return f.activity == req.activity_id && f.occurrence == n; });
  p.program = resource.program.name;
  p.request = req;
  pending_.push_back(std::move(p));
}

std::optional<std::pair<std::uint64_t, JobOutcome>> SimulatedExecutor::next_completion() {
  Pending p;
  {
    std::lock_guard lock(mutex_);
    std::erase_if(pending_, [&](const Pending& q) { return cancelled_.contains(q.job); });
    if (pending_.empty()) return std::nullopt;
    auto it = std::min_element(pending_.begin(), pending_.end());
    p = std::move(*it);
    pending_.erase(it);
    clock_ = std::max(clock_, p.finish);
  }
  return std::make_pair(p.job, run(p));
}

void SimulatedExecutor::cancel(std::uint64_t job) {
  std::lock_guard lock(mutex_);
  cancelled_.insert(job);
}

std::uint64_t SimulatedExecutor::now() const {
  std::lock_guard lock(mutex_);
  return clock_;
}

std::uint64_t SimulatedExecutor::launches(const std::string& activity) const {
  std::lock_guard lock(mutex_);
  auto it = launches_.find(activity);
  return it == launches_.end() ? 0 : it->second;
}

JobOutcome SimulatedExecutor::run(const Pending& p) {
  JobOutcome o;
  o.elapsed_seconds = static_cast<double>(p.finish - p.started);
  if (p.fault) {
    o.reason = "injected fault at " + p.request.activity_id + ":" + std::to_string(launches(p.request.activity_id));
    return o;
  }
  MockApp app;
  {
    std::lock_guard lock(mutex_);
    auto it = apps_.find(p.program);
    if (it == apps_.end()) {
      o.reason = "no application installed for program '" + p.program + "'";
      return o;
    }
    app = it->second;
  }
  try {
    Dataset merged;
    for (const auto& in : p.request.inputs) {
      const Dataset part = storage_.get(in.key);
      for (const auto& [name, obs] : part.observables()) merged.put(obs);
    }
    Dataset out = app.adapt(app.run(merged, p.request.params));
    out.set_meta("producer", p.program);
    out.set_meta("activity", p.request.activity_id);
    if (auto s = p.request.params.find("seed"); s != p.request.params.end()) out.set_meta("seed", s->second);
    o.result = storage_.put(out, p.request.run_id, p.request.activity_id);
    o.ok = true;
  } catch (const Error& e) {
    o.reason = e.what();
  }
  return o;
}

// ---------------------------------------------------------------------------

std::string_view case_study_dsl() {
  static const std::string text = R"(// Helium diffusion in a zeolite loaded with a strongly adsorbing component.
workflow "zeolite-helium-diffusion" {
  cite "Database of Zeolite Structures, http://www.iza-structure.org/databases/"

  start -> lattice

  activity lattice {
    program: "zeodb"
    actuator: "zeodb@archive"
    capabilities: [structure_db]
    params: {L: 100, spacing: 1}
    outputs: [sites, cell_length]
  }
  lattice -> cbmc

  activity cbmc {
    program: "bigmac"
    capabilities: [cbmc]
    params: {theta: 0}
    inputs: from lattice [sites: "Å", cell_length: "Å"]
    outputs: [occupancy, cell_length, theta]
  }
  cbmc -> gcmc

  activity gcmc {
    program: "gulp"
    capabilities: [gcmc]
    params: {n_helium: 1000}
    inputs: from cbmc [occupancy: "1"]
    outputs: [helium_positions]
  }
  gcmc -> md

  activity md {
    capabilities: [md]
    params: {T: 200, timestep: 1000, block_probability: 0.75}
    inputs: from cbmc [occupancy: "1", cell_length: "Å"]
    inputs: from gcmc [helium_positions: "1"]
    outputs: [trajectory, timestep, spacing, theta]
  }
  md -> analysis

  activity analysis {
    capabilities: [analysis]
    params: {dimensionality: 1, fit_window: "second-half"}
    inputs: from md [trajectory: "Å", timestep: "fs", spacing: "Å", theta: "1"]
    outputs: [msd, D, D_stderr, fit_exponent, fit_warning, theta]
  }
  analysis -> end
}
)";
  return text;
}

WorkflowGraph build_case_study() { return parse_workflow(case_study_dsl()); }

std::vector<ResourceDescriptor> builtin_resources() {
  auto make = [](std::string program, std::string calc, std::set<std::string> caps, License license, double cost,
                 std::string pattern, std::vector<InputSlot> slots, std::string output) {
    ResourceDescriptor d;
    d.id = program + "@" + calc;
    d.program = {program, "1.0"};
    d.calculator = {calc, "linux-x86_64", calc == "archive" ? 4 : 2};
    d.capabilities = std::move(caps);
    d.license = std::move(license);
    d.launch_template = {std::move(pattern), std::move(slots), std::move(output), "linux-x86_64"};
    d.cost_weight = cost;
    return d;
  };
  const ExtractionSpec lattice({{"sites", U("Å")}, {"cell_length", U("Å")}});
  const ExtractionSpec occ({{"occupancy", units::dimensionless()}});
  const ExtractionSpec config({{"occupancy", units::dimensionless()}, {"cell_length", U("Å")}});
  const ExtractionSpec helium({{"helium_positions", units::dimensionless()}});
  const ExtractionSpec traj(
      {{"trajectory", U("Å")}, {"timestep", U("fs")}, {"spacing", U("Å")}, {"theta", units::dimensionless()}});
  const std::string md_cmd = " -config ${config} -helium ${helium} -steps ${params.T} -seed ${params.seed} -out ${workdir}/HISTORY";
  const License dlpoly{LicenseKind::Academic, "W. Smith and T. R. Forester, DL_POLY_2.0: a general-purpose parallel molecular dynamics simulation package, J. Mol. Graphics 14 (1996) 136"};
  const License gulp{LicenseKind::Commercial, "J. D. Gale, GULP: a computer program for the symmetry-adapted simulation of solids, J. Chem. Soc. Faraday Trans. 93 (1997) 629"};
  return {
      make("zeodb", "archive", {"structure_db"}, {LicenseKind::Open, ""}, 0.1,
           "zeodb export --cells ${params.L} --spacing ${params.spacing} --out ${workdir}/lattice.csv", {}, "lattice"),
      make("bigmac", "cluster1", {"cbmc", "mc"},
           {LicenseKind::Academic, "T. J. H. Vlugt, BIGMAC: configurational-bias Monte Carlo program, University of Amsterdam"},
           1.0, "bigmac -lattice ${lattice} -theta ${params.theta} -seed ${params.seed} -out ${workdir}/occupancy.kv",
           {{"lattice", lattice}}, "occupancy"),
      make("gulp", "cluster1", {"gcmc", "mc"}, gulp, 1.0,
           "gulp -gcmc ${occupancy} -n ${params.n_helium} -seed ${params.seed} -out ${workdir}/gcmc.out",
           {{"occupancy", occ}}, "helium"),
      make("gulp", "cluster2", {"gcmc", "mc"}, gulp, 1.5,
           "gulp -gcmc ${occupancy} -n ${params.n_helium} -seed ${params.seed} -out ${workdir}/gcmc.out",
           {{"occupancy", occ}}, "helium"),
      make("dlpoly", "cluster2", {"md"}, dlpoly, 1.0, "DLPOLY.X" + md_cmd, {{"config", config}, {"helium", helium}},
           "history"),
      make("lammps", "cluster3", {"md"}, {LicenseKind::Open, ""}, 2.0, "lmp" + md_cmd,
           {{"config", config}, {"helium", helium}}, "history"),
      make("msdtool", "cluster3", {"analysis"}, {LicenseKind::Open, ""}, 0.5,
           "msdtool ${trajectory} -d ${params.dimensionality} -out ${workdir}/report.txt", {{"trajectory", traj}},
           "report"),
  };
}

}  // namespace gridflow::simgrid
