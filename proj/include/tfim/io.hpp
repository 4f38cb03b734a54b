#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tfim/diagnostics.hpp"
#include "tfim/error.hpp"
#include "tfim/exact.hpp"
#include "tfim/lattice.hpp"
#include "tfim/model.hpp"
#include "tfim/mps.hpp"
#include "tfim/observables.hpp"
#include "tfim/peps.hpp"
#include "tfim/schedule.hpp"
#include "tfim/semiclassical.hpp"

namespace tfim::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "TFIM_OUTPUT_DIR";

enum class Engine { exact, mps, peps, smf, tw };

inline Engine parse_engine(const std::string& s) {
  if (s == "exact") return Engine::exact;
  if (s == "mps") return Engine::mps;
  if (s == "peps-bp") return Engine::peps;
  if (s == "smf") return Engine::smf;
  if (s == "tw") return Engine::tw;
  throw Error(ErrorCategory::config, "unknown engine '" + s + "' (expected exact, mps, peps-bp, smf or tw)");
}

inline const char* engine_name(Engine e) {
  switch (e) {
    case Engine::exact: return "exact";
    case Engine::mps: return "mps";
    case Engine::peps: return "peps-bp";
    case Engine::smf: return "smf";
    case Engine::tw: return "tw";
  }
  return "unknown";
}

struct RunConfig {
  Engine engine = Engine::exact;
  int rows = 0;
  int cols = 0;
  bool rydberg = false;
  IsingParams ising{};
  double C6 = 1.0;
  double spacing = 1.0;
  Schedule schedule;
  double dt = 0.01;
  std::vector<double> t_record;
  mps::RunOptions mps{};
  SnakeAxis snake = SnakeAxis::rows;
  peps::RunOptions peps{};
  semiclassical::RunOptions tw{};
  std::string output;
  json source;  // the parsed document, echoed into result headers
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(ErrorCategory::config, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCategory::config, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw Error(ErrorCategory::config, std::string("missing key '") + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCategory::config, std::string("key '") + key + "' in " + where + " has the wrong type");
  }
}

template <class T>
T get_or(const json& obj, const char* key, const std::string& where, T fallback) {
  return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

inline Schedule read_schedule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open schedule file " + path);
  std::vector<Knot> knots;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    Knot k{};
    if (!(ls >> k.t)) continue;
    if (!(ls >> k.hx >> k.hz))
      throw Error(ErrorCategory::parse, path + ":" + std::to_string(lineno) + ": expected 't hx hz'");
    knots.push_back(k);
  }
  return Schedule(knots, "custom(" + path + ")");
}

inline Schedule parse_protocol(const json& p) {
  const std::string where = "protocol";
  const auto kind = get<std::string>(p, "kind", where);
  if (kind == "quench") {
    reject_unknown(p, where, {"kind", "hx", "hz", "t_final"});
    return make_quench(get<double>(p, "hx", where), get_or<double>(p, "hz", where, 0.0),
                       get<double>(p, "t_final", where));
  }
  if (kind == "anneal-I" || kind == "anneal-II") {
    reject_unknown(p, where, {"kind", "free_duration", "t_rise", "t_sweep", "t_fall", "hx_max", "hz0", "hzf"});
    const auto v = kind == "anneal-I" ? AnnealVariant::I : AnnealVariant::II;
    AnnealParams a = anneal_defaults(v, get<double>(p, "free_duration", where));
    a.t_rise = get_or(p, "t_rise", where, a.t_rise);
    a.t_sweep = get_or(p, "t_sweep", where, a.t_sweep);
    a.t_fall = get_or(p, "t_fall", where, a.t_fall);
    a.hx_max = get_or(p, "hx_max", where, a.hx_max);
    a.hz0 = get_or(p, "hz0", where, a.hz0);
    a.hzf = get_or(p, "hzf", where, a.hzf);
    return make_anneal(v, a.t_rise, a.t_sweep, a.t_fall, a.hx_max, a.hz0, a.hzf);
  }
  if (kind == "custom") {
    reject_unknown(p, where, {"kind", "knots", "file"});
    if (p.contains("file")) return read_schedule_file(get<std::string>(p, "file", where));
    const auto rows = get<std::vector<std::vector<double>>>(p, "knots", where);
    std::vector<Knot> knots;
    for (const auto& r : rows) {
      if (r.size() != 3) throw Error(ErrorCategory::config, "custom knots must be [t, hx, hz] triples");
      knots.push_back({r[0], r[1], r[2]});
    }
    std::string name = "custom(";
    for (std::size_t k = 0; k < knots.size(); ++k)
      name += (k ? ";" : "") + format_double(knots[k].t) + "," + format_double(knots[k].hx) + "," +
              format_double(knots[k].hz);
    return Schedule(knots, name + ")");
  }
  throw Error(ErrorCategory::config, "unknown protocol kind '" + kind + "'");
}

}  // namespace detail

/// Parses a JSON run configuration. Unknown keys anywhere are errors.
inline RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::parse, std::string("config is not valid JSON: ") + e.what());
  }
  using detail::get;
  using detail::get_or;
  detail::reject_unknown(doc, "config",
                         {"engine", "lattice", "model", "protocol", "dt", "record", "mps", "peps", "tw", "output"});
  RunConfig c;
  c.source = doc;
  c.engine = parse_engine(get<std::string>(doc, "engine", "config"));

  const json lat = get<json>(doc, "lattice", "config");
  detail::reject_unknown(lat, "lattice", {"L", "rows", "cols"});
  if (lat.contains("L")) {
    if (lat.contains("rows") || lat.contains("cols"))
      throw Error(ErrorCategory::config, "lattice takes either L or rows/cols");
    c.rows = c.cols = get<int>(lat, "L", "lattice");
    build_lattice(c.rows);
  } else {
    c.rows = get<int>(lat, "rows", "lattice");
    c.cols = get<int>(lat, "cols", "lattice");
    build_grid(c.rows, c.cols);
  }
  const int extent = std::max(c.rows, c.cols);
  const int cap = c.engine == Engine::exact ? 4 : 6;
  if (extent > cap)
    throw Error(ErrorCategory::invalid_size, std::string(engine_name(c.engine)) + " engine is limited to L <= " +
                                                 std::to_string(cap));

  if (doc.contains("model")) {
    const json m = doc.at("model");
    detail::reject_unknown(m, "model", {"kind", "J", "sign", "C6", "spacing"});
    const auto kind = get_or<std::string>(m, "kind", "model", "ising");
    if (kind == "ising") {
      c.ising.J = get_or(m, "J", "model", 1.0);
      c.ising.sign = get_or(m, "sign", "model", 1);
      c.ising.validate();
    } else if (kind == "rydberg") {
      if (c.engine != Engine::exact) throw Error(ErrorCategory::config, "the Rydberg model runs on the exact engine only");
      c.rydberg = true;
      c.C6 = get<double>(m, "C6", "model");
      c.spacing = get_or(m, "spacing", "model", 1.0);
    } else {
      throw Error(ErrorCategory::config, "unknown model kind '" + kind + "'");
    }
  }

  c.schedule = detail::parse_protocol(get<json>(doc, "protocol", "config"));
  c.dt = get<double>(doc, "dt", "config");
  if (!(c.dt > 0.0)) throw Error(ErrorCategory::config, "dt must be positive");

  const json rec = get_or<json>(doc, "record", "config", json::object());
  detail::reject_unknown(rec, "record", {"every", "times"});
  if (rec.contains("times")) {
    c.t_record = get<std::vector<double>>(rec, "times", "record");
    for (std::size_t k = 1; k < c.t_record.size(); ++k)
      if (!(c.t_record[k] > c.t_record[k - 1])) throw Error(ErrorCategory::config, "record times must increase");
    if (!c.t_record.empty() && (c.t_record.front() < 0.0 || c.t_record.back() > c.schedule.t_final()))
      throw Error(ErrorCategory::config, "record times outside the schedule");
  } else {
    c.t_record = uniform_times(c.schedule.t_final(), get_or(rec, "every", "record", 0.1));
  }

  auto section = [&](const char* name) -> std::optional<json> {
    if (!doc.contains(name)) return std::nullopt;
    return doc.at(name);
  };
  if (auto s = section("mps")) {
    detail::reject_unknown(*s, "mps", {"chi_max", "svd_cutoff", "pad_bonds", "snake"});
    c.mps.chi_max = get_or(*s, "chi_max", "mps", c.mps.chi_max);
    c.mps.svd_cutoff = get_or(*s, "svd_cutoff", "mps", c.mps.svd_cutoff);
    c.mps.pad_bonds = get_or(*s, "pad_bonds", "mps", c.mps.pad_bonds);
    const auto snake = get_or<std::string>(*s, "snake", "mps", "rows");
    if (snake != "rows" && snake != "columns") throw Error(ErrorCategory::config, "mps.snake must be rows or columns");
    c.snake = snake == "rows" ? SnakeAxis::rows : SnakeAxis::columns;
  } else if (c.engine == Engine::mps) {
    throw Error(ErrorCategory::config, "mps engine needs an 'mps' section with chi_max");
  }
  if (auto s = section("peps")) {
    detail::reject_unknown(*s, "peps",
                           {"chi2d", "bp_tol", "bp_max_iter", "bp_damping", "trotter_order", "measure"});
    c.peps.chi2d = get_or(*s, "chi2d", "peps", c.peps.chi2d);
    c.peps.trotter.bp.tol = get_or(*s, "bp_tol", "peps", c.peps.trotter.bp.tol);
    c.peps.trotter.bp.max_iter = get_or(*s, "bp_max_iter", "peps", c.peps.trotter.bp.max_iter);
    c.peps.trotter.bp.damping = get_or(*s, "bp_damping", "peps", c.peps.trotter.bp.damping);
    c.peps.trotter.order = get_or(*s, "trotter_order", "peps", c.peps.trotter.order);
    const auto mode = get_or<std::string>(*s, "measure", "peps", "auto");
    if (mode == "auto") c.peps.measure = peps::MeasureMode::automatic;
    else if (mode == "bp") c.peps.measure = peps::MeasureMode::bp;
    else if (mode == "exact") c.peps.measure = peps::MeasureMode::exact;
    else throw Error(ErrorCategory::config, "peps.measure must be auto, bp or exact");
    if (c.peps.trotter.order != 2 && c.peps.trotter.order != 4)
      throw Error(ErrorCategory::config, "peps.trotter_order must be 2 or 4");
    if (!(c.peps.trotter.bp.damping >= 0.0 && c.peps.trotter.bp.damping < 1.0))
      throw Error(ErrorCategory::config, "peps.bp_damping must lie in [0, 1)");
  } else if (c.engine == Engine::peps) {
    throw Error(ErrorCategory::config, "peps-bp engine needs a 'peps' section with chi2d");
  }
  if (auto s = section("tw")) {
    detail::reject_unknown(*s, "tw", {"n_t", "seed"});
    c.tw.n_t = get_or(*s, "n_t", "tw", c.tw.n_t);
    c.tw.seed = get_or<std::uint64_t>(*s, "seed", "tw", c.tw.seed);
  } else if (c.engine == Engine::tw) {
    throw Error(ErrorCategory::config, "tw engine needs a 'tw' section with n_t and seed");
  }
  c.output = get_or<std::string>(doc, "output", "config", "");
  c.ising.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// A result file: header lines "# key: value", then one tab-separated record
/// per time. Numbers use 17 significant digits so values round-trip exactly.
struct ResultFile {
  std::vector<std::pair<std::string, std::string>> header;
  ObservableSeries series;

  std::string header_value(const std::string& key) const {
    for (const auto& [k, v] : header)
      if (k == key) return v;
    return {};
  }
};

inline std::vector<std::string> column_names(const ObservableSeries& s) {
  std::vector<std::string> cols{"t"};
  const std::size_t n = s.mag.empty() ? static_cast<std::size_t>(s.meta.rows * s.meta.cols) : s.mag.front().size();
  for (std::size_t i = 0; i < n; ++i) cols.push_back("mag_" + std::to_string(i));
  const LatticeSpec lat = build_grid(s.meta.rows, s.meta.cols);
  for (std::size_t d = 1; d <= lat.line_partners().size(); ++d) cols.push_back("corr_line_" + std::to_string(d));
  cols.push_back("corr_nn");
  for (const auto& e : lat.nn_edges) cols.push_back("pair_" + std::to_string(e.a) + "_" + std::to_string(e.b));
  cols.push_back("error");
  if (s.has_stderr())
    for (std::size_t i = 0; i < n; ++i) cols.push_back("mag_stderr_" + std::to_string(i));
  return cols;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_body(const ObservableSeries& s) {
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    std::vector<double> row{s.times[k]};
    row.insert(row.end(), s.mag[k].begin(), s.mag[k].end());
    row.insert(row.end(), s.corr_line[k].begin(), s.corr_line[k].end());
    row.push_back(s.corr_nn[k]);
    row.insert(row.end(), s.corr_pairs[k].begin(), s.corr_pairs[k].end());
    row.push_back(s.error_record[k]);
    if (s.has_stderr()) row.insert(row.end(), s.mag_stderr[k].begin(), s.mag_stderr[k].end());
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += '\t';
      out += format_number(row[j]);
    }
    out += '\n';
  }
  return out;
}

/// Header keys describing the series itself; they are regenerated on write.
inline bool is_series_key(const std::string& k) {
  static const std::set<std::string> keys{"schema", "engine", "rows",   "cols",   "seed",
                                          "dt",     "schedule", "status", "note", "columns"};
  return keys.count(k) > 0;
}

inline void write_result(std::ostream& out, const ResultFile& f) {
  const auto& m = f.series.meta;
  out << "# schema: " << kSchemaVersion << '\n';
  out << "# engine: " << m.engine << '\n';
  out << "# rows: " << m.rows << '\n';
  out << "# cols: " << m.cols << '\n';
  out << "# seed: " << m.seed << '\n';
  out << "# dt: " << format_number(m.dt) << '\n';
  out << "# schedule: " << m.schedule << '\n';
  out << "# status: " << m.status << '\n';
  out << "# note: " << m.note << '\n';
  for (const auto& [k, v] : f.header)
    if (!is_series_key(k)) out << "# " << k << ": " << v << '\n';
  out << "# columns:";
  for (const auto& c : column_names(f.series)) out << ' ' << c;
  out << '\n';
  out << format_body(f.series);
}

namespace detail {

inline double parse_number(const std::string& tok, int lineno) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size())
    throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": bad number '" + tok + "'");
  return v;
}

inline long parse_int(const std::string& v, const std::string& key, int lineno) {
  try {
    std::size_t pos = 0;
    const long out = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": bad integer for " + key);
  }
}

}  // namespace detail

inline ResultFile read_result(std::istream& in) {
  ResultFile f;
  auto& m = f.series.meta;
  std::vector<std::string> columns;
  std::string line;
  int lineno = 0;
  bool have_schema = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (line.size() < 2 || line[1] != ' ' || colon == std::string::npos)
        throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": malformed header");
      const std::string key = line.substr(2, colon - 2);
      std::string value = line.substr(colon + 1);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      if (key == "schema") {
        if (detail::parse_int(value, key, lineno) != kSchemaVersion)
          throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": unsupported schema " + value);
        have_schema = true;
      } else if (key == "engine") m.engine = value;
      else if (key == "rows") m.rows = static_cast<int>(detail::parse_int(value, key, lineno));
      else if (key == "cols") m.cols = static_cast<int>(detail::parse_int(value, key, lineno));
      else if (key == "seed") m.seed = std::stoull(value);
      else if (key == "dt") m.dt = detail::parse_number(value, lineno);
      else if (key == "schedule") m.schedule = value;
      else if (key == "status") m.status = value;
      else if (key == "note") m.note = value;
      else if (key == "columns") {
        std::istringstream cs(value);
        std::string c;
        while (cs >> c) columns.push_back(c);
      } else {
        f.header.emplace_back(key, value);
      }
      continue;
    }
    if (!have_schema || columns.empty())
      throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": data before a complete header");
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      row.push_back(detail::parse_number(line.substr(start, tab - start), lineno));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (row.size() != columns.size())
      throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": expected " +
                                            std::to_string(columns.size()) + " columns, found " +
                                            std::to_string(row.size()));
    auto& s = f.series;
    std::size_t j = 0;
    s.times.push_back(row[j++]);
    std::vector<double> mag, line_c, pairs, se;
    for (std::size_t c = 1; c < columns.size(); ++c) {
      const std::string& name = columns[c];
      const double v = row[c];
      if (name.rfind("mag_stderr_", 0) == 0) se.push_back(v);
      else if (name.rfind("mag_", 0) == 0) mag.push_back(v);
      else if (name.rfind("corr_line_", 0) == 0) line_c.push_back(v);
      else if (name == "corr_nn") s.corr_nn.push_back(v);
      else if (name.rfind("pair_", 0) == 0) pairs.push_back(v);
      else if (name == "error") s.error_record.push_back(v);
      else throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": unknown column " + name);
    }
    s.mag.push_back(std::move(mag));
    s.corr_line.push_back(std::move(line_c));
    s.corr_pairs.push_back(std::move(pairs));
    if (!se.empty()) s.mag_stderr.push_back(std::move(se));
  }
  if (!have_schema) throw Error(ErrorCategory::parse, "line " + std::to_string(lineno) + ": missing schema header");
  if (m.rows < 1 || m.cols < 1) throw Error(ErrorCategory::parse, "missing lattice dimensions in header");
  const auto expected = column_names(f.series);
  if (!f.series.times.empty() && expected != columns)
    throw Error(ErrorCategory::parse, "column set does not match the lattice in the header");
  return f;
}

inline void save_result(const std::string& path, const ResultFile& f) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path);
  write_result(out, f);
  if (!out) throw Error(ErrorCategory::io, "write failed for " + path);
}

inline ResultFile load_result(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
  try {
    return read_result(in);
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::parse) throw Error(ErrorCategory::parse, path + ": " + e.what());
    throw;
  }
}

/// Runs the configured engine from the all-down state.
inline ObservableSeries run_series(const RunConfig& c) {
  const LatticeSpec lat = build_grid(c.rows, c.cols, c.snake);
  switch (c.engine) {
    case Engine::exact:
      if (c.rydberg) return exact::evolve(lat, build_rydberg(lat, c.C6, c.spacing), c.schedule, c.dt, c.t_record);
      return exact::evolve(lat, c.ising, c.schedule, c.dt, c.t_record);
    case Engine::mps: {
      mps::RunOptions o = c.mps;
      o.ising = c.ising;
      return mps::run_protocol(lat, c.schedule, c.dt, c.t_record, o);
    }
    case Engine::peps: {
      peps::RunOptions o = c.peps;
      o.ising = c.ising;
      return peps::run_protocol(lat, c.schedule, c.dt, c.t_record, o);
    }
    case Engine::smf:
    case Engine::tw: {
      semiclassical::RunOptions o = c.tw;
      o.ising = c.ising;
      const auto method = c.engine == Engine::smf ? semiclassical::Method::smf : semiclassical::Method::tw;
      return semiclassical::run_protocol(method, lat, c.schedule, c.dt, c.t_record, o);
    }
  }
  throw Error(ErrorCategory::config, "unknown engine");
}

inline ResultFile run(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  ResultFile f;
  f.series = run_series(c);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  f.header.emplace_back("config", c.source.dump());
  f.header.emplace_back("wall_time", format_number(wall));
  return f;
}

/// Output location: the config's path (or a default name), with the directory
/// replaced by $TFIM_OUTPUT_DIR when that is set.
inline std::string output_path(const RunConfig& c) {
  std::filesystem::path p = c.output.empty()
                                ? std::filesystem::path(std::string(engine_name(c.engine)) + "_" +
                                                        std::to_string(c.rows) + "x" + std::to_string(c.cols) + ".tsv")
                                : std::filesystem::path(c.output);
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) p = std::filesystem::path(dir) / p.filename();
  return p.string();
}

struct CompareRow {
  double t = 0.0;
  double eps_z = 0.0;
  std::optional<double> eps_zz;  // empty when the reference correlations sum to zero
};

/// eps_z and eps_zz at the requested times (default: every record of a).
inline std::vector<CompareRow> compare(const ObservableSeries& a, const ObservableSeries& b,
                                       std::vector<double> times = {}) {
  require_same_lattice(a, b);
  if (times.empty()) times = a.times;
  std::vector<CompareRow> out;
  for (double t : times) {
    CompareRow r;
    r.t = t;
    r.eps_z = epsilon_z(a, b, t);
    try {
      r.eps_zz = epsilon_zz(a, b, t);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::undefined_reference) throw;
    }
    out.push_back(r);
  }
  return out;
}

struct SymmetryRow {
  double t = 0.0;
  diag::SymmetryReport report;
};

struct SymmetrySummary {
  std::vector<SymmetryRow> rows;
  double converged_until = 0.0;
};

inline SymmetrySummary symmetry(const ObservableSeries& s, diag::ObservableClass cls, double xi, double threshold) {
  SymmetrySummary out;
  for (std::size_t k = 0; k < s.size(); ++k) out.rows.push_back({s.times[k], diag::symmetry_at(s, k, cls, xi, threshold)});
  out.converged_until = diag::converged_until(s, cls, xi, threshold);
  return out;
}

/// Correlation rows at t_c + dt_offset from each file, rescaled with the given exponents.
inline diag::KZCurveSet kz(const std::vector<ObservableSeries>& runs, const std::vector<double>& taus, double t_c,
                           double dt_offset, const diag::KZExponents& e) {
  if (runs.size() != taus.size()) throw Error(ErrorCategory::config, "need one tau per file");
  if (runs.size() < 2) throw Error(ErrorCategory::incomparable_curves, "need at least two runs");
  std::vector<diag::KZCurve> curves;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    try {
      curves.push_back(diag::curve_from_series(runs[i], taus[i], t_c + dt_offset));
    } catch (const Error& err) {
      if (err.category() == ErrorCategory::comparison)
        throw Error(ErrorCategory::incomplete_data, std::string("run ") + std::to_string(i) + ": " + err.what());
      throw;
    }
  }
  return diag::kz_rescale(curves, e);
}

}  // namespace tfim::io
