#pragma once

// Scenario catalog, JSON configuration, solver orchestration and export.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddsweep/core.hpp"
#include "ddsweep/ddm_core.hpp"
#include "ddsweep/geometry_mesh.hpp"
#include "ddsweep/habc.hpp"
#include "ddsweep/krylov.hpp"
#include "ddsweep/sweeping_precond.hpp"

namespace ddsweep {

inline constexpr int kSchemaVersion = 1;

struct PadeSpec {
  int n_aux = 8;
  double angle = kPi / 3.0;
};

struct WavenumberSpec {
  double constant = 2.0 * kPi;  // used when `values` is empty
  std::vector<double> tops;      // layered field, see WavenumberField::layered
  std::vector<double> values;

  bool layered() const { return !values.empty(); }
  double max_k() const {
    if (!layered()) return constant;
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
  WavenumberField field() const {
    return layered() ? WavenumberField::layered(tops, values) : WavenumberField(constant);
  }
};

struct Scenario {
  std::string name;
  std::string description;
  int rows = 1;
  int cols = 1;
  double cell_width = 2.5;
  double cell_height = 2.5;
  Point origin{};
  std::vector<std::pair<int, int>> null_cells;  // (row, col)
  NullCellMode null_mode = NullCellMode::Masked;
  WavenumberSpec wavenumber;
  PadeSpec exterior;
  PadeSpec transmission;
  int order = 1;
  double vertices_per_wavelength = 15.0;
  std::vector<PointSource> sources;
  std::vector<Rect> obstacles;  // sound-soft squares with data -exp(i k x)
  std::string precond = "sgs-2d";
  KrylovSettings krylov{};
  int threads = 1;
  bool mono_reference = false;

  Rect bounds() const {
    return {origin.x, origin.y, origin.x + cols * cell_width, origin.y + rows * cell_height};
  }

  // Target element size: `vertices_per_wavelength` nodes (vertices plus edge
  // nodes for P2) per shortest wavelength.
  double mesh_size() const {
    const double lambda = 2.0 * kPi / wavenumber.max_k();
    return order * lambda / vertices_per_wavelength;
  }
};

// ---------------------------------------------------------------------------
// Preconditioner names
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& precond_names() {
  static const std::vector<std::string> names{"none",  "sgs-h",  "sgs-v", "sgs-d1", "sgs-d2", "sgs-2d",
                                              "ds-h",  "ds-v",   "ds-d1", "ds-d2",  "ds-2d"};
  return names;
}

// "none" gives no preconditioner. "-d" is accepted as a synonym of "-d1".
inline std::optional<PrecondConfig> parse_precond(const std::string& name) {
  if (name == "none") return std::nullopt;
  const auto dash = name.find('-');
  if (dash == std::string::npos) throw InvalidArgument("unknown preconditioner '" + name + "'");
  const std::string kind = name.substr(0, dash);
  const std::string dir = name.substr(dash + 1);
  PrecondConfig cfg;
  if (kind == "sgs")
    cfg.kind = PrecondKind::SGS;
  else if (kind == "ds")
    cfg.kind = PrecondKind::DS;
  else
    throw InvalidArgument("unknown preconditioner '" + name + "'");
  if (dir == "h")
    cfg.schedule = {Direction::HForward};
  else if (dir == "v")
    cfg.schedule = {Direction::VForward};
  else if (dir == "d" || dir == "d1")
    cfg.schedule = {Direction::D1};
  else if (dir == "d2")
    cfg.schedule = {Direction::D2};
  else if (dir == "2d")
    cfg.schedule = {Direction::D1, Direction::D2};
  else
    throw InvalidArgument("unknown preconditioner '" + name + "'");
  return cfg;
}

// ---------------------------------------------------------------------------
// Validation and setup
// ---------------------------------------------------------------------------

inline void validate(const Scenario& s) {
  if (s.rows < 1 || s.cols < 1) throw InvalidArgument("partition needs at least one row and one column");
  if (!(s.cell_width > 0.0) || !(s.cell_height > 0.0)) throw InvalidArgument("cell size must be positive");
  if (s.order != 1 && s.order != 2) throw InvalidArgument("element order must be 1 or 2");
  if (s.order == 1 && s.vertices_per_wavelength < 5.0)
    throw InvalidArgument("P1 runs need at least 5 vertices per wavelength");
  if (!(s.vertices_per_wavelength > 0.0)) throw InvalidArgument("mesh density must be positive");
  if (!(s.krylov.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (s.krylov.max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
  if (s.krylov.restart && *s.krylov.restart < 1) throw InvalidArgument("restart must be at least 1");
  if (s.threads < 1) throw InvalidArgument("threads must be at least 1");
  std::set<std::pair<int, int>> nulls;
  for (auto [r, c] : s.null_cells) {
    if (r < 0 || r >= s.rows || c < 0 || c >= s.cols) throw InvalidArgument("null cell outside the grid");
    nulls.insert({r, c});
  }
  if (static_cast<int>(nulls.size()) == s.rows * s.cols) throw InvalidArgument("partition has no active cell");
  pade_coefficients(s.exterior.n_aux, s.exterior.angle);
  pade_coefficients(s.transmission.n_aux, s.transmission.angle);
  if (s.wavenumber.layered()) {
    s.wavenumber.field();
    if (!std::is_sorted(s.wavenumber.tops.begin(), s.wavenumber.tops.end()))
      throw InvalidArgument("layer tops must be increasing");
  } else if (!(s.wavenumber.constant > 0.0)) {
    throw InvalidArgument("wavenumber must be positive");
  }
  parse_precond(s.precond);
}

inline DdmSetup make_setup(const Scenario& s) {
  validate(s);
  DdmSetup d;
  std::optional<std::vector<bool>> mask;
  if (!s.null_cells.empty()) {
    mask = std::vector<bool>(static_cast<std::size_t>(s.rows * s.cols), true);
    for (auto [r, c] : s.null_cells) (*mask)[static_cast<std::size_t>(r * s.cols + c)] = false;
  }
  d.partition = build_partition(s.bounds(), s.rows, s.cols, mask);
  d.k = s.wavenumber.field();
  d.exterior = pade_coefficients(s.exterior.n_aux, s.exterior.angle);
  d.transmission = pade_coefficients(s.transmission.n_aux, s.transmission.angle);
  d.target_h = s.mesh_size();
  d.order = s.order;
  d.sources = s.sources;
  for (const Rect& r : s.obstacles) {
    const double k = d.k(r.center());
    d.obstacles.push_back({r, [k](Point p) { return -std::exp(kI * (k * p.x)); }});
  }
  d.null_mode = s.null_mode;
  d.threads = s.threads;
  // Sources must sit strictly inside an active cell, away from interfaces.
  for (const auto& src : s.sources) {
    const int id = d.partition.locate(src.where);
    if (id < 0 || !d.partition.is_active(id)) throw InvalidArgument("source outside the active domain");
    const Rect c = d.partition.cell(id);
    if (!(src.where.x > c.x0 && src.where.x < c.x1 && src.where.y > c.y0 && src.where.y < c.y1))
      throw InvalidArgument("sources on interfaces are not supported");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

namespace detail {

inline Scenario grid_scenario(std::string name, std::string description, int rows, int cols) {
  Scenario s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.rows = rows;
  s.cols = cols;
  return s;
}

inline Point cell_center(const Scenario& s, int r, int c) {
  return {s.origin.x + (c + 0.5) * s.cell_width, s.origin.y + (r + 0.5) * s.cell_height};
}

inline Scenario two_sources(int n) {
  Scenario s = grid_scenario("twosrc" + std::to_string(n) + "x" + std::to_string(n),
                             "two point sources in the bottom-left and bottom-right cells", n, n);
  s.sources = {{cell_center(s, 0, 0), 1.0}, {cell_center(s, 0, n - 1), 1.0}};
  return s;
}

}  // namespace detail

inline std::vector<Scenario> scenario_catalog() {
  std::vector<Scenario> out;

  Scenario corner = detail::grid_scenario("corner5x5", "5x5 grid, point source in the bottom-left cell", 5, 5);
  corner.sources = {{detail::cell_center(corner, 0, 0), 1.0}};
  corner.precond = "sgs-d1";
  corner.mono_reference = true;
  out.push_back(corner);

  Scenario center = detail::grid_scenario("center5x5", "5x5 grid, point source in the middle cell", 5, 5);
  center.sources = {{detail::cell_center(center, 2, 2), 1.0}};
  center.precond = "sgs-2d";
  out.push_back(center);

  for (int n : {4, 8}) out.push_back(detail::two_sources(n));

  Scenario layered = detail::grid_scenario(
      "layered3x3", "3x3 grid, two horizontal layers (k = 2pi below y = 3.75, 3pi above), source top-left", 3, 3);
  layered.wavenumber.tops = {3.75};
  layered.wavenumber.values = {2.0 * kPi, 3.0 * kPi};
  layered.sources = {{detail::cell_center(layered, 2, 0), 1.0}};
  out.push_back(layered);

  Scenario masked = detail::grid_scenario("masked-L", "3x3 grid with the top-right cell removed", 3, 3);
  masked.null_cells = {{2, 2}};
  masked.sources = {{detail::cell_center(masked, 0, 0), 1.0}};
  out.push_back(masked);

  Scenario scatter = detail::grid_scenario(
      "scatter3x3", "3x3 grid, plane wave scattered by a unit square in the bottom-left cell", 3, 3);
  scatter.obstacles = {{0.75, 0.75, 1.75, 1.75}};
  scatter.mono_reference = true;
  out.push_back(scatter);

  return out;
}

inline std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (const auto& s : scenario_catalog()) names.push_back(s.name);
  return names;
}

inline Scenario find_scenario(const std::string& name) {
  for (auto& s : scenario_catalog())
    if (s.name == name) return s;
  std::string msg = "unknown scenario '" + name + "'; valid names:";
  for (const auto& n : scenario_names()) msg += " " + n;
  throw InvalidArgument(msg);
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

namespace detail {

inline Complex json_complex(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw InvalidArgument("amplitude must be a number or a [re, im] pair");
}

inline PadeSpec json_pade(const nlohmann::json& j, PadeSpec base) {
  base.n_aux = j.value("n_aux", base.n_aux);
  base.angle = j.value("angle", base.angle);
  return base;
}

}  // namespace detail

// Parses a configuration document. With "base", a catalog scenario is used
// for every field the document leaves out; otherwise the defaults of
// Scenario apply.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    const int version = j.value("schema_version", kSchemaVersion);
    if (version != kSchemaVersion) throw InvalidArgument("unsupported schema_version " + std::to_string(version));
    Scenario s = j.contains("base") ? find_scenario(j.at("base").get<std::string>()) : Scenario{};
    s.name = j.value("name", s.name.empty() ? std::string("custom") : s.name);
    s.description = j.value("description", s.description);

    if (j.contains("partition")) {
      const auto& p = j.at("partition");
      s.rows = p.value("rows", s.rows);
      s.cols = p.value("cols", s.cols);
      if (p.contains("cell_size")) {
        const auto& cs = p.at("cell_size");
        if (cs.is_number()) {
          s.cell_width = s.cell_height = cs.get<double>();
        } else {
          s.cell_width = cs.at(0).get<double>();
          s.cell_height = cs.at(1).get<double>();
        }
      }
      if (p.contains("origin")) s.origin = {p.at("origin").at(0).get<double>(), p.at("origin").at(1).get<double>()};
      if (p.contains("null_cells")) {
        s.null_cells.clear();
        for (const auto& rc : p.at("null_cells")) s.null_cells.emplace_back(rc.at(0).get<int>(), rc.at(1).get<int>());
      }
      if (p.contains("null_mode")) {
        const auto mode = p.at("null_mode").get<std::string>();
        if (mode == "masked")
          s.null_mode = NullCellMode::Masked;
        else if (mode == "zero-coupled")
          s.null_mode = NullCellMode::ZeroCoupled;
        else
          throw InvalidArgument("null_mode must be 'masked' or 'zero-coupled'");
      }
    }

    if (j.contains("wavenumber")) {
      const auto& w = j.at("wavenumber");
      if (w.is_number()) {
        s.wavenumber = {w.get<double>(), {}, {}};
      } else if (w.contains("layers")) {
        s.wavenumber.tops = w.at("layers").at("tops").get<std::vector<double>>();
        s.wavenumber.values = w.at("layers").at("values").get<std::vector<double>>();
      } else {
        s.wavenumber = {w.at("constant").get<double>(), {}, {}};
      }
    }

    if (j.contains("habc")) {
      s.exterior = s.transmission = detail::json_pade(j.at("habc"), s.exterior);
    }
    if (j.contains("exterior")) s.exterior = detail::json_pade(j.at("exterior"), s.exterior);
    if (j.contains("transmission")) s.transmission = detail::json_pade(j.at("transmission"), s.transmission);

    if (j.contains("discretization")) {
      const auto& d = j.at("discretization");
      s.order = d.value("order", s.order);
      s.vertices_per_wavelength = d.value("vertices_per_wavelength", s.vertices_per_wavelength);
    }

    if (j.contains("sources")) {
      s.sources.clear();
      for (const auto& src : j.at("sources")) {
        PointSource ps;
        ps.where = {src.at("x").get<double>(), src.at("y").get<double>()};
        ps.amplitude = src.contains("amplitude") ? detail::json_complex(src.at("amplitude")) : Complex{1.0, 0.0};
        s.sources.push_back(ps);
      }
    }
    if (j.contains("obstacles")) {
      s.obstacles.clear();
      for (const auto& o : j.at("obstacles")) {
        const auto r = o.at("rect");
        s.obstacles.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()});
      }
    }

    if (j.contains("solver")) {
      const auto& sv = j.at("solver");
      s.precond = sv.value("precond", s.precond);
      s.krylov.tol = sv.value("tol", s.krylov.tol);
      s.krylov.max_iterations = sv.value("max_iterations", s.krylov.max_iterations);
      if (sv.contains("restart")) {
        if (sv.at("restart").is_null())
          s.krylov.restart.reset();
        else
          s.krylov.restart = sv.at("restart").get<int>();
      }
    }
    s.threads = j.value("threads", s.threads);
    s.mono_reference = j.value("mono_reference", s.mono_reference);
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed configuration: ") + e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open configuration " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed configuration: ") + e.what());
  }
  return scenario_from_json(j);
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = s.name;
  j["description"] = s.description;
  j["partition"] = {{"rows", s.rows},
                    {"cols", s.cols},
                    {"cell_size", {s.cell_width, s.cell_height}},
                    {"origin", {s.origin.x, s.origin.y}},
                    {"null_mode", s.null_mode == NullCellMode::Masked ? "masked" : "zero-coupled"}};
  j["partition"]["null_cells"] = nlohmann::json::array();
  for (auto [r, c] : s.null_cells) j["partition"]["null_cells"].push_back({r, c});
  if (s.wavenumber.layered())
    j["wavenumber"] = {{"layers", {{"tops", s.wavenumber.tops}, {"values", s.wavenumber.values}}}};
  else
    j["wavenumber"] = {{"constant", s.wavenumber.constant}};
  j["exterior"] = {{"n_aux", s.exterior.n_aux}, {"angle", s.exterior.angle}};
  j["transmission"] = {{"n_aux", s.transmission.n_aux}, {"angle", s.transmission.angle}};
  j["discretization"] = {{"order", s.order}, {"vertices_per_wavelength", s.vertices_per_wavelength}};
  j["sources"] = nlohmann::json::array();
  for (const auto& src : s.sources)
    j["sources"].push_back(
        {{"x", src.where.x}, {"y", src.where.y}, {"amplitude", {src.amplitude.real(), src.amplitude.imag()}}});
  j["obstacles"] = nlohmann::json::array();
  for (const auto& r : s.obstacles) j["obstacles"].push_back({{"rect", {r.x0, r.y0, r.x1, r.y1}}});
  j["solver"] = {{"precond", s.precond}, {"tol", s.krylov.tol}, {"max_iterations", s.krylov.max_iterations}};
  j["solver"]["restart"] = s.krylov.restart ? nlohmann::json(*s.krylov.restart) : nlohmann::json(nullptr);
  j["threads"] = s.threads;
  j["mono_reference"] = s.mono_reference;
  return j;
}

// ---------------------------------------------------------------------------
// Solving
// ---------------------------------------------------------------------------

// Iteration n >= 1 with the largest one-step residual reduction
// history[n-1] / history[n]; 0 for histories without any step.
inline int drop_iteration(const std::vector<double>& history) {
  int best = 0;
  double best_ratio = 0.0;
  for (std::size_t n = 1; n < history.size(); ++n) {
    const double ratio =
        history[n] > 0.0 ? history[n - 1] / history[n] : std::numeric_limits<double>::infinity();
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(n);
    }
  }
  return best;
}

// Solves (I - A) g = b. Fixed preconditioners use GMRES; schedules with more
// than one direction use FGMRES.
inline KrylovResult solve_interface(const DdmOperator& op, const std::optional<PrecondConfig>& pc,
                                    const KrylovSettings& st) {
  const CVector& b = op.rhs();
  auto apply = [&](std::span<const Complex> g) { return op.apply_F(g); };
  if (!pc) return gmres(apply, std::span<const Complex>(b), st);
  SweepPreconditioner prec(op, *pc);
  auto m = [&](int n, std::span<const Complex> v) { return prec(n, v); };
  if (pc->schedule.size() > 1) return fgmres(apply, std::span<const Complex>(b), st, m);
  return gmres(apply, std::span<const Complex>(b), st, m);
}

struct RunOptions {
  std::optional<std::filesystem::path> vtk_dir;
  std::optional<std::filesystem::path> history_csv;
};

struct ScenarioReport {
  std::string name;
  std::string precond;
  int interface_size = 0;
  KrylovRun run;
  int drop = 0;
  JumpReport jumps;
  std::optional<double> mono_error;
  std::string mono_status = "not requested";
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  CVector g;
  std::vector<CVector> fields;
};

// Legacy ASCII VTK of one subdomain field: real part, imaginary part and
// modulus as point data. P2 meshes are written as quadratic triangles.
inline void write_field_vtk(std::ostream& os, const SubdomainMesh& m, std::span<const Complex> u,
                            const std::string& title = "helmholtz field") {
  if (u.size() != m.nodes.size()) throw InvalidArgument("field does not match the mesh");
  os.precision(12);
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.nodes.size() << " double\n";
  for (const auto& p : m.nodes) os << p.x << ' ' << p.y << " 0\n";
  const bool quad = m.order == 2;
  const std::size_t ne = quad ? m.elements.size() : m.triangles.size();
  const std::size_t per = quad ? 6 : 3;
  os << "CELLS " << ne << ' ' << ne * (per + 1) << '\n';
  for (std::size_t e = 0; e < ne; ++e) {
    os << per;
    for (std::size_t a = 0; a < per; ++a) os << ' ' << (quad ? m.elements[e][a] : m.triangles[e][a]);
    os << '\n';
  }
  os << "CELL_TYPES " << ne << '\n';
  for (std::size_t e = 0; e < ne; ++e) os << (quad ? 22 : 5) << '\n';
  os << "POINT_DATA " << m.nodes.size() << '\n';
  const char* names[3] = {"real", "imag", "abs"};
  for (int f = 0; f < 3; ++f) {
    os << "SCALARS " << names[f] << " double 1\nLOOKUP_TABLE default\n";
    for (const Complex& z : u) os << (f == 0 ? z.real() : f == 1 ? z.imag() : std::abs(z)) << '\n';
  }
}

inline void export_fields_vtk(const DdmOperator& op, const std::vector<CVector>& fields,
                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& p = op.partition();
  for (int id = 0; id < p.num_domains(); ++id) {
    if (!p.is_active(id)) continue;
    const auto file = dir / ("u_r" + std::to_string(p.row_of(id)) + "_c" + std::to_string(p.col_of(id)) + ".vtk");
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    write_field_vtk(out, op.system(id)->mesh(), fields[static_cast<std::size_t>(id)]);
  }
}

inline ScenarioReport run_scenario(const Scenario& s, const RunOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  ScenarioReport rep;
  rep.name = s.name;
  rep.precond = s.precond;
  const auto pc = parse_precond(s.precond);
  const auto t0 = clock::now();
  const DdmOperator op(make_setup(s));
  op.rhs();
  const auto t1 = clock::now();
  KrylovResult res = solve_interface(op, pc, s.krylov);
  const auto t2 = clock::now();
  rep.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
  rep.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  rep.interface_size = op.size();
  rep.run = res.run;
  rep.drop = drop_iteration(res.run.history);
  rep.g = std::move(res.x);
  rep.fields = op.reconstruct_solution(rep.g);
  rep.jumps = op.interface_jumps(rep.fields);
  if (s.mono_reference) {
    if (const auto ref = mono_domain_reference(op)) {
      rep.mono_error = relative_error_vs_reference(op, rep.fields, *ref);
      rep.mono_status = "computed";
    } else {
      rep.mono_status = "skipped (needs an all-active grid and a constant wavenumber)";
    }
  }
  if (opt.vtk_dir) export_fields_vtk(op, rep.fields, *opt.vtk_dir);
  if (opt.history_csv) {
    std::ofstream out(*opt.history_csv);
    if (!out) throw Error("cannot write " + opt.history_csv->string());
    write_history_csv(out, rep.run);
  }
  return rep;
}

inline void print_report(std::ostream& os, const ScenarioReport& r) {
  os << "scenario        " << r.name << '\n';
  os << "preconditioner  " << r.precond << '\n';
  os << "interface size  " << r.interface_size << '\n';
  os << "outcome         " << to_string(r.run.outcome) << " after " << r.run.iterations << " iterations\n";
  if (!r.run.history.empty()) os << "final relres    " << r.run.history.back() << '\n';
  os << "drop iteration  " << r.drop << '\n';
  os << "max jump        " << r.jumps.max_relative << " (relative to field rms " << r.jumps.global_rms << ")\n";
  os << "mono reference  ";
  if (r.mono_error)
    os << *r.mono_error << '\n';
  else
    os << r.mono_status << '\n';
  os << "setup time      " << r.setup_seconds << " s\n";
  os << "solve time      " << r.solve_seconds << " s\n";
}

}  // namespace ddsweep
