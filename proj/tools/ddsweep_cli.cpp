// Command-line driver: solve scenarios, list the catalog, probe the operator.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ddsweep/ddsweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConvergence = 2;

int list_scenarios() {
  for (const auto& s : ddsweep::scenario_catalog())
    std::cout << s.name << "  " << s.rows << "x" << s.cols << "  precond=" << s.precond << "  " << s.description
              << '\n';
  return kExitOk;
}

// Probes F column by column on a small 2x2 case and compares it with the
// matrix-free product on a random vector.
int probe_operator(bool size_check, double h) {
  ddsweep::DdmSetup setup;
  setup.partition = ddsweep::build_partition({0.0, 0.0, 2.0, 2.0}, 2, 2);
  setup.target_h = h;
  setup.sources = {{{0.5, 0.5}, 1.0}};
  const ddsweep::DdmOperator op(setup);
  std::cout << "interface size " << op.size() << '\n';
  if (size_check && op.size() > 400) {
    std::cerr << "interface dimension exceeds 400; use a coarser mesh\n";
    return kExitUsage;
  }
  const auto f = ddsweep::probe_dense(op.size(), [&](std::span<const ddsweep::Complex> v) { return op.apply_F(v); });
  ddsweep::CVector x(static_cast<std::size_t>(op.size()));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = {std::cos(1.0 + i), std::sin(2.0 * i)};
  const auto y0 = op.apply_F(x);
  const auto y1 = f * x;
  std::cout << "max |F_dense x - F x| = " << ddsweep::max_abs_diff(y0, y1) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Checkerboard domain decomposition Helmholtz solver"};
  app.require_subcommand(1);

  auto* solve = app.add_subcommand("solve", "solve a scenario");
  std::string config;
  std::string scenario;
  std::optional<std::string> precond;
  std::optional<double> tol;
  std::optional<int> restart;
  std::optional<int> max_iter;
  std::optional<int> threads;
  std::string vtk_dir;
  std::string history;
  auto* cfg_opt = solve->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
  auto* scn_opt = solve->add_option("--scenario", scenario, "catalog scenario name");
  cfg_opt->excludes(scn_opt);
  solve->add_option("--precond", precond, "preconditioner")->check(CLI::IsMember(ddsweep::precond_names()));
  solve->add_option("--tol", tol, "relative residual target");
  solve->add_option("--restart", restart, "GMRES restart length")->check(CLI::PositiveNumber);
  solve->add_option("--max-iter", max_iter, "iteration cap")->check(CLI::PositiveNumber);
  solve->add_option("--threads", threads, "intra-solver thread cap")->check(CLI::PositiveNumber);
  solve->add_option("--export-vtk", vtk_dir, "directory for per-subdomain VTK fields");
  solve->add_option("--export-history", history, "CSV file for the residual history");

  app.add_subcommand("list-scenarios", "list the built-in scenarios");

  auto* probe = app.add_subcommand("probe-operator", "dense probing of the interface operator on a 2x2 grid");
  bool size_check = false;
  double probe_h = 0.25;
  probe->add_flag("--size-check", size_check, "refuse interface dimensions above 400");
  probe->add_option("--mesh-size", probe_h, "mesh size")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("list-scenarios")) return list_scenarios();
    if (app.got_subcommand("probe-operator")) return probe_operator(size_check, probe_h);

    if (config.empty() && scenario.empty()) {
      std::cerr << "solve: one of --config or --scenario is required\n";
      return kExitUsage;
    }
    ddsweep::Scenario s = config.empty() ? ddsweep::find_scenario(scenario) : ddsweep::load_scenario(config);
    if (precond) s.precond = *precond;
    if (tol) s.krylov.tol = *tol;
    if (restart) s.krylov.restart = *restart;
    if (max_iter) s.krylov.max_iterations = *max_iter;
    if (threads) s.threads = *threads;
    ddsweep::validate(s);
    ddsweep::RunOptions opt;
    if (!vtk_dir.empty()) opt.vtk_dir = vtk_dir;
    if (!history.empty()) opt.history_csv = history;
    const auto rep = ddsweep::run_scenario(s, opt);
    ddsweep::print_report(std::cout, rep);
    return rep.run.converged() ? kExitOk : kExitNoConvergence;
  } catch (const ddsweep::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ddsweep::UnsupportedGeometry& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
