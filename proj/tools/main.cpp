// rdsym command-line driver.

#include "rdsym/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

namespace {

namespace pl = rdsym::pipeline;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out;
  std::string result;
};

pl::RunConfig load(const Flags& f) {
  pl::RunConfig c = pl::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output = std::filesystem::absolute(f.out);
  return c;
}

std::filesystem::path result_path(const Flags& f, const pl::RunConfig& c) {
  if (!f.result.empty()) return f.result;
  return c.resolve(c.output) / "discovery.json";
}

int workers(const Flags& f) {
  if (f.workers > 0) return f.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

void print_paths(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) std::cout << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reaction-diffusion discovery on brain graphs"};
  app.require_subcommand(1);
  Flags flags;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON run configuration")->required();
    sub->add_option("--seed", flags.seed, "root seed (overrides config)");
    sub->add_option("--workers", flags.workers, "worker threads (default: all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", flags.out, "output directory (overrides config)");
  };
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort");
  auto* discover = app.add_subcommand("discover", "train the ensemble and distill f");
  auto* project = app.add_subcommand("project", "project trajectories from a discovery result");
  auto* ablate = app.add_subcommand("ablate", "horizon x constraint-mode ablation");
  auto* ko = app.add_subcommand("ko-demo", "Kraichnan-Orszag hidden-physics demo");
  auto* report = app.add_subcommand("report", "plot-ready CSVs from a discovery result");
  for (auto* sub : {simulate, discover, project, ablate, ko, report}) add_common(sub);
  for (auto* sub : {project, report}) {
    sub->add_option("--result", flags.result, "discovery JSON (default: <out>/discovery.json)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const pl::RunConfig config = load(flags);
    if (simulate->parsed()) {
      const auto s = pl::cmd_simulate(config);
      std::cout << s.cohort_file.string() << '\n' << s.summary.dump(2) << '\n';
    } else if (discover->parsed()) {
      const auto r = pl::cmd_discover(config, workers(flags));
      const auto& best = r.members[static_cast<std::size_t>(r.best_member)];
      std::cout << "best member " << r.best_member << " projection error " << best.projection_error
                << '\n';
      for (const auto& g : best.groups) {
        std::cout << g.label << ": f_sym = " << rdsym::expr::format(g.selected.expression) << '\n';
      }
      for (const auto& m : r.members) {
        if (!m.ok()) std::cerr << "member " << m.index << " failed: " << m.error << '\n';
      }
    } else if (project->parsed()) {
      print_paths(pl::cmd_project(config, result_path(flags, config)));
    } else if (report->parsed()) {
      print_paths(pl::cmd_report(config, result_path(flags, config)));
    } else if (ablate->parsed()) {
      for (const auto& c : pl::cmd_ablate(config, workers(flags))) {
        std::cout << "T=" << c.horizon << ' ' << rdsym::pinn::to_string(c.mode)
                  << " f_phi_err=" << c.f_phi_error << " f_phi_err[0.7,1]=" << c.f_phi_error_high
                  << " f_sym=" << c.f_sym << '\n';
      }
    } else if (ko->parsed()) {
      const auto r = pl::cmd_ko(config);
      std::cout << "a = " << r.a << ", b = " << r.b << '\n';
    }
  } catch (const pl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
