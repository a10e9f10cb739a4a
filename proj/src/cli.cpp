#include "datpg/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#ifdef DATPG_HAVE_OPENMP
#include <omp.h>
#endif

#include "datpg/atpg.hpp"
#include "datpg/selftest.hpp"

namespace datpg {
namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kIo:
    case ErrorCode::kPatternLengthMismatch:
      return 2;
    case ErrorCode::kFaultList:
    case ErrorCode::kFaultSiteInvalid:
      return 3;
    case ErrorCode::kConfig:
    case ErrorCode::kNonpositiveTemperature:
    case ErrorCode::kNegativeLambda:
      return 4;
    case ErrorCode::kTooManyInputs:
      return 5;
    default:
      return 1;
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  f << text;
}

struct Inputs {
  std::string netlist;
  std::string faults;
  std::string patterns;
  std::string out;
};

std::vector<FaultSpec> load_faults(const CircuitGraph& g, const std::string& path) {
  return path.empty() ? collapsed_faults(g) : read_fault_list_file(g, path);
}

void emit(std::ostream& out, const std::string& dir, const std::string& name,
          const std::string& text) {
  if (dir.empty()) {
    out << text;
    return;
  }
  std::filesystem::create_directories(dir);
  write_file(std::filesystem::path(dir) / name, text);
}

int cmd_atpg(const Inputs& in, const AtpgConfig& config, bool timing,
             std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const CircuitGraph g = build_graph(read_bench_file(in.netlist));
  const auto faults = load_faults(g, in.faults);
  if (faults.empty()) throw Error(ErrorCode::kFaultList, "fault list is empty");
  const AtpgResult r = run_atpg(g, faults, config);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::filesystem::path dir(in.out);
  std::filesystem::create_directories(dir);
  write_file(dir / "patterns.txt", write_patterns(r.patterns));
  write_file(dir / "trace.csv", trace_csv(r.trace));
  write_file(dir / "coverage.csv", coverage_csv(coverage_curve(r)));
  write_file(dir / "report.csv", report_csv(g, faults, r.report));
  nlohmann::ordered_json summary;
  summary["total_faults"] = faults.size();
  summary["detected"] = r.report.detected_count;
  summary["patterns_emitted"] = r.patterns.size();
  summary["iterations_used"] = r.iterations_used;
  summary["rounds"] = r.rounds;
  if (timing) summary["wall_time"] = wall;
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  out << fmt::format("faults {}  detected {}  coverage {:.2f}%  patterns {}  iterations {}\n",
                     faults.size(), r.report.detected_count,
                     100.0 * r.report.detected_count / faults.size(), r.patterns.size(),
                     r.iterations_used);
  if (timing) err << fmt::format("wall time {:.3f} s\n", wall);
  return 0;
}

int cmd_faultsim(const Inputs& in, std::ostream& out) {
  const CircuitGraph g = build_graph(read_bench_file(in.netlist));
  const auto faults = load_faults(g, in.faults);
  const auto patterns = read_patterns_file(in.patterns, g.num_pis());
  const DetectionReport r = fault_simulate(g, faults, patterns);
  emit(out, in.out, "report.csv", report_csv(g, faults, r));
  if (!in.out.empty()) {
    out << fmt::format("faults {}  detected {}  patterns {}\n", faults.size(),
                       r.detected_count, patterns.size());
  }
  return 0;
}

int cmd_oracle(const Inputs& in, std::size_t bound, std::ostream& out) {
  const CircuitGraph g = build_graph(read_bench_file(in.netlist));
  const auto faults = load_faults(g, in.faults);
  const auto verdicts = exhaustive_detectability(g, faults, bound);
  std::string csv = "fault_id,site_net,stuck_value,verdict,witness\n";
  std::size_t detectable = 0;
  for (std::size_t f = 0; f < faults.size(); ++f) {
    const auto& v = verdicts[f];
    detectable += v.detectable;
    csv += fmt::format("{},{},{},{},{}\n", f, g.labels[faults[f].site],
                       static_cast<int>(faults[f].stuck_value),
                       v.detectable ? "detectable" : "redundant",
                       v.detectable ? to_string(v.witness) : "-");
  }
  emit(out, in.out, "oracle.csv", csv);
  if (!in.out.empty()) {
    out << fmt::format("faults {}  detectable {}  redundant {}\n", faults.size(),
                       detectable, faults.size() - detectable);
  }
  return 0;
}

int cmd_selftest(const SelftestOptions& opt, std::ostream& out) {
  bool ok = true;
  for (const auto& s : run_selftest(opt)) {
    out << fmt::format("{} {}: {}\n", s.passed ? "PASS" : "FAIL", s.name, s.detail);
    ok = ok && s.passed;
  }
  return ok ? 0 : 1;
}

void add_config_flags(CLI::App* app, AtpgConfig& c, bool& timing) {
  app->add_option("--T", c.patterns_per_run, "patterns per run")->capture_default_str();
  app->add_option("--B", c.batches, "parallel batches")->capture_default_str();
  app->add_option("--K", c.noise_samples, "noise samples per iteration")->capture_default_str();
  app->add_option("--max-iters", c.schedules.max_iters, "iterations per round")->capture_default_str();
  app->add_option("--budget", c.pattern_budget, "pattern budget")->capture_default_str();
  app->add_option("--lambda", c.lambda_x, "X-bit penalty weight")->capture_default_str();
  app->add_option("--tau-start", c.schedules.tau_start, "initial temperature")->capture_default_str();
  app->add_option("--tau-end", c.schedules.tau_end, "final temperature")->capture_default_str();
  app->add_option("--explore-frac", c.schedules.explore_fraction,
                  "run fraction over which w_explore decays 1 -> 0")->capture_default_str();
  app->add_option("--lr", c.schedules.lr, "base learning rate (cosine decay)")->capture_default_str();
  app->add_option("--seed", c.seed, "seed for every stochastic draw")->capture_default_str();
  app->add_option("--x-lo", c.x_lo, "sigmoid(theta) <= lo extracts 0")->capture_default_str();
  app->add_option("--x-hi", c.x_hi, "sigmoid(theta) >= hi extracts 1")->capture_default_str();
  app->add_option("--init-jitter", c.init_jitter, "uniform logit jitter at init")->capture_default_str();
  app->add_flag("--no-grad-norm", [&c](std::int64_t) { c.normalize_gradients = false; },
                "disable per-slot gradient normalization");
  app->add_flag("--naive", [&c](std::int64_t) { c.mode = OptimizerMode::kNaiveRelaxation; },
                "naive relaxation ablation (deterministic, ungated)");
  app->add_option("--check-every", c.check_every, "iterations between extraction checks")
      ->capture_default_str();
  app->add_option("--patience", c.patience, "checks without improvement before stopping")
      ->capture_default_str();
  app->add_option("--faults-per-round", c.faults_per_round,
                  "cap on faults merged per round (0 = all)")->capture_default_str();
  app->add_flag("--timing", timing, "report wall time on stderr and in summary.json");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable stuck-at ATPG"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Inputs in;
  AtpgConfig config;
  bool timing = false;
  std::size_t threads = 0;
  std::size_t bound = kDefaultEnumerationBound;
  SelftestOptions selftest;

  auto* atpg = app.add_subcommand("atpg", "generate test patterns");
  atpg->add_option("--netlist", in.netlist, ".bench netlist")->required();
  atpg->add_option("--faults", in.faults, "fault list (default: all collapsed faults)");
  std::string atpg_out = "datpg_out";
  atpg->add_option("--out", atpg_out, "output directory")->capture_default_str();
  add_config_flags(atpg, config, timing);
  atpg->add_option("--threads", threads, "worker threads (0 = available cores)");

  auto* faultsim = app.add_subcommand("faultsim", "fault-simulate a pattern file");
  faultsim->add_option("--netlist", in.netlist, ".bench netlist")->required();
  faultsim->add_option("--faults", in.faults, "fault list (default: all collapsed faults)");
  faultsim->add_option("--patterns", in.patterns, "pattern file")->required();
  faultsim->add_option("--out", in.out, "output directory (default: CSV to stdout)");
  faultsim->add_option("--threads", threads, "worker threads (0 = available cores)");

  auto* oracle = app.add_subcommand("oracle", "exhaustive detectability verdicts");
  oracle->add_option("--netlist", in.netlist, ".bench netlist")->required();
  oracle->add_option("--faults", in.faults, "fault list (default: all collapsed faults)");
  oracle->add_option("--bound", bound, "maximum PI count to enumerate")->capture_default_str();
  oracle->add_option("--out", in.out, "output directory (default: CSV to stdout)");
  oracle->add_option("--threads", threads, "worker threads (0 = available cores)");

  auto* st = app.add_subcommand("selftest", "gradient and reparameterization self-checks");
  st->add_option("--seeds", selftest.seeds, "repetitions of the statistical suites")
      ->capture_default_str();
  st->add_option("--seed", selftest.seed, "base seed")->capture_default_str();
  st->add_flag("--inject-bug", selftest.inject_bug, "corrupt the AND-family derivative");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }

#ifdef DATPG_HAVE_OPENMP
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
#endif

  try {
    if (atpg->parsed()) {
      in.out = atpg_out;
      config.validate();
      return cmd_atpg(in, config, timing, out, err);
    }
    if (faultsim->parsed()) return cmd_faultsim(in, out);
    if (oracle->parsed()) return cmd_oracle(in, bound, out);
    return cmd_selftest(selftest, out);
  } catch (const ParseError& e) {
    for (const auto& d : e.diagnostics()) err << d.format() << "\n";
    if (e.diagnostics().empty()) err << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace datpg
