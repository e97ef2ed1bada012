// Experiment runner: fraclap <subcommand> --config file.json [--out dir] ...
//
// Exit codes: 0 success, 2 config error, 3 solver failure, 1 anything else.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "fraclap/fraclap.hpp"

namespace {

int exit_code(fraclap::Errc code) {
  using fraclap::Errc;
  switch (code) {
    case Errc::breakdown:
    case Errc::max_iter_exceeded:
    case Errc::nan_detected:
    case Errc::quadrature_nonconvergent:
      return 3;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-order fractional Laplacian experiments"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "out";
  std::string mode;
  int rank = 0;
  std::size_t quadrature = 0;
  int threads = 1;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"weights", "finite-difference weight tables"},
      {"apply-conv", "operator accuracy against the Gaussian closed form"},
      {"elliptic", "elliptic convergence (manufactured or Richardson)"},
      {"evolve", "time stepping with observers and frames"},
      {"bench", "timings and Krylov iteration counts"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--mode", mode, "operator apply path")->check(CLI::IsMember({"fast", "direct"}));
    sub->add_option("--rank", rank, "low-rank terms r")->check(CLI::PositiveNumber);
    sub->add_option("--quadrature", quadrature, "quadrature size M (power of two)");
    sub->add_option("--threads", threads, "FFT threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    fraclap::ExperimentConfig cfg = fraclap::load_config(config);
    if (fraclap::parse_experiment(sub) != cfg.kind) {
      fraclap::fail(fraclap::Errc::config,
                    "config describes '" + std::string(fraclap::to_string(cfg.kind)) + "', not '" + sub + "'");
    }
    if (!mode.empty()) cfg.op.mode = mode == "fast" ? fraclap::ApplyMode::fast : fraclap::ApplyMode::direct;
    if (rank > 0) cfg.op.rank = rank;
    if (quadrature > 0) {
      if (!fraclap::fft::is_power_of_two(quadrature)) fraclap::fail(fraclap::Errc::config, "quadrature must be a power of two");
      cfg.op.quadrature = quadrature;
      cfg.m = quadrature;
    }
    fraclap::fft::set_threads(threads);
    for (const auto& path : fraclap::run_experiment(cfg, out)) std::cout << path.string() << "\n";
  } catch (const fraclap::Error& e) {
    std::cerr << "fraclap: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "fraclap: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
