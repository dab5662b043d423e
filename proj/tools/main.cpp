#include <atomic>
#include <chrono>
#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "ionkink/error.hpp"
#include "ionkink/experiment.hpp"

using namespace ionkink;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

struct Globals {
  std::string config_path;
  std::string preset;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  int workers = 0;
  bool synthetic = false;
};

ExperimentConfig load_config(const Globals& g) {
  nlohmann::json j = nlohmann::json::object();
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw Error(ErrorKind::Configuration, "cannot open config file " + g.config_path);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Configuration, g.config_path + " is not valid JSON: " + e.what());
    }
  }
  if (!g.preset.empty()) j["preset"] = g.preset;
  ExperimentConfig c = ExperimentConfig::from_json(j);
  if (g.seed) c.run.seed = *g.seed;
  c.validate();
  return c;
}

std::vector<int> parse_charges(const std::string& s) {
  if (s == "both") return {1, -1};
  if (s == "+1" || s == "1") return {1};
  if (s == "-1") return {-1};
  throw Error(ErrorKind::Configuration, "--charges must be both, +1 or -1");
}

int parse_charge(const std::string& s) {
  if (s == "+1" || s == "1") return 1;
  if (s == "-1") return -1;
  throw Error(ErrorKind::Configuration, "--charge must be +1 or -1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinks in trapped-ion Coulomb crystals: equilibria, modes, driven escape and analysis"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--preset", g.preset, "Defaults to start from: scaled or full");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--workers", g.workers, "Worker threads (default: available cores)");
  app.add_flag("--synthetic", g.synthetic, "Lifetime analysis on generated escape times");

  std::string configuration = "zigzag";
  auto* relax = app.add_subcommand("relax", "Relax a configuration and classify it");
  relax->add_option("--configuration", configuration, "zigzag, kink or kink_bar");
  auto* modes = app.add_subcommand("modes", "Normal-mode spectrum and kink-mode report");
  modes->add_option("--configuration", configuration, "zigzag, kink or kink_bar");
  auto* spectroscopy = app.add_subcommand("spectroscopy", "Escape probability versus drive frequency");
  auto* lifetime = app.add_subcommand("lifetime", "Survival curves, lifetimes and Kramers fit");
  std::string charges = "both";
  auto* direction = app.add_subcommand("directionality", "Escape directionality per topological charge");
  direction->add_option("--charges", charges, "both, +1 or -1");
  std::string charge = "+1";
  auto* pn = app.add_subcommand("pn", "Peierls-Nabarro landscape of the kink");
  pn->add_option("--charge", charge, "+1 or -1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  std::signal(SIGINT, on_sigint);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  try {
    const ExperimentConfig config = load_config(g);
    const int workers =
        g.workers > 0 ? g.workers : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    const OutputDir out(g.out);
    out.write_json("config.json", config.to_json());

    RunControl control;
    control.workers = workers;
    control.journal = out.path / "journal.jsonl";
    control.stop = &g_stop;
    control.progress = [](const std::string& m) { std::cerr << m << std::endl; };

    std::string command = app.get_subcommands().front()->get_name();
    std::vector<TrajectoryResult> trajectories;
    if (*relax) {
      write_relax(out, config, run_relax(config, configuration));
    } else if (*modes) {
      write_modes(out, config, run_modes(config, configuration));
    } else if (*spectroscopy) {
      const SpectroscopyResult r = run_spectroscopy(config, control);
      write_spectroscopy(out, r);
      trajectories = r.trajectories;
      for (const auto& n : r.notices) std::cerr << "notice: " << n << '\n';
    } else if (*lifetime) {
      const LifetimeResult r = run_lifetime(config, control, g.synthetic);
      write_lifetime(out, config, r);
      trajectories = r.trajectories;
      for (const auto& n : r.notices) std::cerr << "notice: " << n << '\n';
      if (std::none_of(r.points.begin(), r.points.end(), [](const auto& p) { return p.fit.has_value(); })) {
        throw Error(ErrorKind::TooFewEscapes, "no amplitude produced enough escapes for a lifetime");
      }
    } else if (*direction) {
      const DirectionalityReport r = run_directionality(config, parse_charges(charges), control);
      write_directionality(out, config, r);
      trajectories = r.trajectories;
      for (const auto& n : r.notices) std::cerr << "notice: " << n << '\n';
    } else if (*pn) {
      write_pn(out, config, run_pn(config, parse_charge(charge)));
    }
    out.write_json("manifest.json", make_manifest(config, command, trajectories, elapsed(), workers));
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
