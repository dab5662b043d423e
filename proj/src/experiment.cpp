#include "ionkink/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "ionkink/error.hpp"

namespace ionkink {

using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& message) {
  throw Error(ErrorKind::Configuration, message);
}

// Reads one JSON object section; keys not consumed by get() are rejected by
// finish().
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) bad_config("'" + name_ + "' must be an object");
  }

  void get(const char* key, double& out) { read(key, [&](const json& v) { out = number(v, key); }); }
  void get(const char* key, int& out) {
    read(key, [&](const json& v) {
      if (!v.is_number_integer()) bad_config(path(key) + " must be an integer");
      out = v.get<int>();
    });
  }
  void get(const char* key, std::uint64_t& out) {
    read(key, [&](const json& v) {
      if (!v.is_number_unsigned()) bad_config(path(key) + " must be a non-negative integer");
      out = v.get<std::uint64_t>();
    });
  }
  void get(const char* key, std::string& out) {
    read(key, [&](const json& v) {
      if (!v.is_string()) bad_config(path(key) + " must be a string");
      out = v.get<std::string>();
    });
  }
  void get(const char* key, std::optional<double>& out) {
    read(key, [&](const json& v) {
      if (v.is_null()) {
        out.reset();
      } else {
        out = number(v, key);
      }
    });
  }
  void get(const char* key, std::vector<double>& out) {
    read(key, [&](const json& v) {
      if (!v.is_array()) bad_config(path(key) + " must be an array of numbers");
      out.clear();
      for (const auto& x : v) out.push_back(number(x, key));
    });
  }
  const json& child(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }
  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) bad_config("unknown key '" + path(item.key().c_str()) + "'");
    }
  }

 private:
  template <class F>
  void read(const char* key, F&& f) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it != j_.end()) f(*it);
  }
  double number(const json& v, const char* key) const {
    if (!v.is_number()) bad_config(path(key) + " must be a number");
    return v.get<double>();
  }
  std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Shortest round-trip text; plain decimals in the everyday range.
std::string format_number(double v) {
  char buf[128];
  const double a = std::abs(v);
  const auto fmt = a == 0 || (a >= 1e-4 && a < 1e15) ? std::chars_format::fixed
                                                     : std::chars_format::scientific;
  const auto res = std::to_chars(buf, buf + sizeof buf, v, fmt);
  return std::string(buf, res.ptr);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; the first exception
// is rethrown after all threads have joined.
void parallel_for(int n, int workers, const std::function<void(int)>& fn,
                  const std::atomic<bool>* stop = nullptr) {
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      if (failed.load() || (stop && stop->load())) return;
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const int threads = std::max(1, std::min(workers, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double omega_max_for(const TrapModel& statics, int n_ions) {
  try {
    const EquilibriumResult kink = relax_kink(n_ions, statics, 1);
    return normal_modes(kink.configuration, statics).max_frequency();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnsupportedRegime) throw;
  }
  const EquilibriumResult zz = relax_zigzag(n_ions, statics);
  return normal_modes(zz.configuration, statics).max_frequency();
}

std::vector<double> sweep_values(const ExperimentConfig& config, const std::string& parameter,
                                 double fallback) {
  if (config.sweep.parameter.empty()) return {fallback};
  if (config.sweep.parameter != parameter) {
    bad_config("this command sweeps '" + parameter + "', not '" + config.sweep.parameter + "'");
  }
  return config.sweep.values;
}

void report(const RunControl& control, const std::string& message) {
  if (control.progress) control.progress(message);
}

double kbtd(const ExperimentConfig& config) {
  return UnitSystem::make(config.units.mass_amu, config.units.charge_e,
                          constants::two_pi * config.trap.f_x_hz)
      .kB_TD();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::scaled() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::full() {
  ExperimentConfig c;
  c.drive.duration_ms = 85;
  c.run.n_trajectories = 100;
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  Section top(j, "");
  std::string preset = "scaled";
  top.get("preset", preset);
  ExperimentConfig c;
  if (preset == "full") {
    c = full();
  } else if (preset != "scaled") {
    bad_config("unknown preset '" + preset + "' (expected 'scaled' or 'full')");
  }

  if (top.has("units")) {
    Section s(top.child("units"), "units");
    s.get("mass_amu", c.units.mass_amu);
    s.get("charge_e", c.units.charge_e);
    s.finish();
  }
  if (top.has("trap")) {
    Section s(top.child("trap"), "trap");
    s.get("f_x_hz", c.trap.f_x_hz);
    s.get("f_y_hz", c.trap.f_y_hz);
    s.get("f_z_hz", c.trap.f_z_hz);
    s.get("alpha_x", c.trap.alpha_x);
    s.get("alpha_y", c.trap.alpha_y);
    s.get("beta_x", c.trap.beta_x);
    s.get("beta_y", c.trap.beta_y);
    s.get("c_xxy", c.trap.c_xxy);
    s.get("kappa", c.trap.kappa);
    s.finish();
  }
  if (top.has("langevin")) {
    Section s(top.child("langevin"), "langevin");
    s.get("gamma_x_hz", c.langevin.gamma_x_hz);
    s.get("radial_ratio", c.langevin.radial_ratio);
    s.get("temperature_mk", c.langevin.temperature_mk);
    s.finish();
  }
  if (top.has("drive")) {
    Section s(top.child("drive"), "drive");
    s.get("epsilon", c.drive.epsilon);
    s.get("f_d_hz", c.drive.f_d_hz);
    s.get("duration_ms", c.drive.duration_ms);
    s.get("ramp_us", c.drive.ramp_us);
    s.finish();
  }
  if (top.has("run")) {
    Section s(top.child("run"), "run");
    s.get("n_ions", c.run.n_ions);
    s.get("seed", c.run.seed);
    s.get("n_trajectories", c.run.n_trajectories);
    s.get("dt_override", c.run.dt_override);
    s.get("observer_stride_us", c.run.observer_stride_us);
    s.get("escape_dwell_ms", c.run.escape_dwell_ms);
    s.finish();
  }
  if (top.has("sweep")) {
    Section s(top.child("sweep"), "sweep");
    s.get("parameter", c.sweep.parameter);
    s.get("values", c.sweep.values);
    s.finish();
  }
  if (top.has("calibration")) {
    Section s(top.child("calibration"), "calibration");
    s.get("settle_ms", c.calibration.settle_ms);
    s.get("average_ms", c.calibration.average_ms);
    s.get("trajectories", c.calibration.trajectories);
    s.get("epsilons", c.calibration.epsilons);
    s.finish();
  }
  if (top.has("synthetic")) {
    Section s(top.child("synthetic"), "synthetic");
    s.get("w_kbtd", c.synthetic.w_kbtd);
    s.get("prefactor_ms", c.synthetic.prefactor_ms);
    s.get("t0_mk", c.synthetic.t0_mk);
    s.get("slope_mk", c.synthetic.slope_mk);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad_config("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    bad_config("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["units"] = {{"mass_amu", units.mass_amu}, {"charge_e", units.charge_e}};
  j["trap"] = {{"f_x_hz", trap.f_x_hz},     {"f_y_hz", trap.f_y_hz},   {"f_z_hz", trap.f_z_hz},
               {"alpha_x", trap.alpha_x},   {"alpha_y", trap.alpha_y}, {"beta_x", trap.beta_x},
               {"beta_y", trap.beta_y},     {"c_xxy", trap.c_xxy},     {"kappa", optional_json(trap.kappa)}};
  j["langevin"] = {{"gamma_x_hz", langevin.gamma_x_hz},
                   {"radial_ratio", langevin.radial_ratio},
                   {"temperature_mk", langevin.temperature_mk}};
  j["drive"] = {{"epsilon", drive.epsilon},
                {"f_d_hz", optional_json(drive.f_d_hz)},
                {"duration_ms", drive.duration_ms},
                {"ramp_us", drive.ramp_us}};
  j["run"] = {{"n_ions", run.n_ions},
              {"seed", run.seed},
              {"n_trajectories", run.n_trajectories},
              {"dt_override", optional_json(run.dt_override)},
              {"observer_stride_us", run.observer_stride_us},
              {"escape_dwell_ms", run.escape_dwell_ms}};
  j["sweep"] = {{"parameter", sweep.parameter}, {"values", sweep.values}};
  j["calibration"] = {{"settle_ms", calibration.settle_ms},
                      {"average_ms", calibration.average_ms},
                      {"trajectories", calibration.trajectories},
                      {"epsilons", calibration.epsilons}};
  j["synthetic"] = {{"w_kbtd", synthetic.w_kbtd},
                    {"prefactor_ms", synthetic.prefactor_ms},
                    {"t0_mk", synthetic.t0_mk},
                    {"slope_mk", synthetic.slope_mk}};
  return j;
}

std::string ExperimentConfig::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : to_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

void ExperimentConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) bad_config(std::string(name) + " must be positive");
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0) || !std::isfinite(v)) bad_config(std::string(name) + " must be >= 0");
  };
  positive(units.mass_amu, "units.mass_amu");
  positive(units.charge_e, "units.charge_e");
  non_negative(langevin.gamma_x_hz, "langevin.gamma_x_hz");
  non_negative(langevin.radial_ratio, "langevin.radial_ratio");
  non_negative(langevin.temperature_mk, "langevin.temperature_mk");
  non_negative(drive.epsilon, "drive.epsilon");
  if (drive.f_d_hz) positive(*drive.f_d_hz, "drive.f_d_hz");
  positive(drive.duration_ms, "drive.duration_ms");
  non_negative(drive.ramp_us, "drive.ramp_us");
  if (run.n_ions < 1) bad_config("run.n_ions must be >= 1");
  if (run.n_trajectories < 1) bad_config("run.n_trajectories must be >= 1");
  if (run.dt_override) positive(*run.dt_override, "run.dt_override");
  positive(run.observer_stride_us, "run.observer_stride_us");
  non_negative(run.escape_dwell_ms, "run.escape_dwell_ms");
  if (!sweep.parameter.empty() && sweep.parameter != "f_d_hz" && sweep.parameter != "epsilon") {
    bad_config("sweep.parameter must be 'f_d_hz' or 'epsilon'");
  }
  if (!sweep.parameter.empty() && sweep.values.empty()) bad_config("sweep.values is empty");
  if (sweep.parameter.empty() && !sweep.values.empty()) bad_config("sweep.values without a parameter");
  for (const double v : sweep.values) {
    if (sweep.parameter == "f_d_hz") positive(v, "sweep value");
    non_negative(v, "sweep value");
  }
  positive(calibration.settle_ms, "calibration.settle_ms");
  positive(calibration.average_ms, "calibration.average_ms");
  if (calibration.trajectories < 1) bad_config("calibration.trajectories must be >= 1");
  for (const double e : calibration.epsilons) non_negative(e, "calibration epsilon");
  positive(synthetic.w_kbtd, "synthetic.w_kbtd");
  positive(synthetic.prefactor_ms, "synthetic.prefactor_ms");
  positive(synthetic.t0_mk, "synthetic.t0_mk");
  non_negative(synthetic.slope_mk, "synthetic.slope_mk");
  trap_model();
}

TrapModel ExperimentConfig::trap_model() const {
  Anharmonicity a;
  a.alpha_x = trap.alpha_x;
  a.alpha_y = trap.alpha_y;
  a.beta_x = trap.beta_x;
  a.beta_y = trap.beta_y;
  a.c_xxy = trap.c_xxy;
  Drive d;
  d.epsilon = drive.epsilon;
  d.omega_d = drive.f_d_hz ? constants::two_pi * *drive.f_d_hz : 0.0;
  d.kappa = trap.kappa;
  return TrapModel::make(units.mass_amu, units.charge_e,
                         {constants::two_pi * trap.f_x_hz, constants::two_pi * trap.f_y_hz,
                          constants::two_pi * trap.f_z_hz},
                         a, d);
}

LangevinParams ExperimentConfig::langevin_params(const TrapModel& model, double omega_max) const {
  double dt = default_timestep(omega_max, model.units);
  if (run.dt_override) {
    check_timestep(*run.dt_override, omega_max, model.units);
    dt = *run.dt_override;
  }
  LangevinParams p = LangevinParams::laser_cooling(constants::two_pi * langevin.gamma_x_hz,
                                                   langevin.radial_ratio,
                                                   langevin.temperature_mk * 1e-3, dt);
  p.seed = run.seed;
  return p;
}

TrajectoryOptions ExperimentConfig::trajectory_options() const {
  TrajectoryOptions o;
  o.duration_ms = drive.duration_ms;
  o.drive_ramp_us = drive.ramp_us;
  o.observer_stride_us = run.observer_stride_us;
  o.escape_dwell_ms = run.escape_dwell_ms;
  o.stop_on_escape = true;
  o.record_samples = false;
  return o;
}

// ---------------------------------------------------------------------------
// Ensembles

std::uint64_t trajectory_index(int point, int j) {
  return (static_cast<std::uint64_t>(point) << 32) | static_cast<std::uint32_t>(j);
}

json to_json(const TrajectoryResult& r) {
  json j;
  j["point"] = r.job.point;
  j["trajectory_index"] = r.job.trajectory_index;
  j["charge"] = r.job.charge;
  j["epsilon"] = r.job.epsilon;
  j["f_d_hz"] = r.job.f_d_hz;
  j["escaped"] = r.outcome.escaped;
  j["time_ms"] = r.outcome.time_ms;
  j["direction"] = r.outcome.direction
                       ? json(*r.outcome.direction == EscapeDirection::Left ? "left" : "right")
                       : json(nullptr);
  j["charge_at_escape"] = r.outcome.charge;
  j["inconclusive"] = r.inconclusive;
  j["mean_kinetic_energy"] = r.mean_kinetic_energy;
  j["steps"] = r.steps;
  return j;
}

TrajectoryResult trajectory_result_from_json(const json& j) {
  TrajectoryResult r;
  r.job.point = j.at("point").get<int>();
  r.job.trajectory_index = j.at("trajectory_index").get<std::uint64_t>();
  r.job.charge = j.at("charge").get<int>();
  r.job.epsilon = j.at("epsilon").get<double>();
  r.job.f_d_hz = j.at("f_d_hz").get<double>();
  r.outcome.escaped = j.at("escaped").get<bool>();
  r.outcome.time_ms = j.at("time_ms").get<double>();
  if (!j.at("direction").is_null()) {
    r.outcome.direction =
        j.at("direction").get<std::string>() == "left" ? EscapeDirection::Left : EscapeDirection::Right;
  }
  r.outcome.charge = j.at("charge_at_escape").get<int>();
  r.inconclusive = j.at("inconclusive").get<bool>();
  r.mean_kinetic_energy = j.at("mean_kinetic_energy").get<double>();
  r.steps = j.at("steps").get<std::uint64_t>();
  return r;
}

std::vector<TrajectoryResult> run_ensemble(const ExperimentConfig& config,
                                           const std::vector<TrajectoryJob>& jobs,
                                           const RunControl& control) {
  using Key = std::tuple<int, std::uint64_t, int>;
  auto key_of = [](const TrajectoryJob& j) { return Key{j.point, j.trajectory_index, j.charge}; };

  std::map<Key, TrajectoryResult> done;
  const std::string digest = config.digest();
  std::ofstream journal;
  if (control.journal) {
    const bool exists = std::filesystem::exists(*control.journal);
    if (exists) {
      std::ifstream in(*control.journal);
      std::string line;
      bool header = true;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::parse_error&) {
          break;  // torn final line from an interrupted write
        }
        if (header) {
          if (j.value("config_digest", std::string()) != digest) {
            bad_config("journal " + control.journal->string() +
                       " belongs to a different configuration");
          }
          header = false;
          continue;
        }
        const TrajectoryResult r = trajectory_result_from_json(j);
        done[key_of(r.job)] = r;
      }
    }
    journal.open(*control.journal, std::ios::app);
    if (!journal) bad_config("cannot write journal " + control.journal->string());
    if (!exists) journal << json{{"config_digest", digest}}.dump() << '\n' << std::flush;
  }

  std::vector<TrajectoryResult> results(jobs.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto it = done.find(key_of(jobs[i]));
    if (it != done.end() && it->second.job.epsilon == jobs[i].epsilon &&
        it->second.job.f_d_hz == jobs[i].f_d_hz) {
      results[i] = it->second;
    } else {
      pending.push_back(i);
    }
  }
  if (pending.size() < jobs.size()) {
    report(control, "resuming: " + std::to_string(jobs.size() - pending.size()) + " of " +
                        std::to_string(jobs.size()) + " trajectories already done");
  }
  if (pending.empty()) return results;

  const TrapModel statics = config.trap_model().without_drive();
  std::map<int, EquilibriumResult> kinks;
  for (const auto& j : jobs) {
    if (!kinks.count(j.charge)) kinks.emplace(j.charge, relax_kink(config.run.n_ions, statics, j.charge));
  }
  const double omega_max = omega_max_for(statics, config.run.n_ions);
  const LangevinParams base = config.langevin_params(statics, omega_max);
  const TrajectoryOptions options = config.trajectory_options();

  std::mutex mutex;
  std::size_t finished = 0;
  parallel_for(
      static_cast<int>(pending.size()), control.workers,
      [&](int k) {
        const std::size_t i = pending[k];
        const TrajectoryJob& job = jobs[i];
        const TrapModel driven = statics.with_drive(job.epsilon, constants::two_pi * job.f_d_hz);
        LangevinParams lp = base;
        lp.trajectory_index = job.trajectory_index;
        const CrystalState start = thermal_state(kinks.at(job.charge).configuration, driven, lp);
        const TrajectoryRecord rec = run_trajectory(start, driven, lp, options);
        TrajectoryResult r;
        r.job = job;
        r.outcome = to_outcome(rec.escape, options.duration_ms, job.charge);
        r.inconclusive = rec.escape.inconclusive;
        r.mean_kinetic_energy = rec.mean_kinetic_energy_kink_present;
        r.steps = rec.steps;

        std::lock_guard<std::mutex> lock(mutex);
        results[i] = r;
        if (journal.is_open()) journal << to_json(r).dump() << '\n' << std::flush;
        ++finished;
        if (finished % 10 == 0 || finished == pending.size()) {
          report(control, std::to_string(finished) + "/" + std::to_string(pending.size()) +
                              " trajectories");
        }
      },
      control.stop);
  if (finished < pending.size()) {
    throw Error(ErrorKind::Interrupted, "stopped after " + std::to_string(finished) + " of " +
                                            std::to_string(pending.size()) +
                                            " trajectories; rerun to resume");
  }
  return results;
}

// ---------------------------------------------------------------------------
// Pipelines

EquilibriumResult run_relax(const ExperimentConfig& config, const std::string& configuration) {
  const TrapModel statics = config.trap_model().without_drive();
  const int n = config.run.n_ions;
  if (configuration == "zigzag") return relax_zigzag(n, statics);
  if (configuration == "kink") return relax_kink(n, statics, +1);
  if (configuration == "kink_bar") return relax_kink(n, statics, -1);
  bad_config("configuration must be zigzag, kink or kink_bar");
}

ModesReport run_modes(const ExperimentConfig& config, const std::string& configuration) {
  const TrapModel statics = config.trap_model().without_drive();
  ModesReport report;
  report.equilibrium = run_relax(config, configuration);
  report.spectrum = normal_modes(report.equilibrium.configuration, statics);
  if (configuration != "zigzag") {
    const EquilibriumResult zz = relax_zigzag(config.run.n_ions, statics);
    const ModeSpectrum zz_modes = normal_modes(zz.configuration, statics);
    report.kink_modes =
        identify_kink_modes(report.spectrum, zz_modes, report.equilibrium.configuration, statics);
  }
  return report;
}

double resonant_drive_hz(const ExperimentConfig& config) {
  if (config.drive.f_d_hz) return *config.drive.f_d_hz;
  const ModesReport modes = run_modes(config, "kink");
  if (!modes.kink_modes || !modes.kink_modes->drive_target) {
    throw Error(ErrorKind::UnsupportedRegime, "the kink has no gapped mode to drive");
  }
  return modes.kink_modes->drive_target->frequency / constants::two_pi;
}

SpectroscopyResult run_spectroscopy(const ExperimentConfig& config, const RunControl& control) {
  if (config.sweep.parameter != "f_d_hz") bad_config("spectroscopy needs a sweep over f_d_hz");
  SpectroscopyResult out;
  try {
    const ModesReport modes = run_modes(config, "kink");
    out.drive_target = modes.kink_modes->drive_target;
    out.secondary_resonance = modes.kink_modes->secondary_resonance;
  } catch (const Error& e) {
    out.notices.push_back(std::string("mode prediction unavailable: ") + e.what());
  }

  std::vector<TrajectoryJob> jobs;
  const auto& freqs = config.sweep.values;
  for (int p = 0; p < static_cast<int>(freqs.size()); ++p) {
    for (int j = 0; j < config.run.n_trajectories; ++j) {
      jobs.push_back({p, trajectory_index(p, j), 1, config.drive.epsilon, freqs[p]});
    }
  }
  out.trajectories = run_ensemble(config, jobs, control);
  out.scan.resize(freqs.size());
  for (std::size_t p = 0; p < freqs.size(); ++p) out.scan[p].frequency_hz = freqs[p];
  for (const auto& r : out.trajectories) {
    ScanPoint& s = out.scan[r.job.point];
    ++s.trajectories;
    s.escapes += r.outcome.escaped ? 1 : 0;
  }

  const bool any = std::any_of(out.scan.begin(), out.scan.end(),
                               [](const ScanPoint& s) { return s.escapes > 0; });
  if (!any) {
    out.notices.push_back("no escapes at any frequency; Lorentzian fit skipped");
    return out;
  }
  for (const int peaks : {1, 2}) {
    try {
      (peaks == 1 ? out.single_peak : out.double_peak) = fit_lorentzian(out.scan, peaks);
    } catch (const Error& e) {
      out.notices.push_back(std::to_string(peaks) + "-peak fit failed: " + e.what());
    }
  }
  return out;
}

LifetimeResult run_lifetime(const ExperimentConfig& config, const RunControl& control,
                            bool synthetic) {
  LifetimeResult out;
  const std::vector<double> eps = sweep_values(config, "epsilon", config.drive.epsilon);
  const TrapModel model = config.trap_model();
  const UnitSystem& units = model.units;
  const int n = config.run.n_ions;
  const double window = config.drive.duration_ms;

  std::vector<double> cal_eps = config.calibration.epsilons;
  if (cal_eps.empty()) {
    cal_eps.push_back(0.0);
    for (const double e : eps) {
      if (e != 0.0) cal_eps.push_back(e);
    }
  }

  std::vector<std::vector<EscapeOutcome>> events(eps.size());
  if (synthetic) {
    const auto& s = config.synthetic;
    out.f_d_hz = config.drive.f_d_hz.value_or(0.0);
    for (std::size_t p = 0; p < eps.size(); ++p) {
      const double t_k = 1e-3 * (s.t0_mk + s.slope_mk * eps[p]);
      const double tau = kramers_lifetime(s.w_kbtd, s.prefactor_ms, t_k);
      events[p] = synthetic_escapes(tau, window, config.run.n_trajectories, config.run.seed, p);
    }
    for (const double e : cal_eps) {
      const double t_k = 1e-3 * (s.t0_mk + s.slope_mk * e);
      out.calibration_samples.push_back({e, 1.5 * n * units.kelvin_to_energy(t_k)});
    }
  } else {
    out.f_d_hz = resonant_drive_hz(config);
    std::vector<TrajectoryJob> jobs;
    for (int p = 0; p < static_cast<int>(eps.size()); ++p) {
      for (int j = 0; j < config.run.n_trajectories; ++j) {
        jobs.push_back({p, trajectory_index(p, j), 1, eps[p], out.f_d_hz});
      }
    }
    out.trajectories = run_ensemble(config, jobs, control);
    for (const auto& r : out.trajectories) events[r.job.point].push_back(r.outcome);

    report(control, "temperature calibration at " + std::to_string(cal_eps.size()) + " amplitudes");
    const TrapModel statics = model.without_drive();
    const EquilibriumResult kink = relax_kink(n, statics, 1);
    const double omega_max = omega_max_for(statics, n);
    SteadyStateOptions so;
    so.settle_ms = config.calibration.settle_ms;
    so.average_ms = config.calibration.average_ms;
    so.trajectories = config.calibration.trajectories;
    so.observer_stride_us = config.run.observer_stride_us;
    so.drive_ramp_us = config.drive.ramp_us;
    std::vector<std::optional<EnergySample>> samples(cal_eps.size());
    std::vector<std::string> failures(cal_eps.size());
    parallel_for(
        static_cast<int>(cal_eps.size()), control.workers,
        [&](int c) {
          LangevinParams lp = config.langevin_params(statics, omega_max);
          // Calibration streams sit above every ensemble point.
          lp.trajectory_index = trajectory_index(1 << 20, 0) + static_cast<std::uint64_t>(c) * 1000;
          try {
            const SteadyStateResult r = steady_state_energy(
                kink.configuration, statics, lp, cal_eps[c], constants::two_pi * out.f_d_hz, so);
            samples[c] = EnergySample{cal_eps[c], r.kinetic_energy};
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::NotSettled && e.kind() != ErrorKind::InsufficientData) throw;
            failures[c] = e.what();
          }
        },
        control.stop);
    if (control.stop && control.stop->load()) throw Error(ErrorKind::Interrupted, "calibration stopped");
    for (std::size_t c = 0; c < cal_eps.size(); ++c) {
      if (samples[c]) {
        out.calibration_samples.push_back(*samples[c]);
      } else {
        out.notices.push_back("calibration at eps=" + format_number(cal_eps[c]) +
                              " dropped: " + failures[c]);
      }
    }
  }

  std::vector<double> grid;
  for (int k = 0; k <= 50; ++k) grid.push_back(window * k / 50.0);
  std::vector<LifetimePoint> lifetimes;
  for (std::size_t p = 0; p < eps.size(); ++p) {
    LifetimePointResult pr;
    pr.epsilon = eps[p];
    pr.events = events[p];
    pr.survival = survival_curve(pr.events, grid);
    try {
      pr.fit = fit_lifetime(pr.events);
      pr.ks = ks_exponential(pr.events, pr.fit->tau_ms, window);
      lifetimes.push_back({eps[p], pr.fit->tau_ms});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::TooFewEscapes && e.kind() != ErrorKind::InsufficientData) throw;
      pr.notice = std::string(e.what()) + "; point dropped from the Kramers fit";
      out.notices.push_back("eps=" + format_number(eps[p]) + ": " + pr.notice);
    }
    out.points.push_back(std::move(pr));
  }

  try {
    out.temperature_map = calibrate_temperature(out.calibration_samples, n, units);
  } catch (const Error& e) {
    out.notices.push_back(std::string("temperature calibration failed: ") + e.what());
  }
  if (eps.size() < 2) {
    out.notices.push_back("single amplitude: Kramers fit skipped");
  } else if (out.temperature_map) {
    try {
      out.kramers = fit_kramers(lifetimes, *out.temperature_map);
    } catch (const Error& e) {
      out.notices.push_back(std::string("Kramers fit skipped: ") + e.what());
    }
  }
  return out;
}

DirectionalityReport run_directionality(const ExperimentConfig& config,
                                        const std::vector<int>& charges,
                                        const RunControl& control, bool with_landscapes) {
  DirectionalityReport out;
  const std::vector<double> eps = sweep_values(config, "epsilon", config.drive.epsilon);
  out.f_d_hz = resonant_drive_hz(config);
  std::vector<TrajectoryJob> jobs;
  for (int p = 0; p < static_cast<int>(eps.size()); ++p) {
    for (const int q : charges) {
      for (int j = 0; j < config.run.n_trajectories; ++j) {
        jobs.push_back({p, trajectory_index(p, j), q, eps[p], out.f_d_hz});
      }
    }
  }
  out.trajectories = run_ensemble(config, jobs, control);

  std::optional<Error> last;
  for (std::size_t p = 0; p < eps.size(); ++p) {
    for (const int q : charges) {
      std::vector<EscapeOutcome> events;
      for (const auto& r : out.trajectories) {
        // Classified by the charge seen at escape, whichever charge the run started with.
        if (r.job.point == static_cast<int>(p)) events.push_back(r.outcome);
      }
      try {
        out.results.push_back(directionality(events, q, eps[p]));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TooFewEscapes) throw;
        out.notices.push_back("charge " + std::to_string(q) + ", eps=" + format_number(eps[p]) +
                              ": " + e.what());
        last = e;
      }
    }
  }
  if (out.results.empty() && last) throw *last;
  if (with_landscapes) {
    for (const int q : charges) {
      report(control, "PN landscape for charge " + std::to_string(q));
      out.landscapes.push_back(pn_landscape(config.trap_model(), config.run.n_ions, q));
    }
  }
  return out;
}

PNLandscape run_pn(const ExperimentConfig& config, int charge) {
  if (charge != 1 && charge != -1) bad_config("charge must be +1 or -1");
  return pn_landscape(config.trap_model(), config.run.n_ions, charge);
}

// ---------------------------------------------------------------------------
// Persistence

OutputDir::OutputDir(std::filesystem::path p) : path(std::move(p)) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) bad_config("cannot create output directory " + path.string() + ": " + ec.message());
}

void OutputDir::write_text(const std::string& name, const std::string& text) const {
  const auto target = path / name;
  const auto temp = path / (name + ".tmp");
  {
    std::ofstream out(temp, std::ios::binary);
    if (!out) bad_config("cannot write " + temp.string());
    out << text;
  }
  std::filesystem::rename(temp, target);
}

void OutputDir::write_json(const std::string& name, const json& j) const {
  write_text(name, j.dump(2) + "\n");
}

namespace {

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) text_ += ',';
      text_ += h;
      first = false;
    }
    text_ += '\n';
  }
  template <class... T>
  void row(const T&... values) {
    bool first = true;
    ((text_ += (first ? "" : ","), text_ += cell(values), first = false), ...);
    text_ += '\n';
  }
  const std::string& text() const { return text_; }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  std::string text_;
};

json fit_json(const LorentzianFit& fit) {
  json peaks = json::array();
  for (const auto& p : fit.peaks) {
    peaks.push_back({{"center_hz", p.center_hz},
                     {"center_error_hz", p.center_error_hz},
                     {"hwhm_hz", p.width_hz},
                     {"hwhm_error_hz", p.width_error_hz},
                     {"amplitude", p.amplitude},
                     {"amplitude_error", p.amplitude_error}});
  }
  return {{"peaks", peaks},
          {"offset", fit.offset},
          {"offset_error", fit.offset_error},
          {"chi_squared", fit.chi_squared},
          {"dof", fit.dof},
          {"r_squared", fit.r_squared}};
}

json mode_json(const KinkMode& m) {
  return {{"index", m.index},
          {"freq_hz", m.frequency / constants::two_pi},
          {"ipr", m.ipr},
          {"coupling", m.coupling},
          {"core_ions", m.core}};
}

json barrier_json(const PNLandscape& l, double kbtd_unit) {
  return {{"charge", l.charge},
          {"barrier_left_kbtd", l.barrier_left / kbtd_unit},
          {"barrier_right_kbtd", l.barrier_right / kbtd_unit},
          {"mean_barrier_kbtd", l.mean_barrier() / kbtd_unit}};
}

}  // namespace

void write_relax(const OutputDir& out, const ExperimentConfig& config,
                 const EquilibriumResult& result) {
  const double um = config.trap_model().units.length * 1e6;
  Csv csv({"ion_index", "x_um", "y_um", "z_um"});
  const CrystalState& s = result.configuration;
  for (int i = 0; i < s.n_ions(); ++i) csv.row(i, s.x(i) * um, s.y(i) * um, s.z(i) * um);
  out.write_text("positions.csv", csv.text());
  json j = {{"kind", std::string(to_string(result.label.kind))},
            {"energy_kbtd", result.energy / kbtd(config)},
            {"gradient_norm", result.gradient_norm},
            {"min_hessian_eigenvalue", result.min_hessian_eigenvalue},
            {"iterations", result.iterations},
            {"diagnostics", result.label.diagnostics}};
  j["topological_charge"] =
      result.label.topological_charge ? json(*result.label.topological_charge) : json(nullptr);
  j["kink_position_um"] =
      result.label.kink_position ? json(*result.label.kink_position * um) : json(nullptr);
  out.write_json("classification.json", j);
}

void write_modes(const OutputDir& out, const ExperimentConfig& config, const ModesReport& report) {
  const TrapModel statics = config.trap_model().without_drive();
  const Eigen::VectorXd coupling =
      block_couplings(report.spectrum, report.equilibrium.configuration, statics);
  Csv csv({"index", "freq_hz", "ipr", "coupling"});
  for (int k = 0; k < report.spectrum.size(); ++k) {
    csv.row(k, report.spectrum.frequencies[k] / constants::two_pi, report.spectrum.ipr[k],
            coupling[k]);
  }
  out.write_text("spectrum.csv", csv.text());
  json j = {{"configuration", std::string(to_string(report.equilibrium.label.kind))},
            {"min_freq_hz", report.spectrum.min_frequency() / constants::two_pi},
            {"max_freq_hz", report.spectrum.max_frequency() / constants::two_pi}};
  if (report.kink_modes) {
    const KinkModeReport& k = *report.kink_modes;
    json gapped = json::array();
    for (const auto& m : k.gapped) gapped.push_back(mode_json(m));
    j["zigzag_band_min_hz"] = k.zigzag_band_min / constants::two_pi;
    j["zigzag_band_max_hz"] = k.zigzag_band_max / constants::two_pi;
    j["lowest_kink_mode_hz"] = k.lowest_kink_mode / constants::two_pi;
    j["highest_kink_mode_hz"] = k.highest_kink_mode / constants::two_pi;
    j["gapped_modes"] = gapped;
    j["drive_target"] = k.drive_target ? mode_json(*k.drive_target) : json(nullptr);
    j["secondary_resonance"] =
        k.secondary_resonance ? mode_json(*k.secondary_resonance) : json(nullptr);
  }
  out.write_json("kink_modes.json", j);
}

void write_spectroscopy(const OutputDir& out, const SpectroscopyResult& result) {
  Csv csv({"freq_hz", "escapes", "trajectories", "probability", "probability_error"});
  for (const auto& s : result.scan) {
    const BinomialEstimate b = s.estimate();
    csv.row(s.frequency_hz, s.escapes, s.trajectories, b.probability, b.error);
  }
  out.write_text("scan.csv", csv.text());
  json j;
  j["single_peak"] = result.single_peak ? fit_json(*result.single_peak) : json(nullptr);
  j["double_peak"] = result.double_peak ? fit_json(*result.double_peak) : json(nullptr);
  j["drive_target"] = result.drive_target ? mode_json(*result.drive_target) : json(nullptr);
  j["secondary_resonance"] =
      result.secondary_resonance ? mode_json(*result.secondary_resonance) : json(nullptr);
  j["notices"] = result.notices;
  out.write_json("fit.json", j);
}

void write_lifetime(const OutputDir& out, const ExperimentConfig& config,
                    const LifetimeResult& result) {
  const TrapModel model = config.trap_model();
  const double unit = model.units.kB_TD();
  Csv survival({"epsilon", "time_ms", "survival", "survival_error", "at_risk"});
  Csv lifetimes({"epsilon", "tau_ms", "tau_ci68_low_ms", "tau_ci68_high_ms", "n_escapes",
                 "n_censored", "ks_statistic", "ks_p_value"});
  json points = json::array();
  for (const auto& p : result.points) {
    for (std::size_t k = 0; k < p.survival.time_ms.size(); ++k) {
      survival.row(p.epsilon, p.survival.time_ms[k], p.survival.survival[k], p.survival.error[k],
                   p.survival.at_risk[k]);
    }
    json pj = {{"epsilon", p.epsilon}, {"notice", p.notice}};
    if (p.fit) {
      lifetimes.row(p.epsilon, p.fit->tau_ms, p.fit->ci68_low_ms, p.fit->ci68_high_ms,
                    p.fit->n_escapes, p.fit->n_censored, p.ks->statistic, p.ks->p_value);
      pj["tau_ms"] = p.fit->tau_ms;
      pj["tau_ci68_ms"] = {p.fit->ci68_low_ms, p.fit->ci68_high_ms};
      pj["n_escapes"] = p.fit->n_escapes;
      pj["n_censored"] = p.fit->n_censored;
      pj["ks_p_value"] = p.ks->p_value;
    }
    points.push_back(pj);
  }
  out.write_text("survival.csv", survival.text());
  out.write_text("lifetimes.csv", lifetimes.text());

  Csv calibration({"epsilon", "kinetic_energy_kbtd", "temperature_mk"});
  for (const auto& s : result.calibration_samples) {
    calibration.row(s.epsilon, s.kinetic_energy / unit,
                    1e3 * effective_temperature(s.kinetic_energy, config.run.n_ions, model.units));
  }
  out.write_text("calibration.csv", calibration.text());

  json j = {{"f_d_hz", result.f_d_hz}, {"lifetimes", points}, {"notices", result.notices}};
  if (result.temperature_map) {
    const TemperatureMap& m = *result.temperature_map;
    j["temperature_map"] = {{"intercept_kbtd", m.intercept() / unit},
                            {"slope_kbtd", m.slope() / unit},
                            {"r_squared", m.r_squared()},
                            {"max_epsilon", m.max_epsilon()},
                            {"intercept_deviation", m.intercept_deviation()}};
  } else {
    j["temperature_map"] = nullptr;
  }
  if (result.kramers) {
    const KramersFit& k = *result.kramers;
    json t = json::array();
    for (const double v : k.temperature_k) t.push_back(1e3 * v);
    j["kramers"] = {{"w_kbtd", k.w_kbtd},
                    {"w_error_kbtd", k.w_error_kbtd},
                    {"ln_prefactor_ms", k.ln_prefactor},
                    {"r_squared", k.r_squared},
                    {"negative_barrier", k.negative_barrier},
                    {"temperature_mk", t}};
  } else {
    j["kramers"] = nullptr;
  }
  out.write_json("fit.json", j);
}

void write_directionality(const OutputDir& out, const ExperimentConfig& config,
                          const DirectionalityReport& report) {
  json results = json::array();
  for (const auto& r : report.results) {
    results.push_back({{"charge", r.charge},
                       {"epsilon", r.epsilon},
                       {"td", r.td},
                       {"td_error", r.error},
                       {"n_right", r.n_right},
                       {"n_left", r.n_left}});
  }
  json barriers = json::array();
  for (const auto& l : report.landscapes) barriers.push_back(barrier_json(l, kbtd(config)));
  out.write_json("directionality.json", {{"f_d_hz", report.f_d_hz},
                                          {"results", results},
                                          {"pn_barriers", barriers},
                                          {"notices", report.notices}});
}

void write_pn(const OutputDir& out, const ExperimentConfig& config, const PNLandscape& landscape) {
  const TrapModel model = config.trap_model();
  const double um = model.units.length * 1e6;
  const double unit = model.units.kB_TD();
  Csv csv({"kink_x_um", "kink_present", "energy_kbtd"});
  for (const auto& s : landscape.samples) csv.row(s.kink_x * um, s.kink_present, s.energy / unit);
  out.write_text("landscape.csv", csv.text());
  json j = barrier_json(landscape, unit);
  try {
    const QuadraticFit q = fit_center_quadratic(landscape);
    j["center_quadratic"] = {{"curvature_kbtd_per_um2", q.curvature / unit / (um * um)},
                             {"relative_residual", q.relative_residual},
                             {"points", q.points}};
  } catch (const Error& e) {
    j["center_quadratic"] = nullptr;
    j["notice"] = e.what();
  }
  out.write_json("barriers.json", j);
}

json make_manifest(const ExperimentConfig& config, const std::string& command,
                   const std::vector<TrajectoryResult>& trajectories, double wall_seconds,
                   int workers) {
  json list = json::array();
  std::uint64_t steps = 0;
  for (const auto& r : trajectories) {
    list.push_back(to_json(r));
    steps += r.steps;
  }
  const auto now = std::chrono::system_clock::now();
  const auto start = now - std::chrono::duration_cast<std::chrono::system_clock::duration>(
                               std::chrono::duration<double>(wall_seconds));
  return {{"tool_version", kToolVersion},
          {"command", command},
          {"config_digest", config.digest()},
          {"master_seed", config.run.seed},
          {"workers", workers},
          {"started_utc", iso_time(start)},
          {"finished_utc", iso_time(now)},
          {"wall_seconds", wall_seconds},
          {"total_steps", steps},
          {"steps_per_second", wall_seconds > 0 ? steps / wall_seconds : 0.0},
          {"trajectories", list}};
}

}  // namespace ionkink
