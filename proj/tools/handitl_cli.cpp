#include "handitl/config.hpp"
#include "handitl/intervene.hpp"
#include "handitl/metrics.hpp"
#include "handitl/rollout.hpp"
#include "handitl/scenario.hpp"

#include "checks.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace handitl;

namespace {

SimConfig config_or_default(const std::string& path) {
  return path.empty() ? SimConfig{} : load_config(path);
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    std::stringstream ss(n);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(method_from_string(item));
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

int sim_run(const std::string& scenario_path, const std::string& method_name,
            const std::string& config_path, const fs::path& out_dir, const std::string& format,
            bool write_inputs) {
  const SimConfig cfg = config_or_default(config_path);
  const HandModel model = load_model_for(cfg);
  const ScenarioSpec spec = load_scenario(scenario_path);
  const Method method = method_from_string(method_name);
  fs::create_directories(out_dir);

  const ScenarioStreams streams = generate_scenario(spec, model, cfg);
  if (write_inputs) {
    auto human = open_out(out_dir / "human.jsonl");
    auto vr = open_out(out_dir / "vr.jsonl");
    auto policy = open_out(out_dir / "policy.jsonl");
    write_streams(streams, human, vr, policy);
  }
  const std::string base = rollout_basename(spec, method);
  auto log = open_out(out_dir / (base + ".jsonl"));
  const RolloutResult result = run_rollout(streams, method, model, cfg, &log);

  if (format == "json" || format == "both") {
    auto f = open_out(out_dir / (base + "_metrics.json"));
    report(result.metrics, ReportFormat::Json, f);
  }
  if (format == "csv" || format == "both") {
    auto f = open_out(out_dir / (base + "_metrics.csv"));
    report(result.metrics, ReportFormat::Csv, f);
  }
  const auto& m = result.metrics;
  std::cout << "method " << m.method << ", " << m.steps << " steps, realized misalignment "
            << m.realized_misalignment << " rad\n"
            << "engage jumps:";
  for (double j : m.engage.jumps) std::cout << ' ' << j;
  std::cout << "\nmean " << m.engage.mean << " rad, 95% CI [" << m.engage.ci_low << ", " << m.engage.ci_high
            << "]\ntracking error mean " << m.tracking_mean << " m, solve median " << m.runtime.median_ms
            << " ms\n";
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  if (m.aborted) {
    std::cerr << "rollout aborted: " << m.abort_reason << '\n';
    return 1;
  }
  return 0;
}

int sim_sweep(const std::vector<std::string>& method_names, int seeds, std::uint64_t first_seed,
              const std::string& scenario_path, double m_min, double m_max,
              const std::string& config_path, const std::string& out_dir, unsigned threads,
              bool keep_logs) {
  const SimConfig cfg = config_or_default(config_path);
  const HandModel model = load_model_for(cfg);
  const std::vector<Method> methods = parse_methods(method_names);
  if (methods.empty()) throw std::invalid_argument("no methods given");
  if (!(m_min >= 0.0 && m_max >= m_min)) throw std::invalid_argument("need 0 <= m-min <= m-max");
  const ScenarioSpec base = scenario_path.empty() ? ScenarioSpec{} : load_scenario(scenario_path);

  std::vector<ScenarioSpec> specs;
  for (int i = 0; i < seeds; ++i) {
    ScenarioSpec s = base;
    s.seed = first_seed + static_cast<std::uint64_t>(i);
    std::mt19937_64 rng(s.seed);
    s.misalignment = std::uniform_real_distribution<double>(m_min, m_max)(rng);
    if (s.toggles.empty()) s.toggles = ScenarioSpec::defaultToggles(s.duration);
    specs.push_back(std::move(s));
  }

  std::optional<fs::path> log_dir;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    if (keep_logs) log_dir = fs::path(out_dir);
  }
  const auto runs = run_sweep(specs, methods, model, cfg, threads, log_dir);
  const auto summary = summarize_sweep(runs);
  if (!out_dir.empty()) {
    nlohmann::json all = nlohmann::json::array();
    for (const auto& r : runs) all.push_back(metrics_to_json(r));
    write_file(fs::path(out_dir) / "sweep_metrics.json", all.dump(1) + "\n");
    write_file(fs::path(out_dir) / "sweep_summary.json", summary.dump(2) + "\n");
  }
  std::cout << summary.dump(2) << '\n';
  for (const auto& r : runs) {
    if (r.aborted) return 1;
  }
  return 0;
}

int check_grads(int states, std::uint64_t seed, const std::string& config_path) {
  const SimConfig cfg = config_or_default(config_path);
  const HandModel model = load_model_for(cfg);
  const auto r = checks::gradient_check(model, cfg.weights, states, seed);
  std::cout << "gradient check: " << r.states << " states, max relative error " << r.max_rel_error
            << ", failures " << r.failures << '\n';
  return r.failures == 0 ? 0 : 1;
}

int check_oracle(int instances, double resolution) {
  const auto r = checks::toy_oracle_check(instances, resolution);
  std::cout << "toy grid oracle: " << r.instances << " instances, worst solver-minus-grid gap "
            << r.worst_gap << ", failures " << r.failures << '\n';
  return r.failures == 0 ? 0 : 1;
}

int log_export(const std::string& in_path, const std::string& out_path, bool only_interventions) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open " + in_path);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file = open_out(out_path);
    out = &file;
  }
  if (only_interventions) {
    const auto n = export_interventions(in, *out);
    std::cerr << n << " intervention records exported\n";
  } else {
    *out << in.rdbuf();
  }
  return 0;
}

int log_replay(const std::string& in_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open " + in_path);
  const ReplayResult r = replay_log(in);
  std::cout << "replayed " << r.compared << " records: " << (r.identical ? "identical" : "MISMATCH");
  if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
  std::cout << '\n';
  return r.identical ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HandITL intervention simulator"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("sim", "Scenario rollouts");
  sim->require_subcommand(1);

  auto* run = sim->add_subcommand("run", "Run one scenario with one method");
  std::string scenario_path, method = "relative", config_path, out_dir, format = "both";
  bool write_inputs = false;
  run->add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--method", method, "relative|jacobian|deltacmd|teleop");
  run->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--format", format, "Metrics format: json|csv|both")
      ->check(CLI::IsMember({"json", "csv", "both"}));
  run->add_flag("--write-streams", write_inputs, "Also write the generated human/VR/policy streams");

  auto* sweep = sim->add_subcommand("sweep", "Seeded scenario sweep");
  std::vector<std::string> methods = {"relative,teleop"};
  int seeds = 100;
  std::uint64_t first_seed = 1;
  double m_min = 0.2, m_max = 0.8;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string sweep_scenario, sweep_config, sweep_out;
  bool keep_logs = false;
  sweep->add_option("--methods", methods, "Methods, comma or space separated");
  sweep->add_option("--seeds", seeds, "Number of scenarios")->check(CLI::PositiveNumber);
  sweep->add_option("--first-seed", first_seed, "Seed of the first scenario");
  sweep->add_option("--scenario", sweep_scenario, "Base scenario file")->check(CLI::ExistingFile);
  sweep->add_option("--m-min", m_min, "Smallest misalignment (rad)");
  sweep->add_option("--m-max", m_max, "Largest misalignment (rad)");
  sweep->add_option("--config", sweep_config, "Config file")->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Output directory for metrics");
  sweep->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--logs", keep_logs, "Keep one correction log per rollout in --out");

  auto* check = app.add_subcommand("check", "Numerical self-checks");
  check->require_subcommand(1);
  auto* grads = check->add_subcommand("grads", "Analytic gradient vs central differences");
  int grad_states = 100;
  std::uint64_t grad_seed = 7;
  std::string grad_config;
  grads->add_option("--states", grad_states, "Random states")->check(CLI::PositiveNumber);
  grads->add_option("--seed", grad_seed, "RNG seed");
  grads->add_option("--config", grad_config, "Config file")->check(CLI::ExistingFile);
  auto* oracle = check->add_subcommand("oracle", "Toy-finger solver vs brute-force grid");
  int oracle_instances = 20;
  double resolution = 1e-3;
  oracle->add_option("--instances", oracle_instances, "Fixture instances")->check(CLI::PositiveNumber);
  oracle->add_option("--resolution", resolution, "Grid resolution (rad)")->check(CLI::PositiveNumber);

  auto* logcmd = app.add_subcommand("log", "Correction log utilities");
  logcmd->require_subcommand(1);
  auto* exp = logcmd->add_subcommand("export", "Copy a correction log, optionally only intervention steps");
  std::string log_in, log_out;
  bool only = false;
  exp->add_option("--in", log_in, "Correction log")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", log_out, "Output file (stdout if omitted)");
  exp->add_flag("--only-interventions", only, "Keep only records with the intervention flag");
  auto* replay = logcmd->add_subcommand("replay", "Re-run a log's rollout and compare executed commands");
  std::string replay_in;
  replay->add_option("--in", replay_in, "Correction log")->required()->check(CLI::ExistingFile);

  auto* modelcmd = app.add_subcommand("model", "Hand model files");
  modelcmd->require_subcommand(1);
  auto* dump = modelcmd->add_subcommand("dump", "Write a built-in model as JSON");
  std::string which = "default", model_out;
  dump->add_option("--which", which, "default|toy")->check(CLI::IsMember({"default", "toy"}));
  dump->add_option("--out", model_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return sim_run(scenario_path, method, config_path, out_dir, format, write_inputs);
    if (sweep->parsed()) {
      return sim_sweep(methods, seeds, first_seed, sweep_scenario, m_min, m_max, sweep_config, sweep_out,
                       threads, keep_logs);
    }
    if (grads->parsed()) return check_grads(grad_states, grad_seed, grad_config);
    if (oracle->parsed()) return check_oracle(oracle_instances, resolution);
    if (exp->parsed()) return log_export(log_in, log_out, only);
    if (replay->parsed()) return log_replay(replay_in);
    if (dump->parsed()) {
      save_hand_model(which == "toy" ? toy_finger_model() : default_hand_model(), model_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
