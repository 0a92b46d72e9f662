#include "handitl/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace handitl {

RuntimeStats RuntimeStats::from(std::vector<double> samples) {
  RuntimeStats r;
  r.count = samples.size();
  if (samples.empty()) return r;
  std::sort(samples.begin(), samples.end());
  const auto n = samples.size();
  r.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  r.median_ms = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  const auto p95 = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1;
  r.p95_ms = samples[std::min(p95, n - 1)];
  r.max_ms = samples.back();
  return r;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw std::invalid_argument("unknown report format '" + s + "' (json|csv)");
}

namespace {

nlohmann::json discontinuity_json(const DiscontinuityReport& d) {
  return {{"jumps", d.jumps}, {"mean", d.mean}, {"ci_low", d.ci_low}, {"ci_high", d.ci_high}};
}

DiscontinuityReport discontinuity_from(const nlohmann::json& j) {
  DiscontinuityReport d;
  d.jumps = j.at("jumps").get<std::vector<double>>();
  d.mean = j.at("mean").get<double>();
  d.ci_low = j.at("ci_low").get<double>();
  d.ci_high = j.at("ci_high").get<double>();
  return d;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& m) {
  using nlohmann::json;
  json tracking = json::array();
  for (const auto& s : m.tracking) tracking.push_back({s.t, s.error});
  json drift = json::array();
  for (const auto& s : m.drift) {
    drift.push_back({s.t, s.residual_linear, s.residual_angular, s.offset_position, s.offset_rotation});
  }
  return {{"schema", kMetricsSchema},
          {"version", kMetricsSchemaVersion},
          {"scenario", m.scenario},
          {"seed", m.seed},
          {"method", m.method},
          {"steps", m.steps},
          {"misalignment", m.misalignment},
          {"realized_misalignment", m.realized_misalignment},
          {"engage_times", m.engage_times},
          {"release_times", m.release_times},
          {"discontinuity", {{"engage", discontinuity_json(m.engage)}, {"release", discontinuity_json(m.release)}}},
          {"tracking",
           {{"columns", {"t", "error"}}, {"samples", tracking}, {"mean", m.tracking_mean}, {"max", m.tracking_max}}},
          {"drift",
           {{"columns", {"t", "residual_linear", "residual_angular", "offset_position", "offset_rotation"}},
            {"samples", drift}}},
          {"runtime",
           {{"solve_ms", m.solve_ms},
            {"count", m.runtime.count},
            {"mean_ms", m.runtime.mean_ms},
            {"median_ms", m.runtime.median_ms},
            {"p95_ms", m.runtime.p95_ms},
            {"max_ms", m.runtime.max_ms},
            {"nonconverged", m.nonconverged_solves}}},
          {"policy",
           {{"chunks", m.policy_chunks}, {"actions_predicted", m.policy_actions}, {"actions_executed", m.executed_actions}}},
          {"aborted", m.aborted},
          {"abort_reason", m.abort_reason}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  if (j.value("schema", std::string{}) != kMetricsSchema) {
    throw std::runtime_error("metrics: unexpected schema tag");
  }
  if (j.value("version", 0) != kMetricsSchemaVersion) throw std::runtime_error("metrics: unsupported version");
  try {
    MetricsReport m;
    m.scenario = j.at("scenario").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.method = j.at("method").get<std::string>();
    m.steps = j.at("steps").get<int>();
    m.misalignment = j.at("misalignment").get<double>();
    m.realized_misalignment = j.at("realized_misalignment").get<double>();
    m.engage_times = j.at("engage_times").get<std::vector<double>>();
    m.release_times = j.at("release_times").get<std::vector<double>>();
    m.engage = discontinuity_from(j.at("discontinuity").at("engage"));
    m.release = discontinuity_from(j.at("discontinuity").at("release"));
    for (const auto& s : j.at("tracking").at("samples")) m.tracking.push_back({s.at(0), s.at(1)});
    m.tracking_mean = j.at("tracking").at("mean").get<double>();
    m.tracking_max = j.at("tracking").at("max").get<double>();
    for (const auto& s : j.at("drift").at("samples")) {
      m.drift.push_back({s.at(0), s.at(1), s.at(2), s.at(3), s.at(4)});
    }
    const auto& r = j.at("runtime");
    m.solve_ms = r.at("solve_ms").get<std::vector<double>>();
    m.runtime.count = r.at("count").get<std::size_t>();
    m.runtime.mean_ms = r.at("mean_ms").get<double>();
    m.runtime.median_ms = r.at("median_ms").get<double>();
    m.runtime.p95_ms = r.at("p95_ms").get<double>();
    m.runtime.max_ms = r.at("max_ms").get<double>();
    m.nonconverged_solves = r.at("nonconverged").get<long>();
    const auto& p = j.at("policy");
    m.policy_chunks = p.at("chunks").get<long>();
    m.policy_actions = p.at("actions_predicted").get<long>();
    m.executed_actions = p.at("actions_executed").get<long>();
    m.aborted = j.at("aborted").get<bool>();
    m.abort_reason = j.at("abort_reason").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("metrics: ") + e.what());
  }
}

nlohmann::json metrics_without_runtime(const MetricsReport& m) {
  nlohmann::json j = metrics_to_json(m);
  j.erase("runtime");
  return j;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw std::runtime_error("metrics csv: bad number '" + s + "'");
  }
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back() += c;
    }
  }
  return cells;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) { out_ << "metric,index,time,value\n"; }
  void scalar(const char* name, double v) { out_ << name << ",,," << fmt(v) << '\n'; }
  void text(const char* name, const std::string& v) { out_ << name << ",,," << quote(v) << '\n'; }
  void item(const char* name, std::size_t i, double v) { out_ << name << ',' << i << ",," << fmt(v) << '\n'; }
  void sample(const char* name, std::size_t i, double t, double v) {
    out_ << name << ',' << i << ',' << fmt(t) << ',' << fmt(v) << '\n';
  }

 private:
  std::ostream& out_;
};

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsReport& m) {
  CsvWriter w(out);
  w.text("schema", kMetricsSchema);
  w.scalar("version", kMetricsSchemaVersion);
  w.text("scenario", m.scenario);
  w.text("seed", std::to_string(m.seed));
  w.text("method", m.method);
  w.scalar("steps", m.steps);
  w.scalar("misalignment", m.misalignment);
  w.scalar("realized_misalignment", m.realized_misalignment);
  for (std::size_t i = 0; i < m.engage_times.size(); ++i) w.item("engage_time", i, m.engage_times[i]);
  for (std::size_t i = 0; i < m.release_times.size(); ++i) w.item("release_time", i, m.release_times[i]);
  auto disc = [&](const char* jump, const char* mean, const char* lo, const char* hi,
                  const DiscontinuityReport& d) {
    for (std::size_t i = 0; i < d.jumps.size(); ++i) w.item(jump, i, d.jumps[i]);
    w.scalar(mean, d.mean);
    w.scalar(lo, d.ci_low);
    w.scalar(hi, d.ci_high);
  };
  disc("engage_jump", "engage_jump_mean", "engage_jump_ci_low", "engage_jump_ci_high", m.engage);
  disc("release_jump", "release_jump_mean", "release_jump_ci_low", "release_jump_ci_high", m.release);
  for (std::size_t i = 0; i < m.tracking.size(); ++i) w.sample("tracking_error", i, m.tracking[i].t, m.tracking[i].error);
  w.scalar("tracking_mean", m.tracking_mean);
  w.scalar("tracking_max", m.tracking_max);
  for (std::size_t i = 0; i < m.drift.size(); ++i) {
    const auto& d = m.drift[i];
    w.sample("residual_linear", i, d.t, d.residual_linear);
    w.sample("residual_angular", i, d.t, d.residual_angular);
    w.sample("offset_position", i, d.t, d.offset_position);
    w.sample("offset_rotation", i, d.t, d.offset_rotation);
  }
  for (std::size_t i = 0; i < m.solve_ms.size(); ++i) w.item("solve_ms", i, m.solve_ms[i]);
  w.scalar("runtime_count", static_cast<double>(m.runtime.count));
  w.scalar("runtime_mean_ms", m.runtime.mean_ms);
  w.scalar("runtime_median_ms", m.runtime.median_ms);
  w.scalar("runtime_p95_ms", m.runtime.p95_ms);
  w.scalar("runtime_max_ms", m.runtime.max_ms);
  w.scalar("nonconverged_solves", static_cast<double>(m.nonconverged_solves));
  w.scalar("policy_chunks", static_cast<double>(m.policy_chunks));
  w.scalar("policy_actions", static_cast<double>(m.policy_actions));
  w.scalar("executed_actions", static_cast<double>(m.executed_actions));
  w.scalar("aborted", m.aborted ? 1.0 : 0.0);
  w.text("abort_reason", m.abort_reason);
  if (!out) throw std::runtime_error("metrics csv: write failed");
}

MetricsReport read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "metric,index,time,value") {
    throw std::runtime_error("metrics csv: missing header");
  }
  MetricsReport m;
  std::map<std::string, std::string> text;
  std::map<std::string, double> scalar;
  std::map<std::string, std::vector<double>> items;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 4) throw std::runtime_error("metrics csv line " + std::to_string(lineno) + ": expected 4 cells");
    const std::string& name = c[0];
    if (c[1].empty()) {
      static const std::set<std::string> texts = {"schema", "scenario", "seed", "method", "abort_reason"};
      if (texts.count(name)) {
        text[name] = c[3];
      } else {
        scalar[name] = parse_double(c[3]);
      }
    } else if (c[2].empty()) {
      items[name].push_back(parse_double(c[3]));
    } else {
      series[name].emplace_back(parse_double(c[2]), parse_double(c[3]));
    }
  }
  if (text["schema"] != kMetricsSchema || scalar["version"] != kMetricsSchemaVersion) {
    throw std::runtime_error("metrics csv: unexpected schema or version");
  }
  m.scenario = text["scenario"];
  m.seed = std::stoull(text["seed"]);
  m.method = text["method"];
  m.abort_reason = text["abort_reason"];
  m.steps = static_cast<int>(scalar["steps"]);
  m.misalignment = scalar["misalignment"];
  m.realized_misalignment = scalar["realized_misalignment"];
  m.engage_times = items["engage_time"];
  m.release_times = items["release_time"];
  m.engage = {items["engage_jump"], scalar["engage_jump_mean"], scalar["engage_jump_ci_low"],
              scalar["engage_jump_ci_high"]};
  m.release = {items["release_jump"], scalar["release_jump_mean"], scalar["release_jump_ci_low"],
               scalar["release_jump_ci_high"]};
  for (const auto& [t, e] : series["tracking_error"]) m.tracking.push_back({t, e});
  m.tracking_mean = scalar["tracking_mean"];
  m.tracking_max = scalar["tracking_max"];
  const auto& lin = series["residual_linear"];
  const auto& ang = series["residual_angular"];
  const auto& pos = series["offset_position"];
  const auto& rot = series["offset_rotation"];
  if (ang.size() != lin.size() || pos.size() != lin.size() || rot.size() != lin.size()) {
    throw std::runtime_error("metrics csv: drift series lengths differ");
  }
  for (std::size_t i = 0; i < lin.size(); ++i) {
    m.drift.push_back({lin[i].first, lin[i].second, ang[i].second, pos[i].second, rot[i].second});
  }
  m.solve_ms = items["solve_ms"];
  m.runtime.count = static_cast<std::size_t>(scalar["runtime_count"]);
  m.runtime.mean_ms = scalar["runtime_mean_ms"];
  m.runtime.median_ms = scalar["runtime_median_ms"];
  m.runtime.p95_ms = scalar["runtime_p95_ms"];
  m.runtime.max_ms = scalar["runtime_max_ms"];
  m.nonconverged_solves = static_cast<long>(scalar["nonconverged_solves"]);
  m.policy_chunks = static_cast<long>(scalar["policy_chunks"]);
  m.policy_actions = static_cast<long>(scalar["policy_actions"]);
  m.executed_actions = static_cast<long>(scalar["executed_actions"]);
  m.aborted = scalar["aborted"] != 0.0;
  return m;
}

void report(const MetricsReport& m, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::Json) {
    out << metrics_to_json(m).dump(2) << '\n';
  } else {
    write_metrics_csv(out, m);
  }
  if (!out) throw std::runtime_error("metrics: write failed");
}

// ---------------------------------------------------------------------------

nlohmann::json summarize_sweep(const std::vector<MetricsReport>& runs) {
  using nlohmann::json;
  std::map<std::string, std::vector<const MetricsReport*>> by_method;
  for (const auto& r : runs) by_method[r.method].push_back(&r);

  json methods = json::object();
  for (const auto& [name, list] : by_method) {
    std::vector<double> means;
    std::vector<double> solve;
    double tracking = 0.0;
    long aborted = 0;
    for (const MetricsReport* r : list) {
      means.push_back(r->engage.mean);
      solve.insert(solve.end(), r->solve_ms.begin(), r->solve_ms.end());
      tracking += r->tracking_mean;
      aborted += r->aborted ? 1 : 0;
    }
    const auto agg = DiscontinuityReport::aggregate(means);
    const auto rt = RuntimeStats::from(solve);
    methods[name] = {{"scenarios", list.size()},
                     {"engage_jump_mean", agg.mean},
                     {"engage_jump_ci_low", agg.ci_low},
                     {"engage_jump_ci_high", agg.ci_high},
                     {"engage_jump_max", means.empty() ? 0.0 : *std::max_element(means.begin(), means.end())},
                     {"tracking_mean", list.empty() ? 0.0 : tracking / static_cast<double>(list.size())},
                     {"solve_median_ms", rt.median_ms},
                     {"solve_p95_ms", rt.p95_ms},
                     {"aborted", aborted}};
  }
  json out = {{"schema", "handitl-sweep"}, {"version", 1}, {"runs", runs.size()}, {"methods", methods}};

  if (by_method.count("relative") && by_method.count("teleop")) {
    std::map<std::pair<std::string, std::uint64_t>, double> teleop;
    for (const MetricsReport* r : by_method["teleop"]) teleop[{r->scenario, r->seed}] = r->engage.mean;
    double min_reduction = 1.0;
    double sum_rel = 0.0;
    double sum_tel = 0.0;
    std::size_t paired = 0;
    for (const MetricsReport* r : by_method["relative"]) {
      auto it = teleop.find({r->scenario, r->seed});
      if (it == teleop.end()) continue;
      const double red = it->second > 0.0 ? 1.0 - r->engage.mean / it->second : 0.0;
      min_reduction = std::min(min_reduction, red);
      sum_rel += r->engage.mean;
      sum_tel += it->second;
      ++paired;
    }
    if (paired > 0) {
      out["relative_vs_teleop"] = {{"paired_scenarios", paired},
                                   {"min_reduction", min_reduction},
                                   {"overall_reduction", sum_tel > 0.0 ? 1.0 - sum_rel / sum_tel : 0.0}};
    }
  }
  return out;
}

}  // namespace handitl
