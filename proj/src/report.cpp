#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rangesim/scenario.hpp"

namespace rangesim {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

class OutFile {
 public:
  OutFile(const std::string& dir, const std::string& name) : path_(dir + "/" + name) {
    f_ = std::fopen(path_.c_str(), "wb");
    if (!f_) throw std::runtime_error("cannot write " + path_);
  }
  ~OutFile() {
    if (f_) std::fclose(f_);
  }
  OutFile(const OutFile&) = delete;
  OutFile& operator=(const OutFile&) = delete;

  void write(const std::string& s) {
    if (std::fwrite(s.data(), 1, s.size(), f_) != s.size())
      throw std::runtime_error("short write to " + path_);
  }

 private:
  std::string path_;
  std::FILE* f_ = nullptr;
};

void write_session_rows(OutFile& f, const ScenarioReport& report) {
  for (const ReplicaResult& r : report.replicas) {
    for (const ReflectorReport& ref : r.session.reflectors) {
      std::string row = report.config_hash;
      row += ',';
      row += std::to_string(r.replica);
      row += ',';
      row += std::to_string(ref.reflector_id);
      row += ',';
      row += fmt_double(ref.true_distance);
      row += ',';
      if (!ref.failed && ref.estimate) row += fmt_double(ref.estimate->final);
      row += ',';
      if (!ref.failed) row += fmt_double(ref.error);
      row += ',';
      row += ref.failed ? '1' : '0';
      row += ',';
      row += std::to_string(ref.n_responses_received);
      row += '\n';
      f.write(row);
    }
  }
}

void write_aggregate_row(OutFile& f, const ScenarioReport& report) {
  std::string row;
  if (report.axis_value) row += fmt_double(*report.axis_value);
  row += ',';
  if (report.mae_m) row += fmt_double(*report.mae_m);
  row += ',';
  row += fmt_double(report.failure_rate);
  row += ',';
  if (report.ci95_m) row += fmt_double(*report.ci95_m);
  row += '\n';
  f.write(row);
}

constexpr const char* kSessionHeader =
    "scenario_id,replica,reflector_id,true_distance_m,est_distance_m,error_m,failed,"
    "n_responses_received\n";
constexpr const char* kAggregateHeader = "axis_value,mae_m,failure_rate,ci95_m\n";

}  // namespace

void emit_reports(std::span<const ScenarioReport> reports, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());

  {
    OutFile sessions(dir, "sessions.csv");
    sessions.write(kSessionHeader);
    for (const ScenarioReport& r : reports) write_session_rows(sessions, r);
  }
  {
    OutFile aggregate(dir, "aggregate.csv");
    aggregate.write(kAggregateHeader);
    for (const ScenarioReport& r : reports) write_aggregate_row(aggregate, r);
  }
  {
    // sidecar: full config per run so any row can be reproduced exactly
    nlohmann::json side = nlohmann::json::array();
    for (const ScenarioReport& r : reports) {
      nlohmann::json run;
      run["scenario_id"] = r.config_hash;
      run["config"] = nlohmann::json::parse(config_to_json(r.config));
      run["seed"] = r.config.seed;
      if (r.axis_value) run["axis_value"] = *r.axis_value;
      side.push_back(std::move(run));
    }
    OutFile config(dir, "config.json");
    config.write(side.dump(2) + "\n");
  }
}

void emit_report(const ScenarioReport& report, const std::string& dir) {
  emit_reports(std::span<const ScenarioReport>(&report, 1), dir);
}

}  // namespace rangesim
