#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minaction/metrics.hpp"
#include "minaction/presets.hpp"
#include "minaction/train.hpp"

namespace minaction {

std::string read_text_file(const std::filesystem::path& path);

// Writes the parent directory's temp file first and renames over the target,
// so readers never observe a partial document.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Round-trip-exact decimal (17 significant digits).
std::string format_double(double x);

std::string json_escape(std::string_view s);

// Minimal streaming emitter. Output bytes depend only on the call sequence,
// which keeps artifacts reproducible across runs.
class JsonWriter {
 public:
  JsonWriter& begin_object() { pre_value(); out_ += '{'; frames_.push_back(false); return *this; }
  JsonWriter& end_object() { frames_.pop_back(); out_ += '}'; return *this; }
  JsonWriter& begin_array() { pre_value(); out_ += '['; frames_.push_back(false); return *this; }
  JsonWriter& end_array() { frames_.pop_back(); out_ += ']'; return *this; }

  JsonWriter& key(std::string_view k) {
    if (!frames_.empty()) {
      if (frames_.back()) out_ += ',';
      frames_.back() = true;
    }
    out_ += '"';
    out_ += json_escape(k);
    out_ += "\":";
    after_key_ = true;
    return *this;
  }

  // Non-finite numbers become null; readers of our own formats map null back
  // to NaN (or infinity where only overflow can produce it).
  JsonWriter& value(double v) {
    pre_value();
    out_ += std::isfinite(v) ? format_double(v) : "null";
    return *this;
  }
  JsonWriter& value(int v) { pre_value(); out_ += std::to_string(v); return *this; }
  JsonWriter& value(long v) { pre_value(); out_ += std::to_string(v); return *this; }
  JsonWriter& value(long long v) { pre_value(); out_ += std::to_string(v); return *this; }
  JsonWriter& value(std::uint64_t v) { pre_value(); out_ += std::to_string(v); return *this; }
  JsonWriter& value(bool v) { pre_value(); out_ += v ? "true" : "false"; return *this; }
  JsonWriter& value(std::string_view s) {
    pre_value();
    out_ += '"';
    out_ += json_escape(s);
    out_ += '"';
    return *this;
  }
  JsonWriter& value(const char* s) { return value(std::string_view(s)); }
  JsonWriter& null_value() { pre_value(); out_ += "null"; return *this; }

  // Cosmetic only; emitted between sibling values.
  JsonWriter& newline() { out_ += '\n'; return *this; }

  const std::string& str() const { return out_; }

 private:
  void pre_value() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (!frames_.empty()) {
      if (frames_.back()) out_ += ',';
      frames_.back() = true;
    }
  }

  std::string out_;
  std::vector<bool> frames_;
  bool after_key_ = false;
};

void emit_orbit_config(JsonWriter& w, const OrbitGenConfig& c);
void emit_run_config(JsonWriter& w, const RunConfig& rc);
void emit_milestones(JsonWriter& w, const Milestones& m);

std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json_text(std::string_view text, const std::string& where);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

std::string model_to_json(const BasisModel& model, const RunConfig& rc);
BasisModel model_from_json_text(std::string_view text, const std::string& where);
BasisModel load_model(const std::filesystem::path& path);

std::string milestones_to_json(const Milestones& m, const RunConfig& rc);

// epoch,traj,accel,sym,comp,arch,total,alpha_E,tau
std::string trainlog_csv(const std::vector<EpochRecord>& log);

// epoch, one gate column per term, selectivity, concentration
std::string gates_csv(const std::vector<EpochRecord>& log, const BasisLibrary& lib);

struct NoiseTableRow {
  int stride = 0;
  double sigma_analytic = 0.0;
  double sigma_empirical = 0.0;
  double signal = 0.0;
  double snr = 0.0;  // signal / sigma_analytic
};

std::string noise_table_csv(const std::vector<NoiseTableRow>& rows);

std::string sweep_to_json(const SweepResult& res, const RunConfig& rc);

struct LoadedSweep {
  SweepResult result;
  RunConfig config;
};

LoadedSweep sweep_from_json_text(std::string_view text, const std::string& where);
LoadedSweep load_sweep(const std::filesystem::path& path);

// Per-model validation bundle: calibration, period-law exponent, gate
// concentration, and conservation scatter.
struct ValidateReport {
  int dominant = -1;
  std::string dominant_name;
  double selectivity = 0.0;
  double concentration = 0.0;
  std::optional<double> theta_opt;
  std::optional<double> kepler_p;
  std::optional<double> sigma_h;
  bool rollout_diverged = false;
};

std::string validate_to_json(const ValidateReport& rep, const RunConfig& rc);

struct SindyRun {
  std::uint64_t seed = 0;
  int identified = -1;
  Eigen::VectorXd coefficients;
  long n_points = 0;
  double wall_ms = 0.0;
};

struct SindyReport {
  int stride = 10;
  int n_boot = 0;
  double threshold = 0.05;
  int correct_index = -1;
  std::vector<SindyRun> runs;
};

std::string sindy_to_json(const SindyReport& rep, const BasisLibrary& lib,
                          const RunConfig& rc);
SindyReport sindy_from_json_text(std::string_view text, const std::string& where);
SindyReport load_sindy_report(const std::filesystem::path& path);

std::string verdict_to_json(const GroupSelection& sel, const BasisLibrary& lib,
                            const RunConfig& rc);

// Starts from the file's named preset (default kepler-default) and overlays
// recognized keys; unknown keys are an error.
RunConfig run_config_from_json_text(std::string_view text, const std::string& where);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace minaction
