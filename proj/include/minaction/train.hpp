#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "minaction/adam.hpp"
#include "minaction/loss.hpp"
#include "minaction/schedule.hpp"

namespace minaction {

struct TrainConfig {
  BasisLibrary library = BasisLibrary::standard();
  Schedule schedule;
  LossWeights weights;
  LossOptions loss;
  AdamConfig adam;
  // Separate Adam step size for force coefficients; gate logits always use
  // adam.lr. Unset means one shared rate.
  std::optional<double> theta_lr;
  int batch_size = 4;
  bool shuffle = false;  // default: fixed index-order partition
  std::uint64_t seed = 0;
  Eigen::VectorXd logit_bias;  // empty, or one entry per library term
  double init_logit_halfwidth = 0.1;
  double init_theta_sigma = 0.01;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;
  Eigen::VectorXd gates;
  double selectivity = 0.0;
  double concentration = 0.0;
  double tau = 1.0;
  long long clamps = 0;
};

struct Milestones {
  std::optional<int> onset;   // first epoch with R >= 10
  std::optional<int> sparse;  // R >= 100
  std::optional<int> frozen;  // R >= 1000
  std::optional<int> span;    // frozen - onset
  std::optional<double> growth;  // exp(OLS slope of ln R per epoch on [onset, frozen])
};

Milestones compute_milestones(const std::vector<EpochRecord>& log);

struct TrainResult {
  BasisModel model;
  std::vector<EpochRecord> log;
  Milestones milestones;
  long long clamp_total = 0;
};

class TrainingInstability : public std::runtime_error {
 public:
  TrainingInstability(int epoch, BasisModel last_good)
      : std::runtime_error("non-finite loss or gradient at epoch " +
                           std::to_string(epoch)),
        epoch(epoch),
        last_good(std::move(last_good)) {}
  int epoch;
  BasisModel last_good;
};

TrainResult train(const Dataset& data, const TrainConfig& cfg);

struct SweepEntry {
  std::uint64_t seed = 0;
  BasisModel model;
  Milestones milestones;
  std::vector<EpochRecord> log;
  int dominant = -1;
  double selectivity = 0.0;
  double concentration = 0.0;
  long long clamp_total = 0;
  std::optional<double> theta_opt;
  std::optional<double> kepler_p;
  std::optional<double> sigma_h;
  bool rollout_diverged = false;
};

struct SweepVerdict {
  bool decided = false;
  int basis = -1;
  std::string basis_name;
  double margin = 0.0;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  SweepVerdict verdict;
};

// Gate statistics plus calibration, period-law exponent, and conservation
// diagnostics for a trained model against the dataset's test split. The
// calibration-dependent fields stay unset when no gate dominates
// (selectivity <= 10).
SweepEntry evaluate_model(const Dataset& data, const BasisModel& model,
                          const LossOptions& loss);

// Trains one model per seed on shared data (optionally across worker
// threads; results are ordered by seed and independent of scheduling),
// attaches calibration and validation metrics where a dominant gate exists,
// and picks a basis by conservation-grouped voting.
SweepResult sweep(const Dataset& data, const TrainConfig& base,
                  const std::vector<std::uint64_t>& seeds, int jobs = 1);

}  // namespace minaction
