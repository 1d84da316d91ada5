#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "minaction/orbit.hpp"
#include "minaction/train.hpp"

namespace minaction {

struct SweepOptions {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int jobs = 0;  // 0 picks the hardware concurrency
};

struct SindyOptions {
  int stride = 10;
  int n_boot = 0;  // 0 disables the bootstrap ensemble
  double threshold = 0.05;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
};

// Everything one run needs, resolvable from a preset, a JSON file, and flag
// overrides. The master seed feeds both data generation and training unless
// the data section pins its own.
struct RunConfig {
  std::string preset = "kepler-default";
  std::uint64_t seed = 0;
  bool data_seed_explicit = false;
  OrbitGenConfig data;
  TrainConfig train;
  SweepOptions sweep;
  SindyOptions sindy;
};

std::vector<std::string> preset_names();

// Throws std::invalid_argument on an unknown name.
RunConfig make_preset(std::string_view name);

// standard | confounders | expanded | reduced
BasisLibrary library_by_name(std::string_view name);

// Matching stock name, or "custom".
std::string library_name(const BasisLibrary& lib);

// Index of the generating law's basis term in the library, -1 if absent.
int true_basis_index(const BasisLibrary& lib, LawKind kind);

}  // namespace minaction
