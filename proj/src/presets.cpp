#include "minaction/presets.hpp"

#include <cmath>
#include <stdexcept>

namespace minaction {

namespace {

bool same_library(const BasisLibrary& a, const BasisLibrary& b) {
  if (a.terms.size() != b.terms.size()) return false;
  for (size_t i = 0; i < a.terms.size(); ++i) {
    if (a.terms[i].kind != b.terms[i].kind) return false;
    if (a.terms[i].kind == BasisTerm::Kind::Power &&
        a.terms[i].exponent != b.terms[i].exponent)
      return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"kepler-default", "hooke-default", "biased-init",  "ablation-tf",
          "slow-anneal",    "extended-warmup", "low-noise"};
}

RunConfig make_preset(std::string_view name) {
  RunConfig rc;
  rc.preset = std::string(name);
  rc.data.law = {LawKind::Kepler, 1.0};
  if (name == "kepler-default") {
  } else if (name == "hooke-default") {
    rc.data.law = {LawKind::Hooke, 1.0};
  } else if (name == "biased-init") {
    rc.train.logit_bias = Eigen::VectorXd::Zero(rc.train.library.size());
    rc.train.logit_bias[0] = 1.5;  // head start for the inverse-square gate
  } else if (name == "ablation-tf") {
    // Trajectory matching only: the sparsity/entropy pressure never turns on
    // (the temperature still anneals so gate telemetry stays comparable).
    rc.train.schedule.alpha_E_start = 0.0;
    rc.train.schedule.alpha_E_end = 0.0;
  } else if (name == "slow-anneal") {
    rc.train.schedule.total_epochs = 300;
    rc.train.schedule.tau_end = 0.001;
  } else if (name == "extended-warmup") {
    rc.train.schedule.warmup_epochs = 100;
    rc.train.schedule.total_epochs = 250;
  } else if (name == "low-noise") {
    rc.data.noise_fraction = 0.005;
  } else {
    std::string known;
    for (const std::string& p : preset_names()) known += " " + p;
    throw std::invalid_argument("unknown preset '" + std::string(name) +
                                "'; expected one of:" + known);
  }
  return rc;
}

BasisLibrary library_by_name(std::string_view name) {
  if (name == "standard") return BasisLibrary::standard();
  if (name == "confounders") return BasisLibrary::confounders();
  if (name == "expanded") return BasisLibrary::expanded();
  if (name == "reduced") return BasisLibrary::reduced();
  throw std::invalid_argument(
      "unknown library '" + std::string(name) +
      "'; expected standard, confounders, expanded, or reduced");
}

std::string library_name(const BasisLibrary& lib) {
  for (const char* name : {"standard", "confounders", "expanded", "reduced"})
    if (same_library(lib, library_by_name(name))) return name;
  return "custom";
}

int true_basis_index(const BasisLibrary& lib, LawKind kind) {
  const double exponent = kind == LawKind::Kepler ? -2.0 : 1.0;
  for (int i = 0; i < lib.size(); ++i)
    if (lib.terms[i].kind == BasisTerm::Kind::Power &&
        lib.terms[i].exponent == exponent)
      return i;
  return -1;
}

}  // namespace minaction
