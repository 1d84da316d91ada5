#pragma once

#include <filesystem>
#include <string>

#include "minaction/io.hpp"

namespace minaction {

// Markdown summary: per-seed table, milestone statistics, conservation
// groups with the verdict, and (when given) the sparse-regression baseline.
std::string sweep_markdown(const SweepResult& res, const RunConfig& rc,
                           const SindyReport* sindy = nullptr);

// Long-format plotting series over every seed's epoch log.
std::string loss_curves_csv(const SweepResult& res);
std::string gates_evolution_csv(const SweepResult& res, const BasisLibrary& lib);

// (alpha_E, tau) path over epochs with small-integer ratio crossings marked.
std::string phase_trajectory_csv(const Schedule& s);

// report.md plus the three sidecar CSVs, written atomically into dir.
void write_report(const std::filesystem::path& dir, const SweepResult& res,
                  const RunConfig& rc, const SindyReport* sindy = nullptr);

}  // namespace minaction
