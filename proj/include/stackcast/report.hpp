#pragma once

#include "stackcast/experiment.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace stackcast {

inline constexpr std::string_view kResultCsvHeader =
    "family,prior_family,n,r2,replications,ratio,mc_se,mean_stacked_loss,mean_best_loss,wall_seconds";

/// One header line plus one row per cell; reals with 10 significant digits,
/// LF line endings.
std::string result_to_csv(const ExperimentResult& result);
ExperimentResult result_from_csv(std::string_view text);

void emit_csv(const ExperimentResult& result, const std::filesystem::path& path);

/// Standalone SVG with one panel per (family, prior family): ratio against
/// R^2, a solid line for the smallest n and dashed lines for the others, and
/// a reference line at 1.
std::string result_to_svg(const ExperimentResult& result);
void emit_plot(const ExperimentResult& result, const std::filesystem::path& path);

}  // namespace stackcast
