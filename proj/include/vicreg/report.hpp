#pragma once

// Plain-text summaries of a metrics CSV and an SVG plot of the std and
// correlation curves (one panel each).

#include "vicreg/trainer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vicreg {

struct MetricsSummary {
  int epochs = 0;
  MetricsRow first;
  MetricsRow last;
  double min_embed_std = 0.0;
  double max_embed_std = 0.0;
  // Smallest mean_embed_std over the last tail_epochs rows.
  double tail_min_embed_std = 0.0;
  int tail_epochs = 0;
  CollapseVerdict verdict = CollapseVerdict::kStable;
  // Epoch at which the collapse window was first completed.
  std::optional<int> collapse_epoch;
};

MetricsSummary summarize_metrics(const std::vector<MetricsRow>& rows, double gamma,
                                 int tail_epochs = 50);

std::string format_summary(const MetricsSummary& s);

/// Two stacked panels: mean representation/embedding std on a log axis, and
/// the average correlation coefficient of the representations.
std::string render_svg(const std::vector<MetricsRow>& rows, const std::string& title = "");

}  // namespace vicreg
