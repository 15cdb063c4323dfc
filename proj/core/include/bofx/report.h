#pragma once

#include <string>
#include <vector>

#include "bofx/consistency.h"
#include "bofx/pipeline.h"

namespace bofx {

// Telemetry plot: one row per channel with yellow highlighted regions and the
// red reference region, plus a probability track with the alarm threshold.
std::string case_svg(const CaseFigure& figure);

// ROC curve from the metrics document's downsampled curve.
std::string roc_svg(const std::string& metrics_json_text);

// Scatter of one channel's embedding: pink highlighted, purple codebook, yellow expert region.
std::string tsne_svg(const ChannelEmbedding& embedding);

std::string embeddings_json(const std::vector<ChannelEmbedding>& embeddings);
std::vector<ChannelEmbedding> embeddings_from_json(const std::string& text);

// Precision/recall and threshold tables as HTML.
std::string metrics_html(const std::string& metrics_json_text);

// Self-contained HTML page wrapping the SVGs and tables.
std::string render_report(const std::string& metrics_json_text, const std::vector<CaseFigure>& cases,
                          const std::vector<ChannelEmbedding>& embeddings);

}  // namespace bofx
