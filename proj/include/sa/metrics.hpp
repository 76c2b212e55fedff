#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sa {

// Positive-class precision/recall/F1 with the raw confusion counts.
struct MetricsReport {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::string dataset;
    std::string model;
};

MetricsReport compute_metrics(const std::vector<bool>& gold, const std::vector<bool>& predicted,
                              const std::string& dataset = "", const std::string& model = "");

struct MacroMetrics {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

MacroMetrics macro_metrics(const MetricsReport& report);

std::string metrics_json(const MetricsReport& report);

}  // namespace sa
