#include "sa/metrics.hpp"

#include <stdexcept>

#include <json.hpp>

namespace sa {

MetricsReport compute_metrics(const std::vector<bool>& gold, const std::vector<bool>& predicted,
                              const std::string& dataset, const std::string& model) {
    if (gold.empty()) throw std::invalid_argument("compute_metrics: empty evaluation set");
    if (gold.size() != predicted.size())
        throw std::invalid_argument("compute_metrics: gold/prediction size mismatch");
    MetricsReport r;
    r.dataset = dataset;
    r.model = model;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] && predicted[i]) ++r.tp;
        else if (!gold[i] && predicted[i]) ++r.fp;
        else if (gold[i] && !predicted[i]) ++r.fn;
        else ++r.tn;
    }
    r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
    r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

MacroMetrics macro_metrics(const MetricsReport& r) {
    // negative-class metrics mirror the positive ones with roles swapped
    const double neg_p = (r.tn + r.fn) > 0 ? static_cast<double>(r.tn) / (r.tn + r.fn) : 0.0;
    const double neg_r = (r.tn + r.fp) > 0 ? static_cast<double>(r.tn) / (r.tn + r.fp) : 0.0;
    const double neg_f1 = (neg_p + neg_r) > 0.0 ? 2.0 * neg_p * neg_r / (neg_p + neg_r) : 0.0;
    MacroMetrics m;
    m.precision = 0.5 * (r.precision + neg_p);
    m.recall = 0.5 * (r.recall + neg_r);
    m.f1 = 0.5 * (r.f1 + neg_f1);
    return m;
}

std::string metrics_json(const MetricsReport& r) {
    nlohmann::json obj{{"dataset", r.dataset}, {"model", r.model},   {"tp", r.tp},
                       {"fp", r.fp},           {"fn", r.fn},         {"tn", r.tn},
                       {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
    return obj.dump();
}

}  // namespace sa
