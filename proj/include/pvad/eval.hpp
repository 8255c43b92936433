#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvad/corpus.hpp"
#include "pvad/net.hpp"

namespace pvad {

struct MetricsReport {
    double auc = 0.0;
    double dcf = 0.0;
    double acc = 0.0;
    double miss_rate = 0.0;
    double fa_rate = 0.0;
    std::size_t n_frames = 0;
    bool auc_valid = false;
};

// Trapezoidal area under the ROC traced over all distinct score thresholds;
// throws if labels contain a single class.
double roc_auc(std::span<const double> scores, std::span<const uint8_t> labels);

// Frame-weighted detection metrics at the given threshold. AUC is flagged
// invalid (NaN) when only one class is present; the other metrics are still
// returned.
MetricsReport compute_metrics(std::span<const double> probabilities,
                              std::span<const uint8_t> labels, double threshold = 0.5);

enum class HarnessMode { EqualEnvironment, EqualSnr };

struct HarnessRow {
    double snr_db = 0.0;
    std::string model; // "bc" | "ac"
    MetricsReport metrics;
};

struct HarnessResult {
    std::vector<HarnessRow> rows;
    // equal-environment mode: mean realized SNR_BC minus the set SNR_AC
    double mean_snr_advantage_db = 0.0;
};

// Re-mixes the test split's stems at each grid SNR and evaluates both
// models on their own channel. EqualEnvironment fixes the AC-channel SNR
// and applies the same coefficients to the BC stems; EqualSnr solves the
// coefficients per channel so both mixtures hit the grid SNR.
HarnessResult run_harness(const NetParams& bc_model, const NetParams& ac_model,
                          const DatasetManifest& manifest, HarnessMode mode,
                          const std::vector<double>& snr_grid);

// Accuracy of one model on its clean (noise-free) channel stems; the
// high-SNR limit of the harness curves.
MetricsReport clean_metrics(const NetParams& model, const DatasetManifest& manifest,
                            Channel channel);

void write_harness_csv(const HarnessResult& result, const std::string& path);

} // namespace pvad
