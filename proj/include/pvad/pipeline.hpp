#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pvad/corpus.hpp"
#include "pvad/net.hpp"
#include "pvad/power.hpp"
#include "pvad/quant.hpp"

namespace pvad {

struct GateConfig {
    bool enabled = false;
    double threshold_db = -60.0; // spectral frame energy threshold
    double skip_output = 0.0;    // probability emitted for skipped frames
    // 1.0 holds the recurrent state across skipped frames (default), 0.0
    // clears it; values between decay it.
    double skip_state_decay = 1.0;
};

// skip iff gating is enabled and the frame's spectral energy is at or below
// the threshold; the energy comes out of the FFT stage, so a skip only
// saves the inference stage.
bool gate_decision(double energy_db, const GateConfig& cfg);

struct Prediction {
    int frame_index = 0;
    double probability = 0.0;
    int label = 0; // probability > 0.5
    bool skipped = false;
    double energy_db = 0.0;
    double latency_ms = 0.0; // modeled worst case; 0 without a profile
};

// Model-agnostic per-frame scorer with streaming recurrent state.
class FrameScorer {
public:
    virtual ~FrameScorer() = default;
    virtual double predict(std::span<const double> features) = 0;
    virtual void reset() = 0;
    virtual void decay_state(double factor) = 0; // factor 1.0 must be a no-op
    virtual std::vector<double> state_snapshot() const = 0;
};

std::unique_ptr<FrameScorer> make_scorer(const NetParams& params);
std::unique_ptr<FrameScorer> make_scorer(const QNetParams& params);

struct StreamStats {
    long frames_total = 0;
    long frames_skipped = 0;
};

// Streaming engine: buffers 16 kHz samples, emits one Prediction per hop
// once a full analysis frame exists, 50% overlap. Output is a pure function
// of the sample sequence, independent of push granularity.
class StreamEngine {
public:
    StreamEngine(std::unique_ptr<FrameScorer> scorer, const FrameConfig& cfg,
                 const GateConfig& gate);

    std::vector<Prediction> push_samples(std::span<const float> samples);
    void reset();

    void set_latency_profile(const SocProfile& soc) { profile_ = soc; }
    const StreamStats& stats() const { return stats_; }
    const FrameScorer& scorer() const { return *scorer_; }

private:
    FrameConfig cfg_;
    MelFilterbank fb_;
    GateConfig gate_;
    std::unique_ptr<FrameScorer> scorer_;
    std::optional<SocProfile> profile_;
    std::vector<float> buf_; // overlap + pending; < frame_len after push
    int frame_index_ = 0;
    StreamStats stats_;
};

// Worst case: speech lands just after a hop boundary and waits a full hop
// before entering the frame that is then processed.
double worst_case_latency_ms(const SocProfile& soc);

struct GateSweepRow {
    double threshold_db = 0.0;
    double skip_fraction = 0.0;
    double accuracy = 0.0;
};

// Remixes each test clip's stems at the stated SNR on the BC channel,
// normalizes to the stated peak level, and runs the gated pipeline at each
// threshold. Accuracy is frame-binary against the clip labels.
struct GateSweepConfig {
    double snr_db = 10.0;
    double peak_dbfs = -15.0;
    double skip_state_decay = 1.0;
};

std::vector<GateSweepRow> gate_sweep(const QNetParams& model, const DatasetManifest& manifest,
                                     const std::vector<double>& thresholds,
                                     const GateSweepConfig& cfg = {});
std::vector<GateSweepRow> gate_sweep(const NetParams& model, const DatasetManifest& manifest,
                                     const std::vector<double>& thresholds,
                                     const GateSweepConfig& cfg = {});

} // namespace pvad
