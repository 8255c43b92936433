#include "pvad/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "pvad/errors.hpp"

namespace pvad {

bool gate_decision(double energy_db, const GateConfig& cfg) {
    // inclusive comparison: digital silence sits exactly at the energy
    // floor set by the spectral epsilon and must gate at that threshold
    return cfg.enabled && energy_db <= cfg.threshold_db;
}

namespace {

class FloatScorer final : public FrameScorer {
public:
    explicit FloatScorer(const NetParams& params) : params_(params) { state_.reset(params_.cfg); }

    double predict(std::span<const double> features) override {
        return forward_frame(params_, state_, features);
    }
    void reset() override { state_.reset(params_.cfg); }
    void decay_state(double factor) override {
        if (factor == 1.0) return;
        for (double& v : state_.h1) v *= factor;
        for (double& v : state_.h2) v *= factor;
    }
    std::vector<double> state_snapshot() const override {
        std::vector<double> snap(state_.h1);
        snap.insert(snap.end(), state_.h2.begin(), state_.h2.end());
        return snap;
    }

private:
    NetParams params_;
    GruState state_;
};

class QuantScorer final : public FrameScorer {
public:
    explicit QuantScorer(const QNetParams& params) : params_(params) { state_.reset(params_); }

    double predict(std::span<const double> features) override {
        return q_forward_frame(params_, state_, features);
    }
    void reset() override { state_.reset(params_); }
    void decay_state(double factor) override {
        if (factor == 1.0) return;
        auto decay = [&](std::vector<int32_t>& h, int32_t zp) {
            for (int32_t& v : h)
                v = zp + static_cast<int32_t>(std::llround((v - zp) * factor));
        };
        decay(state_.h1, params_.gru1.state.zero_point);
        decay(state_.h2, params_.gru2.state.zero_point);
    }
    std::vector<double> state_snapshot() const override {
        std::vector<double> snap;
        for (int32_t v : state_.h1) snap.push_back(v);
        for (int32_t v : state_.h2) snap.push_back(v);
        return snap;
    }

private:
    QNetParams params_;
    QGruState state_;
};

} // namespace

std::unique_ptr<FrameScorer> make_scorer(const NetParams& params) {
    return std::make_unique<FloatScorer>(params);
}

std::unique_ptr<FrameScorer> make_scorer(const QNetParams& params) {
    return std::make_unique<QuantScorer>(params);
}

StreamEngine::StreamEngine(std::unique_ptr<FrameScorer> scorer, const FrameConfig& cfg,
                           const GateConfig& gate)
    : cfg_(cfg), fb_(build_mel_filterbank(cfg)), gate_(gate), scorer_(std::move(scorer)) {
    if (!scorer_) throw ConfigError("StreamEngine: null scorer");
}

void StreamEngine::reset() {
    buf_.clear();
    frame_index_ = 0;
    stats_ = {};
    scorer_->reset();
}

std::vector<Prediction> StreamEngine::push_samples(std::span<const float> samples) {
    buf_.insert(buf_.end(), samples.begin(), samples.end());
    std::vector<Prediction> out;
    while (buf_.size() >= static_cast<std::size_t>(cfg_.frame_len)) {
        std::vector<double> frame(cfg_.frame_len);
        for (int i = 0; i < cfg_.frame_len; ++i) frame[i] = buf_[i];
        const FeatureVector fv = extract_features(frame, fb_, cfg_, frame_index_);

        Prediction pred;
        pred.frame_index = frame_index_;
        pred.energy_db = fv.energy_db;
        pred.skipped = gate_decision(fv.energy_db, gate_);
        if (pred.skipped) {
            pred.probability = gate_.skip_output;
            scorer_->decay_state(gate_.skip_state_decay);
            ++stats_.frames_skipped;
        } else {
            pred.probability = scorer_->predict(fv.values);
        }
        pred.label = pred.probability > 0.5 ? 1 : 0;
        if (profile_) {
            pred.latency_ms = profile_->hop_ms + profile_->t_fft_ms +
                              (pred.skipped ? 0.0 : profile_->t_infer_ms);
        }
        ++stats_.frames_total;
        ++frame_index_;
        out.push_back(pred);
        buf_.erase(buf_.begin(), buf_.begin() + cfg_.hop);
    }
    return out;
}

double worst_case_latency_ms(const SocProfile& soc) {
    soc.validate();
    return soc.hop_ms + soc.t_fft_ms + soc.t_infer_ms;
}

namespace {

template <typename Model>
std::vector<GateSweepRow> gate_sweep_impl(const Model& model, const DatasetManifest& manifest,
                                          const std::vector<double>& thresholds,
                                          const GateSweepConfig& cfg) {
    if (thresholds.empty()) throw ConfigError("gate_sweep: empty threshold list");
    const auto clips = manifest.split("test");
    if (clips.empty()) throw ConfigError("gate_sweep: manifest has no test split");

    // remix once per clip at the evaluation SNR and peak level
    struct Prepared {
        AudioClip y;
        std::vector<uint8_t> truth;
    };
    std::vector<Prepared> prepared;
    for (const ClipInfo* info : clips) {
        LabeledClip clip = load_clip(manifest, *info);
        const double gamma = snr_gain(clip.s_bc, clip.eta_bc, cfg.snr_db);
        AudioClip y = mix_scaled(clip.s_bc, clip.eta_bc, static_cast<float>(gamma));
        Prepared p;
        p.y = rescale_to_level(y, cfg.peak_dbfs, LevelMode::PeakDbfs);
        p.truth.reserve(clip.labels.size());
        for (double l : clip.labels) p.truth.push_back(l > 0.5 ? 1 : 0);
        prepared.push_back(std::move(p));
    }

    std::vector<GateSweepRow> rows;
    for (double threshold : thresholds) {
        GateConfig gate;
        gate.enabled = true;
        gate.threshold_db = threshold;
        gate.skip_state_decay = cfg.skip_state_decay;

        long correct = 0, total = 0, skipped = 0;
        for (const Prepared& p : prepared) {
            StreamEngine engine(make_scorer(model), FrameConfig{}, gate);
            const auto preds = engine.push_samples(p.y.samples);
            for (const Prediction& pr : preds) {
                if (static_cast<std::size_t>(pr.frame_index) >= p.truth.size()) break;
                correct += pr.label == p.truth[pr.frame_index];
                skipped += pr.skipped;
                ++total;
            }
        }
        GateSweepRow row;
        row.threshold_db = threshold;
        row.skip_fraction = total ? static_cast<double>(skipped) / total : 0.0;
        row.accuracy = total ? static_cast<double>(correct) / total : 0.0;
        rows.push_back(row);
    }
    return rows;
}

} // namespace

std::vector<GateSweepRow> gate_sweep(const QNetParams& model, const DatasetManifest& manifest,
                                     const std::vector<double>& thresholds,
                                     const GateSweepConfig& cfg) {
    return gate_sweep_impl(model, manifest, thresholds, cfg);
}

std::vector<GateSweepRow> gate_sweep(const NetParams& model, const DatasetManifest& manifest,
                                     const std::vector<double>& thresholds,
                                     const GateSweepConfig& cfg) {
    return gate_sweep_impl(model, manifest, thresholds, cfg);
}

} // namespace pvad
