#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pvad/audio.hpp"
#include "pvad/net.hpp"

namespace pvad {

// Generation parameters for the synthetic dual-channel corpus. A spec plus
// its seed fully determines every sample; per-clip streams are derived so
// generation order and thread count do not matter.
struct SynthSpec {
    uint64_t seed = 1;
    int n_speakers = 20;        // first 80% train, rest test
    double clip_len_s = 30.0;
    double speech_f0_low_hz = 85.0;
    double speech_f0_high_hz = 255.0;
    double bc_lowpass_cutoff_hz = 2000.0;
    // Coupling loss of external sources into the bone channel, calibrated
    // once so the mean BC-over-AC SNR advantage lands at ~15 dB.
    double bc_external_attenuation_db = 14.7;
    double train_hours = 0.5;
    double test_hours = 0.1;

    int sample_rate_hz = 16000;
    int clip_samples() const { return static_cast<int>(clip_len_s * sample_rate_hz); }
    int train_clips() const { return static_cast<int>(train_hours * 3600.0 / clip_len_s); }
    int test_clips() const { return static_cast<int>(test_hours * 3600.0 / clip_len_s); }
    int train_speakers() const { return std::max(1, (n_speakers * 4) / 5); }
};

struct MixSpec {
    double target_snr_db = 15.0; // drawn from N(15, 5), clamped to [0, 30]
    double level_dbfs = -28.0;   // drawn from N(-28, 10), clamped to [-50, -10]
    double gamma = 0.0;          // resolved noise scale, filled by make_mixture
    double alpha = 1.0;          // harness rescale coefficients
    double beta = 1.0;
};

struct TargetSynth {
    AudioClip s_bc, s_ac, s_ref;
    // ground-truth utterance intervals in seconds, for test oracles
    std::vector<std::pair<double, double>> bursts;
};

struct ChannelPair {
    AudioClip bc, ac;
};

struct LabeledClip {
    AudioClip y_bc, y_ac;   // mixtures (training input)
    AudioClip s_ref;        // clean target reference (labels derive only from this)
    AudioClip s_bc, s_ac;   // stems retained for the evaluation harnesses
    AudioClip eta_bc, eta_ac;
    std::vector<uint8_t> raw_labels;
    std::vector<double> labels; // causally smoothed soft targets
};

// Speech surrogate: harmonic source at a speaker-specific f0 with pitch
// jitter, two formant resonances and aspiration noise, gated into utterance
// bursts. The BC channel is the same signal through a 4th-order lowpass.
TargetSynth synth_target_speech(const SynthSpec& spec, int speaker_id, double duration_s,
                                uint64_t rng_seed);

ChannelPair synth_external(const SynthSpec& spec, Role kind, double duration_s,
                           uint64_t rng_seed);

// Exposed for the octave-band test oracle and noise synthesis.
std::vector<float> synth_pink_noise(int n_samples, uint64_t rng_seed);

// Bone-channel coupling for external sources: attenuation plus lowpass.
AudioClip bc_couple_external(const AudioClip& ac, const SynthSpec& spec);

// eta = ext_speech + ext_noise per channel; gamma solved on the BC channel
// and reused for AC (one acoustic scene, one scale). Both mixtures are then
// rescaled to mix.level_dbfs RMS. Labels are not filled here.
LabeledClip make_mixture(const TargetSynth& target, const ChannelPair& ext_speech,
                         const ChannelPair& ext_noise, MixSpec& mix);

// VAD(n) = 1 iff ||S(n)|| > min_n||S|| + alpha * avg_n||S||, on the clean
// reference only.
std::vector<uint8_t> labels_from_norms(const std::vector<double>& norms, double alpha = 0.3);
std::vector<uint8_t> generate_labels(const AudioClip& s_ref, const FrameConfig& cfg);

// Causal moving average over the past window_frames frames (0.2 s at the
// canonical hop), truncated at the clip start.
std::vector<double> smooth_labels(const std::vector<uint8_t>& raw, int window_frames = 20);

struct ClipInfo {
    std::string id;
    std::string split; // "train" | "test"
    uint64_t seed = 0;
    int speaker = 0;
    MixSpec mix;
    std::map<std::string, std::string> wavs; // stem name -> relative path
    std::string labels_path;
    int n_frames = 0;
    double active_fraction = 0.0;
};

struct ActiveFrameReport {
    double frac_low = 0.0;  // clips with < 25% active frames
    double frac_mid = 0.0;  // 25%..60%
    double frac_high = 0.0; // > 60%
};

struct DatasetManifest {
    int format_version = 1;
    SynthSpec spec;
    std::string root_dir;
    std::vector<ClipInfo> clips;
    ActiveFrameReport report;

    std::vector<const ClipInfo*> split(const std::string& name) const {
        std::vector<const ClipInfo*> out;
        for (const auto& c : clips)
            if (c.split == name) out.push_back(&c);
        return out;
    }
};

// Generates every clip (parallel across clip indices), writes WAV stems,
// label CSVs and the manifest JSON under out_dir.
DatasetManifest build_dataset(const SynthSpec& spec, const std::string& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Regenerates one clip from its manifest seed, in memory (no file I/O).
LabeledClip synth_clip(const SynthSpec& spec, const ClipInfo& info);

// Reads a clip's stems and labels back from disk.
LabeledClip load_clip(const DatasetManifest& manifest, const ClipInfo& info);

// Features of the chosen mixture channel plus smoothed targets, ready for
// training or evaluation.
std::vector<LabeledSequence> load_split_features(const DatasetManifest& manifest,
                                                 const std::string& split, Channel channel,
                                                 const FrameConfig& cfg);

// Mean (SNR_BC - SNR_AC) over a freshly synthesized batch, gamma held equal
// across channels; the channel-calibration figure of merit.
double measure_snr_advantage(const SynthSpec& spec, int n_clips);

} // namespace pvad
