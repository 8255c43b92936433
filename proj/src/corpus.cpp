#include "pvad/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pvad/errors.hpp"
#include "pvad/rng.hpp"

namespace fs = std::filesystem;

namespace pvad {

namespace {

constexpr uint64_t kTraitStream = 0x5452414954ull;   // speaker traits
constexpr uint64_t kMixStream = 1;
constexpr uint64_t kTargetStream = 2;
constexpr uint64_t kExtSpeechStream = 3;
constexpr uint64_t kExtNoiseStream = 4;

uint64_t derive_seed(uint64_t a, uint64_t b, uint64_t c = 0) {
    uint64_t s = a;
    splitmix64(s);
    s ^= b * 0x9e3779b97f4a7c15ull;
    uint64_t h = splitmix64(s);
    s ^= c * 0xc2b2ae3d27d4eb4full;
    h ^= splitmix64(s);
    return h;
}

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
    double s1 = 0, s2 = 0;

    double step(double x) {
        const double y = b0 * x + s1;
        s1 = b1 * x - a1 * y + s2;
        s2 = b2 * x - a2 * y;
        return y;
    }
};

Biquad butter_lp(double fc, double fs, double q) {
    const double w = 2.0 * M_PI * fc / fs;
    const double alpha = std::sin(w) / (2.0 * q);
    const double cw = std::cos(w);
    const double a0 = 1.0 + alpha;
    Biquad b;
    b.b0 = (1.0 - cw) / 2.0 / a0;
    b.b1 = (1.0 - cw) / a0;
    b.b2 = b.b0;
    b.a1 = -2.0 * cw / a0;
    b.a2 = (1.0 - alpha) / a0;
    return b;
}

// Constant-peak-gain resonator (RBJ bandpass).
Biquad resonator(double fc, double bw_hz, double fs) {
    const double w = 2.0 * M_PI * fc / fs;
    const double q = fc / bw_hz;
    const double alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad b;
    b.b0 = alpha / a0;
    b.b1 = 0.0;
    b.b2 = -alpha / a0;
    b.a1 = -2.0 * std::cos(w) / a0;
    b.a2 = (1.0 - alpha) / a0;
    return b;
}

// 4th-order Butterworth lowpass as two cascaded biquads.
struct Butter4 {
    Biquad s1, s2;
    Butter4(double fc, double fs)
        : s1(butter_lp(fc, fs, 0.54119610)), s2(butter_lp(fc, fs, 1.30656296)) {}
    double step(double x) { return s2.step(s1.step(x)); }
};

AudioClip lowpass4(const AudioClip& in, double fc) {
    Butter4 filt(fc, in.sample_rate_hz);
    AudioClip out = in;
    for (float& v : out.samples) v = static_cast<float>(filt.step(v));
    return out;
}

void normalize_peak(std::vector<float>& x, float peak) {
    float m = 0.0f;
    for (float v : x) m = std::max(m, std::fabs(v));
    if (m <= 0.0f) return;
    const float g = peak / m;
    for (float& v : x) v *= g;
}

struct VoiceTraits {
    double f0 = 150.0;
    double formant1 = 500.0;
    double formant2 = 1500.0;
};

VoiceTraits speaker_traits(const SynthSpec& spec, uint64_t pool_tag, int speaker_id) {
    Rng rng(derive_seed(spec.seed ^ kTraitStream, pool_tag, static_cast<uint64_t>(speaker_id)));
    VoiceTraits t;
    t.f0 = rng.uniform(spec.speech_f0_low_hz, spec.speech_f0_high_hz);
    t.formant1 = rng.uniform(350.0, 850.0);
    t.formant2 = rng.uniform(1000.0, 2400.0);
    return t;
}

struct BurstPlan {
    std::vector<std::pair<double, double>> bursts; // [start, end) seconds
};

BurstPlan plan_bursts(Rng& rng, double duration_s, double burst_lo, double burst_hi,
                      double sil_lo, double sil_hi) {
    BurstPlan plan;
    double t = rng.uniform() < 0.5 ? rng.uniform(sil_lo, sil_hi) : 0.0;
    while (t < duration_s) {
        const double b = rng.uniform(burst_lo, burst_hi);
        const double end = std::min(t + b, duration_s);
        if (end > t) plan.bursts.emplace_back(t, end);
        t = end + rng.uniform(sil_lo, sil_hi);
    }
    return plan;
}

// Voiced source plus formant shaping, gated by the burst plan. The harmonic
// series uses the closed form sum_h r^h sin(h*phi), which keeps the cost at
// two trig calls per sample regardless of f0.
std::vector<float> render_voice(const VoiceTraits& traits, const BurstPlan& plan,
                                double duration_s, int fs, Rng& rng) {
    const int n = static_cast<int>(duration_s * fs);
    std::vector<float> out(n, 0.0f);
    constexpr double kHarmonicDecay = 0.85;
    constexpr double kRampS = 0.015;

    Biquad f1 = resonator(traits.formant1, 90.0, fs);
    Biquad f2 = resonator(traits.formant2, 130.0, fs);

    double phase = 0.0;
    double jitter = 0.0, jitter_target = 0.0;
    std::size_t burst_idx = 0;
    for (int i = 0; i < n; ++i) {
        if (i % 160 == 0)
            jitter_target = std::clamp(rng.normal(0.0, 0.015), -0.04, 0.04);
        jitter += (jitter_target - jitter) * 0.02;

        const double t = static_cast<double>(i) / fs;
        while (burst_idx < plan.bursts.size() && t >= plan.bursts[burst_idx].second)
            ++burst_idx;

        double env = 0.0;
        if (burst_idx < plan.bursts.size() && t >= plan.bursts[burst_idx].first) {
            const auto [b0, b1] = plan.bursts[burst_idx];
            const double ramp = std::min(kRampS, (b1 - b0) / 2.0);
            const double in_t = t - b0, out_t = b1 - t;
            env = 1.0;
            if (in_t < ramp) env = 0.5 * (1.0 - std::cos(M_PI * in_t / ramp));
            else if (out_t < ramp) env = 0.5 * (1.0 - std::cos(M_PI * out_t / ramp));
        }

        const double f0 = traits.f0 * (1.0 + jitter);
        phase += 2.0 * M_PI * f0 / fs;
        if (phase > 2.0 * M_PI) phase -= 2.0 * M_PI;

        double sample = 0.0;
        if (env > 0.0) {
            const double r = kHarmonicDecay;
            const double harm =
                r * std::sin(phase) / (1.0 - 2.0 * r * std::cos(phase) + r * r);
            const double aspiration = 0.02 * rng.normal();
            sample = env * (0.5 * harm + aspiration);
        }
        const double shaped = 0.25 * sample + f1.step(sample) + 0.6 * f2.step(sample);
        out[i] = static_cast<float>(shaped);
    }
    return out;
}

} // namespace

std::vector<float> synth_pink_noise(int n_samples, uint64_t rng_seed) {
    // Spectral synthesis in overlapped Hann blocks: |X(k)| ~ 1/sqrt(k) gives
    // an exact 1/f power density; random phases per block, 50% overlap-add.
    constexpr int kBlock = 32768;
    constexpr int kHop = kBlock / 2;
    Rng rng(rng_seed);

    std::vector<double> hann(kBlock);
    for (int i = 0; i < kBlock; ++i)
        hann[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / kBlock));

    const int total = n_samples + kBlock; // extra margin trimmed symmetrically
    std::vector<double> acc(total, 0.0);
    for (int start = 0; start + kBlock <= total + kHop; start += kHop) {
        std::vector<std::complex<double>> spec(kBlock, {0.0, 0.0});
        for (int k = 1; k < kBlock / 2; ++k) {
            const double amp = 1.0 / std::sqrt(static_cast<double>(k));
            const double th = rng.uniform(0.0, 2.0 * M_PI);
            spec[k] = std::polar(amp, th);
            spec[kBlock - k] = std::conj(spec[k]);
        }
        spec[kBlock / 2] = {rng.uniform() < 0.5 ? 1.0 : -1.0, 0.0};
        fft(spec, true);
        for (int i = 0; i < kBlock && start + i < total; ++i)
            acc[start + i] += spec[i].real() * hann[i];
    }

    std::vector<float> out(n_samples);
    double rms = 0.0;
    for (int i = 0; i < n_samples; ++i) rms += acc[kHop + i] * acc[kHop + i];
    rms = std::sqrt(rms / n_samples);
    const double g = rms > 0.0 ? 0.15 / rms : 1.0;
    for (int i = 0; i < n_samples; ++i)
        out[i] = static_cast<float>(acc[kHop + i] * g);
    return out;
}

TargetSynth synth_target_speech(const SynthSpec& spec, int speaker_id, double duration_s,
                                uint64_t rng_seed) {
    if (duration_s < 1.0) throw ConfigError("synth_target_speech: duration must be >= 1 s");
    Rng rng(rng_seed);
    const VoiceTraits traits = speaker_traits(spec, 0, speaker_id);
    const BurstPlan plan = plan_bursts(rng, duration_s, 0.4, 1.5, 0.3, 1.0);

    TargetSynth out;
    out.bursts = plan.bursts;
    AudioClip ac;
    ac.sample_rate_hz = spec.sample_rate_hz;
    ac.samples = render_voice(traits, plan, duration_s, spec.sample_rate_hz, rng);
    normalize_peak(ac.samples, 0.5f);
    ac.channel = Channel::AC;
    ac.role = Role::TargetSpeech;

    out.s_ac = ac;
    out.s_ref = ac;
    out.s_ref.channel = Channel::ACRef;
    out.s_bc = lowpass4(ac, spec.bc_lowpass_cutoff_hz);
    out.s_bc.channel = Channel::BC;
    return out;
}

AudioClip bc_couple_external(const AudioClip& ac, const SynthSpec& spec) {
    AudioClip scaled = ac;
    const float g = static_cast<float>(std::pow(10.0, -spec.bc_external_attenuation_db / 20.0));
    for (float& v : scaled.samples) v *= g;
    AudioClip bc = lowpass4(scaled, spec.bc_lowpass_cutoff_hz);
    bc.channel = Channel::BC;
    return bc;
}

ChannelPair synth_external(const SynthSpec& spec, Role kind, double duration_s,
                           uint64_t rng_seed) {
    if (duration_s < 1.0) throw ConfigError("synth_external: duration must be >= 1 s");
    if (kind != Role::ExternalSpeech && kind != Role::ExternalNoise)
        throw ConfigError("synth_external: kind must be external speech or noise");

    Rng rng(rng_seed);
    const int n = static_cast<int>(duration_s * spec.sample_rate_hz);
    AudioClip ac;
    ac.sample_rate_hz = spec.sample_rate_hz;
    ac.role = kind;
    ac.channel = Channel::AC;

    if (kind == Role::ExternalSpeech) {
        // a speaker from a pool disjoint from the wearer pool (trait tag 1)
        const int ext_speaker = static_cast<int>(rng.uniform_int(0, 9999));
        const VoiceTraits traits = speaker_traits(spec, 1, ext_speaker);
        const BurstPlan plan = plan_bursts(rng, duration_s, 0.4, 1.5, 0.3, 1.0);
        ac.samples = render_voice(traits, plan, duration_s, spec.sample_rate_hz, rng);
        normalize_peak(ac.samples, 0.5f);
    } else {
        const double w_gain = rng.uniform(0.05, 0.3);
        const double p_gain = rng.uniform(0.4, 0.8);
        const double b_gain = rng.uniform(0.1, 0.6);

        std::vector<float> pink = synth_pink_noise(n, rng.next_u64());
        std::vector<float> mixdown(n, 0.0f);
        for (int i = 0; i < n; ++i)
            mixdown[i] = static_cast<float>(p_gain * pink[i] + w_gain * 0.15 * rng.normal());

        // babble bed: three overlapping voices with short gaps
        for (int v = 0; v < 3; ++v) {
            const int babble_speaker = static_cast<int>(rng.uniform_int(0, 9999));
            const VoiceTraits traits = speaker_traits(spec, 2, babble_speaker);
            Rng vrng(rng.next_u64());
            const BurstPlan plan = plan_bursts(vrng, duration_s, 0.3, 1.2, 0.15, 0.5);
            std::vector<float> voice =
                render_voice(traits, plan, duration_s, spec.sample_rate_hz, vrng);
            normalize_peak(voice, 0.15f);
            for (int i = 0; i < n; ++i)
                mixdown[i] += static_cast<float>(b_gain) * voice[i];
        }
        ac.samples = std::move(mixdown);
        normalize_peak(ac.samples, 0.5f);
    }

    ChannelPair pair;
    pair.bc = bc_couple_external(ac, spec);
    pair.bc.role = kind;
    pair.ac = std::move(ac);
    return pair;
}

LabeledClip make_mixture(const TargetSynth& target, const ChannelPair& ext_speech,
                         const ChannelPair& ext_noise, MixSpec& mix) {
    LabeledClip clip;
    clip.s_bc = target.s_bc;
    clip.s_ac = target.s_ac;
    clip.s_ref = target.s_ref;
    clip.eta_bc = mix_scaled(ext_speech.bc, ext_noise.bc, 1.0f);
    clip.eta_ac = mix_scaled(ext_speech.ac, ext_noise.ac, 1.0f);
    clip.eta_bc.channel = Channel::BC;
    clip.eta_ac.channel = Channel::AC;

    mix.gamma = snr_gain(clip.s_bc, clip.eta_bc, mix.target_snr_db);
    const float g = static_cast<float>(mix.gamma);
    clip.y_bc = mix_scaled(clip.s_bc, clip.eta_bc, g);
    clip.y_ac = mix_scaled(clip.s_ac, clip.eta_ac, g);
    clip.y_bc = rescale_to_level(clip.y_bc, mix.level_dbfs, LevelMode::RmsDbfs);
    clip.y_ac = rescale_to_level(clip.y_ac, mix.level_dbfs, LevelMode::RmsDbfs);
    clip.y_bc.channel = Channel::BC;
    clip.y_ac.channel = Channel::AC;
    return clip;
}

std::vector<uint8_t> labels_from_norms(const std::vector<double>& norms, double alpha) {
    if (norms.size() < 2)
        throw ShapeError("labels_from_norms: need at least 2 frames");
    double mn = norms[0], mean = 0.0;
    for (double v : norms) {
        mn = std::min(mn, v);
        mean += v;
    }
    mean /= static_cast<double>(norms.size());
    const double threshold = mn + alpha * mean;
    std::vector<uint8_t> labels(norms.size());
    for (std::size_t i = 0; i < norms.size(); ++i)
        labels[i] = norms[i] > threshold ? 1 : 0;
    return labels;
}

std::vector<uint8_t> generate_labels(const AudioClip& s_ref, const FrameConfig& cfg) {
    return labels_from_norms(frame_spectral_norms(s_ref, cfg));
}

std::vector<double> smooth_labels(const std::vector<uint8_t>& raw, int window_frames) {
    std::vector<double> out(raw.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        acc += raw[i];
        if (i >= static_cast<std::size_t>(window_frames)) acc -= raw[i - window_frames];
        const double w = std::min<std::size_t>(i + 1, window_frames);
        out[i] = acc / w;
    }
    return out;
}

namespace {

LabeledClip synth_labeled(const SynthSpec& spec, uint64_t clip_seed, int speaker, MixSpec& mix) {
    TargetSynth target = synth_target_speech(spec, speaker, spec.clip_len_s,
                                             derive_seed(clip_seed, kTargetStream));
    ChannelPair es = synth_external(spec, Role::ExternalSpeech, spec.clip_len_s,
                                    derive_seed(clip_seed, kExtSpeechStream));
    ChannelPair en = synth_external(spec, Role::ExternalNoise, spec.clip_len_s,
                                    derive_seed(clip_seed, kExtNoiseStream));
    LabeledClip clip = make_mixture(target, es, en, mix);
    clip.raw_labels = generate_labels(clip.s_ref, FrameConfig{});
    clip.labels = smooth_labels(clip.raw_labels);
    return clip;
}

void write_labels_csv(const LabeledClip& clip, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FileError("cannot write " + path);
    f << "frame_index,raw,smoothed\n";
    for (std::size_t i = 0; i < clip.raw_labels.size(); ++i)
        f << i << "," << static_cast<int>(clip.raw_labels[i]) << "," << clip.labels[i] << "\n";
}

void read_labels_csv(const std::string& path, LabeledClip& clip) {
    std::ifstream f(path);
    if (!f) throw FileError("cannot open " + path);
    std::string line;
    std::getline(f, line); // header
    clip.raw_labels.clear();
    clip.labels.clear();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        std::getline(ss, tok, ',');
        clip.raw_labels.push_back(static_cast<uint8_t>(std::stoi(tok)));
        std::getline(ss, tok, ',');
        clip.labels.push_back(std::stod(tok));
    }
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t]() {
            for (std::size_t i = t; i < count; i += threads) fn(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace

DatasetManifest build_dataset(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.n_speakers < 2)
        throw ConfigError("build_dataset: need at least 2 speakers for disjoint splits");
    fs::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.spec = spec;
    manifest.root_dir = out_dir;

    struct Slot {
        std::string split;
        int index;
    };
    std::vector<Slot> slots;
    for (int i = 0; i < spec.train_clips(); ++i) slots.push_back({"train", i});
    for (int i = 0; i < spec.test_clips(); ++i) slots.push_back({"test", i});

    manifest.clips.resize(slots.size());
    parallel_for(slots.size(), [&](std::size_t si) {
        const Slot& slot = slots[si];
        const uint64_t split_tag = slot.split == "train" ? 0x54524eull : 0x545354ull;
        const uint64_t clip_seed = derive_seed(spec.seed, split_tag, slot.index);

        Rng rng(derive_seed(clip_seed, kMixStream));
        const int first = slot.split == "train" ? 0 : spec.train_speakers();
        const int count = slot.split == "train" ? spec.train_speakers()
                                                : spec.n_speakers - spec.train_speakers();
        const int speaker = first + static_cast<int>(rng.uniform_int(0, count - 1));

        MixSpec mix;
        mix.target_snr_db = std::clamp(rng.normal(15.0, 5.0), 0.0, 30.0);
        mix.level_dbfs = std::clamp(rng.normal(-28.0, 10.0), -50.0, -10.0);

        LabeledClip clip = synth_labeled(spec, clip_seed, speaker, mix);

        char id[32];
        std::snprintf(id, sizeof(id), "%s_%04d", slot.split.c_str(), slot.index);
        const std::string clip_dir = out_dir + "/" + id;
        fs::create_directories(clip_dir);

        ClipInfo info;
        info.id = id;
        info.split = slot.split;
        info.seed = clip_seed;
        info.speaker = speaker;
        info.mix = mix;
        const std::pair<const char*, const AudioClip*> stems[] = {
            {"y_bc", &clip.y_bc},     {"y_ac", &clip.y_ac},   {"s_bc", &clip.s_bc},
            {"s_ac", &clip.s_ac},     {"eta_bc", &clip.eta_bc}, {"eta_ac", &clip.eta_ac},
        };
        for (const auto& [name, stem] : stems) {
            const std::string rel = std::string(id) + "/" + name + ".wav";
            write_wav(*stem, out_dir + "/" + rel);
            info.wavs[name] = rel;
        }
        info.labels_path = std::string(id) + "/labels.csv";
        write_labels_csv(clip, out_dir + "/" + info.labels_path);
        info.n_frames = static_cast<int>(clip.raw_labels.size());
        double active = 0.0;
        for (uint8_t r : clip.raw_labels) active += r;
        info.active_fraction = active / std::max<std::size_t>(1, clip.raw_labels.size());
        manifest.clips[si] = std::move(info);
    });

    int low = 0, mid = 0, high = 0;
    for (const auto& c : manifest.clips) {
        if (c.active_fraction < 0.25) ++low;
        else if (c.active_fraction <= 0.60) ++mid;
        else ++high;
    }
    const double n = std::max<std::size_t>(1, manifest.clips.size());
    manifest.report = {low / n, mid / n, high / n};

    save_manifest(manifest, out_dir + "/manifest.json");
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = manifest.format_version;
    j["spec"] = {
        {"seed", manifest.spec.seed},
        {"n_speakers", manifest.spec.n_speakers},
        {"clip_len_s", manifest.spec.clip_len_s},
        {"speech_f0_low_hz", manifest.spec.speech_f0_low_hz},
        {"speech_f0_high_hz", manifest.spec.speech_f0_high_hz},
        {"bc_lowpass_cutoff_hz", manifest.spec.bc_lowpass_cutoff_hz},
        {"bc_external_attenuation_db", manifest.spec.bc_external_attenuation_db},
        {"train_hours", manifest.spec.train_hours},
        {"test_hours", manifest.spec.test_hours},
    };
    j["report"] = {{"low", manifest.report.frac_low},
                   {"mid", manifest.report.frac_mid},
                   {"high", manifest.report.frac_high}};
    nlohmann::json clips = nlohmann::json::array();
    for (const auto& c : manifest.clips) {
        clips.push_back({
            {"id", c.id},
            {"split", c.split},
            {"seed", c.seed},
            {"speaker", c.speaker},
            {"mix",
             {{"target_snr_db", c.mix.target_snr_db},
              {"level_dbfs", c.mix.level_dbfs},
              {"gamma", c.mix.gamma},
              {"alpha", c.mix.alpha},
              {"beta", c.mix.beta}}},
            {"wavs", c.wavs},
            {"labels", c.labels_path},
            {"n_frames", c.n_frames},
            {"active_fraction", c.active_fraction},
        });
    }
    j["clips"] = std::move(clips);
    std::ofstream f(path);
    if (!f) throw FileError("cannot write " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FileError("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest parse error: " + std::string(e.what()));
    }
    DatasetManifest m;
    if (j.value("format_version", -1) != m.format_version)
        throw FormatError("manifest format version mismatch");
    const auto& js = j.at("spec");
    m.spec.seed = js.at("seed").get<uint64_t>();
    m.spec.n_speakers = js.at("n_speakers").get<int>();
    m.spec.clip_len_s = js.at("clip_len_s").get<double>();
    m.spec.speech_f0_low_hz = js.at("speech_f0_low_hz").get<double>();
    m.spec.speech_f0_high_hz = js.at("speech_f0_high_hz").get<double>();
    m.spec.bc_lowpass_cutoff_hz = js.at("bc_lowpass_cutoff_hz").get<double>();
    m.spec.bc_external_attenuation_db = js.at("bc_external_attenuation_db").get<double>();
    m.spec.train_hours = js.at("train_hours").get<double>();
    m.spec.test_hours = js.at("test_hours").get<double>();
    m.report.frac_low = j.at("report").at("low").get<double>();
    m.report.frac_mid = j.at("report").at("mid").get<double>();
    m.report.frac_high = j.at("report").at("high").get<double>();
    m.root_dir = fs::path(path).parent_path().string();
    if (m.root_dir.empty()) m.root_dir = ".";
    for (const auto& jc : j.at("clips")) {
        ClipInfo c;
        c.id = jc.at("id").get<std::string>();
        c.split = jc.at("split").get<std::string>();
        c.seed = jc.at("seed").get<uint64_t>();
        c.speaker = jc.at("speaker").get<int>();
        c.mix.target_snr_db = jc.at("mix").at("target_snr_db").get<double>();
        c.mix.level_dbfs = jc.at("mix").at("level_dbfs").get<double>();
        c.mix.gamma = jc.at("mix").at("gamma").get<double>();
        c.mix.alpha = jc.at("mix").at("alpha").get<double>();
        c.mix.beta = jc.at("mix").at("beta").get<double>();
        c.wavs = jc.at("wavs").get<std::map<std::string, std::string>>();
        c.labels_path = jc.at("labels").get<std::string>();
        c.n_frames = jc.at("n_frames").get<int>();
        c.active_fraction = jc.at("active_fraction").get<double>();
        m.clips.push_back(std::move(c));
    }
    return m;
}

LabeledClip synth_clip(const SynthSpec& spec, const ClipInfo& info) {
    MixSpec mix = info.mix;
    return synth_labeled(spec, info.seed, info.speaker, mix);
}

LabeledClip load_clip(const DatasetManifest& manifest, const ClipInfo& info) {
    LabeledClip clip;
    auto need = [&](const char* name) -> AudioClip {
        auto it = info.wavs.find(name);
        if (it == info.wavs.end())
            throw FormatError("manifest clip " + info.id + " missing stem " + name);
        return read_wav(manifest.root_dir + "/" + it->second);
    };
    clip.y_bc = need("y_bc");
    clip.y_ac = need("y_ac");
    clip.s_bc = need("s_bc");
    clip.s_ac = need("s_ac");
    clip.eta_bc = need("eta_bc");
    clip.eta_ac = need("eta_ac");
    clip.s_ref = clip.s_ac; // the clean AC stem is the labelling reference
    read_labels_csv(manifest.root_dir + "/" + info.labels_path, clip);
    return clip;
}

std::vector<LabeledSequence> load_split_features(const DatasetManifest& manifest,
                                                 const std::string& split, Channel channel,
                                                 const FrameConfig& cfg) {
    const auto clips = manifest.split(split);
    std::vector<LabeledSequence> out(clips.size());
    const MelFilterbank fb = build_mel_filterbank(cfg);
    parallel_for(clips.size(), [&](std::size_t i) {
        LabeledClip clip = load_clip(manifest, *clips[i]);
        const AudioClip& y = channel == Channel::BC ? clip.y_bc : clip.y_ac;
        LabeledSequence seq;
        seq.features = extract_clip_features(y, fb, cfg);
        seq.targets.assign(clip.labels.begin(), clip.labels.end());
        if (seq.features.size() != seq.targets.size())
            throw FormatError("label/frame count mismatch in clip " + clips[i]->id);
        out[i] = std::move(seq);
    });
    return out;
}

double measure_snr_advantage(const SynthSpec& spec, int n_clips) {
    std::vector<double> adv(n_clips, 0.0);
    parallel_for(n_clips, [&](std::size_t i) {
        const uint64_t clip_seed = derive_seed(spec.seed, 0xADull, i);
        Rng rng(derive_seed(clip_seed, kMixStream));
        const int speaker = static_cast<int>(rng.uniform_int(0, spec.n_speakers - 1));
        TargetSynth target = synth_target_speech(spec, speaker, spec.clip_len_s,
                                                 derive_seed(clip_seed, kTargetStream));
        ChannelPair es = synth_external(spec, Role::ExternalSpeech, spec.clip_len_s,
                                        derive_seed(clip_seed, kExtSpeechStream));
        ChannelPair en = synth_external(spec, Role::ExternalNoise, spec.clip_len_s,
                                        derive_seed(clip_seed, kExtNoiseStream));
        AudioClip eta_bc = mix_scaled(es.bc, en.bc, 1.0f);
        AudioClip eta_ac = mix_scaled(es.ac, en.ac, 1.0f);
        // gamma applies to both channels equally, so it cancels in the difference
        adv[i] = snr_db(target.s_bc, eta_bc) - snr_db(target.s_ac, eta_ac);
    });
    double mean = 0.0;
    for (double v : adv) mean += v;
    return mean / std::max(1, n_clips);
}

} // namespace pvad
