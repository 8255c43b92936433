#include "pvad/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "pvad/errors.hpp"
#include "pvad/kernels.hpp"

namespace pvad {

namespace {

constexpr int kTargetRate = 16000;

#pragma pack(push, 1)
struct RiffHeader {
    char riff[4];
    uint32_t file_size;
    char wave[4];
};
struct ChunkHeader {
    char id[4];
    uint32_t size;
};
struct FmtChunk {
    uint16_t audio_format;
    uint16_t num_channels;
    uint32_t sample_rate;
    uint32_t byte_rate;
    uint16_t block_align;
    uint16_t bits_per_sample;
};
#pragma pack(pop)

double i0(double x) {
    // Modified Bessel function of the first kind, order zero (series form);
    // converges quickly for the Kaiser beta used here.
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 64; ++k) {
        double t = x / (2.0 * k);
        term *= t * t;
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

// Prototype lowpass for L-fold interpolation: odd length (integer group
// delay), Kaiser-windowed sinc with cutoff at min(pi/L, pi/M) in the
// upsampled domain. Each polyphase branch is normalized to unit sum so the
// passband gain is exactly one at DC for every phase.
std::vector<double> design_polyphase(int up, int down, int taps_per_phase, double beta) {
    const int len = taps_per_phase * up + 1;
    const int center = (len - 1) / 2;
    const double cutoff = std::min(1.0 / up, 1.0 / down); // fraction of Nyquist
    std::vector<double> h(len);
    const double denom = i0(beta);
    for (int n = 0; n < len; ++n) {
        double t = (n - center) * cutoff;
        double sinc = (t == 0.0) ? 1.0 : std::sin(M_PI * t) / (M_PI * t);
        double r = (n - center) / static_cast<double>(center);
        double window = i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
        h[n] = sinc * window;
    }
    for (int p = 0; p < up; ++p) {
        double s = 0.0;
        for (int n = p; n < len; n += up) s += h[n];
        for (int n = p; n < len; n += up) h[n] /= s;
    }
    return h;
}

} // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot open WAV file: " + path);

    RiffHeader rh;
    f.read(reinterpret_cast<char*>(&rh), sizeof(rh));
    if (!f || std::memcmp(rh.riff, "RIFF", 4) != 0 || std::memcmp(rh.wave, "WAVE", 4) != 0)
        throw FormatError("not a RIFF/WAVE file: " + path);

    FmtChunk fmt{};
    bool have_fmt = false;
    std::vector<char> data;
    while (f) {
        ChunkHeader ch;
        f.read(reinterpret_cast<char*>(&ch), sizeof(ch));
        if (!f) break;
        if (std::memcmp(ch.id, "fmt ", 4) == 0) {
            if (ch.size < sizeof(FmtChunk))
                throw FormatError("malformed fmt chunk: " + path);
            f.read(reinterpret_cast<char*>(&fmt), sizeof(fmt));
            f.seekg(ch.size - sizeof(FmtChunk), std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(ch.id, "data", 4) == 0) {
            data.resize(ch.size);
            f.read(data.data(), ch.size);
            if (!f) throw FormatError("truncated data chunk: " + path);
        } else {
            f.seekg(ch.size + (ch.size & 1), std::ios::cur);
        }
    }
    if (!have_fmt) throw FormatError("missing fmt chunk: " + path);
    if (data.empty()) throw FormatError("missing data chunk: " + path);
    if (fmt.num_channels == 0 || fmt.sample_rate == 0)
        throw FormatError("malformed WAV header: " + path);

    const bool pcm16 = fmt.audio_format == 1 && fmt.bits_per_sample == 16;
    const bool f32 = fmt.audio_format == 3 && fmt.bits_per_sample == 32;
    if (!pcm16 && !f32)
        throw FormatError("unsupported WAV encoding (want PCM16 or float32): " + path);

    const size_t bytes_per_sample = fmt.bits_per_sample / 8;
    const size_t frame_bytes = bytes_per_sample * fmt.num_channels;
    const size_t n = data.size() / frame_bytes;

    AudioClip clip;
    clip.sample_rate_hz = static_cast<int>(fmt.sample_rate);
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const char* p = data.data() + i * frame_bytes; // first channel
        if (pcm16) {
            int16_t v;
            std::memcpy(&v, p, 2);
            clip.samples[i] = static_cast<float>(v) / 32768.0f;
        } else {
            float v;
            std::memcpy(&v, p, 4);
            clip.samples[i] = v;
        }
    }
    return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FileError("cannot open for writing: " + path);

    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_size = n * 2;
    RiffHeader rh{{'R', 'I', 'F', 'F'}, 36 + data_size, {'W', 'A', 'V', 'E'}};
    ChunkHeader fmt_ch{{'f', 'm', 't', ' '}, 16};
    FmtChunk fmt{1, 1, static_cast<uint32_t>(clip.sample_rate_hz),
                 static_cast<uint32_t>(clip.sample_rate_hz) * 2, 2, 16};
    ChunkHeader data_ch{{'d', 'a', 't', 'a'}, data_size};

    f.write(reinterpret_cast<const char*>(&rh), sizeof(rh));
    f.write(reinterpret_cast<const char*>(&fmt_ch), sizeof(fmt_ch));
    f.write(reinterpret_cast<const char*>(&fmt), sizeof(fmt));
    f.write(reinterpret_cast<const char*>(&data_ch), sizeof(data_ch));

    std::vector<int16_t> pcm(n);
    for (uint32_t i = 0; i < n; ++i) {
        float v = std::clamp(clip.samples[i], -1.0f, 1.0f);
        pcm[i] = static_cast<int16_t>(std::lrintf(std::min(v * 32768.0f, 32767.0f)));
    }
    f.write(reinterpret_cast<const char*>(pcm.data()), data_size);
    if (!f) throw FileError("write failed: " + path);
}

AudioClip resample_to_16k(const AudioClip& clip) {
    static constexpr std::array<int, 5> kSupported = {8000, 16000, 22050, 44100, 48000};
    if (std::find(kSupported.begin(), kSupported.end(), clip.sample_rate_hz) == kSupported.end())
        throw FormatError("unsupported sample rate: " + std::to_string(clip.sample_rate_hz));
    if (clip.sample_rate_hz == kTargetRate) return clip;

    const int g = std::gcd(kTargetRate, clip.sample_rate_hz);
    const int up = kTargetRate / g;
    const int down = clip.sample_rate_hz / g;
    constexpr int kTapsPerPhase = 32;
    const std::vector<double> h = design_polyphase(up, down, kTapsPerPhase, 8.0);
    const int64_t len = static_cast<int64_t>(h.size());
    const int64_t delay = (len - 1) / 2;

    const int64_t n_in = static_cast<int64_t>(clip.samples.size());
    const int64_t n_out = (n_in * up + down - 1) / down;

    AudioClip out;
    out.sample_rate_hz = kTargetRate;
    out.channel = clip.channel;
    out.role = clip.role;
    out.samples.resize(n_out);
    for (int64_t j = 0; j < n_out; ++j) {
        const int64_t u = j * down + delay; // upsampled-domain index, delay-compensated
        const int64_t q = u / up;
        const int64_t phase = u % up;
        double acc = 0.0;
        for (int64_t tap = phase, k = 0; tap < len; tap += up, ++k) {
            const int64_t src = q - k;
            if (src < 0 || src >= n_in) continue;
            acc += h[static_cast<size_t>(tap)] * clip.samples[src];
        }
        out.samples[j] = static_cast<float>(acc);
    }
    return out;
}

double clip_energy(const AudioClip& clip) {
    return kernels::sum_sq_f32(clip.samples.data(), clip.samples.size());
}

double measure_level(const AudioClip& clip, LevelMode mode) {
    if (clip.samples.empty()) throw NumericError("level of empty clip is undefined");
    if (mode == LevelMode::PeakDbfs) {
        float peak = 0.0f;
        for (float v : clip.samples) peak = std::max(peak, std::fabs(v));
        if (peak == 0.0f) throw NumericError("level of all-zero clip is undefined");
        return 20.0 * std::log10(static_cast<double>(peak));
    }
    double ms = clip_energy(clip) / static_cast<double>(clip.samples.size());
    if (ms == 0.0) throw NumericError("level of all-zero clip is undefined");
    return 10.0 * std::log10(ms);
}

AudioClip rescale_to_level(const AudioClip& clip, double target_dbfs, LevelMode mode) {
    const double current = measure_level(clip, mode);
    const double gain = std::pow(10.0, (target_dbfs - current) / 20.0);
    AudioClip out = clip;
    for (float& v : out.samples) v = static_cast<float>(v * gain);
    return out;
}

double snr_gain(const AudioClip& signal, const AudioClip& noise, double target_snr_db) {
    if (signal.samples.size() != noise.samples.size())
        throw ShapeError("snr_gain: length mismatch");
    const double es = clip_energy(signal);
    const double en = clip_energy(noise);
    if (es == 0.0 || en == 0.0)
        throw NumericError("snr_gain: zero-energy input");
    return std::sqrt(es / (en * std::pow(10.0, target_snr_db / 10.0)));
}

double snr_db(const AudioClip& signal, const AudioClip& noise, double noise_gain) {
    const double es = clip_energy(signal);
    const double en = clip_energy(noise) * noise_gain * noise_gain;
    if (es == 0.0 || en == 0.0)
        throw NumericError("snr_db: zero-energy input");
    return 10.0 * std::log10(es / en);
}

AudioClip mix_scaled(const AudioClip& a, const AudioClip& b, float gain) {
    if (a.samples.size() != b.samples.size())
        throw ShapeError("mix_scaled: length mismatch");
    AudioClip out = a;
    out.role = Role::Mixture;
    kernels::axpy_f32(gain, b.samples.data(), out.samples.data(), out.samples.size());
    return out;
}

} // namespace pvad
