#pragma once

#include <string>
#include <vector>

namespace pvad {

enum class Channel { BC, AC, ACRef };
enum class Role { TargetSpeech, ExternalSpeech, ExternalNoise, Mixture };

// Mono sample sequence. Immutable by convention once constructed; all
// operations below return new clips.
struct AudioClip {
    std::vector<float> samples;
    int sample_rate_hz = 16000;
    Channel channel = Channel::AC;
    Role role = Role::Mixture;

    std::size_t size() const { return samples.size(); }
    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }
};

enum class LevelMode { PeakDbfs, RmsDbfs };

// WAV I/O: reads 16-bit PCM and 32-bit float RIFF/WAVE (first channel of
// multi-channel files); writes 16-bit PCM mono, clamping to [-1, 1].
AudioClip read_wav(const std::string& path);
void write_wav(const AudioClip& clip, const std::string& path);

// Polyphase windowed-sinc resampling to 16 kHz (32 taps per phase, Kaiser
// beta = 8). Accepts 8000/16000/22050/44100/48000 Hz input.
AudioClip resample_to_16k(const AudioClip& clip);

// Signal level in dB relative to full scale (amplitude 1.0).
double measure_level(const AudioClip& clip, LevelMode mode);

// Applies a pure gain so that measure_level(out, mode) == target_dbfs.
AudioClip rescale_to_level(const AudioClip& clip, double target_dbfs, LevelMode mode);

// Gain gamma such that the mixture signal + gamma*noise attains the target
// SNR: gamma = sqrt(||s||^2 / (||n||^2 * 10^(snr/10))).
double snr_gain(const AudioClip& signal, const AudioClip& noise, double target_snr_db);

// Energy (sum of squares) and SNR helpers shared by corpus and eval code.
// noise_gain is applied analytically (double precision), not per sample.
double clip_energy(const AudioClip& clip);
double snr_db(const AudioClip& signal, const AudioClip& noise, double noise_gain = 1.0);

// out = a + gain * b (sample-wise; equal lengths).
AudioClip mix_scaled(const AudioClip& a, const AudioClip& b, float gain);

} // namespace pvad
