#pragma once

#include <complex>
#include <vector>

#include "pvad/audio.hpp"

namespace pvad {

struct FrameConfig {
    int frame_len = 320;  // 20 ms at 16 kHz
    int hop = 160;        // 50% overlap
    int fft_len = 512;    // zero-padded transform size
    int n_mels = 32;
    int sample_rate_hz = 16000;
    bool log_compress = true; // ablation switch; canonical pipeline keeps log
    double eps = 1e-6;

    int n_bins() const { return fft_len / 2 + 1; }
    int frame_count(std::size_t n_samples) const {
        if (static_cast<long long>(n_samples) < frame_len) return 0;
        return static_cast<int>((n_samples - frame_len) / hop) + 1;
    }
};

struct MelFilterbank {
    int n_mels = 0;
    int n_bins = 0;
    std::vector<double> weights;       // n_mels x n_bins, row-major
    std::vector<double> band_edges_hz; // n_mels + 2 ascending edges

    double center_hz(int filter) const { return band_edges_hz[filter + 1]; }
};

struct FeatureVector {
    std::vector<double> values; // n_mels log-compressed Mel magnitudes
    int frame_index = 0;
    double energy_db = 0.0;     // spectral-domain frame energy
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// In-place iterative radix-2 FFT; size must be a power of two. Inverse
// includes the 1/N factor.
void fft(std::vector<std::complex<double>>& x, bool inverse);

// Splits a clip into overlapping frames; a trailing partial frame is
// discarded. Frame k covers samples [k*hop, k*hop + frame_len).
std::vector<std::vector<double>> frame_stream(const AudioClip& clip, const FrameConfig& cfg);

// Symmetric Hamming coefficients w[n] = 0.54 - 0.46 cos(2*pi*n/(N-1)).
const std::vector<double>& hamming_coefficients(int n);
std::vector<double> hamming_window(const std::vector<double>& frame, const FrameConfig& cfg);

// One-sided magnitude spectrum of the zero-padded frame (fft_len/2 + 1 bins).
std::vector<double> rfft_mag(const std::vector<double>& windowed, const FrameConfig& cfg);

// n_mels triangular filters with edges equally spaced on the Mel scale
// between 0 Hz and Nyquist, sampled at FFT bin frequencies.
MelFilterbank build_mel_filterbank(const FrameConfig& cfg);

// Full front end for one frame: window -> rFFT magnitude -> Mel -> log.
// energy_db is computed from the magnitude spectrum (Parseval form), since
// frame qualification happens after the transform.
FeatureVector extract_features(const std::vector<double>& frame, const MelFilterbank& fb,
                               const FrameConfig& cfg, int frame_index = 0);

// Whole-clip convenience wrapper around frame_stream + extract_features.
std::vector<FeatureVector> extract_clip_features(const AudioClip& clip, const MelFilterbank& fb,
                                                 const FrameConfig& cfg);

// L2 norm of each frame's one-sided spectrum with two-sided weighting; the
// label generator thresholds these.
std::vector<double> frame_spectral_norms(const AudioClip& clip, const FrameConfig& cfg);

} // namespace pvad
