#include "pvad/dsp.hpp"

#include <cmath>
#include <unordered_map>

#include "pvad/errors.hpp"
#include "pvad/kernels.hpp"

namespace pvad {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

struct FftPlan {
    std::vector<std::size_t> bitrev;
    std::vector<std::complex<double>> twiddle; // exp(-2*pi*i*k/n), k < n/2
};

const FftPlan& fft_plan(std::size_t n) {
    thread_local std::unordered_map<std::size_t, FftPlan> plans;
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;

    FftPlan plan;
    plan.bitrev.resize(n);
    std::size_t log2n = 0;
    while ((1u << log2n) < n) ++log2n;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < log2n; ++b)
            if (i & (1u << b)) r |= 1u << (log2n - 1 - b);
        plan.bitrev[i] = r;
    }
    plan.twiddle.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        double a = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        plan.twiddle[k] = {std::cos(a), std::sin(a)};
    }
    return plans.emplace(n, std::move(plan)).first->second;
}

} // namespace

void fft(std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw ShapeError("fft: size must be a power of two");
    if (n == 1) return;

    const FftPlan& plan = fft_plan(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = plan.bitrev[i];
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> w = plan.twiddle[k * stride];
                if (inverse) w = std::conj(w);
                std::complex<double>& a = x[start + k];
                std::complex<double>& b = x[start + k + len / 2];
                const std::complex<double> t = b * w;
                b = a - t;
                a += t;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& v : x) v *= inv;
    }
}

std::vector<std::vector<double>> frame_stream(const AudioClip& clip, const FrameConfig& cfg) {
    std::vector<std::vector<double>> frames;
    const int count = cfg.frame_count(clip.samples.size());
    frames.reserve(count);
    for (int k = 0; k < count; ++k) {
        std::vector<double> f(cfg.frame_len);
        const std::size_t base = static_cast<std::size_t>(k) * cfg.hop;
        for (int i = 0; i < cfg.frame_len; ++i)
            f[i] = static_cast<double>(clip.samples[base + i]);
        frames.push_back(std::move(f));
    }
    return frames;
}

const std::vector<double>& hamming_coefficients(int n) {
    thread_local std::unordered_map<int, std::vector<double>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));
    return cache.emplace(n, std::move(w)).first->second;
}

std::vector<double> hamming_window(const std::vector<double>& frame, const FrameConfig& cfg) {
    if (static_cast<int>(frame.size()) != cfg.frame_len)
        throw ShapeError("hamming_window: frame length mismatch");
    const std::vector<double>& w = hamming_coefficients(cfg.frame_len);
    std::vector<double> out(frame.size());
    kernels::mul_f64(frame.data(), w.data(), out.data(), frame.size());
    return out;
}

std::vector<double> rfft_mag(const std::vector<double>& windowed, const FrameConfig& cfg) {
    if (static_cast<int>(windowed.size()) > cfg.fft_len)
        throw ShapeError("rfft_mag: frame longer than fft_len");
    std::vector<std::complex<double>> buf(cfg.fft_len, {0.0, 0.0});
    for (std::size_t i = 0; i < windowed.size(); ++i) buf[i] = {windowed[i], 0.0};
    fft(buf, false);
    std::vector<double> mag(cfg.n_bins());
    for (int b = 0; b < cfg.n_bins(); ++b) mag[b] = std::abs(buf[b]);
    return mag;
}

MelFilterbank build_mel_filterbank(const FrameConfig& cfg) {
    MelFilterbank fb;
    fb.n_mels = cfg.n_mels;
    fb.n_bins = cfg.n_bins();
    const double nyquist = cfg.sample_rate_hz / 2.0;
    const double mel_max = hz_to_mel(nyquist);
    fb.band_edges_hz.resize(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        fb.band_edges_hz[i] = mel_to_hz(mel_max * i / (cfg.n_mels + 1));

    fb.weights.assign(static_cast<std::size_t>(fb.n_mels) * fb.n_bins, 0.0);
    const double bin_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.fft_len;
    for (int m = 0; m < fb.n_mels; ++m) {
        const double lo = fb.band_edges_hz[m];
        const double mid = fb.band_edges_hz[m + 1];
        const double hi = fb.band_edges_hz[m + 2];
        for (int b = 0; b < fb.n_bins; ++b) {
            const double f = b * bin_hz;
            double w = 0.0;
            if (f > lo && f <= mid)
                w = (f - lo) / (mid - lo);
            else if (f > mid && f < hi)
                w = (hi - f) / (hi - mid);
            fb.weights[static_cast<std::size_t>(m) * fb.n_bins + b] = w;
        }
    }
    return fb;
}

namespace {

// Two-sided spectral power from a one-sided magnitude spectrum.
double spectral_power(const std::vector<double>& mag, const FrameConfig& cfg) {
    double p = mag.front() * mag.front() + mag.back() * mag.back();
    for (std::size_t b = 1; b + 1 < mag.size(); ++b) p += 2.0 * mag[b] * mag[b];
    (void)cfg;
    return p;
}

} // namespace

FeatureVector extract_features(const std::vector<double>& frame, const MelFilterbank& fb,
                               const FrameConfig& cfg, int frame_index) {
    const std::vector<double> mag = rfft_mag(hamming_window(frame, cfg), cfg);

    FeatureVector fv;
    fv.frame_index = frame_index;
    fv.values.resize(fb.n_mels);
    kernels::matvec_f64(fb.weights.data(), fb.n_mels, fb.n_bins, mag.data(), nullptr,
                        fv.values.data());
    if (cfg.log_compress)
        for (double& v : fv.values) v = std::log(v + cfg.eps);
    fv.energy_db = 10.0 * std::log10(spectral_power(mag, cfg) / cfg.fft_len + cfg.eps);
    return fv;
}

std::vector<FeatureVector> extract_clip_features(const AudioClip& clip, const MelFilterbank& fb,
                                                 const FrameConfig& cfg) {
    std::vector<FeatureVector> out;
    const auto frames = frame_stream(clip, cfg);
    out.reserve(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k)
        out.push_back(extract_features(frames[k], fb, cfg, static_cast<int>(k)));
    return out;
}

std::vector<double> frame_spectral_norms(const AudioClip& clip, const FrameConfig& cfg) {
    const auto frames = frame_stream(clip, cfg);
    std::vector<double> norms(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto mag = rfft_mag(hamming_window(frames[k], cfg), cfg);
        norms[k] = std::sqrt(spectral_power(mag, cfg));
    }
    return norms;
}

} // namespace pvad
