#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pvad/net.hpp"

namespace pvad {

// Affine int8 quantizer parameters for one activation boundary:
// value = scale * (code - zero_point).
struct QBoundary {
    double scale = 1.0;
    int32_t zero_point = 0;
};

// Fixed-point requantization multiplier: x -> round(x * mult * 2^-shift),
// round-half-away-from-zero. Exactly reproducible integer arithmetic.
struct FixedMul {
    int32_t mult = 0;
    int shift = 0;
};

FixedMul make_fixed_mul(double real_multiplier);
int64_t fixed_mul_apply(int64_t acc, const FixedMul& m);

// Asymmetric activation quantizer over [lo, hi]: scale = (hi-lo)/(2^bits-1),
// zero_point = round(-lo/scale) + qmin. Degenerate ranges floor the scale at
// 1e-8 (with a warning on stderr).
QBoundary make_activation_boundary(double lo, double hi, int bits = 8);
int32_t quantize_activation(double x, const QBoundary& b, int bits = 8);
double dequantize_activation(int32_t code, const QBoundary& b);

// Activation ranges observed on representative data, keyed by boundary name
// ("input", "conv1_out", "conv2_out", "gru1.z_pre", ..., "fc2_pre",
// "output").
struct CalibrationStats {
    double lo_percentile = 0.1;
    double hi_percentile = 99.9;
    std::map<std::string, std::pair<double, double>> ranges;
};

CalibrationStats calibrate(const NetParams& params,
                           const std::vector<std::vector<FeatureVector>>& representative,
                           double lo_percentile = 0.1, double hi_percentile = 99.9);

// Integer linear stage: weights plus everything needed to fold the input
// zero point and requantize the accumulator.
struct QLinear {
    int rows = 0, cols = 0;
    double w_scale = 1.0;
    std::vector<int8_t> w8;     // bits == 8 storage (SIMD path)
    std::vector<int32_t> w_any; // generic storage, any bit width
    std::vector<int64_t> row_sum;
    std::vector<int64_t> bias;  // quantized at s_in * s_w
    FixedMul to_dest;           // acc scale -> destination boundary scale
};

struct QGate {
    QLinear w, u;       // input-side and state-side products
    QBoundary pre;      // gate pre-activation domain
    std::vector<int32_t> lut; // 2^bits entries over the pre domain
};

struct QGru {
    QGate z, r, h;      // h's LUT is tanh, z/r are sigmoid
    QBoundary rh;       // r (*) h_prev product domain
    QBoundary state;    // hidden state domain (fixed across time)
    FixedMul rh_mul;    // gate_code*(h-zp) -> rh codes
    FixedMul state_keep;  // (1-z)*h term of the state update
    FixedMul state_cand;  // z*hcand term of the state update
};

struct QNetParams {
    int format_version = 1;
    int bits = 8;
    NetConfig cfg;
    QBoundary input, conv1_out, conv2_out, fc1_out, fc2_pre;
    QLinear conv1, conv2; // conv weights flattened [oc][ic][k]
    QGru gru1, gru2;
    QLinear fc1, fc2;
    std::vector<int32_t> out_lut; // sigmoid over fc2_pre -> probability codes

    int qmin() const { return -(1 << (bits - 1)); }
    int qmax() const { return (1 << (bits - 1)) - 1; }
    int gate_one() const { return (1 << bits) - 1; }      // code for gate value 1.0
    int tanh_one() const { return (1 << (bits - 1)) - 1; } // code for tanh value 1.0
};

// Post-training quantization: symmetric per-tensor weights, asymmetric
// activations from the calibrated ranges, int biases, lookup tables for the
// gate nonlinearities. bits = 8 (deployment) or 16 (diagnostic shadow mode).
QNetParams quantize_net(const NetParams& params, const CalibrationStats& stats, int bits = 8);

struct QGruState {
    std::vector<int32_t> h1, h2; // codes at the calibrated state scale
    void reset(const QNetParams& qp);
};

// Pure-integer inference step. Floating point touches the data exactly
// twice: quantizing the input features and scaling the output code to a
// probability.
double q_forward_frame(const QNetParams& qp, QGruState& state, std::span<const double> x);

struct AccuracyDelta {
    double acc_float = 0.0;
    double acc_quant = 0.0;
    double delta = 0.0; // percentage points, float minus quantized
    double decision_agreement = 0.0;
    std::size_t n_frames = 0;
};

// Binary accuracy of both paths over identical frames; targets binarized at
// 0.5, predictions thresholded at `threshold`.
AccuracyDelta accuracy_delta(const NetParams& float_params, const QNetParams& qparams,
                             const std::vector<LabeledSequence>& sequences,
                             double threshold = 0.5);

// Quantized model file pair <prefix>.json / <prefix>.bin (int8 models only;
// shadow mode is an in-memory diagnostic).
void save_qmodel(const QNetParams& qp, const std::string& path_prefix);
QNetParams load_qmodel(const std::string& path_prefix);

} // namespace pvad
