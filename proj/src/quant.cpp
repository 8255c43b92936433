#include "pvad/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "pvad/errors.hpp"
#include "pvad/kernels.hpp"

namespace pvad {

namespace {

constexpr int kQModelFormatVersion = 1;

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

double percentile(std::vector<double>& samples, double pct) {
    if (samples.empty()) throw ConfigError("calibrate: empty boundary sample set");
    std::sort(samples.begin(), samples.end());
    const double pos = pct / 100.0 * static_cast<double>(samples.size() - 1);
    const std::size_t idx = static_cast<std::size_t>(std::llround(pos));
    return samples[std::min(idx, samples.size() - 1)];
}

QBoundary make_boundary(std::pair<double, double> range, int bits) {
    return make_activation_boundary(range.first, range.second, bits);
}

int32_t quantize_code(double x, const QBoundary& b, int qmin, int qmax) {
    const long long q = std::llround(x / b.scale) + b.zero_point;
    return static_cast<int32_t>(std::clamp<long long>(q, qmin, qmax));
}

QLinear make_qlinear(const std::vector<double>& w, const std::vector<double>& bias, int rows,
                     int cols, double s_in, double s_dest, int bits) {
    QLinear L;
    L.rows = rows;
    L.cols = cols;
    double wmax = 0.0;
    for (double v : w) wmax = std::max(wmax, std::fabs(v));
    const int wq = (1 << (bits - 1)) - 1;
    L.w_scale = wmax > 0.0 ? wmax / wq : 1e-8;

    L.w_any.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        L.w_any[i] = static_cast<int32_t>(
            std::clamp<long long>(std::llround(w[i] / L.w_scale), -wq, wq));
    if (bits == 8) {
        L.w8.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            L.w8[i] = static_cast<int8_t>(L.w_any[i]);
    }
    L.row_sum.resize(rows);
    for (int r = 0; r < rows; ++r) {
        int64_t s = 0;
        for (int c = 0; c < cols; ++c) s += L.w_any[static_cast<std::size_t>(r) * cols + c];
        L.row_sum[r] = s;
    }
    L.bias.assign(rows, 0);
    if (!bias.empty())
        for (int r = 0; r < rows; ++r)
            L.bias[r] = std::llround(bias[r] / (s_in * L.w_scale));
    L.to_dest = make_fixed_mul(s_in * L.w_scale / s_dest);
    return L;
}

std::vector<int32_t> make_sigmoid_lut(const QBoundary& pre, int bits) {
    const int n = 1 << bits;
    const int qmin = -(n >> 1);
    const int one = n - 1;
    std::vector<int32_t> lut(n);
    for (int i = 0; i < n; ++i) {
        const double a = pre.scale * static_cast<double>(qmin + i - pre.zero_point);
        lut[i] = static_cast<int32_t>(
            std::clamp<long long>(std::llround(sigmoid(a) * one), 0, one));
    }
    return lut;
}

std::vector<int32_t> make_tanh_lut(const QBoundary& pre, int bits) {
    const int n = 1 << bits;
    const int qmin = -(n >> 1);
    const int one = (n >> 1) - 1;
    std::vector<int32_t> lut(n);
    for (int i = 0; i < n; ++i) {
        const double a = pre.scale * static_cast<double>(qmin + i - pre.zero_point);
        lut[i] = static_cast<int32_t>(
            std::clamp<long long>(std::llround(std::tanh(a) * one), -one, one));
    }
    return lut;
}

// acc[r] = sum_c w[r,c] * in[c] - zp_in * row_sum[r] + bias[r]; exact integer.
// The int8 variant goes through the SIMD kernel; both give identical sums.
void qlinear_acc(const QLinear& L, const int32_t* in, int32_t zp_in, int bits,
                 std::vector<int64_t>& acc, std::vector<int8_t>& scratch) {
    acc.resize(L.rows);
    if (bits == 8) {
        scratch.resize(L.cols);
        for (int c = 0; c < L.cols; ++c) scratch[c] = static_cast<int8_t>(in[c]);
        std::vector<int32_t> acc32(L.rows);
        kernels::matvec_i8(L.w8.data(), L.rows, L.cols, scratch.data(), acc32.data());
        for (int r = 0; r < L.rows; ++r)
            acc[r] = static_cast<int64_t>(acc32[r]) - static_cast<int64_t>(zp_in) * L.row_sum[r] +
                     L.bias[r];
        return;
    }
    for (int r = 0; r < L.rows; ++r) {
        int64_t s = 0;
        const int32_t* row = L.w_any.data() + static_cast<std::size_t>(r) * L.cols;
        for (int c = 0; c < L.cols; ++c) s += static_cast<int64_t>(row[c]) * in[c];
        acc[r] = s - static_cast<int64_t>(zp_in) * L.row_sum[r] + L.bias[r];
    }
}

int32_t clamp_code(int64_t v, int qmin, int qmax) {
    return static_cast<int32_t>(std::clamp<int64_t>(v, qmin, qmax));
}

// im2col patch for a valid strided conv: [ic][k] layout matches the
// flattened weight rows.
void gather_patch(const ConvSpec& c, int in_len, const int32_t* in, int pos,
                  std::vector<int32_t>& patch) {
    patch.resize(static_cast<std::size_t>(c.in_ch) * c.kernel);
    const int base = pos * c.stride;
    for (int ic = 0; ic < c.in_ch; ++ic)
        for (int k = 0; k < c.kernel; ++k)
            patch[static_cast<std::size_t>(ic) * c.kernel + k] =
                in[static_cast<std::size_t>(ic) * in_len + base + k];
}

struct GateOut {
    std::vector<int32_t> codes; // sigmoid: 0..gate_one, tanh: -tanh_one..tanh_one
};

GateOut run_gate(const QNetParams& qp, const QGate& gate, const int32_t* x, int32_t zp_x,
                 const int32_t* h, int32_t zp_h, bool is_tanh, std::vector<int8_t>& scratch) {
    std::vector<int64_t> acc_w, acc_u;
    qlinear_acc(gate.w, x, zp_x, qp.bits, acc_w, scratch);
    qlinear_acc(gate.u, h, zp_h, qp.bits, acc_u, scratch);
    GateOut out;
    out.codes.resize(gate.w.rows);
    for (int i = 0; i < gate.w.rows; ++i) {
        const int64_t pre = static_cast<int64_t>(gate.pre.zero_point) +
                            fixed_mul_apply(acc_w[i], gate.w.to_dest) +
                            fixed_mul_apply(acc_u[i], gate.u.to_dest);
        const int32_t code = clamp_code(pre, qp.qmin(), qp.qmax());
        out.codes[i] = gate.lut[static_cast<std::size_t>(code - qp.qmin())];
    }
    (void)is_tanh;
    return out;
}

void q_gru_step(const QNetParams& qp, const QGru& g, const int32_t* x, int32_t zp_x,
                std::vector<int32_t>& h, std::vector<int8_t>& scratch) {
    const int n = static_cast<int>(h.size());
    const int32_t zp_h = g.state.zero_point;
    const int64_t one = qp.gate_one();

    GateOut z = run_gate(qp, g.z, x, zp_x, h.data(), zp_h, false, scratch);
    GateOut r = run_gate(qp, g.r, x, zp_x, h.data(), zp_h, false, scratch);

    std::vector<int32_t> rh(n);
    for (int i = 0; i < n; ++i) {
        const int64_t prod = static_cast<int64_t>(r.codes[i]) * (h[i] - zp_h);
        rh[i] = clamp_code(g.rh.zero_point + fixed_mul_apply(prod, g.rh_mul), qp.qmin(), qp.qmax());
    }

    std::vector<int64_t> acc_w, acc_u;
    qlinear_acc(g.h.w, x, zp_x, qp.bits, acc_w, scratch);
    qlinear_acc(g.h.u, rh.data(), g.rh.zero_point, qp.bits, acc_u, scratch);
    std::vector<int32_t> hcand(n);
    for (int i = 0; i < n; ++i) {
        const int64_t pre = static_cast<int64_t>(g.h.pre.zero_point) +
                            fixed_mul_apply(acc_w[i], g.h.w.to_dest) +
                            fixed_mul_apply(acc_u[i], g.h.u.to_dest);
        const int32_t code = clamp_code(pre, qp.qmin(), qp.qmax());
        hcand[i] = g.h.lut[static_cast<std::size_t>(code - qp.qmin())];
    }

    for (int i = 0; i < n; ++i) {
        const int64_t keep = (one - z.codes[i]) * static_cast<int64_t>(h[i] - zp_h);
        const int64_t cand = static_cast<int64_t>(z.codes[i]) * hcand[i];
        const int64_t code = static_cast<int64_t>(zp_h) + fixed_mul_apply(keep, g.state_keep) +
                             fixed_mul_apply(cand, g.state_cand);
        h[i] = clamp_code(code, qp.qmin(), qp.qmax());
    }
}

} // namespace

QBoundary make_activation_boundary(double lo, double hi, int bits) {
    const double levels = static_cast<double>((1 << bits) - 1);
    if (hi < lo) std::swap(lo, hi);
    double scale = (hi - lo) / levels;
    if (scale < 1e-8) {
        std::fprintf(stderr, "quantize: degenerate boundary range [%g, %g], flooring scale\n",
                     lo, hi);
        scale = 1e-8;
    }
    const int qmin = -(1 << (bits - 1));
    const int qmax = (1 << (bits - 1)) - 1;
    QBoundary b;
    b.scale = scale;
    b.zero_point = static_cast<int32_t>(
        std::clamp<long long>(std::llround(-lo / scale) + qmin, qmin, qmax));
    return b;
}

int32_t quantize_activation(double x, const QBoundary& b, int bits) {
    return quantize_code(x, b, -(1 << (bits - 1)), (1 << (bits - 1)) - 1);
}

double dequantize_activation(int32_t code, const QBoundary& b) {
    return b.scale * static_cast<double>(code - b.zero_point);
}

FixedMul make_fixed_mul(double real_multiplier) {
    if (!(real_multiplier > 0.0))
        throw NumericError("make_fixed_mul: multiplier must be positive");
    int exp = 0;
    const double frac = std::frexp(real_multiplier, &exp); // frac in [0.5, 1)
    long long mult = std::llround(frac * 2147483648.0);     // 2^31
    int shift = 31 - exp;
    if (mult == 2147483648ll) {
        mult >>= 1;
        shift -= 1;
    }
    shift = std::clamp(shift, 1, 62);
    FixedMul m;
    m.mult = static_cast<int32_t>(mult);
    m.shift = shift;
    return m;
}

int64_t fixed_mul_apply(int64_t acc, const FixedMul& m) {
    __int128 prod = static_cast<__int128>(acc) * m.mult;
    const __int128 half = static_cast<__int128>(1) << (m.shift - 1);
    if (prod >= 0) return static_cast<int64_t>((prod + half) >> m.shift);
    return -static_cast<int64_t>(((-prod) + half) >> m.shift);
}

CalibrationStats calibrate(const NetParams& params,
                           const std::vector<std::vector<FeatureVector>>& representative,
                           double lo_percentile, double hi_percentile) {
    std::size_t total_frames = 0;
    for (const auto& s : representative) total_frames += s.size();
    if (total_frames < 100)
        throw ConfigError("calibrate: need at least 100 representative frames");

    std::map<std::string, std::vector<double>> samples;
    auto push = [&](const std::string& name, const std::vector<double>& vals) {
        auto& dst = samples[name];
        dst.insert(dst.end(), vals.begin(), vals.end());
    };

    for (const auto& stream : representative) {
        GruState state;
        state.reset(params.cfg);
        for (const auto& fv : stream) {
            FrameTrace tr;
            forward_frame(params, state, fv.values, &tr);
            push("input", tr.x);
            push("conv1_out", tr.conv1_out);
            push("conv2_out", tr.flat);
            const GruTrace* gs[2] = {&tr.g1, &tr.g2};
            const std::vector<double>* hs[2] = {&state.h1, &state.h2};
            for (int g = 0; g < 2; ++g) {
                const std::string tag = g == 0 ? "gru1" : "gru2";
                push(tag + ".z_pre", gs[g]->z_pre);
                push(tag + ".r_pre", gs[g]->r_pre);
                push(tag + ".h_pre", gs[g]->h_pre);
                push(tag + ".rh", gs[g]->rh);
                push(tag + ".h", *hs[g]);
            }
            push("fc1_out", tr.fc1_out);
            samples["fc2_pre"].push_back(tr.fc2_pre);
            samples["output"].push_back(tr.p);
        }
    }

    CalibrationStats stats;
    stats.lo_percentile = lo_percentile;
    stats.hi_percentile = hi_percentile;
    for (auto& [name, vals] : samples) {
        const double lo = percentile(vals, lo_percentile);
        const double hi = percentile(vals, hi_percentile);
        stats.ranges[name] = {lo, hi};
    }
    return stats;
}

QNetParams quantize_net(const NetParams& params, const CalibrationStats& stats, int bits) {
    if (bits != 8 && bits != 16)
        throw ConfigError("quantize_net: bits must be 8 or 16");
    auto range = [&](const std::string& name) {
        auto it = stats.ranges.find(name);
        if (it == stats.ranges.end())
            throw ConfigError("quantize_net: calibration missing boundary " + name);
        return it->second;
    };

    QNetParams qp;
    qp.bits = bits;
    qp.cfg = params.cfg;
    qp.input = make_boundary(range("input"), bits);
    qp.conv1_out = make_boundary(range("conv1_out"), bits);
    qp.conv2_out = make_boundary(range("conv2_out"), bits);
    qp.fc1_out = make_boundary(range("fc1_out"), bits);
    qp.fc2_pre = make_boundary(range("fc2_pre"), bits);

    const NetConfig& cfg = params.cfg;
    qp.conv1 = make_qlinear(params.conv1_w, params.conv1_b, cfg.conv1.out_ch,
                            cfg.conv1.in_ch * cfg.conv1.kernel, qp.input.scale,
                            qp.conv1_out.scale, bits);
    qp.conv2 = make_qlinear(params.conv2_w, params.conv2_b, cfg.conv2.out_ch,
                            cfg.conv2.in_ch * cfg.conv2.kernel, qp.conv1_out.scale,
                            qp.conv2_out.scale, bits);

    auto build_gru = [&](const GruParams& g, const std::string& tag, double in_scale) {
        QGru q;
        q.state = make_boundary(range(tag + ".h"), bits);
        q.rh = make_boundary(range(tag + ".rh"), bits);
        const QBoundary z_pre = make_boundary(range(tag + ".z_pre"), bits);
        const QBoundary r_pre = make_boundary(range(tag + ".r_pre"), bits);
        const QBoundary h_pre = make_boundary(range(tag + ".h_pre"), bits);

        q.z.pre = z_pre;
        q.z.w = make_qlinear(g.wz, g.bz, g.units, g.input, in_scale, z_pre.scale, bits);
        q.z.u = make_qlinear(g.uz, {}, g.units, g.units, q.state.scale, z_pre.scale, bits);
        q.z.lut = make_sigmoid_lut(z_pre, bits);

        q.r.pre = r_pre;
        q.r.w = make_qlinear(g.wr, g.br, g.units, g.input, in_scale, r_pre.scale, bits);
        q.r.u = make_qlinear(g.ur, {}, g.units, g.units, q.state.scale, r_pre.scale, bits);
        q.r.lut = make_sigmoid_lut(r_pre, bits);

        q.h.pre = h_pre;
        q.h.w = make_qlinear(g.wh, g.bh, g.units, g.input, in_scale, h_pre.scale, bits);
        q.h.u = make_qlinear(g.uh, {}, g.units, g.units, q.rh.scale, h_pre.scale, bits);
        q.h.lut = make_tanh_lut(h_pre, bits);

        const double gate_one = static_cast<double>(qp.gate_one());
        const double tanh_one = static_cast<double>(qp.tanh_one());
        q.rh_mul = make_fixed_mul(q.state.scale / (gate_one * q.rh.scale));
        q.state_keep = make_fixed_mul(1.0 / gate_one);
        q.state_cand = make_fixed_mul(1.0 / (gate_one * tanh_one * q.state.scale));
        return q;
    };
    qp.gru1 = build_gru(params.gru1, "gru1", qp.conv2_out.scale);
    qp.gru2 = build_gru(params.gru2, "gru2", qp.gru1.state.scale);

    qp.fc1 = make_qlinear(params.fc1_w, params.fc1_b, cfg.fc1_out, cfg.gru2_units,
                          qp.gru2.state.scale, qp.fc1_out.scale, bits);
    qp.fc2 = make_qlinear(params.fc2_w, params.fc2_b, 1, cfg.fc1_out, qp.fc1_out.scale,
                          qp.fc2_pre.scale, bits);
    qp.out_lut = make_sigmoid_lut(qp.fc2_pre, bits);
    return qp;
}

void QGruState::reset(const QNetParams& qp) {
    h1.assign(qp.cfg.gru1_units, qp.gru1.state.zero_point);
    h2.assign(qp.cfg.gru2_units, qp.gru2.state.zero_point);
}

double q_forward_frame(const QNetParams& qp, QGruState& state, std::span<const double> x) {
    const NetConfig& cfg = qp.cfg;
    if (static_cast<int>(x.size()) != cfg.n_mels)
        throw ShapeError("q_forward_frame: expected " + std::to_string(cfg.n_mels) + " features");
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("q_forward_frame: non-finite input");

    const int qmin = qp.qmin(), qmax = qp.qmax();
    std::vector<int8_t> scratch;

    // input quantization: the only float->int boundary
    std::vector<int32_t> xq(cfg.n_mels);
    for (int i = 0; i < cfg.n_mels; ++i) xq[i] = quantize_code(x[i], qp.input, qmin, qmax);

    // conv1 via im2col patches
    const int len1 = cfg.conv1_out_len();
    std::vector<int32_t> c1(static_cast<std::size_t>(cfg.conv1.out_ch) * len1);
    std::vector<int32_t> patch;
    std::vector<int64_t> acc;
    for (int p = 0; p < len1; ++p) {
        gather_patch(cfg.conv1, cfg.n_mels, xq.data(), p, patch);
        qlinear_acc(qp.conv1, patch.data(), qp.input.zero_point, qp.bits, acc, scratch);
        for (int oc = 0; oc < cfg.conv1.out_ch; ++oc) {
            int32_t code = clamp_code(qp.conv1_out.zero_point +
                                          fixed_mul_apply(acc[oc], qp.conv1.to_dest),
                                      qmin, qmax);
            code = std::max(code, qp.conv1_out.zero_point); // ReLU at the zero code
            c1[static_cast<std::size_t>(oc) * len1 + p] = code;
        }
    }

    const int len2 = cfg.conv2_out_len();
    std::vector<int32_t> flat(static_cast<std::size_t>(cfg.conv2.out_ch) * len2);
    for (int p = 0; p < len2; ++p) {
        gather_patch(cfg.conv2, len1, c1.data(), p, patch);
        qlinear_acc(qp.conv2, patch.data(), qp.conv1_out.zero_point, qp.bits, acc, scratch);
        for (int oc = 0; oc < cfg.conv2.out_ch; ++oc) {
            int32_t code = clamp_code(qp.conv2_out.zero_point +
                                          fixed_mul_apply(acc[oc], qp.conv2.to_dest),
                                      qmin, qmax);
            code = std::max(code, qp.conv2_out.zero_point);
            flat[static_cast<std::size_t>(oc) * len2 + p] = code;
        }
    }

    q_gru_step(qp, qp.gru1, flat.data(), qp.conv2_out.zero_point, state.h1, scratch);
    q_gru_step(qp, qp.gru2, state.h1.data(), qp.gru1.state.zero_point, state.h2, scratch);

    qlinear_acc(qp.fc1, state.h2.data(), qp.gru2.state.zero_point, qp.bits, acc, scratch);
    std::vector<int32_t> f1(cfg.fc1_out);
    for (int i = 0; i < cfg.fc1_out; ++i) {
        int32_t code = clamp_code(qp.fc1_out.zero_point + fixed_mul_apply(acc[i], qp.fc1.to_dest),
                                  qmin, qmax);
        f1[i] = std::max(code, qp.fc1_out.zero_point);
    }

    qlinear_acc(qp.fc2, f1.data(), qp.fc1_out.zero_point, qp.bits, acc, scratch);
    const int32_t pre = clamp_code(qp.fc2_pre.zero_point + fixed_mul_apply(acc[0], qp.fc2.to_dest),
                                   qmin, qmax);
    const int32_t pcode = qp.out_lut[static_cast<std::size_t>(pre - qmin)];

    // output dequantization: the only int->float boundary
    return static_cast<double>(pcode) / static_cast<double>(qp.gate_one());
}

AccuracyDelta accuracy_delta(const NetParams& float_params, const QNetParams& qparams,
                             const std::vector<LabeledSequence>& sequences, double threshold) {
    AccuracyDelta out;
    std::size_t correct_f = 0, correct_q = 0, agree = 0, total = 0;
    for (const auto& seq : sequences) {
        GruState fs;
        fs.reset(float_params.cfg);
        QGruState qs;
        qs.reset(qparams);
        for (std::size_t i = 0; i < seq.features.size(); ++i) {
            const bool truth = seq.targets[i] > 0.5;
            const bool pf = forward_frame(float_params, fs, seq.features[i].values) > threshold;
            const bool pq = q_forward_frame(qparams, qs, seq.features[i].values) > threshold;
            correct_f += pf == truth;
            correct_q += pq == truth;
            agree += pf == pq;
            ++total;
        }
    }
    if (total == 0) throw ConfigError("accuracy_delta: no frames");
    out.n_frames = total;
    out.acc_float = static_cast<double>(correct_f) / total;
    out.acc_quant = static_cast<double>(correct_q) / total;
    out.delta = out.acc_float - out.acc_quant;
    out.decision_agreement = static_cast<double>(agree) / total;
    return out;
}

namespace {

nlohmann::json boundary_json(const QBoundary& b) {
    return {{"scale", b.scale}, {"zero_point", b.zero_point}};
}

QBoundary boundary_from_json(const nlohmann::json& j) {
    QBoundary b;
    b.scale = j.at("scale").get<double>();
    b.zero_point = j.at("zero_point").get<int32_t>();
    return b;
}

} // namespace

void save_qmodel(const QNetParams& qp, const std::string& path_prefix) {
    if (qp.bits != 8)
        throw ConfigError("save_qmodel: only int8 models are serialized");

    std::ofstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw FileError("cannot write " + path_prefix + ".bin");

    nlohmann::json j;
    j["format_version"] = kQModelFormatVersion;
    j["kind"] = "int8";
    j["bits"] = qp.bits;
    j["config"] = {
        {"n_mels", qp.cfg.n_mels},
        {"conv1", {qp.cfg.conv1.in_ch, qp.cfg.conv1.out_ch, qp.cfg.conv1.kernel, qp.cfg.conv1.stride}},
        {"conv2", {qp.cfg.conv2.in_ch, qp.cfg.conv2.out_ch, qp.cfg.conv2.kernel, qp.cfg.conv2.stride}},
        {"gru1_units", qp.cfg.gru1_units},
        {"gru2_units", qp.cfg.gru2_units},
        {"fc1_out", qp.cfg.fc1_out},
    };

    std::size_t offset = 0;
    nlohmann::json layers = nlohmann::json::array();
    auto dump_linear = [&](const char* name, const QLinear& L) {
        layers.push_back({{"name", name},
                          {"rows", L.rows},
                          {"cols", L.cols},
                          {"w_scale", L.w_scale},
                          {"w_offset", offset},
                          {"bias_offset", offset + L.w8.size()}});
        bin.write(reinterpret_cast<const char*>(L.w8.data()), L.w8.size());
        offset += L.w8.size();
        bin.write(reinterpret_cast<const char*>(L.bias.data()), L.bias.size() * sizeof(int64_t));
        offset += L.bias.size() * sizeof(int64_t);
    };
    auto dump_gru = [&](const char* tag, const QGru& g, nlohmann::json& node) {
        node["state"] = boundary_json(g.state);
        node["rh"] = boundary_json(g.rh);
        node["z_pre"] = boundary_json(g.z.pre);
        node["r_pre"] = boundary_json(g.r.pre);
        node["h_pre"] = boundary_json(g.h.pre);
        node["z_lut"] = g.z.lut;
        node["r_lut"] = g.r.lut;
        node["h_lut"] = g.h.lut;
        dump_linear((std::string(tag) + ".wz").c_str(), g.z.w);
        dump_linear((std::string(tag) + ".uz").c_str(), g.z.u);
        dump_linear((std::string(tag) + ".wr").c_str(), g.r.w);
        dump_linear((std::string(tag) + ".ur").c_str(), g.r.u);
        dump_linear((std::string(tag) + ".wh").c_str(), g.h.w);
        dump_linear((std::string(tag) + ".uh").c_str(), g.h.u);
    };

    j["boundaries"] = {
        {"input", boundary_json(qp.input)},
        {"conv1_out", boundary_json(qp.conv1_out)},
        {"conv2_out", boundary_json(qp.conv2_out)},
        {"fc1_out", boundary_json(qp.fc1_out)},
        {"fc2_pre", boundary_json(qp.fc2_pre)},
    };
    dump_linear("conv1", qp.conv1);
    dump_linear("conv2", qp.conv2);
    nlohmann::json g1, g2;
    dump_gru("gru1", qp.gru1, g1);
    dump_gru("gru2", qp.gru2, g2);
    j["gru1"] = std::move(g1);
    j["gru2"] = std::move(g2);
    dump_linear("fc1", qp.fc1);
    dump_linear("fc2", qp.fc2);
    j["out_lut"] = qp.out_lut;
    j["layers"] = std::move(layers);

    std::ofstream js(path_prefix + ".json");
    if (!js) throw FileError("cannot write " + path_prefix + ".json");
    js << j.dump(2) << "\n";
}

QNetParams load_qmodel(const std::string& path_prefix) {
    std::ifstream js(path_prefix + ".json");
    if (!js) throw FileError("cannot open " + path_prefix + ".json");
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("quantized model parse error: " + std::string(e.what()));
    }
    if (j.value("format_version", -1) != kQModelFormatVersion)
        throw FormatError("quantized model format version mismatch");
    if (j.value("kind", "") != "int8")
        throw FormatError("not an int8 model file");

    QNetParams qp;
    qp.bits = j.at("bits").get<int>();
    const auto& jc = j.at("config");
    qp.cfg.n_mels = jc.at("n_mels").get<int>();
    auto load_conv = [](const nlohmann::json& a) {
        return ConvSpec{a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>(), a.at(3).get<int>()};
    };
    qp.cfg.conv1 = load_conv(jc.at("conv1"));
    qp.cfg.conv2 = load_conv(jc.at("conv2"));
    qp.cfg.gru1_units = jc.at("gru1_units").get<int>();
    qp.cfg.gru2_units = jc.at("gru2_units").get<int>();
    qp.cfg.fc1_out = jc.at("fc1_out").get<int>();

    std::ifstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw FileError("cannot open " + path_prefix + ".bin");

    std::size_t layer_idx = 0;
    const auto& layers = j.at("layers");
    auto read_linear = [&](QLinear& L, double s_in, double s_dest) {
        const auto& meta = layers.at(layer_idx++);
        L.rows = meta.at("rows").get<int>();
        L.cols = meta.at("cols").get<int>();
        L.w_scale = meta.at("w_scale").get<double>();
        L.w8.resize(static_cast<std::size_t>(L.rows) * L.cols);
        bin.read(reinterpret_cast<char*>(L.w8.data()), L.w8.size());
        L.bias.resize(L.rows);
        bin.read(reinterpret_cast<char*>(L.bias.data()), L.bias.size() * sizeof(int64_t));
        L.w_any.resize(L.w8.size());
        L.row_sum.assign(L.rows, 0);
        for (int r = 0; r < L.rows; ++r)
            for (int c = 0; c < L.cols; ++c) {
                const int32_t v = L.w8[static_cast<std::size_t>(r) * L.cols + c];
                L.w_any[static_cast<std::size_t>(r) * L.cols + c] = v;
                L.row_sum[r] += v;
            }
        L.to_dest = make_fixed_mul(s_in * L.w_scale / s_dest);
    };

    const auto& jb = j.at("boundaries");
    qp.input = boundary_from_json(jb.at("input"));
    qp.conv1_out = boundary_from_json(jb.at("conv1_out"));
    qp.conv2_out = boundary_from_json(jb.at("conv2_out"));
    qp.fc1_out = boundary_from_json(jb.at("fc1_out"));
    qp.fc2_pre = boundary_from_json(jb.at("fc2_pre"));

    read_linear(qp.conv1, qp.input.scale, qp.conv1_out.scale);
    read_linear(qp.conv2, qp.conv1_out.scale, qp.conv2_out.scale);

    auto read_gru = [&](QGru& g, const nlohmann::json& node, double in_scale) {
        g.state = boundary_from_json(node.at("state"));
        g.rh = boundary_from_json(node.at("rh"));
        g.z.pre = boundary_from_json(node.at("z_pre"));
        g.r.pre = boundary_from_json(node.at("r_pre"));
        g.h.pre = boundary_from_json(node.at("h_pre"));
        g.z.lut = node.at("z_lut").get<std::vector<int32_t>>();
        g.r.lut = node.at("r_lut").get<std::vector<int32_t>>();
        g.h.lut = node.at("h_lut").get<std::vector<int32_t>>();
        read_linear(g.z.w, in_scale, g.z.pre.scale);
        read_linear(g.z.u, g.state.scale, g.z.pre.scale);
        read_linear(g.r.w, in_scale, g.r.pre.scale);
        read_linear(g.r.u, g.state.scale, g.r.pre.scale);
        read_linear(g.h.w, in_scale, g.h.pre.scale);
        read_linear(g.h.u, g.rh.scale, g.h.pre.scale);
        const double gate_one = static_cast<double>(qp.gate_one());
        const double tanh_one = static_cast<double>(qp.tanh_one());
        g.rh_mul = make_fixed_mul(g.state.scale / (gate_one * g.rh.scale));
        g.state_keep = make_fixed_mul(1.0 / gate_one);
        g.state_cand = make_fixed_mul(1.0 / (gate_one * tanh_one * g.state.scale));
    };
    read_gru(qp.gru1, j.at("gru1"), qp.conv2_out.scale);
    read_gru(qp.gru2, j.at("gru2"), qp.gru1.state.scale);

    read_linear(qp.fc1, qp.gru2.state.scale, qp.fc1_out.scale);
    read_linear(qp.fc2, qp.fc1_out.scale, qp.fc2_pre.scale);
    qp.out_lut = j.at("out_lut").get<std::vector<int32_t>>();
    if (!bin) throw FormatError("quantized model payload truncated");
    return qp;
}

} // namespace pvad
