#include "pvad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "pvad/errors.hpp"

namespace pvad {

double roc_auc(std::span<const double> scores, std::span<const uint8_t> labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw ShapeError("roc_auc: scores/labels mismatch");
    std::size_t pos = 0, neg = 0;
    for (uint8_t l : labels) (l ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw NumericError("roc_auc: need both classes to trace a ROC");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        // advance over a tie group so equal scores move diagonally
        std::size_t j = i;
        double tp_add = 0.0, fp_add = 0.0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? tp_add : fp_add) += 1.0;
            ++j;
        }
        const double tp_next = tp + tp_add;
        const double fp_next = fp + fp_add;
        area += (fp_next - fp) / neg * (tp + tp_next) / (2.0 * pos);
        tp = tp_next;
        fp = fp_next;
        i = j;
    }
    return area;
}

MetricsReport compute_metrics(std::span<const double> probabilities,
                              std::span<const uint8_t> labels, double threshold) {
    if (probabilities.size() != labels.size() || probabilities.empty())
        throw ShapeError("compute_metrics: length mismatch");

    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const bool pred = probabilities[i] > threshold;
        const bool truth = labels[i] != 0;
        if (truth && pred) ++tp;
        else if (truth) ++fn;
        else if (pred) ++fp;
        else ++tn;
    }
    const std::size_t pos = tp + fn, neg = tn + fp;

    MetricsReport r;
    r.n_frames = probabilities.size();
    r.acc = static_cast<double>(tp + tn) / static_cast<double>(r.n_frames);
    r.miss_rate = pos ? static_cast<double>(fn) / pos : 0.0;
    r.fa_rate = neg ? static_cast<double>(fp) / neg : 0.0;
    r.dcf = 0.75 * r.miss_rate + 0.25 * r.fa_rate;
    if (pos > 0 && neg > 0) {
        r.auc = roc_auc(probabilities, labels);
        r.auc_valid = true;
    } else {
        r.auc = std::numeric_limits<double>::quiet_NaN();
        r.auc_valid = false;
    }
    return r;
}

namespace {

struct Stems {
    AudioClip s_bc, s_ac, eta_bc, eta_ac;
    std::vector<uint8_t> truth;
};

std::vector<Stems> load_test_stems(const DatasetManifest& manifest) {
    const auto clips = manifest.split("test");
    if (clips.empty()) throw ConfigError("harness: manifest has no test split");
    std::vector<Stems> stems;
    stems.reserve(clips.size());
    for (const ClipInfo* info : clips) {
        LabeledClip clip = load_clip(manifest, *info);
        Stems s;
        s.s_bc = std::move(clip.s_bc);
        s.s_ac = std::move(clip.s_ac);
        s.eta_bc = std::move(clip.eta_bc);
        s.eta_ac = std::move(clip.eta_ac);
        s.truth.reserve(clip.labels.size());
        for (double l : clip.labels) s.truth.push_back(l > 0.5 ? 1 : 0);
        stems.push_back(std::move(s));
    }
    return stems;
}

// Stateful pass over one clip's mixture; predictions appended per frame.
void predict_clip(const NetParams& model, const AudioClip& mixture,
                  std::size_t n_frames, std::vector<double>& probs) {
    const FrameConfig cfg;
    static const MelFilterbank fb = build_mel_filterbank(cfg);
    AudioClip leveled = rescale_to_level(mixture, -28.0, LevelMode::RmsDbfs);
    const auto features = extract_clip_features(leveled, fb, cfg);
    GruState state;
    state.reset(model.cfg);
    for (std::size_t i = 0; i < std::min(features.size(), n_frames); ++i)
        probs.push_back(forward_frame(model, state, features[i].values));
}

} // namespace

HarnessResult run_harness(const NetParams& bc_model, const NetParams& ac_model,
                          const DatasetManifest& manifest, HarnessMode mode,
                          const std::vector<double>& snr_grid) {
    if (snr_grid.empty()) throw ConfigError("harness: empty SNR grid");
    const std::vector<Stems> stems = load_test_stems(manifest);

    HarnessResult result;
    double adv_sum = 0.0;
    std::size_t adv_count = 0;

    for (double snr : snr_grid) {
        std::vector<double> probs_bc, probs_ac;
        std::vector<uint8_t> truth;
        for (const Stems& s : stems) {
            double beta_ac = snr_gain(s.s_ac, s.eta_ac, snr);
            double beta_bc = mode == HarnessMode::EqualEnvironment
                                 ? beta_ac
                                 : snr_gain(s.s_bc, s.eta_bc, snr);
            if (mode == HarnessMode::EqualEnvironment) {
                adv_sum += snr_db(s.s_bc, s.eta_bc, beta_bc) - snr;
                ++adv_count;
            }
            AudioClip y_ac = mix_scaled(s.s_ac, s.eta_ac, static_cast<float>(beta_ac));
            AudioClip y_bc = mix_scaled(s.s_bc, s.eta_bc, static_cast<float>(beta_bc));
            predict_clip(ac_model, y_ac, s.truth.size(), probs_ac);
            predict_clip(bc_model, y_bc, s.truth.size(), probs_bc);
            truth.insert(truth.end(), s.truth.begin(), s.truth.end());
        }
        truth.resize(std::min(truth.size(), probs_bc.size()));

        HarnessRow bc_row{snr, "bc", compute_metrics(probs_bc, truth)};
        HarnessRow ac_row{snr, "ac", compute_metrics(probs_ac, truth)};
        result.rows.push_back(std::move(bc_row));
        result.rows.push_back(std::move(ac_row));
    }
    result.mean_snr_advantage_db = adv_count ? adv_sum / adv_count : 0.0;
    return result;
}

MetricsReport clean_metrics(const NetParams& model, const DatasetManifest& manifest,
                            Channel channel) {
    const std::vector<Stems> stems = load_test_stems(manifest);
    std::vector<double> probs;
    std::vector<uint8_t> truth;
    for (const Stems& s : stems) {
        predict_clip(model, channel == Channel::BC ? s.s_bc : s.s_ac, s.truth.size(), probs);
        truth.insert(truth.end(), s.truth.begin(), s.truth.end());
    }
    truth.resize(std::min(truth.size(), probs.size()));
    return compute_metrics(probs, truth);
}

void write_harness_csv(const HarnessResult& result, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FileError("cannot write " + path);
    f << "snr_db,model,auc,dcf,acc,miss,fa\n";
    for (const HarnessRow& row : result.rows) {
        f << row.snr_db << "," << row.model << "," << row.metrics.auc << "," << row.metrics.dcf
          << "," << row.metrics.acc << "," << row.metrics.miss_rate << "," << row.metrics.fa_rate
          << "\n";
    }
}

} // namespace pvad
