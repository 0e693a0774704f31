#include "tsmx/ood_eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace tsmx {

namespace {

std::vector<double> column_max(const Tensor& probs) {
    std::vector<double> out(probs.cols());
    for (std::size_t j = 0; j < probs.cols(); ++j) {
        double m = probs.at(0, j);
        for (std::size_t i = 1; i < probs.rows(); ++i) m = std::max(m, probs.at(i, j));
        out[j] = m;
    }
    return out;
}

void require_both_classes(const std::vector<ScoredSample>& s, const char* op) {
    bool any_ind = false, any_ood = false;
    for (const ScoredSample& x : s) {
        if (!std::isfinite(x.score)) throw DomainError(std::string(op) + ": non-finite score");
        (x.is_ind ? any_ind : any_ood) = true;
    }
    if (!any_ind || !any_ood)
        throw DomainError(std::string(op) + ": need at least one IND and one OOD sample");
}

}  // namespace

std::vector<double> confidence_max_prob(const Model& model, const Tensor& X) {
    return column_max(model.probabilities(X));
}

std::vector<double> odin_score(const Model& model, const Tensor& X,
                               const OdinConfig& cfg) {
    if (model.head != HeadKind::softmax)
        throw ConfigError("odin_score: defined for softmax heads only");
    if (cfg.epsilon < 0.0 || cfg.gamma <= 0.0)
        throw ConfigError("odin_score: epsilon must be >= 0 and gamma > 0");

    // forward-backward: gradient of the summed per-sample max log
    // temperature-scaled softmax probability wrt the input
    Tensor x_tilde = X;
    {
        Tape tape;
        Var x = tape.leaf(X);
        Model::Graph g = model.build(tape, x);
        Var logp = log_softmax_cols(mul(g.head_input, 1.0 / cfg.gamma));
        tape.backward(sum(max_over_axis(logp, 0)));
        const Tensor& dx = tape.grad(x.id);
        for (std::size_t i = 0; i < x_tilde.size(); ++i) {
            double s = dx.data[i] > 0.0 ? 1.0 : (dx.data[i] < 0.0 ? -1.0 : 0.0);
            x_tilde.data[i] += cfg.epsilon * s;
        }
    }

    // second forward on the perturbed input
    Tensor z = model.head_input_value(x_tilde);
    for (double& v : z.data) v /= cfg.gamma;
    return column_max(softmax(z));
}

std::vector<std::pair<double, double>> roc_points(const std::vector<ScoredSample>& s) {
    require_both_classes(s, "roc_points");
    std::vector<ScoredSample> sorted = s;
    std::sort(sorted.begin(), sorted.end(),
              [](const ScoredSample& a, const ScoredSample& b) { return a.score > b.score; });
    double n_ind = 0, n_ood = 0;
    for (const ScoredSample& x : s) (x.is_ind ? n_ind : n_ood) += 1.0;

    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(0.0, 0.0);
    double tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        double thr = sorted[i].score;
        for (; i < sorted.size() && sorted[i].score == thr; ++i)
            (sorted[i].is_ind ? tp : fp) += 1.0;
        std::pair<double, double> p{fp / n_ood, tp / n_ind};
        if (p != pts.back()) pts.push_back(p);
    }
    if (pts.back() != std::pair<double, double>{1.0, 1.0}) pts.emplace_back(1.0, 1.0);
    return pts;
}

double auroc(const std::vector<ScoredSample>& s) {
    auto pts = roc_points(s);
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
    return area;
}

double aupr(const std::vector<ScoredSample>& s) {
    bool any_pos = std::any_of(s.begin(), s.end(),
                               [](const ScoredSample& x) { return x.is_ind; });
    if (!any_pos) throw DomainError("aupr: no positive (IND) samples");
    std::vector<ScoredSample> sorted = s;
    std::sort(sorted.begin(), sorted.end(),
              [](const ScoredSample& a, const ScoredSample& b) { return a.score > b.score; });
    double n_pos = 0;
    for (const ScoredSample& x : s) n_pos += x.is_ind ? 1.0 : 0.0;

    // average precision: sum (R_k - R_{k-1}) * P_k over descending thresholds
    double ap = 0.0, tp = 0, fp = 0, prev_recall = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        double thr = sorted[i].score;
        for (; i < sorted.size() && sorted[i].score == thr; ++i)
            (sorted[i].is_ind ? tp : fp) += 1.0;
        double recall = tp / n_pos;
        double precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

double fpr_at_tpr(const std::vector<ScoredSample>& s, double tpr_target) {
    auto pts = roc_points(s);  // validates input; thresholds descend along pts
    for (const auto& [fpr, tpr] : pts)
        if (tpr >= tpr_target) return fpr;
    return 1.0;
}

double detection_error(double fpr, double tpr) {
    if (fpr < 0.0 || fpr > 1.0 || tpr < 0.0 || tpr > 1.0)
        throw DomainError("detection_error: rates must lie in [0,1]");
    return 0.5 * (1.0 - tpr) + 0.5 * fpr;
}

MetricsReport compute_metrics(const std::string& ood_name,
                              const std::vector<double>& ind_scores,
                              const std::vector<double>& ood_scores) {
    std::vector<ScoredSample> s;
    s.reserve(ind_scores.size() + ood_scores.size());
    for (double v : ind_scores) s.push_back({v, true});
    for (double v : ood_scores) s.push_back({v, false});
    MetricsReport r;
    r.ood_name = ood_name;
    r.n_ind = ind_scores.size();
    r.n_ood = ood_scores.size();
    r.fpr_at_95_tpr = fpr_at_tpr(s, 0.95);
    r.detection_err = detection_error(r.fpr_at_95_tpr, 0.95);
    r.auroc = auroc(s);
    r.aupr_in = aupr(s);
    return r;
}

double timing_harness(const std::function<void()>& score_all, std::size_t n_samples,
                      int warmup, int runs) {
    if (n_samples < 100) throw ConfigError("timing_harness: need >= 100 samples");
    if (warmup < 3) throw ConfigError("timing_harness: need >= 3 warmup repetitions");
    if (runs < 1) throw ConfigError("timing_harness: need >= 1 timed run");
    for (int i = 0; i < warmup; ++i) score_all();
    std::vector<double> per_sample(runs);
    for (int r = 0; r < runs; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        score_all();
        auto t1 = std::chrono::steady_clock::now();
        per_sample[r] = std::chrono::duration<double>(t1 - t0).count() /
                        static_cast<double>(n_samples);
    }
    std::sort(per_sample.begin(), per_sample.end());
    return per_sample[per_sample.size() / 2];
}

}  // namespace tsmx
