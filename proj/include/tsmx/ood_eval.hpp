#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tsmx/model.hpp"
#include "tsmx/tensor.hpp"

namespace tsmx {

/// One scored sample: higher score means "more in-distribution".
struct ScoredSample {
    double score;
    bool is_ind;
};

struct OdinConfig {
    double epsilon = 0.0014;  // input perturbation magnitude
    double gamma = 1000.0;    // temperature
};

struct MetricsReport {
    std::string ood_name;
    double fpr_at_95_tpr = 0.0;
    double detection_err = 0.0;
    double auroc = 0.0;
    double aupr_in = 0.0;
    std::size_t n_ind = 0;
    std::size_t n_ood = 0;
};

/// Max class probability per sample; forward pass only.
std::vector<double> confidence_max_prob(const Model& model, const Tensor& X);

/// ODIN score: perturb x by -eps * sign(-grad_x log max softmax(z/gamma)),
/// re-run forward on the perturbed input and return the max
/// temperature-scaled softmax probability. One forward-backward plus one
/// forward pass. Softmax heads only.
std::vector<double> odin_score(const Model& model, const Tensor& X,
                               const OdinConfig& cfg);

/// ROC operating points (FPR, TPR), one per distinct threshold in
/// descending score order, with (0,0) and (1,1) endpoints. A sample is
/// classified IND when score >= threshold.
std::vector<std::pair<double, double>> roc_points(const std::vector<ScoredSample>& s);

/// Trapezoidal area under roc_points. Equals the Mann-Whitney statistic
/// with ties counting one half.
double auroc(const std::vector<ScoredSample>& s);

/// Average-precision area under the precision-recall staircase, IND as
/// the positive class.
double aupr(const std::vector<ScoredSample>& s);

/// FPR at the largest threshold reaching TPR >= target (exact staircase,
/// no interpolation).
double fpr_at_tpr(const std::vector<ScoredSample>& s, double tpr_target = 0.95);

/// DE = 0.5 (1 - TPR) + 0.5 FPR, assuming balanced IND/OOD.
double detection_error(double fpr, double tpr = 0.95);

/// All four figures of merit for one IND/OOD score split.
MetricsReport compute_metrics(const std::string& ood_name,
                              const std::vector<double>& ind_scores,
                              const std::vector<double>& ood_scores);

/// Median-of-runs mean per-sample wall time of `score_all`, which must
/// score the whole pool once per call.
double timing_harness(const std::function<void()>& score_all, std::size_t n_samples,
                      int warmup = 3, int runs = 5);

}  // namespace tsmx
