#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "tsmx/ood_eval.hpp"
#include "tsmx/rng.hpp"

using namespace tsmx;

namespace {

std::vector<ScoredSample> make_samples(const std::vector<double>& ind,
                                       const std::vector<double>& ood) {
    std::vector<ScoredSample> s;
    for (double v : ind) s.push_back({v, true});
    for (double v : ood) s.push_back({v, false});
    return s;
}

// pairwise Mann-Whitney enumeration, ties counting one half
double auroc_oracle(const std::vector<ScoredSample>& s) {
    double num = 0.0, den = 0.0;
    for (const ScoredSample& a : s)
        for (const ScoredSample& b : s) {
            if (!a.is_ind || b.is_ind) continue;
            den += 1.0;
            if (a.score > b.score)
                num += 1.0;
            else if (a.score == b.score)
                num += 0.5;
        }
    return num / den;
}

// exhaustive threshold enumeration oracles
double fpr_oracle(const std::vector<ScoredSample>& s, double target) {
    std::set<double, std::greater<double>> thresholds;
    for (const ScoredSample& x : s) thresholds.insert(x.score);
    double n_ind = 0, n_ood = 0;
    for (const ScoredSample& x : s) (x.is_ind ? n_ind : n_ood) += 1.0;
    for (double thr : thresholds) {
        double tp = 0, fp = 0;
        for (const ScoredSample& x : s)
            if (x.score >= thr) (x.is_ind ? tp : fp) += 1.0;
        if (tp / n_ind >= target) return fp / n_ood;
    }
    return 1.0;
}

double aupr_oracle(const std::vector<ScoredSample>& s) {
    std::set<double, std::greater<double>> thresholds;
    for (const ScoredSample& x : s) thresholds.insert(x.score);
    double n_pos = 0;
    for (const ScoredSample& x : s) n_pos += x.is_ind ? 1.0 : 0.0;
    double ap = 0.0, prev_recall = 0.0;
    for (double thr : thresholds) {
        double tp = 0, fp = 0;
        for (const ScoredSample& x : s)
            if (x.score >= thr) (x.is_ind ? tp : fp) += 1.0;
        double recall = tp / n_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    return ap;
}

std::vector<ScoredSample> random_samples(Pcg32& rng, std::size_t n) {
    std::vector<ScoredSample> s;
    bool has_ind = false, has_ood = false;
    for (std::size_t i = 0; i < n; ++i) {
        bool ind = rng.bounded(2) == 0;
        // quantized scores so ties actually occur
        s.push_back({rng.bounded(20) / 10.0, ind});
        (ind ? has_ind : has_ood) = true;
    }
    if (!has_ind) s[0].is_ind = true;
    if (!has_ood) s.back().is_ind = false;
    return s;
}

Model linear_softmax_1d(double w1, double w2) {
    Model m;
    m.name = "linear1d";
    m.head = HeadKind::softmax;
    m.layers.push_back(FullyConnected{Tensor({2, 1}, {w1, w2}), Tensor::zeros({2})});
    return m;
}

}  // namespace

TEST_CASE("confidence_max_prob examples") {
    // fixed logits: log [0.5, 0.25, 0.25] up to a shift
    Model m;
    m.head = HeadKind::softmax;
    m.layers.push_back(FullyConnected{
        Tensor({3, 1}, {0, 0, 0}),
        Tensor({3}, {std::log(0.5), std::log(0.25), std::log(0.25)})});
    auto s = confidence_max_prob(m, Tensor({1, 1}, {0.0}));
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));

    // ten-way uniform head
    Model u;
    u.head = HeadKind::softmax;
    u.layers.push_back(FullyConnected{Tensor::zeros({10, 1}), Tensor::zeros({10})});
    CHECK(confidence_max_prob(u, Tensor({1, 1}, {3.0}))[0] ==
          doctest::Approx(0.1).epsilon(1e-12));

    // near one-hot head
    Model h;
    h.head = HeadKind::softmax;
    h.layers.push_back(FullyConnected{Tensor::zeros({2, 1}), Tensor({2}, {60.0, 0.0})});
    CHECK(confidence_max_prob(h, Tensor({1, 1}, {0.0}))[0] ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("odin with eps=0, gamma=1 is bit-identical to max prob") {
    Model m = make_toy_mlp(HeadKind::softmax, 1.0, 4);
    Pcg32 rng(4);
    Tensor X = Tensor::zeros({2, 17});
    for (double& v : X.data) v = rng.uniform(-4.0, 4.0);
    auto base = confidence_max_prob(m, X);
    auto odin = odin_score(m, X, OdinConfig{0.0, 1.0});
    CHECK(odin == base);
}

TEST_CASE("odin with eps=0 applies pure temperature scaling") {
    Model m = make_toy_mlp(HeadKind::softmax, 1.0, 5);
    Pcg32 rng(5);
    Tensor X = Tensor::zeros({2, 9});
    for (double& v : X.data) v = rng.uniform(-4.0, 4.0);
    auto odin = odin_score(m, X, OdinConfig{0.0, 1000.0});
    Tensor z = m.head_input_value(X);
    for (double& v : z.data) v /= 1000.0;
    Tensor p = softmax(z);
    for (std::size_t j = 0; j < p.cols(); ++j) {
        double mx = 0.0;
        for (std::size_t i = 0; i < p.rows(); ++i) mx = std::max(mx, p.at(i, j));
        CHECK(odin[j] == doctest::Approx(mx).epsilon(1e-14));
    }
}

TEST_CASE("odin perturbation matches the analytic 1-d gradient sign") {
    // z = (w1 x, w2 x); d/dx log softmax_max(z/g) = (w_m - sum_j p_j w_j)/g
    Pcg32 rng(6);
    for (int rep = 0; rep < 100; ++rep) {
        double w1 = rng.uniform(-2.0, 2.0), w2 = rng.uniform(-2.0, 2.0);
        double x = rng.uniform(-3.0, 3.0);
        double gamma = rep % 2 == 0 ? 1.0 : 1000.0;
        double eps = 0.01;
        Model m = linear_softmax_1d(w1, w2);

        Tensor z({2, 1}, {w1 * x / gamma, w2 * x / gamma});
        Tensor p = softmax(z);
        double wm = p.data[0] >= p.data[1] ? w1 : w2;
        double grad = (wm - (p.data[0] * w1 + p.data[1] * w2)) / gamma;
        double sign = grad > 0 ? 1.0 : (grad < 0 ? -1.0 : 0.0);

        double xt = x + eps * sign;
        Tensor zt({2, 1}, {w1 * xt / gamma, w2 * xt / gamma});
        Tensor pt = softmax(zt);
        double expected = std::max(pt.data[0], pt.data[1]);

        auto got = odin_score(m, Tensor({1, 1}, {x}), OdinConfig{eps, gamma});
        CHECK(got[0] == doctest::Approx(expected).epsilon(1e-12));
        CHECK(got[0] >= std::max(p.data[0], p.data[1]) - 1e-12);
    }
}

TEST_CASE("odin rejects t-softmax heads and bad configs") {
    Model t = make_toy_mlp(HeadKind::t_softmax, 1.0, 0);
    Tensor X = Tensor::zeros({2, 1});
    CHECK_THROWS_AS(odin_score(t, X, OdinConfig{}), ConfigError);

    Model s = make_toy_mlp(HeadKind::softmax, 1.0, 0);
    CHECK_THROWS_AS(odin_score(s, X, OdinConfig{-0.1, 1000.0}), ConfigError);
    CHECK_THROWS_AS(odin_score(s, X, OdinConfig{0.0014, 0.0}), ConfigError);
}

TEST_CASE("roc_points examples") {
    auto perfect = roc_points(make_samples({0.9, 0.8}, {0.1, 0.2}));
    bool through_01 = false;
    for (const auto& p : perfect) through_01 |= (p.first == 0.0 && p.second == 1.0);
    CHECK(through_01);
    CHECK(perfect.front() == std::pair<double, double>{0.0, 0.0});
    CHECK(perfect.back() == std::pair<double, double>{1.0, 1.0});

    auto degenerate = roc_points(make_samples({0.5, 0.5}, {0.5}));
    CHECK(degenerate == std::vector<std::pair<double, double>>{{0, 0}, {1, 1}});

    auto staircase = roc_points(make_samples({0.9, 0.8, 0.7, 0.6}, {0.5, 0.4}));
    for (std::size_t i = 1; i < staircase.size(); ++i) {
        CHECK(staircase[i].first >= staircase[i - 1].first);
        CHECK(staircase[i].second >= staircase[i - 1].second);
    }
    bool reaches = false;
    for (const auto& p : staircase) reaches |= (p.first == 0.0 && p.second == 1.0);
    CHECK(reaches);

    CHECK_THROWS_AS(roc_points(make_samples({0.9}, {})), DomainError);
    CHECK_THROWS_AS(roc_points(make_samples({}, {0.9})), DomainError);
}

TEST_CASE("auroc examples") {
    CHECK(auroc(make_samples({0.9, 0.8}, {0.1, 0.2})) == doctest::Approx(1.0));
    CHECK(auroc(make_samples({0.5, 0.5}, {0.5, 0.5})) == doctest::Approx(0.5));
    CHECK(auroc(make_samples({2, 3}, {1, 4})) == doctest::Approx(0.5));
}

TEST_CASE("auroc equals Mann-Whitney enumeration on random sets") {
    Pcg32 rng(77);
    for (int rep = 0; rep < 100; ++rep) {
        auto s = random_samples(rng, 2 + rng.bounded(999));
        CHECK(std::abs(auroc(s) - auroc_oracle(s)) < 1e-9);
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    Pcg32 rng(78);
    for (int rep = 0; rep < 50; ++rep) {
        auto s = random_samples(rng, 2 + rng.bounded(200));
        auto t = s;
        for (ScoredSample& x : t) x.score = std::exp(3.0 * x.score) + x.score;
        CHECK(auroc(s) == doctest::Approx(auroc(t)).epsilon(1e-12));
    }
}

TEST_CASE("aupr examples") {
    CHECK(aupr(make_samples({0.9, 0.8}, {0.1, 0.2})) == doctest::Approx(1.0));
    // all ties: single staircase point at precision P/(P+N)
    CHECK(aupr(make_samples({0.5, 0.5, 0.5}, {0.5})) == doctest::Approx(0.75));
    // interleaved by score
    auto inter = make_samples({0.9, 0.7, 0.5}, {0.8, 0.6, 0.4});
    CHECK(aupr(inter) == doctest::Approx(aupr_oracle(inter)));
    CHECK_THROWS_AS(aupr(make_samples({}, {0.1})), DomainError);
}

TEST_CASE("aupr and fpr_at_tpr match exhaustive enumeration on small sets") {
    Pcg32 rng(79);
    for (int rep = 0; rep < 200; ++rep) {
        auto s = random_samples(rng, 2 + rng.bounded(49));
        CHECK(aupr(s) == doctest::Approx(aupr_oracle(s)).epsilon(1e-12));
        double target = 0.05 + 0.9 * rng.uniform(0.0, 1.0);
        CHECK(fpr_at_tpr(s, target) == fpr_oracle(s, target));
    }
}

TEST_CASE("fpr_at_tpr examples") {
    CHECK(fpr_at_tpr(make_samples({0.9, 0.8, 0.7, 0.6}, {0.5, 0.4})) == 0.0);
    CHECK(fpr_at_tpr(make_samples({0.9, 0.5}, {0.7})) == 1.0);
    CHECK(fpr_at_tpr(make_samples({3, 2}, {1, 0})) == 0.0);
}

TEST_CASE("fpr_at_tpr is monotone in upward IND shifts") {
    Pcg32 rng(80);
    for (int rep = 0; rep < 50; ++rep) {
        auto s = random_samples(rng, 4 + rng.bounded(100));
        double prev = 1.0;
        for (double shift : {0.0, 0.3, 0.8, 2.0, 10.0}) {
            auto t = s;
            for (ScoredSample& x : t)
                if (x.is_ind) x.score += shift;
            double f = fpr_at_tpr(t, 0.95);
            CHECK(f <= prev + 1e-12);
            prev = f;
        }
    }
}

TEST_CASE("detection_error formula") {
    CHECK(detection_error(0.0) == doctest::Approx(0.025));
    CHECK(detection_error(1.0) == doctest::Approx(0.525));
    CHECK(detection_error(0.2) == doctest::Approx(0.125));
    CHECK_THROWS_AS(detection_error(-0.1), DomainError);
    CHECK_THROWS_AS(detection_error(1.1), DomainError);
}

TEST_CASE("detection_error of fpr_at_tpr stays in [0.025, 0.525]") {
    Pcg32 rng(81);
    for (int rep = 0; rep < 100; ++rep) {
        auto s = random_samples(rng, 2 + rng.bounded(300));
        double de = detection_error(fpr_at_tpr(s, 0.95), 0.95);
        CHECK(de >= 0.025);
        CHECK(de <= 0.525);
    }
}

TEST_CASE("compute_metrics on separable scores") {
    MetricsReport r = compute_metrics("noise", {0.9, 0.8, 0.85, 0.95}, {0.1, 0.2, 0.3});
    CHECK(r.auroc == doctest::Approx(1.0));
    CHECK(r.fpr_at_95_tpr == 0.0);
    CHECK(r.aupr_in == doctest::Approx(1.0));
    CHECK(r.detection_err == doctest::Approx(0.025));
    CHECK(r.n_ind == 4);
    CHECK(r.n_ood == 3);
}

TEST_CASE("timing_harness lower bound and repeatability") {
    auto sleepy = [] { std::this_thread::sleep_for(std::chrono::milliseconds(100)); };
    double a = timing_harness(sleepy, 100, 3, 3);  // 1 ms per sample
    CHECK(a >= 1e-3);
    double b = timing_harness(sleepy, 100, 3, 3);
    CHECK(std::abs(a - b) / std::max(a, b) < 0.5);

    CHECK_THROWS_AS(timing_harness(sleepy, 99, 3, 3), ConfigError);
    CHECK_THROWS_AS(timing_harness(sleepy, 100, 2, 3), ConfigError);
}
