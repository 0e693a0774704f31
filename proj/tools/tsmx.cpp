#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tsmx/datasets.hpp"
#include "tsmx/model.hpp"
#include "tsmx/ood_eval.hpp"
#include "tsmx/plots.hpp"
#include "tsmx/rng.hpp"
#include "tsmx/trainer.hpp"

namespace {

using namespace tsmx;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << content;
}

struct DataArgs {
    std::string images, labels;
    std::size_t limit = 0;
    bool synth = false;
    std::size_t synth_n = 200;
    double synth_std = 0.4;
    std::uint64_t synth_seed = 7;
};

void add_data_flags(CLI::App* cmd, DataArgs& a, const std::string& prefix) {
    cmd->add_option("--" + prefix + "images", a.images, "IDX image file");
    cmd->add_option("--" + prefix + "labels", a.labels, "IDX label file");
    cmd->add_option("--limit", a.limit, "keep only the first N samples");
    cmd->add_flag("--synth", a.synth, "use the 3-cluster synthetic 2-d dataset");
    cmd->add_option("--synth-n", a.synth_n, "synthetic samples per class");
    cmd->add_option("--synth-std", a.synth_std, "synthetic cluster std");
}

LabeledDataset load_data(const DataArgs& a, std::uint64_t seed) {
    LabeledDataset d;
    if (a.synth) {
        d = synth_clusters(a.synth_n, toy_cluster_centers(), a.synth_std, seed);
    } else {
        if (a.images.empty() || a.labels.empty())
            throw ConfigError("either --synth or both image and label paths required");
        d = load_idx(a.images, a.labels);
    }
    if (a.limit > 0) d = take_prefix(d, a.limit);
    return d;
}

// ---- train ----

int cmd_train(const std::string& preset, const std::string& head, double nu,
              const DataArgs& data_args, const TrainConfig& cfg,
              const std::string& out_path, const std::string& log_path) {
    Model model = make_preset(preset, head_from_name(head), nu, cfg.seed);
    LabeledDataset data = load_data(data_args, cfg.seed);
    std::vector<EpochStats> log = train(model, data, cfg);
    save_checkpoint(model, out_path);
    if (!log_path.empty()) {
        std::ostringstream csv;
        csv << "epoch,loss,train_error\n";
        for (const EpochStats& e : log)
            csv << e.epoch << "," << num(e.loss) << "," << num(e.error) << "\n";
        write_file(log_path, csv.str());
    }
    std::cout << "saved " << out_path << " after " << cfg.epochs << " epochs";
    if (!log.empty())
        std::cout << " (final loss " << num(log.back().loss) << ", train error "
                  << num(log.back().error) << ")";
    std::cout << "\n";
    return 0;
}

// ---- eval-ood ----

struct OodSpec {
    std::string name, images, labels;
};

std::vector<double> score_pool(const Model& model, const Tensor& pool,
                               const std::string& scorer, const OdinConfig& odin) {
    bool columns = !model.image_input();
    std::vector<double> scores;
    const std::size_t chunk = 256;
    std::size_t n = pool.shape[0];
    for (std::size_t start = 0; start < n; start += chunk) {
        std::size_t count = std::min(chunk, n - start);
        Tensor X = stack_samples(pool, start, count, columns);
        std::vector<double> s = scorer == "odin" ? odin_score(model, X, odin)
                                                 : confidence_max_prob(model, X);
        scores.insert(scores.end(), s.begin(), s.end());
    }
    return scores;
}

/// Seeded shuffle, then keep the first n samples of a pool.
Tensor subsample_pool(const Tensor& pool, std::size_t n, std::uint64_t seed) {
    std::size_t total = pool.shape[0];
    if (n >= total) return pool;
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Pcg32 rng(seed);
    shuffle(order, rng);
    std::size_t per = pool.size() / total;
    Shape s = pool.shape;
    s[0] = n;
    Tensor out = Tensor::zeros(s);
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(pool.data.begin() + order[i] * per, per,
                    out.data.begin() + i * per);
    return out;
}

int cmd_eval_ood(const std::string& ckpt, const DataArgs& ind_args,
                 const std::vector<std::string>& ood_specs, bool ood_noise,
                 const std::string& scorer, const OdinConfig& odin,
                 std::uint64_t seed, const std::string& out_path) {
    if (scorer != "max_prob" && scorer != "odin")
        throw ConfigError("scorer must be max_prob or odin");
    Model model = load_checkpoint(ckpt);
    if (scorer == "odin" && model.head != HeadKind::softmax)
        throw ConfigError("odin scorer requires a softmax-head checkpoint");

    LabeledDataset ind = load_data(ind_args, seed);
    std::vector<OodSource> sources;
    for (const std::string& spec : ood_specs) {
        // name=images,labels
        auto eq = spec.find('=');
        auto comma = spec.find(',', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || comma == std::string::npos)
            throw ConfigError("--ood expects name=images_path,labels_path, got '" +
                              spec + "'");
        std::string name = spec.substr(0, eq);
        LabeledDataset d = load_idx(spec.substr(eq + 1, comma - eq - 1),
                                    spec.substr(comma + 1), name);
        sources.push_back(OodSource{name, std::move(d.images)});
    }
    if (ood_noise)
        sources.push_back(gaussian_noise_ood(ind.size(), ind.sample_shape(), seed));
    if (sources.empty()) throw ConfigError("no OOD source given");

    double test_error = evaluate_error(model, ind);

    std::ostringstream csv;
    csv << "model_name,head,nu,ood_name,n_ind,n_ood,fpr95,de,auroc,aupr_in,test_error\n";
    for (std::size_t k = 0; k < sources.size(); ++k) {
        const OodSource& src = sources[k];
        // equal numbers of IND and OOD samples: truncate the larger pool
        // to the first n after a seeded shuffle
        std::size_t n = std::min<std::size_t>(ind.size(), src.samples.shape[0]);
        Tensor ind_pool = subsample_pool(ind.images, n, seed + k);
        Tensor ood_pool = subsample_pool(src.samples, n, seed + k);
        MetricsReport r = compute_metrics(src.name,
                                          score_pool(model, ind_pool, scorer, odin),
                                          score_pool(model, ood_pool, scorer, odin));
        csv << model.name << "," << head_name(model.head) << "," << num(model.nu)
            << "," << r.ood_name << "," << r.n_ind << "," << r.n_ood << ","
            << num(r.fpr_at_95_tpr) << "," << num(r.detection_err) << ","
            << num(r.auroc) << "," << num(r.aupr_in) << "," << num(test_error)
            << "\n";
    }
    write_file(out_path, csv.str());
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

// ---- timeit ----

int cmd_timeit(const std::string& ckpt, std::size_t n, std::uint64_t seed,
               const OdinConfig& odin) {
    Model model = load_checkpoint(ckpt);
    Shape sample_shape;
    if (model.image_input()) {
        sample_shape = {1, 28, 28};
    } else if (auto* d = std::get_if<FullyConnected>(&model.layers.front())) {
        sample_shape = {d->W.cols()};
    } else if (auto* q = std::get_if<QuadraticLayer>(&model.layers.front())) {
        sample_shape = {q->W.cols()};
    }
    Tensor pool = gaussian_noise_ood(n, sample_shape, seed).samples;

    double base_s = timing_harness(
        [&] { score_pool(model, pool, "max_prob", odin); }, n);
    std::cout << "max_prob_ms_per_sample=" << num(base_s * 1e3) << "\n";
    if (model.head == HeadKind::softmax) {
        double odin_s = timing_harness(
            [&] { score_pool(model, pool, "odin", odin); }, n);
        std::cout << "odin_ms_per_sample=" << num(odin_s * 1e3) << "\n";
        std::cout << "odin_over_max_prob=" << num(odin_s / base_s) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"t-softmax classifiers and OOD robustness evaluation"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a classifier");
    train_cmd->set_config("--config");
    std::string preset = "cnn", head = "softmax", out_path = "model.tsmx", log_path;
    double nu = 1.0;
    DataArgs train_data;
    TrainConfig cfg;
    std::string decay_epochs;
    train_cmd->add_option("--preset", preset, "architecture preset: toy-mlp | cnn");
    train_cmd->add_option("--head", head, "softmax | t_softmax");
    train_cmd->add_option("--nu", nu, "t-softmax degrees of freedom");
    add_data_flags(train_cmd, train_data, "");
    train_cmd->add_option("--lr", cfg.learning_rate, "learning rate");
    train_cmd->add_option("--momentum", cfg.momentum, "Nesterov momentum");
    train_cmd->add_option("--weight-decay", cfg.weight_decay, "weight decay");
    train_cmd->add_option("--batch", cfg.batch_size, "batch size");
    train_cmd->add_option("--epochs", cfg.epochs, "training epochs");
    train_cmd->add_option("--lr-decay-epochs", decay_epochs,
                          "comma-separated epochs at which to decay the lr");
    train_cmd->add_option("--lr-decay-factor", cfg.lr_decay_factor, "lr decay factor");
    train_cmd->add_option("--seed", cfg.seed, "seed for init, shuffling and data");
    train_cmd->add_option("--out", out_path, "checkpoint output path");
    train_cmd->add_option("--log", log_path, "per-epoch CSV log path");

    // eval-ood
    auto* eval_cmd = app.add_subcommand("eval-ood", "evaluate OOD robustness");
    eval_cmd->set_config("--config");
    std::string ckpt, scorer = "max_prob", eval_out = "metrics.csv";
    DataArgs ind_data;
    std::vector<std::string> ood_specs;
    bool ood_noise = false;
    OdinConfig odin;
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--ind-images", ind_data.images, "IND IDX image file");
    eval_cmd->add_option("--ind-labels", ind_data.labels, "IND IDX label file");
    eval_cmd->add_option("--limit", ind_data.limit, "keep only the first N IND samples");
    eval_cmd->add_flag("--synth", ind_data.synth, "IND = 3-cluster synthetic data");
    eval_cmd->add_option("--synth-n", ind_data.synth_n, "synthetic samples per class");
    eval_cmd->add_option("--synth-std", ind_data.synth_std, "synthetic cluster std");
    eval_cmd->add_option("--ood", ood_specs, "OOD dataset as name=images_path,labels_path");
    eval_cmd->add_flag("--ood-noise", ood_noise, "add a Gaussian-noise OOD source");
    eval_cmd->add_option("--scorer", scorer, "max_prob | odin");
    eval_cmd->add_option("--epsilon", odin.epsilon, "ODIN perturbation magnitude");
    eval_cmd->add_option("--gamma", odin.gamma, "ODIN temperature");
    eval_cmd->add_option("--seed", eval_seed, "seed for sample truncation and noise");
    eval_cmd->add_option("--out", eval_out, "metrics CSV output path");

    // plot-decision
    auto* dec_cmd = app.add_subcommand("plot-decision",
                                       "max-probability heat map over a 2-d box");
    dec_cmd->set_config("--config");
    std::string dec_ckpt, dec_out = "decision.svg";
    std::size_t grid = 200;
    double box = 6.0;
    std::uint64_t dec_seed = 7;
    std::size_t overlay_n = 100;
    bool no_points = false;
    dec_cmd->add_option("--checkpoint", dec_ckpt, "model checkpoint")->required();
    dec_cmd->add_option("--out", dec_out, "SVG output path");
    dec_cmd->add_option("--grid", grid, "grid resolution");
    dec_cmd->add_option("--range", box, "plot box is [-range, range]^2");
    dec_cmd->add_option("--seed", dec_seed, "seed of the overlaid training points");
    dec_cmd->add_option("--points-n", overlay_n, "overlaid points per class");
    dec_cmd->add_flag("--no-points", no_points, "do not overlay training points");

    // plot-pdf
    auto* pdf_cmd = app.add_subcommand("plot-pdf",
                                       "density and posterior curves, Gaussian vs t");
    pdf_cmd->set_config("--config");
    std::string pdf_out = "pdf.svg";
    std::vector<double> centers{-1.0, 1.0};
    double pdf_nu = 1.0, pdf_range = 8.0;
    std::size_t pdf_points = 1000;
    pdf_cmd->add_option("--centers", centers, "the two class centers")->expected(2);
    pdf_cmd->add_option("--nu", pdf_nu, "t-distribution degrees of freedom");
    pdf_cmd->add_option("--range", pdf_range, "x axis is [-range, range]");
    pdf_cmd->add_option("--points", pdf_points, "samples per curve");
    pdf_cmd->add_option("--out", pdf_out, "SVG output path");

    // timeit
    auto* time_cmd = app.add_subcommand("timeit", "per-sample scorer latency");
    time_cmd->set_config("--config");
    std::string time_ckpt;
    std::size_t time_n = 200;
    std::uint64_t time_seed = 0;
    OdinConfig time_odin;
    time_cmd->add_option("--checkpoint", time_ckpt, "model checkpoint")->required();
    time_cmd->add_option("--n", time_n, "number of timed samples");
    time_cmd->add_option("--seed", time_seed, "seed of the timed inputs");
    time_cmd->add_option("--epsilon", time_odin.epsilon, "ODIN perturbation magnitude");
    time_cmd->add_option("--gamma", time_odin.gamma, "ODIN temperature");

    try {
        app.parse(argc, argv);
        if (*train_cmd) {
            if (!decay_epochs.empty()) {
                std::istringstream ss(decay_epochs);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    cfg.lr_decay_epochs.push_back(std::stoul(tok));
            }
            return cmd_train(preset, head, nu, train_data, cfg, out_path, log_path);
        }
        if (*eval_cmd)
            return cmd_eval_ood(ckpt, ind_data, ood_specs, ood_noise, scorer, odin,
                                eval_seed, eval_out);
        if (*dec_cmd) {
            Model model = load_checkpoint(dec_ckpt);
            LabeledDataset pts;
            if (!no_points)
                pts = synth_clusters(overlay_n, toy_cluster_centers(), 0.4, dec_seed);
            write_file(dec_out, decision_grid_svg(model, grid, -box, box,
                                                  no_points ? nullptr : &pts));
            std::cout << "wrote " << dec_out << "\n";
            return 0;
        }
        if (*pdf_cmd) {
            write_file(pdf_out, pdf_curves_svg(centers[0], centers[1], pdf_nu,
                                               pdf_points, -pdf_range, pdf_range));
            std::cout << "wrote " << pdf_out << "\n";
            return 0;
        }
        if (*time_cmd) return cmd_timeit(time_ckpt, time_n, time_seed, time_odin);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
