#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "tsmx/model.hpp"

#ifndef TSMX_CLI_PATH
#error "TSMX_CLI_PATH must point at the tsmx binary"
#endif

using namespace tsmx;

namespace {

int run(const std::string& args) {
    std::string cmd = std::string(TSMX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size()))
        ++n;
    return n;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, sep)) out.push_back(tok);
    return out;
}

const std::string kTrainToy =
    "train --preset toy-mlp --synth --synth-n 20 --epochs 3 --batch 16 --seed 9";

}  // namespace

TEST_CASE("train is deterministic: byte-identical checkpoints and logs") {
    REQUIRE(run(kTrainToy + " --out /tmp/tsmx_cli_a.tsmx --log /tmp/tsmx_cli_a.csv") == 0);
    REQUIRE(run(kTrainToy + " --out /tmp/tsmx_cli_b.tsmx --log /tmp/tsmx_cli_b.csv") == 0);
    CHECK(slurp("/tmp/tsmx_cli_a.tsmx") == slurp("/tmp/tsmx_cli_b.tsmx"));
    CHECK(slurp("/tmp/tsmx_cli_a.csv") == slurp("/tmp/tsmx_cli_b.csv"));

    std::string csv = slurp("/tmp/tsmx_cli_a.csv");
    auto lines = split(csv, '\n');
    REQUIRE(lines.size() >= 4);
    CHECK(lines[0] == "epoch,loss,train_error");
    CHECK(split(lines[1], ',').size() == 3);
}

TEST_CASE("train with zero epochs stores the untouched initialization") {
    REQUIRE(run("train --preset toy-mlp --head t_softmax --nu 2.5 --synth "
                "--synth-n 10 --epochs 0 --seed 33 --out /tmp/tsmx_cli_init.tsmx") == 0);
    Model got = load_checkpoint("/tmp/tsmx_cli_init.tsmx");
    Model want = make_toy_mlp(HeadKind::t_softmax, 2.5, 33);
    CHECK(got.head == HeadKind::t_softmax);
    CHECK(got.nu == 2.5);

    std::vector<double> a, b;
    got.for_each_param([&a](const Tensor& t) {
        a.insert(a.end(), t.data.begin(), t.data.end());
    });
    want.for_each_param([&b](const Tensor& t) {
        b.insert(b.end(), t.data.begin(), t.data.end());
    });
    CHECK(a == b);

    // nu is visible in the text manifest
    std::string raw = slurp("/tmp/tsmx_cli_init.tsmx");
    CHECK(raw.find("t_softmax") != std::string::npos);
    CHECK(raw.find("2.5") != std::string::npos);
}

TEST_CASE("eval-ood writes the metrics CSV schema and is deterministic") {
    REQUIRE(run(kTrainToy + " --out /tmp/tsmx_cli_m.tsmx") == 0);
    const std::string eval =
        "eval-ood --checkpoint /tmp/tsmx_cli_m.tsmx --synth --synth-n 20 "
        "--ood-noise --seed 5";
    REQUIRE(run(eval + " --out /tmp/tsmx_cli_m1.csv") == 0);
    REQUIRE(run(eval + " --out /tmp/tsmx_cli_m2.csv") == 0);
    CHECK(slurp("/tmp/tsmx_cli_m1.csv") == slurp("/tmp/tsmx_cli_m2.csv"));

    auto lines = split(slurp("/tmp/tsmx_cli_m1.csv"), '\n');
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0] ==
          "model_name,head,nu,ood_name,n_ind,n_ood,fpr95,de,auroc,aupr_in,test_error");
    auto row = split(lines[1], ',');
    REQUIRE(row.size() == 11);
    CHECK(row[0] == "toy-mlp");
    CHECK(row[1] == "softmax");
    CHECK(row[4] == row[5]);  // equal IND/OOD counts
    for (int col : {6, 7, 8, 9, 10}) {
        double v = std::stod(row[col]);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("plot subcommands emit well-formed SVG") {
    REQUIRE(run(kTrainToy + " --out /tmp/tsmx_cli_p.tsmx") == 0);
    REQUIRE(run("plot-decision --checkpoint /tmp/tsmx_cli_p.tsmx --grid 16 "
                "--no-points --out /tmp/tsmx_cli_dec.svg") == 0);
    std::string dec = slurp("/tmp/tsmx_cli_dec.svg");
    CHECK(dec.rfind("<svg", 0) == 0);
    CHECK(dec.find("</svg>") != std::string::npos);
    CHECK(count_occurrences(dec, "<rect") == 16 * 16);

    REQUIRE(run("plot-pdf --nu 1 --out /tmp/tsmx_cli_pdf.svg") == 0);
    std::string pdf = slurp("/tmp/tsmx_cli_pdf.svg");
    CHECK(pdf.rfind("<svg", 0) == 0);
    CHECK(pdf.find("</svg>") != std::string::npos);
    CHECK(pdf.find("<polyline") != std::string::npos);
}

TEST_CASE("exit codes: 1 for configuration errors, 2 for data errors") {
    // unknown subcommand / missing required option -> parse error -> 1
    CHECK(run("no-such-command") == 1);
    CHECK(run("eval-ood --synth") == 1);  // --checkpoint is required

    // bad preset name -> configuration error
    CHECK(run("train --preset mystery --synth --epochs 0 --out /tmp/x.tsmx") == 1);
    // neither --synth nor data paths -> configuration error
    CHECK(run("train --preset toy-mlp --epochs 0 --out /tmp/x.tsmx") == 1);

    // missing IDX file -> data error
    CHECK(run("train --preset toy-mlp --images /nope.idx --labels /nope2.idx "
              "--epochs 0 --out /tmp/x.tsmx") == 2);
    // unreadable checkpoint -> data error
    CHECK(run("eval-ood --checkpoint /nonexistent.tsmx --synth --ood-noise") == 2);
}

TEST_CASE("odin scorer refuses a t-softmax checkpoint") {
    REQUIRE(run("train --preset toy-mlp --head t_softmax --synth --synth-n 10 "
                "--epochs 0 --seed 1 --out /tmp/tsmx_cli_t.tsmx") == 0);
    CHECK(run("eval-ood --checkpoint /tmp/tsmx_cli_t.tsmx --synth --synth-n 10 "
              "--ood-noise --scorer odin --out /tmp/tsmx_cli_t.csv") == 1);
    // the max-prob scorer works on the same checkpoint
    CHECK(run("eval-ood --checkpoint /tmp/tsmx_cli_t.tsmx --synth --synth-n 10 "
              "--ood-noise --out /tmp/tsmx_cli_t.csv") == 0);
}

TEST_CASE("bad scorer name is a configuration error") {
    REQUIRE(run(kTrainToy + " --out /tmp/tsmx_cli_s.tsmx") == 0);
    CHECK(run("eval-ood --checkpoint /tmp/tsmx_cli_s.tsmx --synth --ood-noise "
              "--scorer mystery --out /tmp/tsmx_cli_s.csv") == 1);
}
