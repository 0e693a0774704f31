#include "tsmx/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "tsmx/rng.hpp"

namespace tsmx {

std::string head_name(HeadKind h) {
    return h == HeadKind::softmax ? "softmax" : "t_softmax";
}

HeadKind head_from_name(const std::string& s) {
    if (s == "softmax") return HeadKind::softmax;
    if (s == "t_softmax") return HeadKind::t_softmax;
    throw ConfigError("unknown head '" + s + "'");
}

bool Model::image_input() const {
    return !layers.empty() && std::holds_alternative<Conv2dLayer>(layers.front());
}

void Model::validate() const {
    if (layers.empty()) throw ConfigError("model has no layers");
    if (head == HeadKind::t_softmax) {
        if (!std::holds_alternative<QuadraticLayer>(layers.back()))
            throw ConfigError("t_softmax head requires a quadratic final layer");
        if (nu <= 0.0) throw ConfigError("t_softmax head requires nu > 0");
    } else if (!std::holds_alternative<FullyConnected>(layers.back())) {
        throw ConfigError("softmax head requires a fully connected final layer");
    }
}

void Model::for_each_param(const std::function<void(Tensor&)>& fn) {
    for (Layer& l : layers) {
        if (auto* c = std::get_if<Conv2dLayer>(&l)) {
            fn(c->kernel);
            fn(c->bias);
        } else if (auto* d = std::get_if<FullyConnected>(&l)) {
            fn(d->W);
            fn(d->b);
        } else if (auto* q = std::get_if<QuadraticLayer>(&l)) {
            fn(q->W);
        }
    }
}

void Model::for_each_param(const std::function<void(const Tensor&)>& fn) const {
    const_cast<Model*>(this)->for_each_param(
        [&fn](Tensor& t) { fn(static_cast<const Tensor&>(t)); });
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for_each_param([&n](const Tensor&) { ++n; });
    return n;
}

Model::Graph Model::build(Tape& tape, Var x) const {
    validate();
    Graph g;
    Var cur = x;
    for (const Layer& l : layers) {
        if (auto* c = std::get_if<Conv2dLayer>(&l)) {
            Var k = tape.leaf(c->kernel);
            Var b = tape.leaf(c->bias);
            g.params.push_back(k);
            g.params.push_back(b);
            cur = conv2d(cur, k, b);
        } else if (std::holds_alternative<MaxPool2Layer>(l)) {
            cur = maxpool2d(cur);
        } else if (std::holds_alternative<ReluLayer>(l)) {
            cur = relu(cur);
        } else if (std::holds_alternative<FlattenLayer>(l)) {
            cur = flatten_columns(cur);
        } else if (auto* d = std::get_if<FullyConnected>(&l)) {
            Var w = tape.leaf(d->W);
            Var b = tape.leaf(d->b);
            g.params.push_back(w);
            g.params.push_back(b);
            cur = fc_forward(w, b, cur);
        } else if (auto* q = std::get_if<QuadraticLayer>(&l)) {
            Var w = tape.leaf(q->W);
            g.params.push_back(w);
            cur = quadratic_forward(w, cur);
        }
    }
    g.head_input = cur;
    g.logp = head == HeadKind::softmax ? log_softmax_cols(cur)
                                       : log_t_softmax_cols(cur, nu);
    return g;
}

Tensor Model::head_input_value(const Tensor& X) const {
    Tape tape;
    Graph g = build(tape, tape.leaf(X));
    return g.head_input.value();
}

Tensor Model::probabilities(const Tensor& X) const {
    Tensor h = head_input_value(X);
    return head == HeadKind::softmax ? softmax(h) : t_softmax(h, nu);
}

// ---- presets ----

namespace {

Tensor init_uniform(Shape shape, std::size_t fan_in, Pcg32& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

FullyConnected make_dense(std::size_t out, std::size_t in, Pcg32& rng) {
    return FullyConnected{init_uniform({out, in}, in, rng), Tensor::zeros({out})};
}

QuadraticLayer make_quadratic(std::size_t out, std::size_t in, Pcg32& rng) {
    return QuadraticLayer{init_uniform({out, in}, in, rng)};
}

Conv2dLayer make_conv(std::size_t o, std::size_t c, std::size_t k, Pcg32& rng) {
    return Conv2dLayer{init_uniform({o, c, k, k}, c * k * k, rng), Tensor::zeros({o})};
}

void add_head_layer(Model& m, std::size_t out, std::size_t in, Pcg32& rng) {
    if (m.head == HeadKind::t_softmax)
        m.layers.push_back(make_quadratic(out, in, rng));
    else
        m.layers.push_back(make_dense(out, in, rng));
}

}  // namespace

Model make_toy_mlp(HeadKind head, double nu, std::uint64_t seed) {
    Pcg32 rng(seed, 0x9e3779b97f4a7c15ULL);
    Model m;
    m.name = "toy-mlp";
    m.head = head;
    m.nu = nu;
    m.layers.push_back(make_dense(32, 2, rng));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(make_dense(32, 32, rng));
    m.layers.push_back(ReluLayer{});
    add_head_layer(m, 3, 32, rng);
    m.validate();
    return m;
}

Model make_cnn(HeadKind head, double nu, std::uint64_t seed) {
    Pcg32 rng(seed, 0x9e3779b97f4a7c15ULL);
    Model m;
    m.name = "cnn";
    m.head = head;
    m.nu = nu;
    m.layers.push_back(make_conv(20, 1, 5, rng));   // 28 -> 24
    m.layers.push_back(MaxPool2Layer{});            // -> 12
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(make_conv(50, 20, 5, rng));  // -> 8
    m.layers.push_back(MaxPool2Layer{});            // -> 4, 50*4*4 = 800
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(FlattenLayer{});
    m.layers.push_back(make_dense(500, 800, rng));
    m.layers.push_back(ReluLayer{});
    m.layers.push_back(make_dense(100, 500, rng));
    m.layers.push_back(ReluLayer{});
    add_head_layer(m, 10, 100, rng);
    m.validate();
    return m;
}

Model make_preset(const std::string& preset, HeadKind head, double nu,
                  std::uint64_t seed) {
    if (preset == "toy-mlp") return make_toy_mlp(head, nu, seed);
    if (preset == "cnn") return make_cnn(head, nu, seed);
    throw ConfigError("unknown preset '" + preset + "'");
}

// ---- checkpoint IO ----

namespace {

void write_doubles_le(std::ostream& out, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<char*>(buf), 8);
    }
}

void read_doubles_le(std::istream& in, std::vector<double>& v, const std::string& path) {
    for (double& d : v) {
        unsigned char buf[8];
        if (!in.read(reinterpret_cast<char*>(buf), 8))
            throw FormatError(path + ": truncated parameter blob");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
        d = std::bit_cast<double>(bits);
    }
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
    m.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "TSMX v1\n";
    out << "model " << m.name << "\n";
    std::ostringstream nu;
    nu.precision(17);
    nu << m.nu;
    out << "head " << head_name(m.head) << " " << nu.str() << "\n";
    for (const Layer& l : m.layers) {
        if (auto* c = std::get_if<Conv2dLayer>(&l)) {
            out << "layer conv2d " << c->kernel.shape[0] << " " << c->kernel.shape[1]
                << " " << c->kernel.shape[2] << " " << c->kernel.shape[3] << "\n";
        } else if (std::holds_alternative<MaxPool2Layer>(l)) {
            out << "layer maxpool2\n";
        } else if (std::holds_alternative<ReluLayer>(l)) {
            out << "layer relu\n";
        } else if (std::holds_alternative<FlattenLayer>(l)) {
            out << "layer flatten\n";
        } else if (auto* d = std::get_if<FullyConnected>(&l)) {
            out << "layer dense " << d->W.rows() << " " << d->W.cols() << "\n";
        } else if (auto* q = std::get_if<QuadraticLayer>(&l)) {
            out << "layer quadratic " << q->W.rows() << " " << q->W.cols() << "\n";
        }
    }
    out << "end\n";
    m.for_each_param([&out](const Tensor& t) { write_doubles_le(out, t.data); });
    if (!out) throw FormatError(path + ": write failed");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line) || line != "TSMX v1")
        throw FormatError(path + ": bad manifest header '" + line + "'");
    Model m;
    while (std::getline(in, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "model") {
            ls >> m.name;
        } else if (tag == "head") {
            std::string h;
            ls >> h >> m.nu;
            m.head = head_from_name(h);
        } else if (tag == "layer") {
            std::string kind;
            ls >> kind;
            if (kind == "conv2d") {
                std::size_t o, c, kh, kw;
                ls >> o >> c >> kh >> kw;
                m.layers.push_back(
                    Conv2dLayer{Tensor::zeros({o, c, kh, kw}), Tensor::zeros({o})});
            } else if (kind == "maxpool2") {
                m.layers.push_back(MaxPool2Layer{});
            } else if (kind == "relu") {
                m.layers.push_back(ReluLayer{});
            } else if (kind == "flatten") {
                m.layers.push_back(FlattenLayer{});
            } else if (kind == "dense") {
                std::size_t r, c;
                ls >> r >> c;
                m.layers.push_back(
                    FullyConnected{Tensor::zeros({r, c}), Tensor::zeros({r})});
            } else if (kind == "quadratic") {
                std::size_t r, c;
                ls >> r >> c;
                m.layers.push_back(QuadraticLayer{Tensor::zeros({r, c})});
            } else {
                throw FormatError(path + ": unknown layer kind '" + kind + "'");
            }
            if (!ls && kind != "maxpool2" && kind != "relu" && kind != "flatten")
                throw FormatError(path + ": malformed layer line '" + line + "'");
        } else {
            throw FormatError(path + ": unknown manifest tag '" + tag + "'");
        }
    }
    if (line != "end") throw FormatError(path + ": missing 'end' line");
    m.for_each_param([&in, &path](Tensor& t) { read_doubles_le(in, t.data, path); });
    m.validate();
    return m;
}

}  // namespace tsmx
