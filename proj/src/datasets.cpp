#include "tsmx/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "tsmx/rng.hpp"

namespace tsmx {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw FormatError(path + ": truncated header");
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::ifstream open_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");
    return in;
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        const std::string& name) {
    std::ifstream imgs = open_file(images_path);
    std::uint32_t magic = read_be32(imgs, images_path);
    if (magic != kImageMagic)
        throw FormatError(images_path + ": bad image magic " + hex32(magic) +
                          ", expected " + hex32(kImageMagic));
    std::uint32_t n = read_be32(imgs, images_path);
    std::uint32_t h = read_be32(imgs, images_path);
    std::uint32_t w = read_be32(imgs, images_path);
    std::vector<unsigned char> raw(std::size_t(n) * h * w);
    if (!imgs.read(reinterpret_cast<char*>(raw.data()), raw.size()))
        throw FormatError(images_path + ": truncated pixel data, expected " +
                          std::to_string(raw.size()) + " bytes");

    std::ifstream labs = open_file(labels_path);
    std::uint32_t lmagic = read_be32(labs, labels_path);
    if (lmagic != kLabelMagic)
        throw FormatError(labels_path + ": bad label magic " + hex32(lmagic) +
                          ", expected " + hex32(kLabelMagic));
    std::uint32_t ln = read_be32(labs, labels_path);
    if (ln != n)
        throw FormatError(labels_path + ": " + std::to_string(ln) + " labels for " +
                          std::to_string(n) + " images");
    std::vector<unsigned char> lraw(ln);
    if (!labs.read(reinterpret_cast<char*>(lraw.data()), lraw.size()))
        throw FormatError(labels_path + ": truncated label data");

    LabeledDataset d;
    d.name = name;
    d.images = Tensor::zeros({n, 1, h, w});
    for (std::size_t i = 0; i < raw.size(); ++i)
        d.images.data[i] = raw[i] / 255.0;
    d.labels.resize(ln);
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < ln; ++i) {
        d.labels[i] = lraw[i];
        max_label = std::max<std::size_t>(max_label, lraw[i]);
    }
    d.num_classes = max_label + 1;
    return d;
}

LabeledDataset take_prefix(const LabeledDataset& d, std::size_t n) {
    n = std::min(n, d.size());
    LabeledDataset out;
    out.name = d.name;
    out.num_classes = d.num_classes;
    std::size_t per = d.images.size() / d.images.shape[0];
    Shape s = d.images.shape;
    s[0] = n;
    out.images = Tensor(s, std::vector<double>(d.images.data.begin(),
                                               d.images.data.begin() + n * per));
    out.labels.assign(d.labels.begin(), d.labels.begin() + n);
    return out;
}

std::vector<std::array<double, 2>> toy_cluster_centers() {
    std::vector<std::array<double, 2>> centers;
    for (double deg : {90.0, 210.0, 330.0}) {
        double rad = deg * M_PI / 180.0;
        centers.push_back({2.0 * std::cos(rad), 2.0 * std::sin(rad)});
    }
    return centers;
}

LabeledDataset synth_clusters(std::size_t n_per_class,
                              const std::vector<std::array<double, 2>>& centers,
                              double std_dev, std::uint64_t seed) {
    if (std_dev <= 0.0) throw DomainError("synth_clusters: std must be positive");
    if (centers.size() < 2) throw DomainError("synth_clusters: need >= 2 centers");
    std::size_t n = n_per_class * centers.size();
    LabeledDataset d;
    d.name = "synth_clusters";
    d.num_classes = centers.size();
    d.images = Tensor::zeros({n, 2});
    d.labels.resize(n);
    Pcg32 rng(seed);
    std::size_t row = 0;
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t k = 0; k < n_per_class; ++k, ++row) {
            d.images.data[2 * row] = centers[c][0] + std_dev * rng.gaussian();
            d.images.data[2 * row + 1] = centers[c][1] + std_dev * rng.gaussian();
            d.labels[row] = c;
        }
    return d;
}

OodSource gaussian_noise_ood(std::size_t n, const Shape& sample_shape,
                             std::uint64_t seed) {
    if (n == 0) throw DomainError("gaussian_noise_ood: n must be positive");
    Shape s;
    s.push_back(n);
    s.insert(s.end(), sample_shape.begin(), sample_shape.end());
    OodSource src;
    src.name = "gaussian_noise";
    src.samples = Tensor::zeros(s);
    Pcg32 rng(seed);
    for (double& v : src.samples.data)
        v = std::clamp(0.5 + 0.25 * rng.gaussian(), 0.0, 1.0);
    return src;
}

Tensor stack_samples(const Tensor& pool, std::size_t first, std::size_t count,
                     bool as_columns) {
    std::size_t per = pool.size() / pool.shape[0];
    if (as_columns) {
        Tensor x = Tensor::zeros({per, count});
        for (std::size_t j = 0; j < count; ++j)
            for (std::size_t k = 0; k < per; ++k)
                x.data[k * count + j] = pool.data[(first + j) * per + k];
        return x;
    }
    Shape s = pool.shape;
    s[0] = count;
    return Tensor(s, std::vector<double>(pool.data.begin() + first * per,
                                         pool.data.begin() + (first + count) * per));
}

std::vector<Batch> batches(const LabeledDataset& d, std::size_t batch_size,
                           std::uint64_t seed, bool shuffle_samples, bool as_columns) {
    if (batch_size == 0) throw DomainError("batches: batch_size must be >= 1");
    std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle_samples) {
        Pcg32 rng(seed);
        shuffle(order, rng);
    }
    std::size_t per = d.images.size() / d.images.shape[0];
    std::vector<Batch> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t nb = std::min(batch_size, n - start);
        Batch b;
        b.indices.assign(order.begin() + start, order.begin() + start + nb);
        b.y.resize(nb);
        if (as_columns) {
            b.X = Tensor::zeros({per, nb});
            for (std::size_t j = 0; j < nb; ++j)
                for (std::size_t k = 0; k < per; ++k)
                    b.X.data[k * nb + j] = d.images.data[b.indices[j] * per + k];
        } else {
            Shape s = d.images.shape;
            s[0] = nb;
            b.X = Tensor::zeros(s);
            for (std::size_t j = 0; j < nb; ++j)
                std::copy_n(d.images.data.begin() + b.indices[j] * per, per,
                            b.X.data.begin() + j * per);
        }
        for (std::size_t j = 0; j < nb; ++j) b.y[j] = d.labels[b.indices[j]];
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace tsmx
