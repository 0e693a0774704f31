#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tsmx/tensor.hpp"

namespace tsmx {

struct LabeledDataset {
    Tensor images;  // [n x ...sample dims], pixel values in [0, 1]
    std::vector<std::size_t> labels;
    std::string name;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    /// Per-sample shape (leading extent dropped).
    Shape sample_shape() const {
        return Shape(images.shape.begin() + 1, images.shape.end());
    }
};

/// Unlabeled sample pool used as an out-of-distribution source.
struct OodSource {
    std::string name;
    Tensor samples;  // [n x ...sample dims]
};

/// Big-endian IDX pair (image magic 0x00000803, label magic 0x00000801).
/// Pixels are scaled by 1/255. Images come back as [n x 1 x h x w].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        const std::string& name = "idx");

/// Keep the first n samples.
LabeledDataset take_prefix(const LabeledDataset& d, std::size_t n);

/// Seeded 2-D Gaussian blobs, one class per center.
LabeledDataset synth_clusters(std::size_t n_per_class,
                              const std::vector<std::array<double, 2>>& centers,
                              double std_dev, std::uint64_t seed);

/// The three-cluster layout used by the toy classifier: radius 2 at
/// angles 90/210/330 degrees, std 0.4.
std::vector<std::array<double, 2>> toy_cluster_centers();

/// i.i.d. noise images, mean 0.5 / std 0.25, clipped to [0, 1].
OodSource gaussian_noise_ood(std::size_t n, const Shape& sample_shape,
                             std::uint64_t seed);

struct Batch {
    Tensor X;  // [d x nb] when as_columns, else [nb x ...sample dims]
    std::vector<std::size_t> y;
    std::vector<std::size_t> indices;  // positions in the source dataset
};

/// Splits a dataset into batches covering every sample exactly once; the
/// final short batch is included. Shuffle order is a pure function of seed.
std::vector<Batch> batches(const LabeledDataset& d, std::size_t batch_size,
                           std::uint64_t seed, bool shuffle, bool as_columns);

/// Stacks samples [first, first+count) of a sample pool into a model input,
/// either as columns [d x count] or as an image batch [count x ...dims].
Tensor stack_samples(const Tensor& pool, std::size_t first, std::size_t count,
                     bool as_columns);

}  // namespace tsmx
