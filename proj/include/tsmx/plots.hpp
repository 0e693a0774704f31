#pragma once

#include <string>

#include "tsmx/datasets.hpp"
#include "tsmx/model.hpp"

namespace tsmx {

/// Heat map of the max class probability of a 2-d-input model over a
/// grid x grid box [lo, hi]^2, with training points overlaid. Returns the
/// SVG document (grid^2 rect elements plus one circle per point).
std::string decision_grid_svg(const Model& model, std::size_t grid, double lo,
                              double hi, const LabeledDataset* overlay);

/// Four panels over one x axis: Gaussian and Student-t class-conditional
/// densities at locations mu1/mu2 and their binary posteriors, each
/// sampled at n_points.
std::string pdf_curves_svg(double mu1, double mu2, double nu, std::size_t n_points,
                           double x_lo, double x_hi);

}  // namespace tsmx
