#include "tsmx/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tsmx/stats.hpp"

namespace tsmx {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// dark blue (uncertain) to yellow (confident)
std::string heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    int r = static_cast<int>(std::lround(68 + t * (253 - 68)));
    int g = static_cast<int>(std::lround(1 + t * (231 - 1)));
    int b = static_cast<int>(std::lround(84 + t * (37 - 84)));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

const char* kClassColors[] = {"#e41a1c", "#377eb8", "#4daf4a",
                              "#984ea3", "#ff7f00", "#a65628"};

void polyline(std::ostringstream& svg, const std::vector<double>& xs,
              const std::vector<double>& ys, double px, double py, double pw,
              double ph, double y_max, const char* color) {
    double x_lo = xs.front(), x_hi = xs.back();
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double sx = px + (xs[i] - x_lo) / (x_hi - x_lo) * pw;
        double sy = py + ph - std::clamp(ys[i] / y_max, 0.0, 1.0) * ph;
        svg << fmt(sx) << "," << fmt(sy) << " ";
    }
    svg << "\"/>\n";
}

}  // namespace

std::string decision_grid_svg(const Model& model, std::size_t grid, double lo,
                              double hi, const LabeledDataset* overlay) {
    if (model.image_input())
        throw ConfigError("decision_grid_svg: model must take 2-d column input");
    std::size_t in_dim = 0;
    if (auto* d = std::get_if<FullyConnected>(&model.layers.front()))
        in_dim = d->W.cols();
    else if (auto* q = std::get_if<QuadraticLayer>(&model.layers.front()))
        in_dim = q->W.cols();
    if (in_dim != 2) throw ConfigError("decision_grid_svg: model input is not 2-d");

    const double size = 600.0;
    double cell = size / static_cast<double>(grid);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
        << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << " " << size
        << "\">\n";

    // evaluate one grid row per forward pass
    for (std::size_t gy = 0; gy < grid; ++gy) {
        double y = hi - (gy + 0.5) * (hi - lo) / grid;  // svg rows top-down
        Tensor X = Tensor::zeros({2, grid});
        for (std::size_t gx = 0; gx < grid; ++gx) {
            X.at(0, gx) = lo + (gx + 0.5) * (hi - lo) / grid;
            X.at(1, gx) = y;
        }
        Tensor p = model.probabilities(X);
        for (std::size_t gx = 0; gx < grid; ++gx) {
            double m = p.at(0, gx);
            for (std::size_t i = 1; i < p.rows(); ++i) m = std::max(m, p.at(i, gx));
            svg << "<rect x=\"" << fmt(gx * cell) << "\" y=\"" << fmt(gy * cell)
                << "\" width=\"" << fmt(cell + 0.5) << "\" height=\"" << fmt(cell + 0.5)
                << "\" fill=\"" << heat_color((m - 1.0 / p.rows()) / (1.0 - 1.0 / p.rows()))
                << "\"/>\n";
        }
    }

    if (overlay) {
        for (std::size_t i = 0; i < overlay->size(); ++i) {
            double x = overlay->images.data[2 * i];
            double y = overlay->images.data[2 * i + 1];
            double sx = (x - lo) / (hi - lo) * size;
            double sy = (hi - y) / (hi - lo) * size;
            svg << "<circle cx=\"" << fmt(sx) << "\" cy=\"" << fmt(sy)
                << "\" r=\"2.5\" fill=\""
                << kClassColors[overlay->labels[i] % 6] << "\" stroke=\"black\" "
                << "stroke-width=\"0.4\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string pdf_curves_svg(double mu1, double mu2, double nu, std::size_t n_points,
                           double x_lo, double x_hi) {
    if (n_points < 2) throw ConfigError("pdf_curves_svg: need >= 2 sample points");
    // conditionals follow the (x + center) convention: mode at -center
    ClassConditional g1{ClassConditional::Kind::gaussian, Tensor({1}, {-mu1}), 0.0};
    ClassConditional g2{ClassConditional::Kind::gaussian, Tensor({1}, {-mu2}), 0.0};
    ClassConditional t1{ClassConditional::Kind::student_t, Tensor({1}, {-mu1}), nu};
    ClassConditional t2{ClassConditional::Kind::student_t, Tensor({1}, {-mu2}), nu};

    std::vector<double> xs(n_points);
    std::vector<double> gp1(n_points), gp2(n_points), gpost(n_points);
    std::vector<double> tp1(n_points), tp2(n_points), tpost(n_points);
    double pdf_max = 0.0;
    for (std::size_t i = 0; i < n_points; ++i) {
        double x = x_lo + (x_hi - x_lo) * i / (n_points - 1.0);
        xs[i] = x;
        Tensor xv({1}, {x});
        gp1[i] = gaussian_pdf(g1, xv);
        gp2[i] = gaussian_pdf(g2, xv);
        tp1[i] = t_pdf(t1, xv);
        tp2[i] = t_pdf(t2, xv);
        gpost[i] = bayes_posterior({g1, g2}, xv)[0];
        tpost[i] = bayes_posterior({t1, t2}, xv)[0];
        pdf_max = std::max({pdf_max, gp1[i], gp2[i], tp1[i], tp2[i]});
    }

    const double pw = 360, ph = 220, pad = 40;
    double width = 2 * pw + 3 * pad, height = 2 * ph + 3 * pad;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n";
    struct Panel {
        const char* title;
        double px, py, y_max;
        const std::vector<double>*a, *b;
    };
    Panel panels[] = {
        {"gaussian densities", pad, pad, pdf_max * 1.05, &gp1, &gp2},
        {"gaussian posterior", 2 * pad + pw, pad, 1.0, &gpost, nullptr},
        {"t densities", pad, 2 * pad + ph, pdf_max * 1.05, &tp1, &tp2},
        {"t posterior", 2 * pad + pw, 2 * pad + ph, 1.0, &tpost, nullptr},
    };
    for (const Panel& p : panels) {
        svg << "<rect x=\"" << p.px << "\" y=\"" << p.py << "\" width=\"" << pw
            << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#888\"/>\n";
        svg << "<text x=\"" << p.px + 6 << "\" y=\"" << p.py + 16
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << p.title
            << (p.b ? "" : " p(C1|x)") << "</text>\n";
        polyline(svg, xs, *p.a, p.px, p.py, pw, ph, p.y_max, "#e41a1c");
        if (p.b) polyline(svg, xs, *p.b, p.px, p.py, pw, ph, p.y_max, "#377eb8");
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace tsmx
