#include "gorl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gorl/errors.hpp"

namespace gorl {

PcaProjection pca_project_1d(const Matrix& samples) {
    const int n = samples.rows();
    const int d = samples.cols();
    if (n < 2) throw std::invalid_argument("pca_project_1d: need at least two samples");

    std::vector<double> mean(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) mean[j] += samples(i, j) / n;

    Matrix centered(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) centered(i, j) = samples(i, j) - mean[j];

    // covariance, 1/(n-1)
    Matrix cov(d, d);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) cov(a, b) += centered(i, a) * centered(i, b) / (n - 1);

    double trace = 0.0;
    for (int a = 0; a < d; ++a) trace += cov(a, a);
    if (trace < 1e-300) throw NumericError("pca_project_1d: zero variance (all samples identical)");

    // power iteration seeded from the dominant-diagonal column
    int seed_col = 0;
    for (int a = 1; a < d; ++a)
        if (cov(a, a) > cov(seed_col, seed_col)) seed_col = a;
    std::vector<double> v(d);
    for (int a = 0; a < d; ++a) v[a] = cov(a, seed_col);
    {
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm < 1e-300) {
            v.assign(d, 0.0);
            v[seed_col] = 1.0;
        } else {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
    }
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<double> w(d, 0.0);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) w[a] += cov(a, b) * v[b];
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-300) break;
        double diff = 0.0;
        for (int a = 0; a < d; ++a) {
            w[a] /= norm;
            diff = std::max(diff, std::abs(w[a] - v[a]));
        }
        const bool flipped = [&] {
            double dot = 0.0;
            for (int a = 0; a < d; ++a) dot += w[a] * v[a];
            return dot < 0.0;
        }();
        v = w;
        if (!flipped && diff < 1e-15) break;
    }

    // sign convention: the largest-magnitude coordinate is positive
    int big = 0;
    for (int a = 1; a < d; ++a)
        if (std::abs(v[a]) > std::abs(v[big])) big = a;
    if (v[big] < 0)
        for (double& x : v) x = -x;

    PcaProjection out;
    out.direction = v;
    out.projection.resize(n);
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        double p = 0.0;
        for (int j = 0; j < d; ++j) p += centered(i, j) * v[j];
        out.projection[i] = p;
        var += p * p;
    }
    out.projected_variance = var / (n - 1);
    return out;
}

namespace {

double kde_bandwidth(const std::vector<double>& samples, double bandwidth_factor) {
    const size_t n = samples.size();
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    // Scott's rule base; degenerate samples keep a visible spike.
    if (sd <= 0.0) return 1e-3;
    return bandwidth_factor * sd * std::pow(static_cast<double>(n), -0.2);
}

}  // namespace

DensityEstimate kde_density(const std::vector<double>& samples, const std::vector<double>& grid,
                            double bandwidth_factor) {
    if (samples.size() < 2) throw std::invalid_argument("kde_density: need at least two samples");
    DensityEstimate out;
    out.grid = grid;
    out.sample_count = static_cast<int>(samples.size());
    out.bandwidth = kde_bandwidth(samples, bandwidth_factor);
    const double h = out.bandwidth;
    const double norm = 1.0 / (samples.size() * h * std::sqrt(2.0 * std::numbers::pi));
    out.density.resize(grid.size(), 0.0);
    for (size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (double x : samples) {
            const double z = (grid[g] - x) / h;
            acc += std::exp(-0.5 * z * z);
        }
        out.density[g] = norm * acc;
    }
    return out;
}

std::vector<double> default_kde_grid(const std::vector<double>& samples, double bandwidth_factor,
                                     int points) {
    const double h = kde_bandwidth(samples, bandwidth_factor);
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it - 3.0 * h;
    const double hi = *hi_it + 3.0 * h;
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i)
        grid[i] = lo + (hi - lo) * i / (points - 1);
    return grid;
}

double trapezoid_integral(const DensityEstimate& estimate) {
    double acc = 0.0;
    for (size_t i = 0; i + 1 < estimate.grid.size(); ++i)
        acc += 0.5 * (estimate.density[i] + estimate.density[i + 1]) *
               (estimate.grid[i + 1] - estimate.grid[i]);
    return acc;
}

ModeReport count_modes(const DensityEstimate& estimate, double min_prominence) {
    const std::vector<double>& d = estimate.density;
    const int n = static_cast<int>(d.size());
    ModeReport out;
    if (n < 3) return out;

    double global_max = 0.0;
    for (double x : d) global_max = std::max(global_max, x);
    if (global_max <= 0.0) return out;
    const double threshold = min_prominence * global_max;

    for (int i = 1; i + 1 < n; ++i) {
        // plateau-aware local maximum: strictly rising into i, strictly
        // falling after the flat run
        if (!(d[i] > d[i - 1])) continue;
        int j = i;
        while (j + 1 < n && d[j + 1] == d[i]) ++j;
        if (j + 1 >= n || !(d[j + 1] < d[i])) continue;

        // topographic prominence: walk out to the first higher point on
        // each side, tracking the valley floor
        double left_base = d[i];
        for (int k = i - 1; k >= 0; --k) {
            left_base = std::min(left_base, d[k]);
            if (d[k] > d[i]) break;
        }
        double right_base = d[i];
        for (int k = j + 1; k < n; ++k) {
            right_base = std::min(right_base, d[k]);
            if (d[k] > d[i]) break;
        }
        const double prominence = d[i] - std::max(left_base, right_base);
        if (prominence >= threshold) {
            out.count += 1;
            out.locations.push_back(0.5 * (estimate.grid[i] + estimate.grid[j]));
        }
        i = j;
    }
    return out;
}

CurveSeries smooth_curve(const std::vector<double>& steps, const std::vector<double>& raw,
                         double sigma) {
    if (steps.size() != raw.size())
        throw std::invalid_argument("smooth_curve: axis/value length mismatch");
    if (sigma < 0.0) throw std::invalid_argument("smooth_curve: sigma must be >= 0");
    CurveSeries out;
    out.steps = steps;
    out.raw = raw;
    out.sigma = sigma;
    const int n = static_cast<int>(raw.size());
    if (sigma == 0.0 || n == 0) {
        out.smoothed = raw;
        return out;
    }

    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> weights(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        weights[k + radius] = std::exp(-0.5 * (k / sigma) * (k / sigma));
        total += weights[k + radius];
    }

    auto reflect = [n](int i) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -1 - i;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };

    out.smoothed.resize(n);
    for (int i = 0; i < n; ++i) {
        // difference form: constant stretches pass through unchanged
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
            acc += weights[k + radius] * (raw[reflect(i + k)] - raw[i]);
        out.smoothed[i] = raw[i] + acc / total;
    }
    return out;
}

}  // namespace gorl
