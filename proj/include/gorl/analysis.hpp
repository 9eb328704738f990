#pragma once

#include <vector>

#include "gorl/matrix.hpp"

namespace gorl {

struct PcaProjection {
    std::vector<double> projection;  // centered samples projected on the top component
    std::vector<double> direction;   // unit vector; largest-magnitude coordinate positive
    double projected_variance = 0.0;  // 1/(n-1) normalization
};

// Projection onto the top principal component of the centered sample
// covariance; throws on zero-variance input.
PcaProjection pca_project_1d(const Matrix& samples);

struct DensityEstimate {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
    int sample_count = 0;
};

// Gaussian-kernel density with bandwidth = factor * sigma_hat * n^(-1/5)
// (Scott's rule base, sample std with n-1). A degenerate sigma_hat falls
// back to a 1e-3 bandwidth so point masses still render as a spike.
DensityEstimate kde_density(const std::vector<double>& samples, const std::vector<double>& grid,
                            double bandwidth_factor);

// 512 uniform points spanning [min - 3h, max + 3h].
std::vector<double> default_kde_grid(const std::vector<double>& samples, double bandwidth_factor,
                                     int points = 512);

double trapezoid_integral(const DensityEstimate& estimate);

struct ModeReport {
    int count = 0;
    std::vector<double> locations;
};

// Local maxima whose topographic prominence exceeds min_prominence times
// the global maximum.
ModeReport count_modes(const DensityEstimate& estimate, double min_prominence = 0.1);

struct CurveSeries {
    std::vector<double> steps;
    std::vector<double> raw;
    std::vector<double> smoothed;
    double sigma = 0.0;
};

// Discrete Gaussian filter in index units with reflected boundaries;
// constant series pass through bit-exactly.
CurveSeries smooth_curve(const std::vector<double>& steps, const std::vector<double>& raw,
                         double sigma);

}  // namespace gorl
