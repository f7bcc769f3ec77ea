#pragma once

#include <iosfwd>
#include <vector>

#include "jm/dynamics.hpp"

namespace jm {

struct Viewport {
    Complex center{0.0, 0.0};
    double width = 4.0;
    int w = 512;
    int h = 512;

    double pixel_width() const { return width / w; }
    /// Center of pixel (i, j), row j counted from the top.
    Complex pixel(int i, int j) const;
    /// Throws std::invalid_argument on width <= 0 or fewer than 64x64 pixels.
    void validate() const;
};

struct AttractingCycle {
    std::vector<SpherePoint> points;
    double multiplier = 0.0;  // modulus
};

/// Attracting cycles found from the critical orbits (every attracting cycle
/// attracts one), in critical point order.
std::vector<AttractingCycle> attracting_cycles(const RationalMap& map, int max_iter = 4000);

inline constexpr int kJuliaProxy = -1;

struct PointClass {
    int label = kJuliaProxy;  // cycle index
    int iterations = 0;       // steps until captured, max_iter when not
};

/// Index of the cycle whose chordal radius-1e-6 neighbourhood the orbit of z
/// enters within max_iter steps.
PointClass classify_point(const RationalMap& map, const SpherePoint& z, const std::vector<AttractingCycle>& cycles,
                          int max_iter = 500);

struct Raster {
    Viewport viewport;
    std::vector<int> labels;      // row major, w * h
    std::vector<int> iterations;
    int cycles = 0;

    int label(int i, int j) const { return labels[static_cast<std::size_t>(j) * viewport.w + i]; }
    /// Pixels per label, index 0 for the Julia proxy and k + 1 for cycle k.
    std::vector<long> histogram() const;
};

Raster render(const RationalMap& map, const Viewport& vp, const std::vector<AttractingCycle>& cycles,
              int max_iter = 500, int threads = 0);

/// Binary P6: hue by basin, brightness falling with attraction time, Julia
/// proxy black.
void write_ppm(std::ostream& out, const Raster& raster);

}  // namespace jm
