#pragma once

#include <span>
#include <string>
#include <vector>

#include "fednam/matrix.hpp"

namespace fednam {

// Minimal binary PGM/PPM support for the overlay exports. Gray values
// in [0,1] are quantized to bytes as round(v * 255).

// P5 graymap, maxval 255.
void write_pgm(const std::string& path, std::span<const double> image, std::size_t height,
               std::size_t width);

// P6 pixmap. Unflagged pixels stay gray (g,g,g); flagged pixels become
// (255, g/2, g/2), so a pixel is flagged exactly when its red and green
// channels differ.
void write_ppm(const std::string& path, std::span<const double> image, std::size_t height,
               std::size_t width, const std::vector<bool>& flagged);

struct PgmImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;  // bytes scaled back into [0,1]
};

struct PpmOverlay {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> gray;    // green channel scaled into [0,1]
    std::vector<bool> flagged;   // red channel != green channel
};

PgmImage read_pgm(const std::string& path);
PpmOverlay read_ppm(const std::string& path);

}  // namespace fednam
