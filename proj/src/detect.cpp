#include "millwatch/detect.hpp"

#include <cmath>
#include <numbers>

namespace millwatch {

void DetectorRegistry::add(DetectorSpec spec) {
    if (spec.supported_profiles.empty())
        throw std::invalid_argument("detector '" + spec.name + "': supported_profiles empty");
    specs_.push_back(std::move(spec));
}

const DetectorSpec& DetectorRegistry::select_model(int profile_mm) const {
    if (specs_.empty()) throw std::invalid_argument("detector registry is empty");
    for (const auto& s : specs_)
        if (s.supported_profiles.count(profile_mm)) return s;
    throw std::invalid_argument("no detector supports profile " + std::to_string(profile_mm) +
                                "mm");
}

void validate_noise(const OracleNoise& n) {
    if (n.miss_rate < 0 || n.miss_rate > 1)
        throw std::invalid_argument("oracle noise: miss_rate out of [0,1]");
    if (n.fp_rate < 0 || n.fp_rate > 1)
        throw std::invalid_argument("oracle noise: fp_rate out of [0,1]");
    if (n.center_noise_px < 0) throw std::invalid_argument("oracle noise: negative sigma");
}

OracleDetector::OracleDetector(OracleNoise noise, SceneGeometry geometry)
    : noise_(noise), geo_(geometry) {
    validate_noise(noise_);
}

namespace {

// Hand-rolled draws over mt19937_64 output so results match across standard
// library implementations (std distributions are not portable).
double uniform01(std::mt19937_64& rng) {
    return double(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

double gaussian(std::mt19937_64& rng, double sigma) {
    // Box-Muller; one value per call, fixed two-draw cost.
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::vector<Detection> OracleDetector::detect(const Frame& frame, const GroundTruthRecord& gt) {
    if (frame.seq != gt.frame_seq)
        throw std::invalid_argument("oracle detect: frame seq " + std::to_string(frame.seq) +
                                    " != ground truth seq " + std::to_string(gt.frame_seq));
    std::mt19937_64 rng(noise_.seed ^ (gt.frame_seq * 0x9e3779b97f4a7c15ULL + 1));
    std::vector<Detection> out;

    auto emit = [&](ObjectClass cls, double cx, double cy, double half_w, double half_h) {
        bool missed = uniform01(rng) < noise_.miss_rate;
        double jx = gaussian(rng, noise_.center_noise_px);
        double jy = gaussian(rng, noise_.center_noise_px);
        double conf = uniform(rng, 0.5, 1.0);
        if (missed) return;  // draws above keep the stream position fixed
        double x = cx + jx, y = cy + jy;
        out.push_back(make_detection(cls, {x - half_w, y - half_h, x + half_w, y + half_h}, conf,
                                     frame.seq));
    };

    if (gt.rod_present && gt.rod_center)
        emit(ObjectClass::Rod, gt.rod_center->x, gt.rod_center->y, geo_.rod_half_w,
             geo_.rod_half_h);
    emit(ObjectClass::Flapper, gt.flapper_pos.x, gt.flapper_pos.y, geo_.flapper_half,
         geo_.flapper_half);
    emit(ObjectClass::Diverter, gt.diverter_x, geo_.diverter_y, geo_.diverter_half,
         geo_.diverter_half);

    if (uniform01(rng) < noise_.fp_rate) {
        double cx = uniform(rng, 10.0, double(geo_.width) - 10.0);
        double cy = uniform(rng, 10.0, double(geo_.height) - 10.0);
        double conf = uniform(rng, 0.1, 0.5);
        out.push_back(make_detection(ObjectClass::Rod, {cx - 5, cy - 5, cx + 5, cy + 5}, conf,
                                     frame.seq));
    }
    return out;
}

Frame demosaic_rg8(const Frame& frame) {
    if (frame.pixel_format != PixelFormat::BayerRG8)
        throw std::invalid_argument("demosaic: frame is not BayerRG8");
    if (frame.width == 0 || frame.height == 0)
        throw std::invalid_argument("demosaic: empty frame");
    if (frame.width % 2 != 0) throw std::invalid_argument("demosaic: odd width");
    if (frame.height % 2 != 0) throw std::invalid_argument("demosaic: odd height");
    validate_format(frame);
    if (!frame.has_pixels()) throw std::invalid_argument("demosaic: descriptor frame has no pixels");

    const uint32_t w = frame.width, h = frame.height;
    std::vector<uint8_t> rgb(size_t(w) * h * 3);
    for (uint32_t by = 0; by < h; by += 2) {
        for (uint32_t bx = 0; bx < w; bx += 2) {
            uint8_t r = frame.data[size_t(by) * w + bx];
            uint8_t g1 = frame.data[size_t(by) * w + bx + 1];
            uint8_t g2 = frame.data[size_t(by + 1) * w + bx];
            uint8_t b = frame.data[size_t(by + 1) * w + bx + 1];
            uint8_t g = uint8_t((unsigned(g1) + unsigned(g2) + 1) / 2);  // mean, half-up
            for (uint32_t dy = 0; dy < 2; ++dy)
                for (uint32_t dx = 0; dx < 2; ++dx) {
                    size_t off = (size_t(by + dy) * w + (bx + dx)) * 3;
                    rgb[off] = r;
                    rgb[off + 1] = g;
                    rgb[off + 2] = b;
                }
        }
    }
    return make_frame(frame.camera_id, frame.seq, frame.ts_acquire, w, h, PixelFormat::RGB8,
                      std::move(rgb), frame.profile_mm);
}

void validate_format(const Frame& frame) {
    if (frame.width == 0 || frame.height == 0) throw std::invalid_argument("empty frame");
    if (!frame.has_pixels()) return;  // descriptor frames carry no pixels to check
    size_t expect = size_t(frame.width) * frame.height * bytes_per_pixel(frame.pixel_format);
    if (frame.data.size() != expect)
        throw std::invalid_argument("pixel format mismatch: " + std::to_string(frame.data.size()) +
                                    " bytes, expected " + std::to_string(expect) + " for " +
                                    to_string(frame.pixel_format));
}

}  // namespace millwatch
