#pragma once

#include <random>
#include <set>
#include <vector>

#include "millwatch/simsource.hpp"
#include "millwatch/types.hpp"

namespace millwatch {

struct DetectorSpec {
    std::string name;
    std::set<int> supported_profiles;
    double latency_model_ms = 0;  // fixed per-frame delay for bench realism
};

class DetectorRegistry {
public:
    void add(DetectorSpec spec);
    /// Unsupported profile is a configuration error, raised at startup.
    const DetectorSpec& select_model(int profile_mm) const;
    bool empty() const { return specs_.empty(); }

private:
    std::vector<DetectorSpec> specs_;
};

struct OracleNoise {
    double center_noise_px = 0;  // sigma of Gaussian jitter on true centers
    double miss_rate = 0;        // P(true object yields no detection)
    double fp_rate = 0;          // P(one spurious Rod per frame)
    uint64_t seed = 0;
};

void validate_noise(const OracleNoise& n);

/// Detection stage interface; the bundled implementation is the ground-truth
/// oracle. A trained-model adapter would plug in here.
class Detector {
public:
    virtual ~Detector() = default;
    virtual std::vector<Detection> detect(const Frame& frame, const GroundTruthRecord& gt) = 0;
};

/// Emits detections from ground truth with configurable error characteristics.
/// PRNG is mt19937_64 re-keyed per frame from (seed, frame_seq), so results
/// are a pure function of (seed, frame_seq, gt) regardless of call order.
class OracleDetector final : public Detector {
public:
    OracleDetector(OracleNoise noise, SceneGeometry geometry = {});
    std::vector<Detection> detect(const Frame& frame, const GroundTruthRecord& gt) override;

private:
    OracleNoise noise_;
    SceneGeometry geo_;
};

/// 2x2 block nearest-neighbor demosaic (RGGB layout): R from the R site, G as
/// the half-up-rounded mean of the two G sites, B from the B site, replicated
/// across the block. Requires BayerRG8 and even dimensions.
Frame demosaic_rg8(const Frame& frame);

/// Passes iff data length matches format x dimensions. Descriptor frames
/// (empty data) pass; zero-area frames fail.
void validate_format(const Frame& frame);

}  // namespace millwatch
