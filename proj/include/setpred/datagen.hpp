#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "setpred/geometry.hpp"
#include "setpred/set_loss.hpp"

namespace setpred {

struct Element {
  AABox box;  // canvas units, corner form
  std::size_t cls = 0;
};

// One dataset row. For CAPTCHA the input is the flattened scene followed by
// the flattened query tile, so input.size() = w*h + query_side^2; for the
// other tasks input.size() = w*h. scene_values/query are generation-time
// metadata used by verify_unique_solution; they are not serialized.
struct Instance {
  std::uint64_t id = 0;
  std::size_t w = 0, h = 0;
  std::vector<double> input;
  std::vector<std::size_t> labels;  // tagging
  std::vector<Element> elements;    // detect / captcha
  std::vector<int> scene_values;    // captcha only
  int query = -1;                   // captcha only
};

using Dataset = std::vector<Instance>;

constexpr std::size_t kMultilabelCanvas = 32;
constexpr std::size_t kDetectCanvas = 32;
constexpr std::size_t kCaptchaSceneW = 96;
constexpr std::size_t kCaptchaSceneH = 24;
constexpr std::size_t kCaptchaQuerySide = 16;

// 5x7 bitmap of glyphs '0'..'9' and 'A'..'F'; row-major, 1 = on.
const char* glyph_bitmap(char c);

// Each instance renders a random subset (size 1..min(5, num_labels)) of the
// num_labels glyph cells on a 32x32 canvas over background noise; gt = the
// visible label ids in ascending order. Deterministic per (seed, id).
Dataset gen_multilabel(std::size_t n, std::size_t num_labels, std::uint64_t seed);

enum class DetectOrder { placement, sorted_x, shuffled };

struct DetectCfg {
  std::size_t n = 0;
  std::size_t min_objects = 0;
  std::size_t max_objects = 5;
  double overlap_level = 0.0;  // max allowed pairwise IoU
  DetectOrder order = DetectOrder::placement;
  std::uint64_t seed = 0;
};

// Filled rectangles on a 32x32 canvas with controlled pairwise IoU; single
// class. Cardinality uniform on {min_objects..max_objects}.
Dataset gen_toy_detection(const DetectCfg& cfg);
Dataset gen_toy_detection(std::size_t n, std::size_t max_objects, double overlap_level,
                          std::uint64_t seed);

// Scene of 2..scene_digits digits (values 1..9) plus a query digit q in 0..9
// rendered on a separate tile; exactly one subset of the scene sums to q
// (q = 0 has the unique empty solution); gt = the boxes of that subset.
Dataset gen_captcha(std::size_t n, std::size_t scene_digits, std::uint64_t seed);

// Exhaustive subset-sum count over the instance's scene values equals 1.
bool verify_unique_solution(const Instance& inst);

// Training target view of an instance: tagging uses label ids; box tasks use
// center-form states normalized to [0,1] by the canvas dimensions.
GroundTruthSet instance_ground_truth(const Instance& inst, Task task);

// Inverse of the normalization for predicted raw slot states.
AABox denormalize_box(const CenterBox& normalized, std::size_t canvas_w,
                      std::size_t canvas_h);

struct IdxFile {
  std::uint32_t type_code = 0;       // third magic byte; 0x08 = unsigned byte
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> bytes;   // row-major payload
};

// Big-endian IDX decoding (magic 0x00000803 images / 0x00000801 labels).
// Malformed input raises FormatError naming the byte offset.
IdxFile load_idx(const std::string& path);

// Pixels scaled to [0,1]; requires a 3-dimensional (image) file.
std::vector<std::vector<double>> idx_to_images(const IdxFile& f);

}  // namespace setpred
