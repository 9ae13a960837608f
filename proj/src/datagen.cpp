#include "setpred/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "setpred/common.hpp"

namespace setpred {

namespace {

constexpr std::size_t kGlyphW = 5, kGlyphH = 7;

const char* kGlyphs[16] = {
    // clang-format off
    ".###."  "#...#"  "#..##"  "#.#.#"  "##..#"  "#...#"  ".###.",  // 0
    "..#.."  ".##.."  "..#.."  "..#.."  "..#.."  "..#.."  ".###.",  // 1
    ".###."  "#...#"  "....#"  "...#."  "..#.."  ".#..."  "#####",  // 2
    "#####"  "....#"  "...#."  "..##."  "....#"  "#...#"  ".###.",  // 3
    "...#."  "..##."  ".#.#."  "#..#."  "#####"  "...#."  "...#.",  // 4
    "#####"  "#...."  "####."  "....#"  "....#"  "#...#"  ".###.",  // 5
    "..##."  ".#..."  "#...."  "####."  "#...#"  "#...#"  ".###.",  // 6
    "#####"  "....#"  "...#."  "..#.."  ".#..."  ".#..."  ".#...",  // 7
    ".###."  "#...#"  "#...#"  ".###."  "#...#"  "#...#"  ".###.",  // 8
    ".###."  "#...#"  "#...#"  ".####"  "....#"  "...#."  ".##..",  // 9
    ".###."  "#...#"  "#...#"  "#####"  "#...#"  "#...#"  "#...#",  // A
    "####."  "#...#"  "#...#"  "####."  "#...#"  "#...#"  "####.",  // B
    ".###."  "#...#"  "#...."  "#...."  "#...."  "#...#"  ".###.",  // C
    "####."  "#...#"  "#...#"  "#...#"  "#...#"  "#...#"  "####.",  // D
    "#####"  "#...."  "#...."  "####."  "#...."  "#...."  "#####",  // E
    "#####"  "#...."  "#...."  "####."  "#...."  "#...."  "#....",  // F
    // clang-format on
};

double quantize3(double v) { return std::round(v * 1000.0) / 1000.0; }

void fill_noise(std::vector<double>& pixels, Rng& rng) {
  for (double& p : pixels) p = rng.uniform() * 0.2;
}

void render_glyph(std::vector<double>& canvas, std::size_t canvas_w, char glyph,
                  std::size_t x, std::size_t y, std::size_t scale, double intensity) {
  const char* bitmap = glyph_bitmap(glyph);
  for (std::size_t gy = 0; gy < kGlyphH; ++gy)
    for (std::size_t gx = 0; gx < kGlyphW; ++gx) {
      if (bitmap[gy * kGlyphW + gx] != '#') continue;
      for (std::size_t sy = 0; sy < scale; ++sy)
        for (std::size_t sx = 0; sx < scale; ++sx)
          canvas[(y + gy * scale + sy) * canvas_w + (x + gx * scale + sx)] = intensity;
    }
}

void quantize_all(std::vector<double>& pixels) {
  for (double& p : pixels) p = quantize3(std::min(1.0, std::max(0.0, p)));
}

// Number of index subsets of values summing to target (the empty subset counts
// for target 0).
std::uint64_t subset_sum_count(const std::vector<int>& values, int target) {
  if (values.size() > 20)
    throw std::invalid_argument("subset_sum_count: more than 20 values");
  std::uint64_t count = 0;
  const std::size_t n = values.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    int s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) s += values[i];
    if (s == target) ++count;
  }
  return count;
}

}  // namespace

const char* glyph_bitmap(char c) {
  if (c >= '0' && c <= '9') return kGlyphs[c - '0'];
  if (c >= 'A' && c <= 'F') return kGlyphs[10 + (c - 'A')];
  throw std::invalid_argument("glyph_bitmap: unsupported glyph");
}

Dataset gen_multilabel(std::size_t n, std::size_t num_labels, std::uint64_t seed) {
  if (num_labels == 0 || num_labels > 16)
    throw std::invalid_argument("gen_multilabel: num_labels must be in [1,16]");
  const std::size_t canvas = kMultilabelCanvas, cell = 8;
  const std::size_t max_subset = std::min<std::size_t>(5, num_labels);
  Dataset data;
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, i);
    Instance inst;
    inst.id = i;
    inst.w = inst.h = canvas;
    inst.input.resize(canvas * canvas);
    fill_noise(inst.input, rng);

    const std::size_t k =
        static_cast<std::size_t>(rng.uniform_int(1, static_cast<long long>(max_subset)));
    std::vector<std::size_t> ids(num_labels);
    std::iota(ids.begin(), ids.end(), 0);
    rng.shuffle(ids);
    ids.resize(k);
    std::sort(ids.begin(), ids.end());

    for (std::size_t lab : ids) {
      const std::size_t cx = (lab % 4) * cell + 1, cy = (lab / 4) * cell;
      const char glyph = lab < 10 ? static_cast<char>('0' + lab)
                                  : static_cast<char>('A' + (lab - 10));
      render_glyph(inst.input, canvas, glyph, cx, cy, 1, rng.uniform(0.7, 1.0));
    }
    quantize_all(inst.input);
    inst.labels = std::move(ids);
    data.push_back(std::move(inst));
  }
  return data;
}

Dataset gen_toy_detection(const DetectCfg& cfg) {
  if (cfg.max_objects > 5)
    throw std::invalid_argument("gen_toy_detection: max_objects must be <= 5");
  if (cfg.min_objects > cfg.max_objects)
    throw std::invalid_argument("gen_toy_detection: min_objects exceeds max_objects");
  const std::size_t canvas = kDetectCanvas;
  Dataset data;
  data.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng rng = Rng::derive(cfg.seed, i);
    Instance inst;
    inst.id = i;
    inst.w = inst.h = canvas;
    const std::size_t m = static_cast<std::size_t>(
        rng.uniform_int(static_cast<long long>(cfg.min_objects),
                        static_cast<long long>(cfg.max_objects)));

    std::vector<AABox> boxes;
    std::size_t total_tries = 0;
    while (boxes.size() < m) {
      if (++total_tries > 10000)
        throw GenerationError("gen_toy_detection: placement rejection exhausted");
      const double bw = static_cast<double>(rng.uniform_int(5, 10));
      const double bh = static_cast<double>(rng.uniform_int(5, 10));
      const double x1 = static_cast<double>(
          rng.uniform_int(0, static_cast<long long>(canvas) - static_cast<long long>(bw)));
      const double y1 = static_cast<double>(
          rng.uniform_int(0, static_cast<long long>(canvas) - static_cast<long long>(bh)));
      const AABox cand{x1, y1, x1 + bw, y1 + bh};
      bool ok = true;
      for (const AABox& b : boxes)
        if (iou(cand, b) > cfg.overlap_level + 1e-12) {
          ok = false;
          break;
        }
      if (ok) boxes.push_back(cand);
    }

    inst.input.resize(canvas * canvas);
    fill_noise(inst.input, rng);
    for (const AABox& b : boxes) {
      const double intensity = rng.uniform(0.5, 1.0);
      for (std::size_t y = static_cast<std::size_t>(b.y1);
           y < static_cast<std::size_t>(b.y2); ++y)
        for (std::size_t x = static_cast<std::size_t>(b.x1);
             x < static_cast<std::size_t>(b.x2); ++x)
          inst.input[y * canvas + x] = intensity;
    }
    quantize_all(inst.input);

    if (cfg.order == DetectOrder::sorted_x) {
      std::sort(boxes.begin(), boxes.end(), [](const AABox& a, const AABox& b) {
        if (a.x1 != b.x1) return a.x1 < b.x1;
        return a.y1 < b.y1;
      });
    } else if (cfg.order == DetectOrder::shuffled) {
      rng.shuffle(boxes);
    }
    for (const AABox& b : boxes) inst.elements.push_back({b, 0});
    data.push_back(std::move(inst));
  }
  return data;
}

Dataset gen_toy_detection(std::size_t n, std::size_t max_objects, double overlap_level,
                          std::uint64_t seed) {
  DetectCfg cfg;
  cfg.n = n;
  cfg.max_objects = max_objects;
  cfg.overlap_level = overlap_level;
  cfg.seed = seed;
  return gen_toy_detection(cfg);
}

Dataset gen_captcha(std::size_t n, std::size_t scene_digits, std::uint64_t seed) {
  if (scene_digits < 2 || scene_digits > 6)
    throw std::invalid_argument("gen_captcha: scene_digits must be in [2,6]");
  const std::size_t band_w = kCaptchaSceneW / scene_digits;
  Dataset data;
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, i);
    Instance inst;
    inst.id = i;
    inst.w = kCaptchaSceneW;
    inst.h = kCaptchaSceneH;

    const std::size_t k = static_cast<std::size_t>(
        rng.uniform_int(2, static_cast<long long>(scene_digits)));
    std::vector<int> values(k);
    int q = 0;
    bool unique = false;
    for (int tries = 0; tries < 10000 && !unique; ++tries) {
      for (int& v : values) v = static_cast<int>(rng.uniform_int(1, 9));
      q = static_cast<int>(rng.uniform_int(0, 9));
      unique = subset_sum_count(values, q) == 1;
    }
    if (!unique) throw GenerationError("gen_captcha: uniqueness rejection exhausted");

    std::vector<std::size_t> bands(scene_digits);
    std::iota(bands.begin(), bands.end(), 0);
    rng.shuffle(bands);
    bands.resize(k);
    std::sort(bands.begin(), bands.end());

    std::vector<double> scene(kCaptchaSceneW * kCaptchaSceneH);
    fill_noise(scene, rng);
    std::vector<AABox> boxes(k);
    for (std::size_t d = 0; d < k; ++d) {
      const std::size_t scale = static_cast<std::size_t>(rng.uniform_int(2, 3));
      const std::size_t gw = kGlyphW * scale, gh = kGlyphH * scale;
      const std::size_t x0 = bands[d] * band_w;
      const std::size_t x = x0 + static_cast<std::size_t>(rng.uniform_int(
                                     0, static_cast<long long>(band_w - gw)));
      const std::size_t y = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<long long>(kCaptchaSceneH - gh)));
      render_glyph(scene, kCaptchaSceneW, static_cast<char>('0' + values[d]), x, y, scale,
                   rng.uniform(0.7, 1.0));
      boxes[d] = {static_cast<double>(x), static_cast<double>(y),
                  static_cast<double>(x + gw), static_cast<double>(y + gh)};
    }

    std::vector<double> tile(kCaptchaQuerySide * kCaptchaQuerySide);
    fill_noise(tile, rng);
    render_glyph(tile, kCaptchaQuerySide, static_cast<char>('0' + q), 3, 1, 2,
                 rng.uniform(0.8, 1.0));

    // The unique solution subset, found by enumeration.
    std::uint32_t solution_mask = 0;
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
      int s = 0;
      for (std::size_t d = 0; d < k; ++d)
        if (mask & (1u << d)) s += values[d];
      if (s == q) {
        solution_mask = mask;
        break;
      }
    }
    for (std::size_t d = 0; d < k; ++d)
      if (solution_mask & (1u << d)) inst.elements.push_back({boxes[d], 0});

    quantize_all(scene);
    quantize_all(tile);
    inst.input = std::move(scene);
    inst.input.insert(inst.input.end(), tile.begin(), tile.end());
    inst.scene_values = std::move(values);
    inst.query = q;
    data.push_back(std::move(inst));
  }
  return data;
}

bool verify_unique_solution(const Instance& inst) {
  if (inst.query < 0)
    throw std::invalid_argument("verify_unique_solution: not a captcha instance");
  return subset_sum_count(inst.scene_values, inst.query) == 1;
}

GroundTruthSet instance_ground_truth(const Instance& inst, Task task) {
  GroundTruthSet gt;
  if (task == Task::tagging) {
    gt.labels = inst.labels;
    return gt;
  }
  const double W = static_cast<double>(inst.w), H = static_cast<double>(inst.h);
  for (const Element& e : inst.elements) {
    const CenterBox c = CenterBox::from_corners(e.box);
    gt.states.push_back({c.cx / W, c.cy / H, c.w / W, c.h / H});
    gt.labels.push_back(e.cls);
  }
  return gt;
}

AABox denormalize_box(const CenterBox& normalized, std::size_t canvas_w,
                      std::size_t canvas_h) {
  const double W = static_cast<double>(canvas_w), H = static_cast<double>(canvas_h);
  const CenterBox scaled{normalized.cx * W, normalized.cy * H, normalized.w * W,
                         normalized.h * H};
  return scaled.to_corners();
}

IdxFile load_idx(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_idx: cannot open " + path);
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
  auto need = [&](std::size_t offset, std::size_t count) {
    if (offset + count > raw.size())
      throw FormatError("load_idx: truncated file at byte offset " +
                        std::to_string(raw.size()) + ", needed " +
                        std::to_string(offset + count));
  };
  auto read_u32 = [&](std::size_t offset) {
    need(offset, 4);
    return (static_cast<std::uint32_t>(raw[offset]) << 24) |
           (static_cast<std::uint32_t>(raw[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(raw[offset + 2]) << 8) |
           static_cast<std::uint32_t>(raw[offset + 3]);
  };

  const std::uint32_t magic = read_u32(0);
  if ((magic >> 16) != 0 || ((magic >> 8) & 0xff) != 0x08)
    throw FormatError("load_idx: bad magic at byte offset 0");
  const std::size_t ndims = magic & 0xff;
  if (ndims == 0 || ndims > 3)
    throw FormatError("load_idx: unsupported dimension count at byte offset 3");

  IdxFile out;
  out.type_code = (magic >> 8) & 0xff;
  std::size_t offset = 4;
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    out.dims.push_back(read_u32(offset));
    total *= out.dims.back();
    offset += 4;
  }
  need(offset, total);
  out.bytes.assign(raw.begin() + static_cast<long>(offset),
                   raw.begin() + static_cast<long>(offset + total));
  return out;
}

std::vector<std::vector<double>> idx_to_images(const IdxFile& f) {
  if (f.dims.size() != 3)
    throw FormatError("idx_to_images: expected a 3-dimensional image file");
  const std::size_t n = f.dims[0], px = f.dims[1] * f.dims[2];
  std::vector<std::vector<double>> images(n, std::vector<double>(px));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < px; ++p)
      images[i][p] = static_cast<double>(f.bytes[i * px + p]) / 255.0;
  return images;
}

}  // namespace setpred
