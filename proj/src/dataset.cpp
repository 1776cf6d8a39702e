/*
 * Copyright 2026 SanitLab Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sanitlab/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sanitlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct GlyphParams {
  std::array<float, 3> bg;
  std::array<float, 3> fg;
  float cx, cy;       // jittered center
  float radius;       // scaled base radius
  float thickness;    // bar thickness for cross
  float period;       // stripe period
  float phase;        // stripe phase
  float cell;         // checker cell size
  float angle;        // gradient direction
  float chirality;    // diagonal stripe direction, +-1
};

GlyphParams draw_params(int size, Rng& rng) {
  GlyphParams p;
  for (int ch = 0; ch < 3; ++ch) p.bg[static_cast<std::size_t>(ch)] = rng.uniform(0.05f, 0.30f);
  for (int ch = 0; ch < 3; ++ch) p.fg[static_cast<std::size_t>(ch)] = rng.uniform(0.60f, 0.95f);
  const float s = static_cast<float>(size);
  p.cx = s / 2.0f + static_cast<float>(rng.uniform_int(-2, 2));
  p.cy = s / 2.0f + static_cast<float>(rng.uniform_int(-2, 2));
  const float scale = rng.uniform(0.85f, 1.10f);
  p.radius = 0.30f * s * scale;
  p.thickness = std::max(1.6f, 0.10f * s);
  p.period = std::max(3.0f, 0.17f * s);
  p.phase = rng.uniform(0.0f, p.period);
  p.cell = std::max(2.0f, 0.20f * s);
  p.angle = rng.uniform(0.0f, static_cast<float>(2.0 * kPi));
  p.chirality = rng.coin() ? 1.0f : -1.0f;
  return p;
}

float positive_mod(float v, float m) {
  float r = std::fmod(v, m);
  return r < 0.0f ? r + m : r;
}

// Foreground coverage in [0,1] for class cls at pixel (x, y).
float glyph_coverage(int cls, float x, float y, int size, const GlyphParams& p) {
  const float dx = x - p.cx;
  const float dy = y - p.cy;
  switch (cls) {
    case 0: {  // disk
      return dx * dx + dy * dy <= p.radius * p.radius ? 1.0f : 0.0f;
    }
    case 1: {  // ring
      const float d2 = dx * dx + dy * dy;
      const float inner = 0.55f * p.radius;
      return (d2 <= p.radius * p.radius && d2 >= inner * inner) ? 1.0f : 0.0f;
    }
    case 2: {  // cross
      const float half = p.thickness / 2.0f;
      const bool v = std::fabs(dx) <= half && std::fabs(dy) <= p.radius;
      const bool h = std::fabs(dy) <= half && std::fabs(dx) <= p.radius;
      return (v || h) ? 1.0f : 0.0f;
    }
    case 3:  // horizontal bars
      return positive_mod(y + p.phase, p.period) < p.period / 2.0f ? 1.0f : 0.0f;
    case 4:  // vertical bars
      return positive_mod(x + p.phase, p.period) < p.period / 2.0f ? 1.0f : 0.0f;
    case 5: {  // fine diagonal stripes; class identity is the frequency, not
               // the direction, because the train pipeline flips images
      const float fine = std::max(2.5f, 0.14f * static_cast<float>(size));
      return positive_mod((x + p.chirality * y) * 0.7071f + p.phase, fine) < fine / 2.0f ? 1.0f
                                                                                         : 0.0f;
    }
    case 6: {  // coarse diagonal stripes
      const float coarse = std::max(5.0f, 0.30f * static_cast<float>(size));
      return positive_mod((x + p.chirality * y) * 0.7071f + p.phase, coarse) < coarse / 2.0f
                 ? 1.0f
                 : 0.0f;
    }
    case 7: {  // triangle, apex up
      const float v = y - (p.cy - p.radius);
      if (v < 0.0f || v > 2.0f * p.radius) return 0.0f;
      const float halfwidth = (v / (2.0f * p.radius)) * p.radius;
      return std::fabs(dx) <= halfwidth ? 1.0f : 0.0f;
    }
    case 8: {  // checker
      const int qx = static_cast<int>(std::floor((x + p.phase) / p.cell));
      const int qy = static_cast<int>(std::floor((y + p.phase) / p.cell));
      return ((qx + qy) & 1) == 0 ? 1.0f : 0.0f;
    }
    case 9: {  // gradient
      const float proj = (dx * std::cos(p.angle) + dy * std::sin(p.angle)) /
                         (0.8f * static_cast<float>(size));
      return clamp01(proj + 0.5f);
    }
    default:
      throw std::invalid_argument("glyph_coverage: class out of range");
  }
}

Image render_glyph(int cls, int size, Rng& rng) {
  const GlyphParams p = draw_params(size, rng);
  Image img(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const float cov =
          glyph_coverage(cls, static_cast<float>(c), static_cast<float>(r), size, p);
      for (int ch = 0; ch < 3; ++ch) {
        const float base = p.bg[static_cast<std::size_t>(ch)] +
                           cov * (p.fg[static_cast<std::size_t>(ch)] -
                                  p.bg[static_cast<std::size_t>(ch)]);
        img.at(r, c, ch) = clamp01(base + rng.normal() * 0.02f);
      }
    }
  return img;
}

Dataset render_split(Rng rng, int n_per_class, int size) {
  Dataset ds;
  ds.num_classes = 10;
  ds.examples.reserve(static_cast<std::size_t>(n_per_class) * 10);
  for (int cls = 0; cls < 10; ++cls) {
    Rng cls_rng = rng.derive(static_cast<std::uint64_t>(cls));
    for (int i = 0; i < n_per_class; ++i) {
      LabeledExample ex;
      ex.image = render_glyph(cls, size, cls_rng);
      ex.label = cls;
      ex.original_label = cls;
      ex.poisoned = false;
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

// --- out-of-domain texture families ---

Image texture_sinusoid(int size, Rng& rng) {
  Image img(size, size);
  float a[3], fx[3], fy[3], ph[3];
  for (int k = 0; k < 3; ++k) {
    a[k] = rng.uniform(0.08f, 0.22f);
    fx[k] = rng.uniform(0.5f, 3.0f);
    fy[k] = rng.uniform(0.5f, 3.0f);
    ph[k] = rng.uniform(0.0f, static_cast<float>(2.0 * kPi));
  }
  float gain[3];
  for (int ch = 0; ch < 3; ++ch) gain[ch] = rng.uniform(0.6f, 1.4f);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      float v = 0.5f;
      for (int k = 0; k < 3; ++k)
        v += a[k] * std::sin(static_cast<float>(2.0 * kPi) *
                                 (fx[k] * c + fy[k] * r) / static_cast<float>(size) +
                             ph[k]);
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = clamp01(0.5f + (v - 0.5f) * gain[ch]);
    }
  return img;
}

Image texture_blurred_noise(int size, Rng& rng) {
  Image img(size, size);
  for (float& v : img.pixels) v = rng.next_float();
  // two 3x3 box passes
  for (int pass = 0; pass < 2; ++pass) {
    Image tmp = img;
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c)
        for (int ch = 0; ch < 3; ++ch) {
          float s = 0.0f;
          int cnt = 0;
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              const int rr = r + dr, cc = c + dc;
              if (rr < 0 || rr >= size || cc < 0 || cc >= size) continue;
              s += tmp.at(rr, cc, ch);
              ++cnt;
            }
          img.at(r, c, ch) = s / static_cast<float>(cnt);
        }
  }
  return img;
}

Image texture_rectangles(int size, Rng& rng) {
  Image img(size, size);
  float bg[3];
  for (int ch = 0; ch < 3; ++ch) bg[ch] = rng.next_float();
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = bg[ch];
  const int rects = rng.uniform_int(4, 7);
  for (int k = 0; k < rects; ++k) {
    int r0 = rng.uniform_int(0, size - 2), c0 = rng.uniform_int(0, size - 2);
    int r1 = rng.uniform_int(r0 + 1, size - 1), c1 = rng.uniform_int(c0 + 1, size - 1);
    float col[3];
    for (int ch = 0; ch < 3; ++ch) col[ch] = rng.next_float();
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = col[ch];
  }
  return img;
}

Image texture_plaid(int size, Rng& rng) {
  Image img(size, size);
  const float px = rng.uniform(2.5f, 6.0f), py = rng.uniform(2.5f, 6.0f);
  const float phx = rng.uniform(0.0f, px), phy = rng.uniform(0.0f, py);
  float ca[3], cb[3];
  for (int ch = 0; ch < 3; ++ch) {
    ca[ch] = rng.next_float();
    cb[ch] = rng.next_float();
  }
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const float sx = positive_mod(c + phx, px) < px / 2.0f ? 1.0f : 0.0f;
      const float sy = positive_mod(r + phy, py) < py / 2.0f ? 1.0f : 0.0f;
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) = clamp01(0.5f * (sx * ca[ch] + sy * cb[ch]) + 0.15f);
    }
  return img;
}

}  // namespace

const std::vector<std::string>& glyph_class_names() {
  static const std::vector<std::string> names = {"disk",     "ring",   "cross",    "hbars",
                                                 "vbars",    "dfine",  "dcoarse",    "triangle",
                                                 "checker",  "gradient"};
  return names;
}

GlyphSplits gen_glyphs(std::uint64_t seed, int n_per_class, int size, int test_per_class) {
  if (size < 16) throw std::invalid_argument("gen_glyphs: size must be >= 16");
  if (n_per_class <= 0) throw std::invalid_argument("gen_glyphs: n_per_class must be > 0");
  if (test_per_class < 0) test_per_class = std::max(1, n_per_class / 5);
  Rng master(seed);
  GlyphSplits splits;
  splits.train = render_split(master.derive("glyphs-train"), n_per_class, size);
  splits.test = render_split(master.derive("glyphs-test"), test_per_class, size);
  return splits;
}

std::vector<Image> gen_pool(PoolKind kind, std::uint64_t seed, int n, int size) {
  if (n <= 0) throw std::invalid_argument("gen_pool: n must be > 0");
  if (size < 16) throw std::invalid_argument("gen_pool: size must be >= 16");
  Rng master(seed);
  std::vector<Image> pool;
  pool.reserve(static_cast<std::size_t>(n));
  if (kind == PoolKind::in_domain) {
    Rng rng = master.derive("pool-in-domain");
    for (int i = 0; i < n; ++i) {
      const int cls = rng.uniform_int(0, 9);
      pool.push_back(render_glyph(cls, size, rng));
    }
  } else {
    Rng rng = master.derive("pool-out-of-domain");
    for (int i = 0; i < n; ++i) {
      switch (rng.uniform_int(0, 3)) {
        case 0: pool.push_back(texture_sinusoid(size, rng)); break;
        case 1: pool.push_back(texture_blurred_noise(size, rng)); break;
        case 2: pool.push_back(texture_rectangles(size, rng)); break;
        default: pool.push_back(texture_plaid(size, rng)); break;
      }
    }
  }
  return pool;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

void write_bytes(std::ofstream& f, const void* p, std::size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ofstream& f, std::uint32_t v) { write_bytes(f, &v, 4); }
void write_u16(std::ofstream& f, std::uint16_t v) { write_bytes(f, &v, 2); }
void write_u8(std::ofstream& f, std::uint8_t v) { write_bytes(f, &v, 1); }

void read_bytes(std::ifstream& f, void* p, std::size_t n, const char* what) {
  f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (f.gcount() != static_cast<std::streamsize>(n))
    throw std::runtime_error(std::string("dataset file truncated while reading ") + what);
}

std::uint32_t read_u32(std::ifstream& f, const char* what) {
  std::uint32_t v;
  read_bytes(f, &v, 4, what);
  return v;
}
std::uint16_t read_u16(std::ifstream& f, const char* what) {
  std::uint16_t v;
  read_bytes(f, &v, 2, what);
  return v;
}
std::uint8_t read_u8(std::ifstream& f, const char* what) {
  std::uint8_t v;
  read_bytes(f, &v, 1, what);
  return v;
}

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; byte-swapping writes are not implemented");

constexpr std::uint32_t kDatasetVersion = 1;

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_dataset: cannot open " + path);
  write_bytes(f, "SNDT", 4);
  write_u32(f, kDatasetVersion);
  write_u32(f, static_cast<std::uint32_t>(ds.size()));
  write_u16(f, static_cast<std::uint16_t>(ds.height()));
  write_u16(f, static_cast<std::uint16_t>(ds.width()));
  write_u8(f, 3);
  for (const auto& ex : ds.examples) {
    write_u8(f, static_cast<std::uint8_t>(ex.label));
    write_u8(f, ex.poisoned ? 1 : 0);
    write_u8(f, static_cast<std::uint8_t>(ex.original_label));
    write_bytes(f, ex.image.pixels.data(), ex.image.pixels.size() * sizeof(float));
  }
  if (!f) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_dataset: cannot open " + path);
  char magic[4];
  read_bytes(f, magic, 4, "magic");
  if (std::memcmp(magic, "SNDT", 4) != 0)
    throw std::runtime_error("load_dataset: bad magic in " + path);
  const std::uint32_t version = read_u32(f, "version");
  if (version != kDatasetVersion)
    throw std::runtime_error("load_dataset: unsupported version " + std::to_string(version));
  const std::uint32_t count = read_u32(f, "count");
  const int h = read_u16(f, "height");
  const int w = read_u16(f, "width");
  const int c = read_u8(f, "channels");
  if (c != 3) throw std::runtime_error("load_dataset: expected 3 channels");
  Dataset ds;
  ds.examples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    LabeledExample ex;
    ex.label = read_u8(f, "label");
    ex.poisoned = read_u8(f, "poisoned") != 0;
    ex.original_label = read_u8(f, "original_label");
    ex.image = Image(h, w);
    read_bytes(f, ex.image.pixels.data(), ex.image.pixels.size() * sizeof(float), "pixels");
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

void save_pool(const std::vector<Image>& pool, int size, const std::string& path) {
  Dataset ds;
  ds.examples.reserve(pool.size());
  for (const auto& img : pool) {
    if (img.height != size || img.width != size)
      throw std::invalid_argument("save_pool: inconsistent image size");
    LabeledExample ex;
    ex.image = img;
    ds.examples.push_back(std::move(ex));
  }
  save_dataset(ds, path);
}

std::vector<Image> load_pool(const std::string& path) {
  Dataset ds = load_dataset(path);
  std::vector<Image> pool;
  pool.reserve(ds.size());
  for (auto& ex : ds.examples) pool.push_back(std::move(ex.image));
  return pool;
}

Dataset load_cifar_binary(const std::string& path) {
  constexpr std::size_t kRecord = 3073;
  constexpr int kSide = 32;
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("load_cifar_binary: cannot open " + path);
  const std::streamoff len = f.tellg();
  if (len % static_cast<std::streamoff>(kRecord) != 0)
    throw std::runtime_error("load_cifar_binary: file length " + std::to_string(len) +
                             " is not a multiple of 3073 (stray bytes at offset " +
                             std::to_string(len - len % static_cast<std::streamoff>(kRecord)) +
                             ")");
  f.seekg(0);
  const std::size_t count = static_cast<std::size_t>(len) / kRecord;
  Dataset ds;
  ds.examples.reserve(count);
  std::vector<unsigned char> rec(kRecord);
  for (std::size_t i = 0; i < count; ++i) {
    f.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(kRecord));
    if (f.gcount() != static_cast<std::streamsize>(kRecord))
      throw std::runtime_error("load_cifar_binary: truncated record at offset " +
                               std::to_string(i * kRecord));
    LabeledExample ex;
    ex.label = rec[0];
    if (ex.label >= 10)
      throw std::runtime_error("load_cifar_binary: label byte " + std::to_string(ex.label) +
                               " out of range at offset " + std::to_string(i * kRecord));
    ex.original_label = ex.label;
    ex.image = Image(kSide, kSide);
    for (int ch = 0; ch < 3; ++ch)
      for (int r = 0; r < kSide; ++r)
        for (int c = 0; c < kSide; ++c)
          ex.image.at(r, c, ch) =
              static_cast<float>(rec[1 + (static_cast<std::size_t>(ch) * kSide + r) * kSide + c]) /
              255.0f;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> stratified_sample(const Dataset& ds, double fraction, Rng rng) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("stratified_sample: fraction must be in [0,1]");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(i);
  std::vector<std::size_t> out;
  for (int cls = 0; cls < ds.num_classes; ++cls) {
    auto& idxs = by_class[static_cast<std::size_t>(cls)];
    const std::size_t take =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idxs.size())));
    Rng cls_rng = rng.derive(static_cast<std::uint64_t>(cls));
    auto picks = cls_rng.sample_without_replacement(idxs.size(), take);
    for (auto k : picks) out.push_back(idxs[k]);
  }
  return out;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.examples.reserve(indices.size());
  for (auto i : indices) out.examples.push_back(ds.examples.at(i));
  return out;
}

Normalizer compute_normalizer(const Dataset& ds) {
  if (ds.size() == 0) throw std::invalid_argument("compute_normalizer: empty dataset");
  double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
  std::size_t count = 0;
  for (const auto& ex : ds.examples) {
    const auto& px = ex.image.pixels;
    for (std::size_t i = 0; i < px.size(); i += 3)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = px[i + static_cast<std::size_t>(ch)];
        sum[ch] += v;
        sq[ch] += v * v;
      }
    count += px.size() / 3;
  }
  Normalizer norm;
  for (int ch = 0; ch < 3; ++ch) {
    const double mean = sum[ch] / static_cast<double>(count);
    double var = sq[ch] / static_cast<double>(count) - mean * mean;
    if (var < 1e-8) var = 1e-8;
    norm.mean[static_cast<std::size_t>(ch)] = static_cast<float>(mean);
    norm.stdev[static_cast<std::size_t>(ch)] = static_cast<float>(std::sqrt(var));
  }
  return norm;
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix_u64 = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix_u64(ds.size());
  mix_u64(static_cast<std::uint64_t>(ds.num_classes));
  for (const auto& ex : ds.examples) {
    mix_u64(static_cast<std::uint64_t>(ex.label));
    mix_u64(static_cast<std::uint64_t>(ex.original_label));
    mix_u64(ex.poisoned ? 1 : 0);
    h = image_fingerprint(ex.image, h);
  }
  return h;
}

}  // namespace sanitlab
