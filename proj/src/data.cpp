// Copyright 2026 The advgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "advgen/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "advgen/image_io.hpp"

namespace advgen::data {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kCsvHeader = "filename,x_min,y_min,x_max,y_max";

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::map<std::string, std::vector<Box>> read_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw DataError("annotation file " + path.string() + " must start with header '" +
                    std::string(kCsvHeader) + "'");
  }
  std::map<std::string, std::vector<Box>> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 5) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    Box box;
    try {
      box = {std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3]),
             std::stod(fields[4])};
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric box");
    }
    if (!(box.x_min < box.x_max && box.y_min < box.y_max)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": degenerate box");
    }
    out[fields[0]].push_back(box);
  }
  return out;
}

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --- synthetic glyph rendering --------------------------------------------

using Rgb = std::array<double, 3>;

class Canvas {
 public:
  Canvas(int h, int w) : h_(h), w_(w), px_(static_cast<size_t>(h) * w) {}
  Rgb& at(int y, int x) { return px_[static_cast<size_t>(y) * w_ + x]; }
  int height() const { return h_; }
  int width() const { return w_; }

  template <typename Inside, typename Shade>
  void paint(double x0, double y0, double x1, double y1, Inside&& inside, Shade&& shade) {
    const int ys = std::max(0, static_cast<int>(std::floor(y0)));
    const int ye = std::min(h_ - 1, static_cast<int>(std::ceil(y1)));
    const int xs = std::max(0, static_cast<int>(std::floor(x0)));
    const int xe = std::min(w_ - 1, static_cast<int>(std::ceil(x1)));
    for (int y = ys; y <= ye; ++y) {
      for (int x = xs; x <= xe; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        if (inside(px, py)) at(y, x) = shade(px, py);
      }
    }
  }

  void ellipse(double cx, double cy, double rx, double ry, const Rgb& color) {
    paint(cx - rx, cy - ry, cx + rx, cy + ry,
          [&](double x, double y) {
            const double dx = (x - cx) / rx, dy = (y - cy) / ry;
            return dx * dx + dy * dy <= 1.0;
          },
          [&](double, double) { return color; });
  }

  RawImage to_raw() const {
    RawImage img(h_, w_);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const Rgb& c = px_[static_cast<size_t>(y) * w_ + x];
        for (int k = 0; k < 3; ++k) {
          img.at(y, x, k) = static_cast<std::uint8_t>(std::clamp(std::lround(c[k]), 0L, 255L));
        }
      }
    }
    return img;
  }

 private:
  int h_, w_;
  std::vector<Rgb> px_;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

void paint_background(Canvas& canvas, std::mt19937_64& rng) {
  const Rgb base = {uniform(rng, 30, 100), uniform(rng, 30, 100), uniform(rng, 30, 100)};
  const double angle = uniform(rng, 0, 2 * std::numbers::pi);
  const double gx = std::cos(angle), gy = std::sin(angle);
  const double amp = uniform(rng, 10, 35);
  struct Wave {
    double fx, fy, phase, amp;
    int channel;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves) {
    w = {uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), uniform(rng, 0, 6.283),
         uniform(rng, 4, 12), uniform_int(rng, 0, 2)};
  }
  const double h = canvas.height(), wdt = canvas.width();
  for (int y = 0; y < canvas.height(); ++y) {
    for (int x = 0; x < canvas.width(); ++x) {
      const double t = ((x / wdt - 0.5) * gx + (y / h - 0.5) * gy) * amp;
      Rgb c = {base[0] + t, base[1] + t, base[2] + t};
      for (const auto& w : waves) c[w.channel] += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      for (double& v : c) v += uniform(rng, -8, 8);
      canvas.at(y, x) = c;
    }
  }
}

Rgb saturated_color(std::mt19937_64& rng) {
  Rgb c = {uniform(rng, 0, 70), uniform(rng, 0, 70), uniform(rng, 0, 70)};
  c[static_cast<size_t>(uniform_int(rng, 0, 2))] = uniform(rng, 150, 240);
  return c;
}

void paint_distractor(Canvas& canvas, const Box& b, std::mt19937_64& rng) {
  const Rgb color = saturated_color(rng);
  const double cx = (b.x_min + b.x_max) / 2, cy = (b.y_min + b.y_max) / 2;
  switch (uniform_int(rng, 0, 2)) {
    case 0:  // rectangle
      canvas.paint(b.x_min, b.y_min, b.x_max, b.y_max,
                   [&](double x, double y) {
                     return x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max;
                   },
                   [&](double, double) { return color; });
      break;
    case 1:  // disc
      canvas.ellipse(cx, cy, b.width() / 2, b.height() / 2, color);
      break;
    default:  // triangle pointing up
      canvas.paint(b.x_min, b.y_min, b.x_max, b.y_max,
                   [&](double x, double y) {
                     const double t = (y - b.y_min) / b.height();
                     return t >= 0 && t <= 1 && std::abs(x - cx) <= t * b.width() / 2;
                   },
                   [&](double, double) { return color; });
      break;
  }
}

void paint_face(Canvas& canvas, const Box& b, std::mt19937_64& rng) {
  const double w = b.width(), h = b.height();
  const double cx = (b.x_min + b.x_max) / 2, cy = (b.y_min + b.y_max) / 2;
  const double r = uniform(rng, 185, 245);
  const Rgb skin = {r, r * uniform(rng, 0.70, 0.85), r * uniform(rng, 0.55, 0.72)};
  const double shade = uniform(rng, 10, 30);
  canvas.paint(b.x_min, b.y_min, b.x_max, b.y_max,
               [&](double x, double y) {
                 const double dx = (x - cx) / (w / 2), dy = (y - cy) / (h / 2);
                 return dx * dx + dy * dy <= 1.0;
               },
               [&](double, double y) {
                 const double t = (y - cy) / h;  // darker towards the chin
                 return Rgb{skin[0] - shade * t, skin[1] - shade * t, skin[2] - shade * t};
               });

  const Rgb eye = {uniform(rng, 20, 60), uniform(rng, 20, 50), uniform(rng, 20, 50)};
  const double eye_dx = w * uniform(rng, 0.18, 0.22);
  const double eye_y = cy - h * uniform(rng, 0.08, 0.14);
  const double erx = w * 0.09, ery = h * 0.06;
  canvas.ellipse(cx - eye_dx, eye_y, erx, ery, eye);
  canvas.ellipse(cx + eye_dx, eye_y, erx, ery, eye);

  const Rgb lips = {uniform(rng, 110, 160), uniform(rng, 20, 50), uniform(rng, 30, 60)};
  const double my = cy + h * uniform(rng, 0.14, 0.2);
  const double mrx = w * uniform(rng, 0.2, 0.26), mry = h * 0.12;
  canvas.paint(cx - mrx, my, cx + mrx, my + mry,
               [&](double x, double y) {
                 const double dx = (x - cx) / mrx, dy = (y - my) / mry;
                 const double d = dx * dx + dy * dy;
                 return y >= my && d <= 1.0 && d >= 0.45;
               },
               [&](double, double) { return lips; });
}

bool overlaps_any(const Box& b, const std::vector<Box>& placed, double gap) {
  for (const auto& p : placed) {
    if (b.x_min < p.x_max + gap && p.x_min < b.x_max + gap && b.y_min < p.y_max + gap &&
        p.y_min < b.y_max + gap) {
      return true;
    }
  }
  return false;
}

}  // namespace

size_t ImageSet::box_count() const {
  size_t n = 0;
  for (const auto& item : items) n += item.boxes.size();
  return n;
}

ImageSet load_folder(const fs::path& dir, const fs::path& annotations) {
  if (!fs::is_directory(dir)) throw DataError("image directory " + dir.string() + " not found");
  auto boxes = read_annotations(annotations);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  if (files.empty()) throw DataError("no images found in " + dir.string());

  ImageSet set;
  set.split_name = dir.filename().string();
  for (const auto& file : files) {
    const std::string name = file.filename().string();
    ImageItem item;
    item.name = name;
    try {
      item.image = io::read_image(file);
    } catch (const std::exception& e) {
      set.warnings.push_back("skipped " + name + ": " + e.what());
      continue;
    }
    if (auto it = boxes.find(name); it != boxes.end()) {
      for (const auto& b : it->second) {
        if (b.x_min < 0 || b.y_min < 0 || b.x_max > item.image.width() ||
            b.y_max > item.image.height()) {
          throw DataError("box for " + name + " lies outside the image bounds");
        }
      }
      item.boxes = it->second;
    }
    set.items.push_back(std::move(item));
  }
  if (set.items.empty()) throw DataError("no decodable images found in " + dir.string());
  return set;
}

void export_folder(const ImageSet& set, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << kCsvHeader << '\n';
  for (size_t i = 0; i < set.items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05zu.png", i);
    io::write_png(dir / name, set.items[i].image);
    for (const auto& b : set.items[i].boxes) {
      csv << name << ',' << format_coord(b.x_min) << ',' << format_coord(b.y_min) << ','
          << format_coord(b.x_max) << ',' << format_coord(b.y_max) << '\n';
    }
  }
  io::write_file(dir / "annotations.csv", csv.str());
}

ImageSet synth_faces(int n, Size canvas, std::uint64_t seed, const SynthOptions& options) {
  if (n < 1) throw std::invalid_argument("synth_faces needs n >= 1");
  if (options.min_faces < 0 || options.max_faces < options.min_faces || options.max_faces > 3) {
    throw std::invalid_argument("synth_faces face count range must lie within [0, 3]");
  }
  const int side = std::min(canvas.height, canvas.width);
  if (side < 64) {
    throw std::invalid_argument("canvas " + std::to_string(canvas.height) + "x" +
                                std::to_string(canvas.width) +
                                " too small to place a face glyph (need at least 64x64)");
  }

  ImageSet set;
  set.split_name = "synth";
  set.seed = seed;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    Canvas img(canvas.height, canvas.width);
    paint_background(img, rng);

    std::vector<Box> faces;
    const int want = uniform_int(rng, options.min_faces, options.max_faces);
    for (int f = 0; f < want; ++f) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double w = std::round(side * uniform(rng, 0.18, 0.36));
        const double h = std::round(w * uniform(rng, 1.15, 1.3));
        if (w >= canvas.width - 2 || h >= canvas.height - 2) continue;
        const double x0 = std::floor(uniform(rng, 1, canvas.width - w - 1));
        const double y0 = std::floor(uniform(rng, 1, canvas.height - h - 1));
        const Box b{x0, y0, x0 + w, y0 + h};
        if (!overlaps_any(b, faces, 2.0)) {
          faces.push_back(b);
          break;
        }
      }
    }
    if (static_cast<int>(faces.size()) < std::min(want, 1)) {
      throw std::invalid_argument("canvas too small to place a face glyph");
    }

    std::vector<Box> occupied = faces;
    const int distractors = uniform_int(rng, 0, options.max_distractors);
    for (int d = 0; d < distractors; ++d) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const double w = std::round(side * uniform(rng, 0.12, 0.3));
        const double h = std::round(w * uniform(rng, 0.6, 1.4));
        if (w >= canvas.width - 2 || h >= canvas.height - 2) continue;
        const double x0 = std::floor(uniform(rng, 1, canvas.width - w - 1));
        const double y0 = std::floor(uniform(rng, 1, canvas.height - h - 1));
        const Box b{x0, y0, x0 + w, y0 + h};
        if (!overlaps_any(b, occupied, 2.0)) {
          paint_distractor(img, b, rng);
          occupied.push_back(b);
          break;
        }
      }
    }
    for (const auto& b : faces) paint_face(img, b, rng);

    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.png", i);
    set.items.push_back({name, img.to_raw(), faces});
  }
  return set;
}

ImageTensor preprocess(const RawImage& img, Size target) {
  if (target.height < RawImage::kMinSide || target.width < RawImage::kMinSide) {
    throw std::invalid_argument("preprocess target must be at least 16x16");
  }
  const double sy = static_cast<double>(img.height()) / target.height;
  const double sx = static_cast<double>(img.width()) / target.width;
  nn::Tensor out({3, target.height, target.width});
  for (int y = 0; y < target.height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ly = fy - y0;
    for (int x = 0; x < target.width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double lx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        // a + (b - a) * t keeps constant regions exact.
        const double top = img.at(y0, x0, c) + (img.at(y0, x1, c) - img.at(y0, x0, c)) * lx;
        const double bot = img.at(y1, x0, c) + (img.at(y1, x1, c) - img.at(y1, x0, c)) * lx;
        const double v = top + (bot - top) * ly;
        out.at(c, y, x) = std::clamp(v / 127.5 - 1.0, -1.0, 1.0);
      }
    }
  }
  return ImageTensor::from_tensor(std::move(out));
}

std::vector<Box> scale_boxes(const std::vector<Box>& boxes, Size from, Size to) {
  const double sx = static_cast<double>(to.width) / from.width;
  const double sy = static_cast<double>(to.height) / from.height;
  std::vector<Box> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back({b.x_min * sx, b.y_min * sy, b.x_max * sx, b.y_max * sy});
  return out;
}

std::vector<Sample> prepare(const ImageSet& set, Size target) {
  std::vector<Sample> out;
  out.reserve(set.items.size());
  for (const auto& item : set.items) {
    const Size from{item.image.height(), item.image.width()};
    out.push_back({item.name, preprocess(item.image, target), scale_boxes(item.boxes, from, target)});
  }
  return out;
}

RawImage to_raw(const ImageTensor& img) {
  RawImage raw(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const long v = std::lround((img.at(y, x, c) + 1.0) * 127.5);
        raw.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
      }
    }
  }
  return raw;
}

ImageTensor from_raw(const RawImage& img) {
  return preprocess(img, {img.height(), img.width()});
}

ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality) {
  if (quality < 1 || quality > 100) {
    throw std::invalid_argument("JPEG quality " + std::to_string(quality) + " outside [1, 100]");
  }
  const auto subsampling = quality >= 90 ? io::ChromaSubsampling::k444 : io::ChromaSubsampling::k420;
  std::string encoded;
  try {
    encoded = io::encode_jpeg(to_raw(img), quality, subsampling);
  } catch (const io::CodecError& e) {
    throw DataError("JPEG encoder failed at quality " + std::to_string(quality) + ": " + e.what());
  }
  return from_raw(io::decode_jpeg(encoded));
}

}  // namespace advgen::data
