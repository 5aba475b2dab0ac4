#include "qptv2/synthbench.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "qptv2/error.hpp"
#include "qptv2/random.hpp"

namespace qptv2 {

namespace {

struct Shape {
  bool circle = true;
  double cy = 0, cx = 0, ry = 0, rx = 0;
  Eigen::Vector3d color;
  double freq = 0, angle = 0, phase = 0, amp = 0;

  bool contains(double y, double x) const {
    const double dy = (y - cy) / ry, dx = (x - cx) / rx;
    return circle ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
  }
};

std::string item_name(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%05llu", static_cast<unsigned long long>(index));
  return buf;
}

SynthSample render(const SynthSpec& spec, std::uint64_t index, int height, int width) {
  Rng rng(derive_seed(spec.seed, {index, 1}));
  SynthSample s;
  s.image = Image(height, width, ColorSpace::RGB);
  s.foreground = Mask::Zero(height, width);

  Eigen::Vector3d c0, c1;
  for (int c = 0; c < 3; ++c) {
    c0[c] = uniform(rng, 0.1, 0.9);
    c1[c] = uniform(rng, 0.1, 0.9);
  }
  const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double span = std::abs(ux) * (width - 1) + std::abs(uy) * (height - 1);
  const double offset = std::min(0.0, ux * (width - 1)) + std::min(0.0, uy * (height - 1));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = span > 0 ? (ux * x + uy * y - offset) / span : 0.0;
      for (int c = 0; c < 3; ++c) s.image(y, x, c) = c0[c] + (c1[c] - c0[c]) * t;
    }
  }

  s.shapes = shape_count(spec);
  const double side = std::min(height, width);
  for (int k = 0; k < s.shapes; ++k) {
    Shape sh;
    sh.circle = std::bernoulli_distribution(0.5)(rng);
    sh.cy = uniform(rng, 0.0, height - 1.0);
    sh.cx = uniform(rng, 0.0, width - 1.0);
    sh.ry = uniform(rng, side / 12.0, side / 4.0);
    sh.rx = uniform(rng, side / 12.0, side / 4.0);
    for (int c = 0; c < 3; ++c) sh.color[c] = uniform(rng, 0.15, 0.85);
    sh.freq = uniform(rng, 0.08, 0.3);
    sh.angle = uniform(rng, 0.0, std::numbers::pi);
    sh.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    sh.amp = uniform(rng, 0.15, 0.4);
    const double fy = std::sin(sh.angle), fx = std::cos(sh.angle);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!sh.contains(y, x)) continue;
        const double wave = 1.0 + sh.amp * std::sin(2.0 * std::numbers::pi * sh.freq * (fx * x + fy * y) + sh.phase);
        for (int c = 0; c < 3; ++c) s.image(y, x, c) = std::clamp(sh.color[c] * wave, 0.0, 1.0);
        s.foreground(y, x) = 1;
      }
    }
  }
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_images < 0) throw ConfigError("synth.n_images must be >= 0");
  if (size < 8) throw ConfigError("synth.size must be >= 8");
  if (!(detail_level >= 0.0 && detail_level <= 1.0)) throw ConfigError("synth.detail_level must lie in [0, 1]");
  if (!(severity_range.lo >= 0.0 && severity_range.lo <= severity_range.hi && severity_range.hi <= 1.0)) {
    throw ConfigError("synth.severity range must satisfy 0 <= lo <= hi <= 1");
  }
  if (max_shapes < 0) throw ConfigError("synth.max_shapes must be >= 0");
  if (!(blur_max > 0.0 && blur_max <= 5.0)) throw ConfigError("synth.blur_max must lie in (0, 5]");
  if (!(noise_max >= 0.0 && noise_max <= 0.2)) throw ConfigError("synth.noise_max must lie in [0, 0.2]");
  if (!(observer_noise >= 0.0)) throw ConfigError("synth.observer_noise must be >= 0");
}

int shape_count(const SynthSpec& spec) {
  return static_cast<int>(std::ceil(spec.detail_level * spec.max_shapes - 1e-9));
}

SynthSample gen_texture_sample(const SynthSpec& spec, std::uint64_t index) {
  spec.validate();
  return render(spec, index, spec.size, spec.size);
}

Image gen_texture(const SynthSpec& spec, std::uint64_t index) { return gen_texture_sample(spec, index).image; }

GradedImage grade_quality(const Image& img, double severity, const SynthSpec& spec, std::uint64_t noise_seed) {
  if (!(severity >= 0.0 && severity <= 1.0)) throw ParameterError("grade_quality: severity must lie in [0, 1]");
  GradedImage out{img, mos_map(severity)};
  if (severity == 0.0) return out;
  Rng rng(noise_seed);
  out.image = apply_noise(out.image, severity * spec.noise_max, rng);
  out.image = apply_blur(out.image, severity * spec.blur_max);
  return out;
}

double sample_severity(const SynthSpec& spec, std::uint64_t index) {
  Rng rng(derive_seed(spec.seed, {index, 2}));
  return uniform(rng, spec.severity_range.lo, spec.severity_range.hi);
}

std::filesystem::path build_manifest(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "masks");
  std::vector<CurationRecord> records;
  for (int i = 0; i < spec.n_images; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const SynthSample sample = gen_texture_sample(spec, idx);
    const double severity = sample_severity(spec, idx);
    const GradedImage graded = grade_quality(sample.image, severity, spec, derive_seed(spec.seed, {idx, 3}));
    Rng label_rng(derive_seed(spec.seed, {idx, 4}));
    const double noise = spec.observer_noise > 0 ? std::normal_distribution<double>(0.0, spec.observer_noise)(label_rng) : 0.0;

    const std::string name = item_name(idx);
    CurationRecord r;
    r.id = name;
    r.path = std::filesystem::path("images") / (name + ".ppm");
    r.fg_mask_path = std::filesystem::path("masks") / (name + ".pgm");
    r.width = spec.size;
    r.height = spec.size;
    r.object_count = sample.shapes;
    r.fc = foreground_coverage(sample.foreground);
    r.mos = graded.mos + noise;
    r.severity = severity;
    write_image(out_dir / r.path, graded.image, 16);
    write_mask(out_dir / *r.fg_mask_path, sample.foreground);
    records.push_back(std::move(r));
  }
  const std::filesystem::path manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

std::vector<Image> gen_video(const SynthSpec& spec, std::uint64_t index, int frames, double severity) {
  spec.validate();
  if (frames < 1) throw ParameterError("gen_video: frames must be >= 1");
  const SynthSample big = render(spec, index, spec.size + frames - 1, spec.size + frames - 1);
  std::vector<Image> out;
  for (int t = 0; t < frames; ++t) {
    const Image frame = big.image.crop(t, t, spec.size, spec.size);
    out.push_back(grade_quality(frame, severity, spec, derive_seed(spec.seed, {index, 5, std::uint64_t(t)})).image);
  }
  return out;
}

}  // namespace qptv2
